#pragma once

#include <cmath>

namespace qbdmanet {

/// Network shape shared by the analytic model and the simulator. Everything
/// except the arrival rate; capacity depends only on this part.
///
/// Build instances with build_topology(); alpha and radio_range are derived
/// and never set by hand.
struct Topology {
    int n = 0;              ///< number of nodes (>= 4)
    int m = 0;              ///< cells per side of the unit torus (>= 3)
    double q = 0.0;         ///< packet-broadcast probability, 0 < q < 1
    double delta = 1.0;     ///< protocol-model guard factor, >= 0
    int alpha = 0;          ///< equivalent-class spacing in cells
    double radio_range = 0; ///< sqrt(8)/m in torus units

    int cells() const { return m * m; }
    int equivalent_classes() const { return alpha * alpha; }
};

/// Topology plus the per-source Bernoulli arrival rate (packets/slot).
struct NetworkParams : Topology {
    double lambda = 0.0;
};

/// Equivalent-class spacing: min{ceil((1+delta)*sqrt(8) + 2), m}.
int ec_spacing(int m, double delta);

/// Validates (n, m, q, delta) and derives alpha and the radio range.
/// Throws ParamError naming the offending field and its bound.
Topology build_topology(int n, int m, double q, double delta = 1.0);

/// build_topology() plus validation of 0 < lambda < 1.
NetworkParams build_params(int n, int m, double q, double delta, double lambda);

/// Attaches an arrival rate to an already validated topology.
NetworkParams with_lambda(const Topology& topo, double lambda);

}  // namespace qbdmanet
