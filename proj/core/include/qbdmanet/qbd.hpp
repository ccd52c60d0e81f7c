#pragma once

#include <Eigen/Dense>

#include "qbdmanet/params.hpp"
#include "qbdmanet/probabilities.hpp"

namespace qbdmanet {

/// Transition blocks of the network-queue QBD. Level l counts packets that
/// were distributed but not yet received; the phase (1..n-1, stored 0-based)
/// is the copy count of the packet the destination is requesting.
///
///   Q = | B1  B0             |
///       | B2  A1  A0         |
///       |     A2  A1  A0     |
///       |         ...        |
struct QbdBlocks {
    Eigen::RowVectorXd v0;  ///< copy-count distribution of a freshly requested packet
    Eigen::MatrixXd A0;     ///< (l,j) -> (l+1,j)
    Eigen::MatrixXd A1;     ///< (l,j) -> (l,i)
    Eigen::MatrixXd A2;     ///< (l,j) -> (l-1,i), l >= 2
    Eigen::RowVectorXd B0;  ///< (0,0) -> (1,j)
    double B1 = 0.0;        ///< (0,0) -> (0,0)
    Eigen::VectorXd B2;     ///< (1,j) -> (0,0)

    Eigen::Index phases() const { return v0.size(); }
};

/// Largest absolute deviation from 1 over the row sums of [B1 B0], [B2 A1 A0]
/// and [A2 A1 A0].
double stochasticity_residual(const QbdBlocks& blocks);

/// Throws NumericalError when the resulting rows deviate from stochastic by
/// more than 1e-8 (that would indicate a bad probability table).
QbdBlocks build_blocks(const ProbabilityTable& table);

struct Capacity {
    double mu = 0.0;    ///< min(mu_s, mu_d)
    double mu_s = 0.0;  ///< source-queue service rate
    double mu_d = 0.0;  ///< network-queue service rate
};

/// Per-node throughput capacity. Needs no arrival rate.
Capacity capacity(const Topology& topo);

struct RateMatrix {
    Eigen::MatrixXd R;
    double residual = 0.0;  ///< ||R - (A0 + R A1 + R^2 A2)||_inf
    double rcond = 0.0;     ///< reciprocal condition estimate of I - A1 - A0 1 v0
};

/// R = A0 (I - A1 - A0 1 v0)^{-1}, using the rank-one first-passage matrix
/// G = 1 v0. Throws NumericalError if the system is numerically singular.
RateMatrix solve_R(const QbdBlocks& blocks);

/// Classical successive substitution R <- A0 + R A1 + R^2 A2 from R = 0.
/// Slow; kept as an independent check on solve_R.
RateMatrix solve_R_iterative(const QbdBlocks& blocks, int max_iterations = 2'000'000, double tol = 1e-15);

struct BoundarySolution {
    double y0 = 0.0;
    Eigen::RowVectorXd y1;
    double phi = 0.0;       ///< y0 + y1 (I-R)^{-1} 1
    double residual = 0.0;  ///< ||[y0 y1] M - [y0 y1]||_1 for the unnormalised pair
};

/// Left fixed point of [[B1, B0], [B2, A1 + R A2]], scaled so that y0 = 1.
BoundarySolution solve_boundary(const QbdBlocks& blocks, const Eigen::MatrixXd& R);

/// Mean network-queue length y1 (I-R)^{-2} 1 / phi. Invariant under a common
/// rescaling of (y0, y1, phi).
double mean_network_queue(const BoundarySolution& boundary, const Eigen::MatrixXd& R);

/// Spectral radius of a square matrix.
double spectral_radius(const Eigen::MatrixXd& M);

struct SolveOptions {
    bool compute_spectral_radius = true;
};

struct QbdSolution {
    NetworkParams params;
    Capacity cap;
    ProbabilityTable table;
    QbdBlocks blocks;
    Eigen::MatrixXd R;
    Eigen::MatrixXd G;
    double y0 = 0.0;
    Eigen::RowVectorXd y1;
    double phi = 0.0;
    double L1_bar = 0.0;          ///< mean source-queue length
    double L2_bar = 0.0;          ///< mean network-queue length
    double expected_delay = 0.0;  ///< slots, (L1 + L2) / lambda
    double sp_R = -1.0;           ///< negative when not computed

    struct Residuals {
        double stochasticity = 0.0;
        double R_fixed_point = 0.0;
        double G_fixed_point = 0.0;
        double boundary = 0.0;
        double R_rcond = 0.0;
    } residuals;
};

/// Mean source-queue length of the Bernoulli/Bernoulli source queue.
double mean_source_queue(double lambda, double p_b);

/// Full delay analysis. Throws StabilityError("unstable: ...") if lambda >= mu.
QbdSolution expected_delay(const NetworkParams& params, const SolveOptions& options = {});

}  // namespace qbdmanet
