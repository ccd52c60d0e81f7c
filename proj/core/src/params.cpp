#include "qbdmanet/params.hpp"

#include <algorithm>
#include <sstream>

#include "qbdmanet/errors.hpp"

namespace qbdmanet {

namespace {

[[noreturn]] void reject(const char* field, const char* bound, double got) {
    std::ostringstream os;
    os << "invalid " << field << ": must satisfy " << bound << " (got " << got << ")";
    throw ParamError(os.str());
}

}  // namespace

int ec_spacing(int m, double delta) {
    const double spacing = std::ceil((1.0 + delta) * std::sqrt(8.0) + 2.0);
    return spacing >= static_cast<double>(m) ? m : static_cast<int>(spacing);
}

Topology build_topology(int n, int m, double q, double delta) {
    if (n < 4) reject("n", "n >= 4", n);
    if (m < 3) reject("m", "m >= 3", m);
    if (!(q > 0.0 && q < 1.0)) reject("q", "0 < q < 1", q);
    if (!(delta >= 0.0) || !std::isfinite(delta)) reject("delta", "delta >= 0", delta);

    Topology t;
    t.n = n;
    t.m = m;
    t.q = q;
    t.delta = delta;
    t.alpha = ec_spacing(m, delta);
    t.radio_range = std::sqrt(8.0) / m;
    return t;
}

NetworkParams with_lambda(const Topology& topo, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) reject("lambda", "0 < lambda < 1", lambda);
    NetworkParams p;
    static_cast<Topology&>(p) = topo;
    p.lambda = lambda;
    return p;
}

NetworkParams build_params(int n, int m, double q, double delta, double lambda) {
    return with_lambda(build_topology(n, m, q, delta), lambda);
}

}  // namespace qbdmanet
