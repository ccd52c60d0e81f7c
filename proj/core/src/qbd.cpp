#include "qbdmanet/qbd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qbdmanet/errors.hpp"

namespace qbdmanet {

namespace {

constexpr double kStochasticityTolerance = 1e-8;
constexpr double kMinRcond = 1e-14;

double inf_norm(const Eigen::MatrixXd& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

double stochasticity_residual(const QbdBlocks& b) {
    double worst = std::abs(b.B1 + b.B0.sum() - 1.0);
    const Eigen::VectorXd a1 = b.A1.rowwise().sum();
    const Eigen::VectorXd a0 = b.A0.rowwise().sum();
    const Eigen::VectorXd a2 = b.A2.rowwise().sum();
    for (Eigen::Index i = 0; i < b.phases(); ++i) {
        worst = std::max(worst, std::abs(b.B2(i) + a1(i) + a0(i) - 1.0));
        worst = std::max(worst, std::abs(a2(i) + a1(i) + a0(i) - 1.0));
    }
    return worst;
}

QbdBlocks build_blocks(const ProbabilityTable& t) {
    const Eigen::Index K = t.phases();
    QbdBlocks b;
    b.v0.resize(K);
    b.B0.resize(K);
    b.B2.resize(K);
    Eigen::VectorXd relay_hit(K);
    Eigen::VectorXd stay(K);
    Eigen::VectorXd grow(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto j = static_cast<std::size_t>(k + 1);
        b.v0(k) = t.p_c[j];
        b.B0(k) = t.p_0[j];
        b.B2(k) = t.p_f_plus[j];
        relay_hit(k) = t.p_b_plus[j];
        stay(k) = t.p_f_minus[j];
        grow(k) = t.p_b_minus[j];
    }
    b.B1 = t.p_0[0];
    b.A0 = grow.asDiagonal();
    b.A1 = Eigen::MatrixXd(stay.asDiagonal()) + relay_hit * b.v0;
    b.A2 = b.B2 * b.v0;

    const double residual = stochasticity_residual(b);
    const auto in_unit = [](const auto& M) { return M.minCoeff() >= 0.0 && M.maxCoeff() <= 1.0; };
    if (!(residual <= kStochasticityTolerance) || !in_unit(b.A0) || !in_unit(b.A1) || !in_unit(b.A2) ||
        !in_unit(b.B0) || !in_unit(b.B2) || b.B1 < 0.0 || b.B1 > 1.0) {
        std::ostringstream os;
        os << "QBD blocks are not a stochastic kernel (row-sum residual " << residual << ")";
        throw NumericalError(os.str());
    }
    return b;
}

Capacity capacity(const Topology& topo) {
    Capacity c;
    c.mu_s = broadcast_probability(topo);
    const auto pc = copies_distribution(topo);
    const auto pr = receive_probability(topo);
    double expected_wait = 0.0;
    for (int j = 1; j < topo.n; ++j) expected_wait += pc[j] / pr[j];
    c.mu_d = 1.0 / expected_wait;
    c.mu = std::min(c.mu_s, c.mu_d);
    return c;
}

RateMatrix solve_R(const QbdBlocks& b) {
    const Eigen::Index K = b.phases();
    const Eigen::VectorXd grow = b.A0.rowwise().sum();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(K, K) - b.A1 - grow * b.v0;

    // R X = A0  <=>  X^T R^T = A0^T
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(X.transpose());
    RateMatrix out;
    out.rcond = lu.rcond();
    if (!(out.rcond > kMinRcond)) {
        std::ostringstream os;
        os << "I - A1 - A0*1*v0 is numerically singular (rcond " << out.rcond << ")";
        throw NumericalError(os.str());
    }
    out.R = lu.solve(b.A0.transpose()).transpose();
    out.residual = inf_norm(out.R - (b.A0 + out.R * b.A1 + out.R * out.R * b.A2));
    return out;
}

RateMatrix solve_R_iterative(const QbdBlocks& b, int max_iterations, double tol) {
    const Eigen::Index K = b.phases();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(K, K);
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd next =
            (I - b.A1 - R * b.A2).transpose().partialPivLu().solve(b.A0.transpose()).transpose();
        const double step = inf_norm(next - R);
        R = next;
        if (step < tol) break;
    }
    RateMatrix out;
    out.R = R;
    out.residual = inf_norm(R - (b.A0 + R * b.A1 + R * R * b.A2));
    out.rcond = (I - b.A1 - R * b.A2).partialPivLu().rcond();
    return out;
}

BoundarySolution solve_boundary(const QbdBlocks& b, const Eigen::MatrixXd& R) {
    const Eigen::Index K = b.phases();
    Eigen::MatrixXd M(K + 1, K + 1);
    M(0, 0) = b.B1;
    M.block(0, 1, 1, K) = b.B0;
    M.block(1, 0, K, 1) = b.B2;
    M.block(1, 1, K, K) = b.A1 + R * b.A2;

    // x (M - I) = 0 with the first balance equation swapped for x_0 = 1.
    Eigen::MatrixXd A = (M - Eigen::MatrixXd::Identity(K + 1, K + 1)).transpose();
    A.row(0).setZero();
    A(0, 0) = 1.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K + 1);
    rhs(0) = 1.0;

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (!(lu.rcond() > kMinRcond)) {
        std::ostringstream os;
        os << "boundary matrix has no simple unit eigenvalue (rcond " << lu.rcond() << ")";
        throw NumericalError(os.str());
    }
    const Eigen::RowVectorXd x = lu.solve(rhs).transpose();
    const double scale = x.cwiseAbs().maxCoeff();
    if (x.minCoeff() < -1e-10 * scale) {
        std::ostringstream os;
        os << "boundary vector has a negative component (" << x.minCoeff() << ")";
        throw NumericalError(os.str());
    }

    BoundarySolution s;
    s.y0 = x(0);
    s.y1 = x.tail(K).cwiseMax(0.0);
    s.residual = (x * M - x).cwiseAbs().sum();

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu_r(Eigen::MatrixXd::Identity(K, K) - R);
    const Eigen::VectorXd u = lu_r.solve(Eigen::VectorXd::Ones(K));
    s.phi = s.y0 + s.y1.dot(u);
    return s;
}

double mean_network_queue(const BoundarySolution& s, const Eigen::MatrixXd& R) {
    const Eigen::Index K = R.rows();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(K, K) - R);
    const Eigen::VectorXd u = lu.solve(Eigen::VectorXd::Ones(K));
    const Eigen::VectorXd w = lu.solve(u);
    return s.y1.dot(w) / s.phi;
}

double spectral_radius(const Eigen::MatrixXd& M) {
    const Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double mean_source_queue(double lambda, double p_b) { return (lambda - lambda * lambda) / (p_b - lambda); }

QbdSolution expected_delay(const NetworkParams& params, const SolveOptions& options) {
    QbdSolution sol;
    sol.params = params;
    sol.cap = capacity(params);
    if (!(params.lambda < sol.cap.mu)) {
        std::ostringstream os;
        os.precision(6);
        os << "unstable: lambda=" << params.lambda << " exceeds capacity mu=" << sol.cap.mu;
        throw StabilityError(os.str());
    }

    sol.table = compute_table(params);
    sol.blocks = build_blocks(sol.table);
    sol.residuals.stochasticity = stochasticity_residual(sol.blocks);

    const RateMatrix rm = solve_R(sol.blocks);
    sol.R = rm.R;
    sol.residuals.R_fixed_point = rm.residual;
    sol.residuals.R_rcond = rm.rcond;

    const Eigen::Index K = sol.blocks.phases();
    sol.G = Eigen::VectorXd::Ones(K) * sol.blocks.v0;
    sol.residuals.G_fixed_point =
        inf_norm(sol.G - (sol.blocks.A2 + sol.blocks.A1 * sol.G + sol.blocks.A0 * sol.G * sol.G));

    const BoundarySolution bs = solve_boundary(sol.blocks, sol.R);
    sol.y0 = bs.y0;
    sol.y1 = bs.y1;
    sol.phi = bs.phi;
    sol.residuals.boundary = bs.residual;

    sol.L1_bar = mean_source_queue(params.lambda, sol.table.p_b);
    sol.L2_bar = mean_network_queue(bs, sol.R);
    sol.expected_delay = (sol.L1_bar + sol.L2_bar) / params.lambda;
    if (options.compute_spectral_radius) sol.sp_R = spectral_radius(sol.R);
    return sol;
}

}  // namespace qbdmanet
