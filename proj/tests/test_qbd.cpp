#include <cmath>
#include <string>

#include "doctest.h"

#include "qbdmanet/errors.hpp"
#include "qbdmanet/qbd.hpp"
#include "support/truncated_chain.hpp"

using namespace qbdmanet;

namespace {

NetworkParams at_load(int n, int m, double q, double rho, double delta = 1.0) {
    const Topology t = build_topology(n, m, q, delta);
    return with_lambda(t, rho * capacity(t).mu);
}

}  // namespace

TEST_CASE("capacities of the three reference scenarios") {
    CHECK(std::abs(capacity(build_topology(150, 16, 0.4)).mu - 2.37e-4) <= 0.005e-4);
    CHECK(std::abs(capacity(build_topology(100, 16, 0.2)).mu - 3.46e-4) <= 0.005e-4);
    CHECK(std::abs(capacity(build_topology(100, 8, 0.3)).mu - 7.52e-4) <= 0.005e-4);
}

TEST_CASE("capacity is the smaller of the two service rates") {
    for (const double q : {0.05, 0.2, 0.5, 0.8}) {
        const Topology t = build_topology(40, 8, q);
        const Capacity c = capacity(t);
        CHECK(c.mu == std::min(c.mu_s, c.mu_d));
        CHECK(c.mu_s == doctest::Approx(broadcast_probability(t)).epsilon(1e-14));
        // Network service rate: reciprocal of the mean time to receive a packet
        // whose copy count is drawn from p_c.
        const auto pc = copies_distribution(t);
        const auto pr = receive_probability(t);
        double mean_time = 0.0;
        for (int j = 1; j < t.n; ++j) mean_time += pc[j] / pr[j];
        CHECK(c.mu_d == doctest::Approx(1.0 / mean_time).epsilon(1e-12));
    }
}

TEST_CASE("blocks follow the transition structure for n = 4") {
    const NetworkParams p = at_load(4, 8, 0.3, 0.5);
    const ProbabilityTable t = compute_table(p);
    const QbdBlocks b = build_blocks(t);
    REQUIRE(b.phases() == 3);

    // Reference: the level-2 row of an explicitly assembled chain.
    const auto chain = reference::build_truncated_chain(t, 5);
    for (int j = 1; j <= 3; ++j) {
        for (int k = 1; k <= 3; ++k) {
            CHECK(b.A0(j - 1, k - 1) == doctest::Approx(chain.P(chain.index(2, j), chain.index(3, k))).epsilon(1e-14));
            CHECK(b.A1(j - 1, k - 1) == doctest::Approx(chain.P(chain.index(2, j), chain.index(2, k))).epsilon(1e-14));
            CHECK(b.A2(j - 1, k - 1) == doctest::Approx(chain.P(chain.index(2, j), chain.index(1, k))).epsilon(1e-14));
        }
        CHECK(b.B0(j - 1) == doctest::Approx(chain.P(0, chain.index(1, j))).epsilon(1e-14));
        CHECK(b.B2(j - 1) == doctest::Approx(chain.P(chain.index(1, j), 0)).epsilon(1e-14));
    }
    CHECK(b.B1 == doctest::Approx(chain.P(0, 0)).epsilon(1e-14));

    // A0 only moves up in the same phase; A2 is rank one.
    CHECK((b.A0 - Eigen::MatrixXd(b.A0.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.A2);
    CHECK(svd.singularValues()(1) <= 1e-15 * svd.singularValues()(0));
    CHECK(stochasticity_residual(b) < 1e-13);
}

TEST_CASE("rate matrix solves its fixed-point equation") {
    for (const int n : {4, 10, 50})
        for (const double rho : {0.2, 0.6, 0.95}) {
            const QbdBlocks b = build_blocks(compute_table(at_load(n, 8, 0.3, rho)));
            const RateMatrix rm = solve_R(b);
            INFO("n=" << n << " rho=" << rho);
            CHECK(rm.residual < 1e-12);
            CHECK(rm.R.minCoeff() >= -1e-15);
            CHECK(spectral_radius(rm.R) < 1.0);
        }
}

TEST_CASE("direct and iterative rate matrices agree") {
    for (const double rho : {0.3, 0.7}) {
        const QbdBlocks b = build_blocks(compute_table(at_load(4, 8, 0.3, rho)));
        const RateMatrix direct = solve_R(b);
        const RateMatrix iter = solve_R_iterative(b);
        CHECK((direct.R - iter.R).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("rate matrix vanishes with the arrival rate") {
    const Topology t = build_topology(12, 8, 0.3);
    double previous = INFINITY;
    for (const double lambda : {1e-5, 1e-7, 1e-9, 1e-11}) {
        const RateMatrix rm = solve_R(build_blocks(compute_table(with_lambda(t, lambda))));
        const double norm = rm.R.cwiseAbs().maxCoeff();
        CHECK(norm < previous);
        previous = norm;
    }
    CHECK(previous < 1e-7);
}

TEST_CASE("spectral radius below one exactly when the network queue is stable") {
    // Network-limited scenarios: mu_d < p_b, so lambda can cross mu_d while the
    // source queue stays stable.
    for (const int n : {4, 8, 20}) {
        const Topology t = build_topology(n, 8, 0.5);
        const Capacity c = capacity(t);
        REQUIRE(c.mu_d < c.mu_s);
        for (const double f : {0.5, 0.9, 0.99, 1.01, 1.1, 1.3}) {
            const double lambda = f * c.mu_d;
            if (lambda >= c.mu_s) continue;
            const QbdBlocks b = build_blocks(compute_table(with_lambda(t, lambda)));
            const double sp = spectral_radius(solve_R(b).R);
            INFO("n=" << n << " lambda/mu_d=" << f << " sp=" << sp);
            CHECK((sp < 1.0) == (f < 1.0));
        }
    }
}

TEST_CASE("stationary law matches power iteration on the truncated chain") {
    for (const double rho : {0.3, 0.5, 0.7}) {
        const NetworkParams p = at_load(4, 8, 0.3, rho);
        const QbdSolution sol = expected_delay(p);
        const int L = 60;
        const auto chain = reference::build_truncated_chain(sol.table, L);
        const Eigen::RowVectorXd ref = reference::stationary_by_squaring(chain.P);

        // Matrix-geometric law on the same states; mass above L is lumped into
        // the total-variation distance.
        double tv = std::abs(sol.y0 / sol.phi - ref(0));
        double mean_ref = 0.0;
        double kept = sol.y0 / sol.phi;
        Eigen::RowVectorXd level = sol.y1 / sol.phi;
        for (int l = 1; l <= L; ++l) {
            for (int j = 1; j <= 3; ++j) {
                tv += std::abs(level(j - 1) - ref(chain.index(l, j)));
                mean_ref += l * ref(chain.index(l, j));
            }
            kept += level.sum();
            level = level * sol.R;
        }
        tv += 1.0 - kept;
        tv *= 0.5;
        INFO("rho=" << rho << " tv=" << tv);
        CHECK(tv < 1e-6);
        CHECK(std::abs(mean_ref - sol.L2_bar) / sol.L2_bar < 1e-6);
    }
}

TEST_CASE("mean queue length is invariant under rescaling of the boundary vector") {
    const QbdBlocks b = build_blocks(compute_table(at_load(10, 8, 0.3, 0.6)));
    const RateMatrix rm = solve_R(b);
    BoundarySolution bs = solve_boundary(b, rm.R);
    const double base = mean_network_queue(bs, rm.R);
    bs.y0 *= 7.0;
    bs.y1 *= 7.0;
    bs.phi *= 7.0;
    CHECK(mean_network_queue(bs, rm.R) == doctest::Approx(base).epsilon(1e-14));
    CHECK(bs.residual < 1e-10 * 7.0);
}

TEST_CASE("delay decomposition and residuals") {
    const NetworkParams p = at_load(50, 8, 0.4, 0.6);
    const QbdSolution s = expected_delay(p);
    CHECK(s.L1_bar == doctest::Approx((p.lambda - p.lambda * p.lambda) / (s.table.p_b - p.lambda)).epsilon(1e-14));
    CHECK(s.expected_delay == doctest::Approx((s.L1_bar + s.L2_bar) / p.lambda).epsilon(1e-14));
    CHECK(s.residuals.stochasticity < 1e-12);
    CHECK(s.residuals.R_fixed_point < 1e-12);
    CHECK(s.residuals.G_fixed_point < 1e-12);
    CHECK(s.residuals.boundary < 1e-10);
    CHECK(s.sp_R > 0.0);
    CHECK(s.sp_R < 1.0);
    CHECK(s.L2_bar > 0.0);
}

TEST_CASE("delay increases with load") {
    const Topology t = build_topology(50, 8, 0.4);
    const double mu = capacity(t).mu;
    double previous = 0.0;
    for (int k = 1; k <= 19; ++k) {
        const double rho = 0.05 * k;
        const double d = expected_delay(with_lambda(t, rho * mu)).expected_delay;
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("loads at or beyond capacity are rejected") {
    const Topology t = build_topology(100, 8, 0.3);
    const double mu = capacity(t).mu;
    for (const double f : {1.0, 1.5}) {
        try {
            expected_delay(with_lambda(t, f * mu));
            FAIL("expected StabilityError");
        } catch (const StabilityError& e) {
            CHECK(std::string(e.what()).find("unstable") != std::string::npos);
        }
    }
}
