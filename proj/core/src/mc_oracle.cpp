#include "qbdmanet/mc_oracle.hpp"

#include <cmath>
#include <random>

#include <boost/math/distributions/binomial.hpp>

#include "qbdmanet/simulator.hpp"

namespace qbdmanet {

namespace {

constexpr int kSource = 0;
constexpr int kDestination = 1;

bool covers(int a, int b, int m) {
    const auto gap = [m](int u, int v) {
        const int d = std::abs(u - v);
        return std::min(d, m - d);
    };
    return gap(a % m, b % m) <= 1 && gap(a / m, b / m) <= 1;
}

// Exact two-sided binomial test, doubling the smaller tail. Tail cells expect
// far less than one hit at 1e6 trials, where the normal approximation is
// useless: a single hit would read as z > 10.
double binomial_two_sided(std::int64_t hits, std::int64_t trials, double p) {
    if (trials == 0) return 1.0;
    if (p <= 0.0) return hits == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return hits == trials ? 1.0 : 0.0;
    const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), p);
    const auto k = static_cast<double>(hits);
    const double lower = boost::math::cdf(dist, k);
    const double upper = hits == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1.0));
    return std::min(1.0, 2.0 * std::min(lower, upper));
}

OracleCheck make_check(std::string name, int j, double p, std::int64_t hits, std::int64_t trials, double sigmas,
                       double pooling = 1.0) {
    OracleCheck c;
    c.quantity = std::move(name);
    c.j = j;
    c.closed_form = p;
    const double pooled_p = std::min(1.0, p * pooling);
    c.estimate = trials ? static_cast<double>(hits) / static_cast<double>(trials) / pooling : 0.0;
    c.std_error = trials ? std::sqrt(pooled_p * (1.0 - pooled_p) / static_cast<double>(trials)) / pooling : 0.0;
    const double diff = std::abs(c.estimate - p);
    c.z = c.std_error > 0.0 ? diff / c.std_error : (diff == 0.0 ? 0.0 : INFINITY);
    c.p_value = binomial_two_sided(hits, trials, pooled_p);
    c.pass = c.p_value >= std::erfc(sigmas / std::sqrt(2.0));
    return c;
}

}  // namespace

double OracleEstimates::p_b_plus() const { return p_b_plus_pooled.value() / (params.n - 2); }

OracleEstimates estimate_probabilities(const NetworkParams& p, double lambda_prime, std::int64_t trials,
                                       std::uint64_t seed) {
    const int n = p.n;
    const int m = p.m;
    const int a = p.alpha;
    Rng rng(seed);
    std::uniform_int_distribution<int> pick_cell(0, m * m - 1);
    std::uniform_int_distribution<int> pick_ec(0, a * a - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto below = [&rng](int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng); };

    OracleEstimates est;
    est.params = p;
    est.lambda_prime = lambda_prime;
    est.trials = trials;
    est.p_c.assign(n, Estimate{});
    est.p_r.assign(n, Estimate{});
    est.p_0.assign(n, Estimate{});

    std::vector<int> cell(n);
    std::vector<int> members;
    std::vector<int> peers;
    for (std::int64_t t = 0; t < trials; ++t) {
        for (int i = 0; i < n; ++i) cell[i] = pick_cell(rng);
        const int ec = pick_ec(rng);

        bool source_broadcasts = false;
        int d_served_by = -1;  // transmitter that hand-shakes with D, if any
        for (int cy = ec / a; cy < m; cy += a) {
            for (int cx = ec % a; cx < m; cx += a) {
                const int c = cy * m + cx;
                members.clear();
                for (int i = 0; i < n; ++i)
                    if (cell[i] == c) members.push_back(i);
                if (members.empty()) continue;
                const int tx = members[below(static_cast<int>(members.size()))];
                if (unit(rng) < p.q) {
                    if (tx == kSource) source_broadcasts = true;
                    continue;
                }
                peers.clear();
                for (int i = 0; i < n; ++i)
                    if (i != tx && covers(cell[tx], cell[i], m)) peers.push_back(i);
                if (peers.empty()) continue;
                if (peers[below(static_cast<int>(peers.size()))] == kDestination) d_served_by = tx;
            }
        }
        const bool distributes = source_broadcasts && unit(rng) < lambda_prime;

        if (source_broadcasts) {
            ++est.p_b.hits;
            int copies = 1;
            for (int i = 2; i < n; ++i)
                if (covers(cell[kSource], cell[i], m)) ++copies;
            ++est.p_c[copies].hits;
            if (distributes && !covers(cell[kSource], cell[kDestination], m)) ++est.p_0[copies].hits;
        }
        if (d_served_by >= 0) {
            // Holder set for copy count j is {S, 2, ..., j}.
            const int rank = d_served_by == kSource ? 1 : d_served_by;
            for (int j = rank; j < n; ++j) ++est.p_r[j].hits;
            if (distributes && d_served_by >= 2) ++est.p_b_plus_pooled.hits;
        }
    }

    est.p_b.trials = trials;
    est.p_b_plus_pooled.trials = trials;
    for (int j = 0; j < n; ++j) {
        est.p_c[j].trials = est.p_b.hits;
        est.p_r[j].trials = trials;
        est.p_0[j].trials = trials;
    }
    return est;
}

std::vector<OracleCheck> compare_with_table(const OracleEstimates& est, const ProbabilityTable& tab, double sigmas) {
    std::vector<OracleCheck> out;
    const int n = tab.n;
    out.push_back(make_check("p_b", 0, tab.p_b, est.p_b.hits, est.p_b.trials, sigmas));
    for (int j = 1; j < n; ++j) out.push_back(make_check("p_c", j, tab.p_c[j], est.p_c[j].hits, est.p_c[j].trials, sigmas));
    for (int j = 1; j < n; ++j) out.push_back(make_check("p_r", j, tab.p_r[j], est.p_r[j].hits, est.p_r[j].trials, sigmas));
    for (int j = 1; j < n; ++j) out.push_back(make_check("p_0", j, tab.p_0[j], est.p_0[j].hits, est.p_0[j].trials, sigmas));
    // Single-relay p_b^+ = p_b_plus(2) / 1.
    const double single = n > 2 ? tab.p_b_plus[2] : 0.0;
    out.push_back(make_check("p_b_plus", 0, single, est.p_b_plus_pooled.hits, est.p_b_plus_pooled.trials, sigmas,
                             static_cast<double>(n - 2)));
    return out;
}

}  // namespace qbdmanet
