#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbdmanet/params.hpp"
#include "qbdmanet/probabilities.hpp"

namespace qbdmanet {

/// Frequency estimate from `trials` independent Bernoulli observations.
struct Estimate {
    std::int64_t hits = 0;
    std::int64_t trials = 0;
    double value() const { return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0; }
};

/// Single-slot Monte-Carlo estimates of the per-slot probabilities. Each trial
/// places all n nodes uniformly over the m*m cells, activates one of the
/// alpha^2 equivalent classes uniformly, lets every occupied active cell pick
/// a transmitter uniformly, and has each transmitter broadcast with
/// probability q or hand-shake with a uniform peer in its coverage cells.
/// Node 0 is the tagged source S, node 1 its destination D; node 2.. are
/// the other nodes, with holders of D's requested packet taken as {S, 2..j}.
struct OracleEstimates {
    NetworkParams params;
    double lambda_prime = 0.0;
    std::int64_t trials = 0;
    Estimate p_b;
    std::vector<Estimate> p_c;  ///< conditional on S broadcasting; index j
    std::vector<Estimate> p_r;  ///< index j
    std::vector<Estimate> p_0;  ///< index j >= 1
    /// Pooled over the n-2 relays: hits counts slots where some relay delivers
    /// to D during a successful broadcast of S, so the single-relay
    /// probability is value() / (n-2).
    Estimate p_b_plus_pooled;

    double p_b_plus() const;
};

/// Runs the oracle. `lambda_prime` is the probability that a broadcast
/// opportunity finds the source queue non-empty (lambda / p_b).
OracleEstimates estimate_probabilities(const NetworkParams& params, double lambda_prime, std::int64_t trials,
                                       std::uint64_t seed);

struct OracleCheck {
    std::string quantity;  ///< "p_b", "p_c", "p_r", "p_0", "p_b_plus"
    int j = 0;             ///< copy count, 0 for scalars
    double closed_form = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;  ///< binomial standard error at the closed-form value
    double z = 0.0;
    double p_value = 1.0;    ///< exact two-sided binomial test
    bool pass = false;
};

/// Compares every estimate with the table. A cell passes when the exact
/// binomial test does not reject at the two-sided level of `sigmas` standard
/// normal deviations (0.27% for 3); for well-populated cells this is |z| <= sigmas.
std::vector<OracleCheck> compare_with_table(const OracleEstimates& est, const ProbabilityTable& table,
                                            double sigmas = 3.0);

}  // namespace qbdmanet
