#pragma once

#include <iosfwd>
#include <vector>

#include "qbdmanet/params.hpp"

namespace qbdmanet {

/// (9^x - 8^x) / x for x >= 1. This is the contention-weighted number of ways
/// x nodes can share a 3x3 coverage neighbourhood with the transmitter's own
/// cell. Exact integer evaluation up to x = 20, log domain beyond.
/// Throws std::domain_error for x <= 0.
double contention_weight(int x);

/// Natural log of contention_weight(x).
double log_contention_weight(int x);

/// Probability that a given node becomes transmitter and chooses to broadcast
/// in a slot (p_b).
double broadcast_probability(const Topology& topo);

/// p_c(j), j = 1..n-1: distribution of the number of copies (source included)
/// left in the network after a broadcast. Index 0 is unused and set to 0.
std::vector<double> copies_distribution(const Topology& topo);

/// p_r(j), j = 1..n-1: probability that the destination receives its requested
/// packet in a slot given j copies exist. Index 0 unused.
std::vector<double> receive_probability(const Topology& topo);

/// Per-slot transition probabilities of the tagged flow, indexed by the copy
/// count j of the packet the destination is requesting.
///
/// Every per-j array has size n; index 0 is only meaningful for p_0 (empty
/// network-queue stays empty) and is zero elsewhere.
struct ProbabilityTable {
    int n = 0;
    double p_b = 0.0;
    double lambda = 0.0;
    double lambda_prime = 0.0;  ///< lambda / p_b: P(source queue non-empty | broadcast chance)
    std::vector<double> p_c;
    std::vector<double> p_r;
    std::vector<double> p_0;
    std::vector<double> p_b_plus;
    std::vector<double> p_b_minus;
    std::vector<double> p_f_plus;
    std::vector<double> p_f_minus;

    int phases() const { return n - 1; }
};

/// Single-relay probability p_b^+ that the source broadcasts a packet while one
/// specific relay delivers the requested packet to the destination.
double relay_delivery_during_broadcast(const NetworkParams& params, double p_b);

/// Builds the full table. Throws StabilityError when lambda >= p_b (source
/// queue overloaded; lambda_prime would exceed 1) and NumericalError if a
/// complement comes out materially negative.
ProbabilityTable compute_table(const NetworkParams& params);

/// CSV dump: j,p_c,p_r,p_0,p_b_plus,p_b_minus,p_f_plus,p_f_minus (j = 0..n-1).
void write_table_csv(std::ostream& os, const ProbabilityTable& table);

}  // namespace qbdmanet
