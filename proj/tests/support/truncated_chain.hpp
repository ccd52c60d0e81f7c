#pragma once

// Brute-force reference for the network-queue chain: the level process is
// truncated at a fixed level, the transition matrix is assembled state by
// state straight from the probability table, and the stationary vector is
// obtained by power iteration (repeated squaring of P).

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qbdmanet/probabilities.hpp"

namespace qbdmanet::reference {

struct TruncatedChain {
    int levels = 0;  ///< highest level kept
    int phases = 0;
    Eigen::MatrixXd P;

    /// State index: level 0 is a single state, level l >= 1 phase j (1-based)
    /// is 1 + (l-1)*phases + (j-1).
    int index(int level, int phase) const { return level == 0 ? 0 : 1 + (level - 1) * phases + (phase - 1); }
    int states() const { return 1 + levels * phases; }
};

/// Transitions out of level l >= 1 with requested-packet copy count j:
///   distribution without reception  -> (l+1, j)
///   distribution with reception     -> (l, k) with prob p_c(k)
///   reception without distribution  -> (l-1, k) with prob p_c(k), or level 0
///   neither                         -> (l, j)
/// Probability that would leave the top level is kept on the diagonal.
inline TruncatedChain build_truncated_chain(const ProbabilityTable& t, int levels) {
    TruncatedChain c;
    c.levels = levels;
    c.phases = t.n - 1;
    const int J = c.phases;
    c.P = Eigen::MatrixXd::Zero(c.states(), c.states());

    c.P(0, 0) = t.p_0[0];
    for (int j = 1; j <= J; ++j) c.P(0, c.index(1, j)) = t.p_0[j];

    for (int l = 1; l <= levels; ++l) {
        for (int j = 1; j <= J; ++j) {
            const int from = c.index(l, j);
            const int up = l < levels ? c.index(l + 1, j) : from;
            c.P(from, up) += t.p_b_minus[j];
            c.P(from, from) += t.p_f_minus[j];
            for (int k = 1; k <= J; ++k) c.P(from, c.index(l, k)) += t.p_b_plus[j] * t.p_c[k];
            if (l == 1) {
                c.P(from, 0) += t.p_f_plus[j];
            } else {
                for (int k = 1; k <= J; ++k) c.P(from, c.index(l - 1, k)) += t.p_f_plus[j] * t.p_c[k];
            }
        }
    }
    return c;
}

/// Stationary row vector of an ergodic stochastic matrix by repeated squaring.
inline Eigen::RowVectorXd stationary_by_squaring(const Eigen::MatrixXd& P, int max_squarings = 80,
                                                 double tol = 1e-15) {
    Eigen::MatrixXd Pk = P;
    for (int s = 0; s < max_squarings; ++s) {
        Eigen::MatrixXd next = Pk * Pk;
        // Renormalise rows to stop rounding drift from accumulating.
        for (Eigen::Index r = 0; r < next.rows(); ++r) next.row(r) /= next.row(r).sum();
        const double change = (next - Pk).cwiseAbs().maxCoeff();
        Pk = std::move(next);
        if (change < tol) break;
    }
    // All rows agree at convergence; average them for good measure.
    Eigen::RowVectorXd pi = Pk.colwise().mean();
    const double spread = (Pk.rowwise() - pi).cwiseAbs().maxCoeff();
    if (spread > 1e-10) throw std::runtime_error("power iteration did not converge");
    return pi / pi.sum();
}

}  // namespace qbdmanet::reference
