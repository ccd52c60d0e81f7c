#pragma once

#include <span>
#include <vector>

#include "qbdmanet/simulator.hpp"

namespace qbdmanet {

/// Two-sided 95% Student-t quantile with `dof` degrees of freedom.
double t_quantile_975(int dof);

struct MeanCi {
    double mean = 0.0;
    double halfwidth = 0.0;  ///< 0 when fewer than two values
    bool available = false;
};

/// Mean and 95% t-interval halfwidth of independent replication values.
MeanCi mean_ci95(std::span<const double> values);

/// Aggregates replications: delay is the mean of per-replication means with an
/// across-replication t-interval; throughput likewise. Delay samples, counts
/// and diagnostics are pooled. With fewer than two replications the interval
/// is flagged unavailable (ci_available = false, halfwidth 0).
/// Result does not depend on the order of `replications` except for the
/// concatenation order of pooled samples and records.
RunMetrics summarize(std::span<const RunMetrics> replications);

}  // namespace qbdmanet
