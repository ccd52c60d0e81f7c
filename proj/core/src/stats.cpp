#include "qbdmanet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace qbdmanet {

double t_quantile_975(int dof) {
    if (dof < 1) throw std::domain_error("t_quantile_975: need at least one degree of freedom");
    return boost::math::quantile(boost::math::students_t(dof), 0.975);
}

MeanCi mean_ci95(std::span<const double> values) {
    MeanCi out;
    if (values.empty()) {
        out.mean = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    // Sorted summation keeps the result independent of replication order.
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double k = static_cast<double>(v.size());
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / k;
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (const double x : v) ss += (x - out.mean) * (x - out.mean);
    const double sd = std::sqrt(ss / (k - 1.0));
    out.halfwidth = t_quantile_975(static_cast<int>(v.size()) - 1) * sd / std::sqrt(k);
    out.available = true;
    return out;
}

RunMetrics summarize(std::span<const RunMetrics> reps) {
    RunMetrics out;
    out.replications = static_cast<int>(reps.size());
    if (reps.empty()) {
        out.mean_delay = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    std::vector<double> delays;
    std::vector<double> throughputs;
    const std::size_t flows = reps.front().generated_count.size();
    out.generated_count.assign(flows, 0);
    out.delivered_count.assign(flows, 0);
    out.window_deliveries.assign(flows, 0);
    for (const auto& r : reps) {
        if (!std::isnan(r.mean_delay)) delays.push_back(r.mean_delay);
        throughputs.push_back(r.per_node_throughput);
        out.delay_samples.insert(out.delay_samples.end(), r.delay_samples.begin(), r.delay_samples.end());
        out.records.insert(out.records.end(), r.records.begin(), r.records.end());
        for (std::size_t f = 0; f < flows && f < r.generated_count.size(); ++f) {
            out.generated_count[f] += r.generated_count[f];
            out.delivered_count[f] += r.delivered_count[f];
            out.window_deliveries[f] += r.window_deliveries[f];
        }
        out.slots_observed += r.slots_observed;
        out.censored += r.censored;
        out.interference_violations += r.interference_violations;
        out.max_relay_queue = std::max(out.max_relay_queue, r.max_relay_queue);
    }

    const MeanCi d = mean_ci95(delays);
    const MeanCi t = mean_ci95(throughputs);
    out.mean_delay = d.mean;
    out.ci95_halfwidth = d.halfwidth;
    out.ci_available = d.available;
    out.per_node_throughput = t.mean;
    out.throughput_ci95 = t.halfwidth;
    return out;
}

}  // namespace qbdmanet
