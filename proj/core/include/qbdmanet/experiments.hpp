#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "qbdmanet/params.hpp"
#include "qbdmanet/qbd.hpp"
#include "qbdmanet/simulator.hpp"

namespace qbdmanet {

/// Runs task(0) .. task(count-1) on up to `threads` workers (0 = hardware
/// concurrency). Tasks must write only to their own result slot. The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

/// JSON record of an analytic solution.
std::string analysis_json(const QbdSolution& solution);

struct SimulationRequest {
    NetworkParams params;
    Mobility mobility = Mobility::iid;
    Slot slots = 2'000'000;
    Slot warmup = 200'000;
    int replications = 10;
    std::uint64_t seed = 1;
    int threads = 0;
    bool keep_records = false;
    bool drain = true;
};

struct SimulationResult {
    std::vector<RunMetrics> replications;
    RunMetrics summary;
};

/// Replication k uses seed replication_seed(request.seed, k).
SimulationResult simulate(const SimulationRequest& request);

/// Packet records as CSV: flow,id,gen_slot,deliver_slot (deliver_slot empty if
/// the packet was never delivered).
void write_records_csv(std::ostream& os, const RunMetrics& metrics);

/// {params, mobility, mean_delay_slots, ci95, per_node_throughput, replications, slots, ...}
std::string simulation_summary_json(const SimulationRequest& request, const SimulationResult& result);

// ---------------------------------------------------------------------------
// Theory-vs-simulation campaigns.

struct CampaignOptions {
    int replications = 10;
    Slot slots = 2'000'000;
    Slot warmup = 200'000;
    std::uint64_t seed = 1;
    int threads = 0;
    bool iid_only = false;  ///< skip ungated mobility rows
};

struct Scenario {
    std::string name;
    NetworkParams params;
    Mobility mobility = Mobility::iid;
    bool gated = true;     ///< row contributes to the pass/fail verdict
    bool simulate = true;  ///< false for analytic-only campaigns
};

struct ValidationRow {
    Scenario scenario;
    double theory_delay = 0.0;
    double sim_delay = 0.0;  ///< NaN when not simulated
    double ci95 = 0.0;
    double rel_err = 0.0;
    bool pass = false;
};

/// Known campaign names: fig4-mini, fig5-mini, fig7-sweep.
std::vector<std::string> campaign_names();

/// Throws ConfigError for an unknown name.
std::vector<Scenario> campaign_scenarios(const std::string& name, const CampaignOptions& options = {});

/// Agreement rule: |sim - theory| <= ci95, or rel_err <= 5%.
bool delay_agrees(double theory, double sim, double ci95);

std::vector<ValidationRow> run_campaign(const std::string& name, const CampaignOptions& options);

/// True when every gated row passes.
bool campaign_passed(const std::vector<ValidationRow>& rows);

/// Columns: scenario,theory_delay,sim_delay,ci95,rel_err,pass. Ungated rows
/// print "n/a" in the pass column; analytic-only rows leave sim columns empty.
void write_validation_csv(std::ostream& os, const std::vector<ValidationRow>& rows);

// ---------------------------------------------------------------------------
// Shape checks on discrete curves.

/// Number of sign changes in consecutive differences; a zero difference
/// counts as its own sign and therefore breaks strict monotonicity.
int difference_sign_changes(const std::vector<double>& values);

/// Strictly decreasing, then strictly increasing, with one turn.
bool is_u_shaped(const std::vector<double>& values);

/// Strictly increasing, then strictly decreasing, with one turn.
bool is_unimodal(const std::vector<double>& values);

/// n equally spaced interior points of (0, 1): k / (n + 1), k = 1..n.
std::vector<double> open_unit_grid(int points);

/// `points` geometrically spaced values from `first` to `last` inclusive.
std::vector<double> geometric_grid(double first, double last, int points);

/// Default 20-point q grid for the q sweeps. Geometric on [0.005, 0.95]: the
/// capacity peak for m=16 sits near q=0.03, below the first point of a
/// uniform 20-point grid.
std::vector<double> q_sweep_grid();

// ---------------------------------------------------------------------------
// Parameter sweeps.

enum class SweepKind { mu_vs_q, delay_vs_q, delay_vs_rho, throughput_vs_lambda };

std::string_view to_string(SweepKind kind);
SweepKind parse_sweep_kind(std::string_view name);  ///< throws ConfigError

/// Grid is n_values x q_values x loads. `loads` are rho for the delay sweeps
/// and lambda/mu for throughput; mu-vs-q ignores them.
struct SweepSpec {
    SweepKind kind = SweepKind::mu_vs_q;
    std::vector<int> n_values;
    int m = 16;
    double delta = 1.0;
    std::vector<double> q_values;
    std::vector<double> loads;
    CampaignOptions sim;  ///< throughput-vs-lambda only
    Mobility mobility = Mobility::iid;
};

/// Paper-like defaults for each kind.
SweepSpec default_sweep(SweepKind kind);

struct SweepRow {
    int n = 0;
    int m = 0;
    double q = 0.0;
    double load = 0.0;
    double lambda = 0.0;
    Capacity cap;
    double expected_delay = 0.0;  ///< NaN when not computed
    double sim_throughput = 0.0;  ///< NaN when not simulated
    double sim_throughput_ci95 = 0.0;
    std::string status = "ok";
};

/// Throws ConfigError when a required grid axis is empty.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

/// Columns: kind,n,m,q,load,lambda,mu,mu_s,mu_d,expected_delay_slots,
/// sim_throughput,sim_throughput_ci95,status
void write_sweep_csv(std::ostream& os, SweepKind kind, const std::vector<SweepRow>& rows);

}  // namespace qbdmanet
