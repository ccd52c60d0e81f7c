#include "qbdmanet/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "qbdmanet/config.hpp"
#include "qbdmanet/errors.hpp"
#include "qbdmanet/stats.hpp"

namespace qbdmanet {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json params_json(const NetworkParams& p) {
    return json{{"n", p.n},         {"m", p.m},
                {"q", p.q},         {"delta", p.delta},
                {"alpha", p.alpha}, {"radio_range", p.radio_range},
                {"lambda", p.lambda}};
}

// Stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

std::string rho_label(double rho) {
    std::ostringstream os;
    os << std::setprecision(3) << rho;
    return os.str();
}

std::vector<double> stepped(double first, double last, double step) {
    std::vector<double> out;
    const int count = static_cast<int>(std::lround((last - first) / step));
    for (int k = 0; k <= count; ++k) out.push_back(first + k * step);
    return out;
}

}  // namespace

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
    if (count == 0) return;
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::string analysis_json(const QbdSolution& s) {
    json j;
    j["params"] = params_json(s.params);
    j["mu"] = s.cap.mu;
    j["mu_s"] = s.cap.mu_s;
    j["mu_d"] = s.cap.mu_d;
    j["rho"] = s.params.lambda / s.cap.mu;
    j["L1_bar"] = s.L1_bar;
    j["L2_bar"] = s.L2_bar;
    j["expected_delay_slots"] = s.expected_delay;
    j["sp_R"] = s.sp_R >= 0.0 ? json(s.sp_R) : json(nullptr);
    j["residuals"] = json{{"stochasticity", s.residuals.stochasticity},
                          {"R_fixed_point", s.residuals.R_fixed_point},
                          {"G_fixed_point", s.residuals.G_fixed_point},
                          {"boundary", s.residuals.boundary},
                          {"R_rcond", s.residuals.R_rcond}};
    return j.dump(2);
}

SimulationResult simulate(const SimulationRequest& req) {
    if (req.replications < 1) throw ParamError("invalid replications: must be at least 1");
    SimulationResult out;
    out.replications.resize(static_cast<std::size_t>(req.replications));
    RunOptions opt;
    opt.slots = req.slots;
    opt.warmup = req.warmup;
    opt.keep_records = req.keep_records;
    opt.drain = req.drain;
    parallel_for(out.replications.size(), req.threads, [&](std::size_t k) {
        out.replications[k] = run(req.params, req.mobility, opt, replication_seed(req.seed, k));
    });
    out.summary = summarize(out.replications);
    return out;
}

void write_records_csv(std::ostream& os, const RunMetrics& metrics) {
    os << "flow,id,gen_slot,deliver_slot\n";
    for (const auto& r : metrics.records) {
        os << r.source << ',' << r.id << ',' << r.gen_slot << ',';
        if (r.deliver_slot != kNotDelivered) os << r.deliver_slot;
        os << '\n';
    }
}

std::string simulation_summary_json(const SimulationRequest& req, const SimulationResult& res) {
    const RunMetrics& s = res.summary;
    json j;
    j["params"] = params_json(req.params);
    j["mobility"] = std::string(to_string(req.mobility));
    j["mean_delay_slots"] = s.mean_delay;
    j["ci95"] = s.ci_available ? json(s.ci95_halfwidth) : json(nullptr);
    j["per_node_throughput"] = s.per_node_throughput;
    j["throughput_ci95"] = s.ci_available ? json(s.throughput_ci95) : json(nullptr);
    j["replications"] = s.replications;
    j["slots"] = req.slots;
    j["warmup_slots"] = req.warmup;
    j["seed"] = req.seed;
    j["censored_packets"] = s.censored;
    json per_rep = json::array();
    for (const auto& r : res.replications)
        per_rep.push_back(json{{"mean_delay_slots", r.mean_delay}, {"per_node_throughput", r.per_node_throughput}});
    j["per_replication"] = per_rep;
    return j.dump(2);
}

std::vector<std::string> campaign_names() { return {"fig4-mini", "fig5-mini", "fig7-sweep"}; }

std::vector<Scenario> campaign_scenarios(const std::string& name, const CampaignOptions& options) {
    std::vector<Scenario> out;
    const auto add = [&](std::string label, int n, int m, double q, double rho, Mobility mob, bool gated,
                         bool simulate) {
        const Topology topo = build_topology(n, m, q);
        out.push_back(Scenario{std::move(label), resolve_params(topo, {TrafficSpec::Kind::load, rho}), mob, gated,
                               simulate});
    };
    if (name == "fig4-mini") {
        for (const int n : {20, 50, 80})
            for (const double q : {0.1, 0.3, 0.5})
                add("fig4-mini/n=" + std::to_string(n) + "/q=" + rho_label(q), n, 8, q, 0.6, Mobility::iid, true,
                    true);
    } else if (name == "fig5-mini") {
        for (const Mobility mob : {Mobility::iid, Mobility::random_walk, Mobility::random_waypoint}) {
            if (options.iid_only && mob != Mobility::iid) continue;
            for (const double rho : stepped(0.2, 0.8, 0.1))
                add("fig5-mini/" + std::string(to_string(mob)) + "/rho=" + rho_label(rho), 50, 8, 0.4, rho, mob,
                    mob == Mobility::iid, true);
        }
    } else if (name == "fig7-sweep") {
        for (const int n : {80, 300, 500})
            for (const double q : q_sweep_grid())
                add("fig7-sweep/n=" + std::to_string(n) + "/q=" + rho_label(q), n, 16, q, 0.5, Mobility::iid, true,
                    false);
    } else {
        throw ConfigError("unknown campaign '" + name + "' (expected fig4-mini, fig5-mini or fig7-sweep)");
    }
    return out;
}

bool delay_agrees(double theory, double sim, double ci95) {
    if (std::isnan(theory) || std::isnan(sim)) return false;
    const double diff = std::abs(sim - theory);
    return diff <= ci95 || diff <= 0.05 * std::abs(theory);
}

std::vector<ValidationRow> run_campaign(const std::string& name, const CampaignOptions& options) {
    const std::vector<Scenario> scenarios = campaign_scenarios(name, options);
    std::vector<ValidationRow> rows(scenarios.size());

    SolveOptions solve;
    solve.compute_spectral_radius = false;
    parallel_for(scenarios.size(), options.threads, [&](std::size_t i) {
        rows[i].scenario = scenarios[i];
        rows[i].theory_delay = expected_delay(scenarios[i].params, solve).expected_delay;
    });

    // Flatten (scenario, replication) pairs so a single pool serves all points.
    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t i = 0; i < scenarios.size(); ++i)
        if (scenarios[i].simulate)
            for (int k = 0; k < options.replications; ++k) jobs.emplace_back(i, k);
    std::vector<RunMetrics> metrics(jobs.size());
    RunOptions opt;
    opt.slots = options.slots;
    opt.warmup = options.warmup;
    parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
        const auto [i, k] = jobs[j];
        const std::uint64_t base = replication_seed(options.seed, fnv1a(scenarios[i].name));
        RunMetrics m = run(scenarios[i].params, scenarios[i].mobility, opt, replication_seed(base, k));
        m.delay_samples.clear();
        m.delay_samples.shrink_to_fit();
        metrics[j] = std::move(m);
    });

    std::size_t cursor = 0;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        ValidationRow& row = rows[i];
        if (!scenarios[i].simulate) {
            row.sim_delay = kNaN;
            row.ci95 = kNaN;
            row.rel_err = kNaN;
            continue;
        }
        const std::span<const RunMetrics> reps(metrics.data() + cursor, options.replications);
        cursor += options.replications;
        const RunMetrics s = summarize(reps);
        row.sim_delay = s.mean_delay;
        row.ci95 = s.ci95_halfwidth;
        row.rel_err = std::abs(s.mean_delay - row.theory_delay) / row.theory_delay;
        row.pass = delay_agrees(row.theory_delay, row.sim_delay, row.ci95);
    }

    // Analytic-only rows are judged by curve shape, one curve per n.
    for (std::size_t i = 0; i < rows.size();) {
        if (scenarios[i].simulate) {
            ++i;
            continue;
        }
        std::size_t end = i;
        std::vector<double> curve;
        while (end < rows.size() && !scenarios[end].simulate && scenarios[end].params.n == scenarios[i].params.n) {
            curve.push_back(rows[end].theory_delay);
            ++end;
        }
        const bool ok = is_u_shaped(curve);
        for (std::size_t k = i; k < end; ++k) rows[k].pass = ok;
        i = end;
    }
    return rows;
}

bool campaign_passed(const std::vector<ValidationRow>& rows) {
    for (const auto& r : rows)
        if (r.scenario.gated && !r.pass) return false;
    return true;
}

void write_validation_csv(std::ostream& os, const std::vector<ValidationRow>& rows) {
    os << "scenario,theory_delay,sim_delay,ci95,rel_err,pass\n";
    for (const auto& r : rows) {
        os << r.scenario.name << ',' << fmt(r.theory_delay) << ',' << fmt(r.sim_delay) << ',' << fmt(r.ci95) << ','
           << fmt(r.rel_err) << ',' << (r.scenario.gated ? (r.pass ? "true" : "false") : "n/a") << '\n';
    }
}

int difference_sign_changes(const std::vector<double>& v) {
    int changes = 0;
    int previous = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (i > 1 && sign != previous) ++changes;
        previous = sign;
    }
    return changes;
}

bool is_u_shaped(const std::vector<double>& v) {
    return v.size() >= 3 && v[1] < v[0] && v[v.size() - 1] > v[v.size() - 2] && difference_sign_changes(v) == 1;
}

bool is_unimodal(const std::vector<double>& v) {
    return v.size() >= 3 && v[1] > v[0] && v[v.size() - 1] < v[v.size() - 2] && difference_sign_changes(v) == 1;
}

std::vector<double> open_unit_grid(int points) {
    std::vector<double> out;
    for (int k = 1; k <= points; ++k) out.push_back(static_cast<double>(k) / (points + 1));
    return out;
}

std::vector<double> geometric_grid(double first, double last, int points) {
    if (points == 1) return {first};
    std::vector<double> out;
    const double step = std::log(last / first) / (points - 1);
    for (int k = 0; k < points; ++k) out.push_back(k == points - 1 ? last : first * std::exp(step * k));
    return out;
}

std::vector<double> q_sweep_grid() { return geometric_grid(0.005, 0.95, 20); }

std::string_view to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::mu_vs_q: return "mu-vs-q";
        case SweepKind::delay_vs_q: return "delay-vs-q";
        case SweepKind::delay_vs_rho: return "delay-vs-rho";
        case SweepKind::throughput_vs_lambda: return "throughput-vs-lambda";
    }
    return "?";
}

SweepKind parse_sweep_kind(std::string_view name) {
    for (const SweepKind k :
         {SweepKind::mu_vs_q, SweepKind::delay_vs_q, SweepKind::delay_vs_rho, SweepKind::throughput_vs_lambda})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown sweep '" + std::string(name) +
                      "' (expected mu-vs-q, delay-vs-q, delay-vs-rho or throughput-vs-lambda)");
}

SweepSpec default_sweep(SweepKind kind) {
    SweepSpec s;
    s.kind = kind;
    switch (kind) {
        case SweepKind::mu_vs_q:
            s.n_values = {80, 300, 500};
            s.q_values = q_sweep_grid();
            break;
        case SweepKind::delay_vs_q:
            s.n_values = {80, 300, 500};
            s.q_values = q_sweep_grid();
            s.loads = {0.5};
            break;
        case SweepKind::delay_vs_rho:
            s.n_values = {150};
            s.q_values = {0.4};
            s.loads = stepped(0.2, 0.9, 0.1);
            break;
        case SweepKind::throughput_vs_lambda:
            s.n_values = {20};
            s.m = 8;
            s.q_values = {0.3};
            s.loads = {0.2, 0.4, 0.6, 0.8, 1.2, 2.0};
            s.sim.replications = 10;
            s.sim.slots = 1'000'000;
            s.sim.warmup = 200'000;
            break;
    }
    return s;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    const bool needs_load = spec.kind != SweepKind::mu_vs_q;
    if (spec.n_values.empty() || spec.q_values.empty() || (needs_load && spec.loads.empty()))
        throw ConfigError("empty sweep grid: n, q" + std::string(needs_load ? " and load" : "") +
                          " values are required");
    const std::vector<double> loads = needs_load ? spec.loads : std::vector<double>{kNaN};

    std::vector<SweepRow> rows;
    for (const int n : spec.n_values)
        for (const double q : spec.q_values)
            for (const double load : loads) {
                SweepRow r;
                r.n = n;
                r.m = spec.m;
                r.q = q;
                r.load = load;
                r.lambda = kNaN;
                r.expected_delay = kNaN;
                r.sim_throughput = kNaN;
                r.sim_throughput_ci95 = kNaN;
                rows.push_back(r);
            }

    SolveOptions solve;
    solve.compute_spectral_radius = false;
    parallel_for(rows.size(), spec.sim.threads, [&](std::size_t i) {
        SweepRow& r = rows[i];
        try {
            const Topology topo = build_topology(r.n, r.m, r.q, spec.delta);
            r.cap = capacity(topo);
            if (spec.kind == SweepKind::mu_vs_q) return;
            r.lambda = r.load * r.cap.mu;
            if (spec.kind == SweepKind::throughput_vs_lambda) {
                SimulationRequest req;
                req.params = with_lambda(topo, r.lambda);
                req.mobility = spec.mobility;
                req.slots = spec.sim.slots;
                req.warmup = spec.sim.warmup;
                req.replications = spec.sim.replications;
                req.seed = replication_seed(spec.sim.seed, i);
                req.threads = 1;
                req.drain = false;
                const SimulationResult res = simulate(req);
                r.sim_throughput = res.summary.per_node_throughput;
                r.sim_throughput_ci95 = res.summary.throughput_ci95;
                return;
            }
            r.expected_delay = expected_delay(with_lambda(topo, r.lambda), solve).expected_delay;
        } catch (const StabilityError&) {
            r.status = "unstable";
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
    });
    return rows;
}

void write_sweep_csv(std::ostream& os, SweepKind kind, const std::vector<SweepRow>& rows) {
    os << "kind,n,m,q,load,lambda,mu,mu_s,mu_d,expected_delay_slots,sim_throughput,sim_throughput_ci95,status\n";
    for (const auto& r : rows) {
        std::string status = r.status;
        for (char& c : status)
            if (c == ',' || c == '\n') c = ';';
        os << to_string(kind) << ',' << r.n << ',' << r.m << ',' << fmt(r.q) << ',' << fmt(r.load) << ','
           << fmt(r.lambda) << ',' << fmt(r.cap.mu) << ',' << fmt(r.cap.mu_s) << ',' << fmt(r.cap.mu_d) << ','
           << fmt(r.expected_delay) << ',' << fmt(r.sim_throughput) << ',' << fmt(r.sim_throughput_ci95) << ','
           << status << '\n';
    }
}

}  // namespace qbdmanet
