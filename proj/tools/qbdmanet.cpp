// qbdmanet: command-line front end for the analytic model and the simulator.
//
// Exit codes: 0 success, 1 validation failure, 2 configuration or usage error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qbdmanet/config.hpp"
#include "qbdmanet/errors.hpp"
#include "qbdmanet/experiments.hpp"
#include "qbdmanet/mc_oracle.hpp"
#include "qbdmanet/probabilities.hpp"
#include "qbdmanet/qbd.hpp"

namespace fs = std::filesystem;
using namespace qbdmanet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr const char* kOutputEnv = "QBDMANET_OUTPUT_DIR";

// Options that map one-to-one onto config keys. A value given on the command
// line replaces the key from --config.
struct ParamOptions {
    std::string config_path;
    bool lenient = false;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App* app, bool with_run_settings) {
        app->add_option("--config", config_path, "key = value config file");
        app->add_flag("--lenient", lenient, "ignore unknown config keys");
        add(app, "n", "--n", "number of nodes");
        add(app, "m", "--m", "cells per side");
        add(app, "q", "--q", "packet-broadcast probability");
        add(app, "delta", "--delta", "guard factor");
        add(app, "lambda", "--lambda", "per-source arrival rate (packets/slot)");
        add(app, "rho", "--rho", "load lambda/mu");
        add(app, "seed", "--seed", "base random seed (overrides config)");
        if (with_run_settings) {
            add(app, "mobility", "--mobility", "iid | random_walk | random_waypoint");
            add(app, "slots", "--slots", "slots per replication");
            add(app, "warmup_slots", "--warmup", "warmup slots discarded per replication");
            add(app, "replications", "--replications", "independent replications");
        }
        add(app, "output_dir", "--out", "output directory");
    }

    void add(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { overrides[key] = v; }, help);
    }

    Config load() const {
        std::string text;
        std::string source = "command line";
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError(config_path + ": cannot open config file");
            std::ostringstream buf;
            buf << in.rdbuf();
            text = buf.str();
            source = config_path;
        }
        std::map<std::string, std::string> ov = overrides;
        std::vector<std::string> drop;
        for (const auto& [key, value] : ov) drop.push_back(key);
        if (ov.count("lambda")) drop.push_back("rho");
        if (ov.count("rho")) drop.push_back("lambda");

        // Blank out overridden lines rather than deleting them so that line
        // numbers in diagnostics still match the file.
        std::ostringstream merged;
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto eq = line.find('=');
            const auto hash = line.find('#');
            if (eq != std::string::npos && (hash == std::string::npos || eq < hash)) {
                std::string key = line.substr(0, eq);
                key.erase(0, key.find_first_not_of(" \t"));
                key.erase(key.find_last_not_of(" \t") + 1);
                if (std::find(drop.begin(), drop.end(), key) != drop.end()) line.clear();
            }
            merged << line << '\n';
        }
        for (const auto& [key, value] : ov) merged << key << " = " << value << '\n';
        return parse_config(merged.str(), !lenient, source);
    }
};

fs::path output_dir(const Config& c) {
    if (c.output_dir) return *c.output_dir;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return "results";
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& flag, const std::string& s) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) {
        std::istringstream in(item);
        T v{};
        if (!(in >> v) || !in.eof()) throw ConfigError(flag + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    return out;
}

int cmd_analyze(const ParamOptions& po, bool write_table, bool write_output) {
    const Config c = po.load();
    const NetworkParams params = resolve_params(c.topology, c.traffic);
    const QbdSolution sol = expected_delay(params);
    const std::string json = analysis_json(sol);
    std::cout << json << '\n';
    if (write_output) {
        const fs::path dir = output_dir(c);
        write_file(dir / "analysis.json", json + "\n");
        if (write_table) {
            std::ostringstream csv;
            write_table_csv(csv, sol.table);
            write_file(dir / "probabilities.csv", csv.str());
        }
    }
    return kExitOk;
}

int cmd_simulate(const ParamOptions& po, int threads, bool no_records) {
    const Config c = po.load();
    SimulationRequest req;
    req.params = resolve_params(c.topology, c.traffic);
    req.mobility = c.mobility;
    req.slots = c.slots;
    req.warmup = c.warmup_slots;
    req.replications = c.replications;
    req.seed = c.seed;
    req.threads = threads;
    req.keep_records = !no_records;
    const SimulationResult res = simulate(req);

    const fs::path dir = output_dir(c);
    fs::create_directories(dir);
    if (!no_records) {
        for (std::size_t k = 0; k < res.replications.size(); ++k) {
            std::ostringstream name;
            name << "replication_" << std::setw(3) << std::setfill('0') << k << ".csv";
            std::ofstream out(dir / name.str());
            write_records_csv(out, res.replications[k]);
        }
    }
    const std::string json = simulation_summary_json(req, res);
    write_file(dir / "summary.json", json + "\n");
    std::cout << json << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& campaign, const CampaignOptions& opts, const std::string& out_flag) {
    const auto rows = run_campaign(campaign, opts);
    std::ostringstream csv;
    write_validation_csv(csv, rows);
    std::cout << csv.str();
    fs::path dir = out_flag;
    if (dir.empty()) {
        const char* env = std::getenv(kOutputEnv);
        dir = env && *env ? fs::path(env) : fs::path("results");
    }
    write_file(dir / ("validate_" + campaign + ".csv"), csv.str());
    const bool ok = campaign_passed(rows);
    std::cerr << campaign << ": " << (ok ? "all gated rows pass" : "some gated rows FAIL") << '\n';
    return ok ? kExitOk : kExitFailed;
}

int cmd_oracle(const ParamOptions& po, std::int64_t trials, double sigmas) {
    const Config c = po.load();
    const NetworkParams params = resolve_params(c.topology, c.traffic);
    const ProbabilityTable table = compute_table(params);
    const OracleEstimates est = estimate_probabilities(params, table.lambda_prime, trials, c.seed);
    const auto checks = compare_with_table(est, table, sigmas);
    bool ok = true;
    std::ostringstream csv;
    csv << "quantity,j,closed_form,estimate,std_error,z,p_value,pass\n";
    csv << std::setprecision(10);
    for (const auto& ch : checks) {
        csv << ch.quantity << ',' << ch.j << ',' << ch.closed_form << ',' << ch.estimate << ',' << ch.std_error << ','
            << ch.z << ',' << ch.p_value << ',' << (ch.pass ? "true" : "false") << '\n';
        ok = ok && ch.pass;
    }
    std::cout << csv.str();
    if (c.output_dir) write_file(fs::path(*c.output_dir) / "oracle.csv", csv.str());
    return ok ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay and capacity of two-hop relay MANETs: QBD model and slotted simulator"};
    app.require_subcommand(1);

    ParamOptions analyze_opts;
    bool analyze_table = false;
    auto* analyze = app.add_subcommand("analyze", "capacity and expected end-to-end delay (JSON)");
    analyze_opts.attach(analyze, false);
    analyze->add_flag("--table", analyze_table, "also write the per-slot probability table as CSV");

    ParamOptions sim_opts;
    int sim_threads = 0;
    bool sim_no_records = false;
    auto* sim = app.add_subcommand("simulate", "run simulation replications");
    sim_opts.attach(sim, true);
    sim->add_option("--threads", sim_threads, "worker threads (0 = all cores)");
    sim->add_flag("--no-records", sim_no_records, "skip per-packet CSV output");

    std::string campaign;
    CampaignOptions camp;
    std::string validate_out;
    auto* validate = app.add_subcommand("validate", "theory-vs-simulation campaign (CSV)");
    validate->add_option("--campaign", campaign, "fig4-mini | fig5-mini | fig7-sweep")->required();
    validate->add_option("--replications", camp.replications, "replications per point")->check(CLI::PositiveNumber);
    validate->add_option("--slots", camp.slots, "slots per replication")->check(CLI::PositiveNumber);
    validate->add_option("--warmup", camp.warmup, "warmup slots")->check(CLI::NonNegativeNumber);
    validate->add_option("--seed", camp.seed, "base random seed");
    validate->add_option("--threads", camp.threads, "worker threads (0 = all cores)");
    validate->add_flag("--iid-only", camp.iid_only, "skip random_walk / random_waypoint rows");
    validate->add_option("--out", validate_out, "output directory");

    std::string sweep_kind;
    std::string sweep_n, sweep_q, sweep_load, sweep_out;
    int sweep_m = 0;
    CampaignOptions sweep_sim;
    auto* sweep = app.add_subcommand("sweep", "parameter sweep (CSV)");
    sweep->add_option("--kind", sweep_kind, "mu-vs-q | delay-vs-q | delay-vs-rho | throughput-vs-lambda")->required();
    auto* n_opt = sweep->add_option("--n", sweep_n, "comma-separated node counts");
    auto* q_opt = sweep->add_option("--q", sweep_q, "comma-separated broadcast probabilities");
    auto* load_opt = sweep->add_option("--load", sweep_load, "comma-separated rho (or lambda/mu for throughput)");
    sweep->add_option("--m", sweep_m, "cells per side");
    sweep->add_option("--replications", sweep_sim.replications, "throughput sweep replications");
    sweep->add_option("--slots", sweep_sim.slots, "throughput sweep slots");
    sweep->add_option("--seed", sweep_sim.seed, "base random seed");
    sweep->add_option("--threads", sweep_sim.threads, "worker threads (0 = all cores)");
    sweep->add_option("--out", sweep_out, "output directory");

    ParamOptions oracle_opts;
    std::int64_t oracle_trials = 1'000'000;
    double oracle_sigmas = 3.0;
    auto* oracle = app.add_subcommand("oracle", "Monte-Carlo check of the per-slot probabilities");
    oracle_opts.attach(oracle, false);
    oracle->add_option("--trials", oracle_trials, "single-slot trials")->check(CLI::PositiveNumber);
    oracle->add_option("--sigmas", oracle_sigmas, "tolerance in standard errors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*analyze) return cmd_analyze(analyze_opts, analyze_table, analyze_opts.overrides.count("output_dir") ||
                                                                          std::getenv(kOutputEnv) || analyze_table);
        if (*sim) return cmd_simulate(sim_opts, sim_threads, sim_no_records);
        if (*validate) return cmd_validate(campaign, camp, validate_out);
        if (*sweep) {
            const SweepKind kind = parse_sweep_kind(sweep_kind);
            SweepSpec spec = default_sweep(kind);
            if (*n_opt) spec.n_values = parse_list<int>("--n", sweep_n);
            if (*q_opt) spec.q_values = parse_list<double>("--q", sweep_q);
            if (*load_opt) spec.loads = parse_list<double>("--load", sweep_load);
            if (sweep_m > 0) spec.m = sweep_m;
            if (sweep->count("--replications")) spec.sim.replications = sweep_sim.replications;
            spec.sim.seed = sweep_sim.seed;
            spec.sim.threads = sweep_sim.threads;
            if (sweep->count("--slots")) spec.sim.slots = sweep_sim.slots;
            const auto rows = run_sweep(spec);
            std::ostringstream csv;
            write_sweep_csv(csv, kind, rows);
            std::cout << csv.str();
            fs::path dir = sweep_out;
            if (dir.empty()) {
                const char* env = std::getenv(kOutputEnv);
                dir = env && *env ? fs::path(env) : fs::path("results");
            }
            write_file(dir / ("sweep_" + std::string(to_string(kind)) + ".csv"), csv.str());
            return kExitOk;
        }
        if (*oracle) return cmd_oracle(oracle_opts, oracle_trials, oracle_sigmas);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParamError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const StabilityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailed;
    }
    return kExitConfig;
}
