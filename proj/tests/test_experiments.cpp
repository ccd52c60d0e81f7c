#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "doctest.h"

#include "qbdmanet/config.hpp"
#include "qbdmanet/errors.hpp"
#include "qbdmanet/experiments.hpp"

using namespace qbdmanet;

TEST_CASE("sign-change counting on discrete curves") {
    CHECK(difference_sign_changes({1, 2, 3, 4}) == 0);
    CHECK(difference_sign_changes({4, 3, 2, 3, 4}) == 1);
    CHECK(difference_sign_changes({1, 3, 2, 4}) == 2);
    CHECK(is_u_shaped({5, 3, 2, 2.5, 7}));
    CHECK_FALSE(is_u_shaped({5, 3, 3, 4}));  // a flat step is not strict
    CHECK_FALSE(is_u_shaped({1, 2, 3}));
    CHECK_FALSE(is_u_shaped({3, 2, 1}));
    CHECK_FALSE(is_u_shaped({3, 1, 2, 1, 3}));
    CHECK(is_unimodal({1, 4, 6, 2}));
    CHECK_FALSE(is_unimodal({1, 4, 6, 8}));
    CHECK_FALSE(is_unimodal({6, 4, 2}));
}

TEST_CASE("open unit grid") {
    const auto g = open_unit_grid(20);
    REQUIRE(g.size() == 20);
    CHECK(g.front() == doctest::Approx(1.0 / 21.0));
    CHECK(g.back() == doctest::Approx(20.0 / 21.0));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("geometric q grid") {
    const auto g = q_sweep_grid();
    REQUIRE(g.size() == 20);
    CHECK(g.front() == 0.005);
    CHECK(g.back() == 0.95);
    for (std::size_t i = 2; i < g.size(); ++i)
        CHECK(g[i] / g[i - 1] == doctest::Approx(g[1] / g[0]).epsilon(1e-12));
    CHECK(geometric_grid(0.2, 0.2, 1) == std::vector<double>{0.2});
}

TEST_CASE("delay is U-shaped and capacity unimodal in q") {
    double max_mu_80 = 0.0;
    double max_mu_larger = 0.0;
    for (const int n : {80, 300, 500}) {
        SweepSpec mu_spec = default_sweep(SweepKind::mu_vs_q);
        mu_spec.n_values = {n};
        std::vector<double> mu;
        for (const auto& r : run_sweep(mu_spec)) mu.push_back(r.cap.mu);
        INFO("n=" << n);
        CHECK(is_unimodal(mu));
        const double peak = *std::max_element(mu.begin(), mu.end());
        if (n == 80) max_mu_80 = peak;
        else max_mu_larger = std::max(max_mu_larger, peak);

        SweepSpec d_spec = default_sweep(SweepKind::delay_vs_q);
        d_spec.n_values = {n};
        std::vector<double> delay;
        for (const auto& r : run_sweep(d_spec)) {
            REQUIRE(r.status == "ok");
            delay.push_back(r.expected_delay);
        }
        CHECK(is_u_shaped(delay));
    }
    CHECK(max_mu_80 > max_mu_larger);
}

TEST_CASE("delay grows with load in the reference scenario") {
    const auto rows = run_sweep(default_sweep(SweepKind::delay_vs_rho));
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].expected_delay > rows[i - 1].expected_delay);
}

TEST_CASE("loads past capacity are reported, not thrown") {
    SweepSpec s = default_sweep(SweepKind::delay_vs_rho);
    s.n_values = {50};
    s.m = 8;
    s.loads = {0.5, 1.2};
    const auto rows = run_sweep(s);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].status == "ok");
    CHECK(rows[1].status == "unstable");
    CHECK(std::isnan(rows[1].expected_delay));
}

TEST_CASE("empty sweep grids are usage errors") {
    SweepSpec s = default_sweep(SweepKind::mu_vs_q);
    s.q_values.clear();
    CHECK_THROWS_AS(run_sweep(s), ConfigError);
    s = default_sweep(SweepKind::delay_vs_q);
    s.loads.clear();
    CHECK_THROWS_AS(run_sweep(s), ConfigError);
    s = default_sweep(SweepKind::mu_vs_q);
    s.n_values.clear();
    CHECK_THROWS_AS(run_sweep(s), ConfigError);
    CHECK_THROWS_AS(parse_sweep_kind("nope"), ConfigError);
    CHECK(parse_sweep_kind("throughput-vs-lambda") == SweepKind::throughput_vs_lambda);
}

TEST_CASE("sweep CSV is identical across reruns and thread counts") {
    SweepSpec s = default_sweep(SweepKind::throughput_vs_lambda);
    s.sim.slots = 60'000;
    s.sim.warmup = 10'000;
    s.sim.replications = 2;
    s.loads = {0.5, 1.5};
    std::string first;
    for (const int threads : {1, 3, 1}) {
        s.sim.threads = threads;
        std::ostringstream os;
        write_sweep_csv(os, s.kind, run_sweep(s));
        if (first.empty()) first = os.str();
        CHECK(os.str() == first);
    }
    CHECK(first.rfind("kind,n,m,q,load,lambda,mu,mu_s,mu_d,expected_delay_slots,sim_throughput,"
                      "sim_throughput_ci95,status\n",
                      0) == 0);
}

TEST_CASE("replications are assembled independently of scheduling") {
    SimulationRequest req;
    const Topology t = build_topology(10, 8, 0.3);
    req.params = resolve_params(t, {TrafficSpec::Kind::load, 0.5});
    req.slots = 80'000;
    req.warmup = 8'000;
    req.replications = 4;
    req.seed = 21;
    req.threads = 1;
    const SimulationResult a = simulate(req);
    req.threads = 4;
    const SimulationResult b = simulate(req);
    REQUIRE(a.replications.size() == b.replications.size());
    for (std::size_t k = 0; k < a.replications.size(); ++k)
        CHECK(a.replications[k].delay_samples == b.replications[k].delay_samples);
    CHECK(a.summary.mean_delay == b.summary.mean_delay);
    CHECK(a.summary.ci95_halfwidth == b.summary.ci95_halfwidth);
    CHECK(simulation_summary_json(req, a) == simulation_summary_json(req, b));
}

TEST_CASE("summary JSON carries the documented fields") {
    SimulationRequest req;
    req.params = resolve_params(build_topology(8, 8, 0.3), {TrafficSpec::Kind::load, 0.4});
    req.slots = 30'000;
    req.warmup = 3'000;
    req.replications = 2;
    req.keep_records = true;
    const SimulationResult res = simulate(req);
    const std::string json = simulation_summary_json(req, res);
    for (const char* key : {"\"params\"", "\"mobility\"", "\"mean_delay_slots\"", "\"ci95\"",
                            "\"per_node_throughput\"", "\"replications\"", "\"slots\""})
        CHECK(json.find(key) != std::string::npos);
    std::ostringstream csv;
    write_records_csv(csv, res.replications[0]);
    CHECK(csv.str().rfind("flow,id,gen_slot,deliver_slot\n", 0) == 0);
}

TEST_CASE("analysis JSON carries the documented fields") {
    const QbdSolution s = expected_delay(resolve_params(build_topology(20, 8, 0.3), {TrafficSpec::Kind::load, 0.5}));
    const std::string json = analysis_json(s);
    for (const char* key : {"\"params\"", "\"mu\"", "\"mu_s\"", "\"mu_d\"", "\"L1_bar\"", "\"L2_bar\"",
                            "\"expected_delay_slots\"", "\"sp_R\"", "\"residuals\""})
        CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("campaign definitions") {
    CHECK(campaign_scenarios("fig4-mini").size() == 9);
    CHECK(campaign_scenarios("fig5-mini").size() == 21);
    CampaignOptions iid;
    iid.iid_only = true;
    const auto fig5 = campaign_scenarios("fig5-mini", iid);
    CHECK(fig5.size() == 7);
    for (const auto& s : fig5) {
        CHECK(s.mobility == Mobility::iid);
        CHECK(s.gated);
    }
    for (const auto& s : campaign_scenarios("fig5-mini"))
        CHECK(s.gated == (s.mobility == Mobility::iid));
    const auto fig7 = campaign_scenarios("fig7-sweep");
    CHECK(fig7.size() == 60);
    for (const auto& s : fig7) CHECK_FALSE(s.simulate);
    CHECK_THROWS_AS(campaign_scenarios("fig9"), ConfigError);
}

TEST_CASE("analytic-only campaign passes on curve shape") {
    const auto rows = run_campaign("fig7-sweep", {});
    CHECK(rows.size() == 60);
    CHECK(campaign_passed(rows));
    std::ostringstream os;
    write_validation_csv(os, rows);
    std::istringstream in(os.str());
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "scenario,theory_delay,sim_delay,ci95,rel_err,pass");
    CHECK(first.find(",,,,true") != std::string::npos);
}

TEST_CASE("agreement rule") {
    CHECK(delay_agrees(100.0, 104.9, 0.0));
    CHECK_FALSE(delay_agrees(100.0, 105.1, 0.0));
    CHECK(delay_agrees(100.0, 120.0, 21.0));
    CHECK_FALSE(delay_agrees(100.0, NAN, 1e9));
}

TEST_CASE("worker pool runs every task once and propagates failures") {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
    parallel_for(0, 4, [](std::size_t) { FAIL("no tasks expected"); });
}
