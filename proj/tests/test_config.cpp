#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "qbdmanet/config.hpp"
#include "qbdmanet/errors.hpp"
#include "qbdmanet/qbd.hpp"

using namespace qbdmanet;

namespace {

std::string config_error(const std::string& text, bool strict = true) {
    try {
        parse_config(text, strict, "test.conf");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("minimal config takes documented defaults") {
    const Config c = parse_config("n = 50\nm = 8\nq = 0.4\nlambda = 1e-4\n");
    CHECK(c.topology.n == 50);
    CHECK(c.topology.m == 8);
    CHECK(c.topology.q == 0.4);
    CHECK(c.topology.delta == 1.0);
    CHECK(c.topology.alpha == 8);
    CHECK(c.traffic.kind == TrafficSpec::Kind::rate);
    CHECK(c.traffic.value == 1e-4);
    CHECK(c.mobility == Mobility::iid);
    CHECK(c.slots == 2'000'000);
    CHECK(c.warmup_slots == 200'000);
    CHECK(c.replications == 10);
    CHECK(c.seed == 1);
    CHECK_FALSE(c.output_dir.has_value());
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
    const Config c = parse_config(
        "# scenario\n\n  n=20   # nodes\n\tm =8\nq= 0.3\r\nrho = 0.6\nmobility = random_walk\nseed = 12345678901\n");
    CHECK(c.topology.n == 20);
    CHECK(c.traffic.kind == TrafficSpec::Kind::load);
    CHECK(c.traffic.value == 0.6);
    CHECK(c.mobility == Mobility::random_walk);
    CHECK(c.seed == 12345678901ULL);
}

TEST_CASE("load binds to capacity after parsing") {
    const Config c = parse_config("n = 100\nm = 8\nq = 0.3\nrho = 0.5\n");
    const NetworkParams p = resolve_params(c.topology, c.traffic);
    CHECK(p.lambda == doctest::Approx(0.5 * capacity(c.topology).mu).epsilon(1e-15));
    const Config r = parse_config("n = 100\nm = 8\nq = 0.3\nlambda = 2e-4\n");
    CHECK(resolve_params(r.topology, r.traffic).lambda == 2e-4);
}

TEST_CASE("q = 1 is a validation error pointing at its line") {
    const std::string e = config_error("n = 100\nm = 8\nq = 1.0\nlambda = 1e-4\n");
    CHECK(contains(e, "test.conf:3"));
    CHECK(contains(e, "invalid q"));
}

TEST_CASE("diagnostics for malformed documents") {
    CHECK(contains(config_error("m = 8\nq = 0.3\nlambda = 1e-4\n"), "missing required key 'n'"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\n"), "exactly one of 'lambda' or 'rho'"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1e-4\nrho = 0.5\n"), "exactly one"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1e-4\ncolour = red\n"), "test.conf:5: unknown key"));
    CHECK(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1e-4\ncolour = red\n", false).empty());
    CHECK(contains(config_error("n = 10\nm = 8\nm = 9\nq = 0.3\nlambda = 1e-4\n"), "test.conf:3: duplicate key"));
    CHECK(contains(config_error("n = 10\nm eight\n"), "test.conf:2: expected 'key = value'"));
    CHECK(contains(config_error("n = ten\nm = 8\nq = 0.3\nlambda = 1e-4\n"), "test.conf:1: cannot parse value of 'n'"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3x\nlambda = 1e-4\n"), "cannot parse value of 'q'"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1e-4\nmobility = teleport\n"), "test.conf:5"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1e-4\nreplications = 0\n"), "invalid replications"));
    CHECK(contains(config_error("n = 3\nm = 8\nq = 0.3\nlambda = 1e-4\n"), "test.conf:1: invalid n"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda = 1.5\n"), "test.conf:4: invalid lambda"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nrho = -1\n"), "invalid rho"));
    CHECK(contains(config_error("n = 10\nm = 8\nq = 0.3\nlambda =\n"), "empty value"));
}

TEST_CASE("format and parse round-trip") {
    Config c = parse_config(
        "n = 37\nm = 11\nq = 0.123456789012345\ndelta = 0.75\nrho = 0.3333333333333333\nmobility = random_waypoint\n"
        "slots = 123456\nwarmup_slots = 2345\nreplications = 4\nseed = 18446744073709551615\noutput_dir = out/x\n");
    const Config d = parse_config(format_config(c));
    CHECK(d.topology.n == c.topology.n);
    CHECK(d.topology.m == c.topology.m);
    CHECK(d.topology.q == c.topology.q);
    CHECK(d.topology.delta == c.topology.delta);
    CHECK(d.topology.alpha == c.topology.alpha);
    CHECK(d.traffic.kind == c.traffic.kind);
    CHECK(d.traffic.value == c.traffic.value);
    CHECK(d.mobility == c.mobility);
    CHECK(d.slots == c.slots);
    CHECK(d.warmup_slots == c.warmup_slots);
    CHECK(d.replications == c.replications);
    CHECK(d.seed == c.seed);
    CHECK(d.output_dir == c.output_dir);
    CHECK(format_config(d) == format_config(c));
}

TEST_CASE("load_config reads files and reports missing ones") {
    const auto path = std::filesystem::temp_directory_path() / "qbdmanet_test_config.conf";
    {
        std::ofstream out(path);
        out << "n = 12\nm = 8\nq = 0.2\nlambda = 3e-4\n";
    }
    const Config c = load_config(path);
    CHECK(c.topology.n == 12);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path), ConfigError);
}
