#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qbdmanet/params.hpp"
#include "qbdmanet/simulator.hpp"

namespace qbdmanet {

/// Arrival rate given either directly or as a fraction of capacity.
/// A load is bound to a rate only once capacity is known (resolve_params).
struct TrafficSpec {
    enum class Kind { rate, load };
    Kind kind = Kind::rate;
    double value = 0.0;
};

/// One parsed configuration document.
///
/// Format: one `key = value` pair per line, `#` starts a comment, blank lines
/// are ignored. Required keys: n, m, q and exactly one of lambda / rho.
/// Optional keys and defaults: delta = 1, mobility = iid, slots = 2000000,
/// warmup_slots = 200000, replications = 10, seed = 1, output_dir (unset).
struct Config {
    Topology topology;
    TrafficSpec traffic;
    Mobility mobility = Mobility::iid;
    std::int64_t slots = 2'000'000;
    std::int64_t warmup_slots = 200'000;
    int replications = 10;
    std::uint64_t seed = 1;
    std::optional<std::string> output_dir;
};

/// Parses a document. `source` labels diagnostics ("<source>:<line>: ...").
/// With `strict`, unknown keys are errors; otherwise they are ignored.
/// Throws ConfigError for syntax problems, missing or duplicate keys and
/// out-of-range values.
Config parse_config(std::string_view text, bool strict = true, std::string_view source = "config");

Config load_config(const std::filesystem::path& path, bool strict = true);

/// Serializes so that parse_config(format_config(c)) == c.
std::string format_config(const Config& config);

/// Binds the traffic spec: a load rho becomes lambda = rho * mu.
NetworkParams resolve_params(const Topology& topology, const TrafficSpec& traffic);

}  // namespace qbdmanet
