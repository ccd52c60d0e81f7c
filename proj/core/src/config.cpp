#include "qbdmanet/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qbdmanet/errors.hpp"
#include "qbdmanet/qbd.hpp"

namespace qbdmanet {

namespace {

constexpr std::array kKnownKeys = {"n",     "m",            "q",            "delta", "lambda",
                                   "rho",   "mobility",     "slots",        "warmup_slots",
                                   "replications", "seed", "output_dir"};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string value;
    int line = 0;
};

class Parser {
public:
    Parser(std::string_view source, std::map<std::string, Entry> entries)
        : source_(source), entries_(std::move(entries)) {}

    [[noreturn]] void fail(int line, const std::string& what) const {
        std::ostringstream os;
        os << source_;
        if (line > 0) os << ':' << line;
        os << ": " << what;
        throw ConfigError(os.str());
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    const Entry& require(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) fail(0, "missing required key '" + key + "'");
        return it->second;
    }

    template <class T>
    T number(const std::string& key) const {
        const Entry& e = require(key);
        T out{};
        const char* begin = e.value.data();
        const char* end = begin + e.value.size();
        const auto [ptr, ec] = std::from_chars(begin, end, out);
        if (ec != std::errc() || ptr != end) fail(e.line, "cannot parse value of '" + key + "': '" + e.value + "'");
        return out;
    }

    template <class T>
    T number_or(const std::string& key, T fallback) const {
        return has(key) ? number<T>(key) : fallback;
    }

    int line_of(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

private:
    std::string_view source_;
    std::map<std::string, Entry> entries_;
};

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), ptr);
}

}  // namespace

Config parse_config(std::string_view text, bool strict, std::string_view source) {
    std::map<std::string, Entry> entries;
    int line_no = 0;
    std::size_t pos = 0;
    const auto error_at = [&](int line, const std::string& what) {
        std::ostringstream os;
        os << source << ':' << line << ": " << what;
        throw ConfigError(os.str());
    };
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) error_at(line_no, "expected 'key = value', got '" + std::string(line) + "'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) error_at(line_no, "empty key");
        if (value.empty()) error_at(line_no, "empty value for '" + key + "'");
        bool known = false;
        for (const char* k : kKnownKeys) known = known || key == k;
        if (!known) {
            if (strict) error_at(line_no, "unknown key '" + key + "'");
            continue;
        }
        if (entries.count(key)) error_at(line_no, "duplicate key '" + key + "'");
        entries.emplace(key, Entry{value, line_no});
    }

    Parser p(source, std::move(entries));
    Config c;
    const int n = p.number<int>("n");
    const int m = p.number<int>("m");
    const double q = p.number<double>("q");
    const double delta = p.number_or<double>("delta", 1.0);
    try {
        c.topology = build_topology(n, m, q, delta);
    } catch (const ParamError& e) {
        const std::string msg = e.what();
        int line = 0;
        for (const char* k : {"n", "m", "q", "delta"})
            if (msg.find(std::string("invalid ") + k + ":") == 0) line = p.line_of(k);
        p.fail(line, msg);
    }

    const bool has_rate = p.has("lambda");
    const bool has_load = p.has("rho");
    if (has_rate == has_load) p.fail(0, "exactly one of 'lambda' or 'rho' is required");
    if (has_rate) {
        c.traffic = {TrafficSpec::Kind::rate, p.number<double>("lambda")};
        if (!(c.traffic.value > 0.0 && c.traffic.value < 1.0))
            p.fail(p.line_of("lambda"), "invalid lambda: must satisfy 0 < lambda < 1 (got " + format_double(c.traffic.value) + ")");
    } else {
        c.traffic = {TrafficSpec::Kind::load, p.number<double>("rho")};
        if (!(c.traffic.value > 0.0) || !std::isfinite(c.traffic.value))
            p.fail(p.line_of("rho"), "invalid rho: must satisfy rho > 0 (got " + format_double(c.traffic.value) + ")");
    }

    if (p.has("mobility")) {
        const Entry& e = p.require("mobility");
        try {
            c.mobility = parse_mobility(e.value);
        } catch (const std::exception& ex) {
            p.fail(e.line, ex.what());
        }
    }
    c.slots = p.number_or<std::int64_t>("slots", c.slots);
    c.warmup_slots = p.number_or<std::int64_t>("warmup_slots", c.warmup_slots);
    c.replications = p.number_or<int>("replications", c.replications);
    c.seed = p.number_or<std::uint64_t>("seed", c.seed);
    if (c.slots <= 0) p.fail(p.line_of("slots"), "invalid slots: must be positive");
    if (c.warmup_slots < 0) p.fail(p.line_of("warmup_slots"), "invalid warmup_slots: must be non-negative");
    if (c.replications < 1) p.fail(p.line_of("replications"), "invalid replications: must be at least 1");
    if (p.has("output_dir")) c.output_dir = p.require("output_dir").value;
    return c;
}

Config load_config(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), strict, path.string());
}

std::string format_config(const Config& c) {
    std::ostringstream os;
    os << "n = " << c.topology.n << '\n';
    os << "m = " << c.topology.m << '\n';
    os << "q = " << format_double(c.topology.q) << '\n';
    os << "delta = " << format_double(c.topology.delta) << '\n';
    os << (c.traffic.kind == TrafficSpec::Kind::rate ? "lambda = " : "rho = ") << format_double(c.traffic.value)
       << '\n';
    os << "mobility = " << to_string(c.mobility) << '\n';
    os << "slots = " << c.slots << '\n';
    os << "warmup_slots = " << c.warmup_slots << '\n';
    os << "replications = " << c.replications << '\n';
    os << "seed = " << c.seed << '\n';
    if (c.output_dir) os << "output_dir = " << *c.output_dir << '\n';
    return os.str();
}

NetworkParams resolve_params(const Topology& topology, const TrafficSpec& traffic) {
    if (traffic.kind == TrafficSpec::Kind::rate) return with_lambda(topology, traffic.value);
    return with_lambda(topology, traffic.value * capacity(topology).mu);
}

}  // namespace qbdmanet
