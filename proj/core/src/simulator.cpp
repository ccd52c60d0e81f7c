#include "qbdmanet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qbdmanet/errors.hpp"

namespace qbdmanet {

namespace {

int uniform_below(Rng& rng, int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng); }

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

int torus_gap(int a, int b, int m) {
    const int d = std::abs(a - b) % m;
    return std::min(d, m - d);
}

double torus_gap(double a, double b) {
    const double d = std::fabs(a - b);
    return std::min(d, 1.0 - d);
}

// Random derangement by rejection; the acceptance rate is about 1/e.
std::vector<int> random_derangement(int n, Rng& rng) {
    std::vector<int> perm(n);
    for (;;) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) ok = perm[i] != i;
        if (ok) return perm;
    }
}

}  // namespace

std::string_view to_string(Mobility mobility) {
    switch (mobility) {
        case Mobility::iid: return "iid";
        case Mobility::random_walk: return "random_walk";
        case Mobility::random_waypoint: return "random_waypoint";
    }
    return "unknown";
}

Mobility parse_mobility(std::string_view name) {
    if (name == "iid") return Mobility::iid;
    if (name == "random_walk") return Mobility::random_walk;
    if (name == "random_waypoint") return Mobility::random_waypoint;
    throw ParamError("invalid mobility: must be one of iid|random_walk|random_waypoint (got " + std::string(name) + ")");
}

std::uint64_t replication_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// IdFifo

void IdFifo::pop_front() {
    ++head_;
    compact();
}

bool IdFifo::contains(PacketId id) const {
    const auto first = ids_.begin() + static_cast<std::ptrdiff_t>(head_);
    return std::binary_search(first, ids_.end(), id);
}

void IdFifo::purge_through(PacketId id) {
    const auto first = ids_.begin() + static_cast<std::ptrdiff_t>(head_);
    head_ = static_cast<std::size_t>(std::upper_bound(first, ids_.end(), id) - ids_.begin());
    compact();
}

void IdFifo::compact() {
    if (head_ == ids_.size()) {
        ids_.clear();
        head_ = 0;
    } else if (head_ >= 64 && head_ * 2 >= ids_.size()) {
        ids_.erase(ids_.begin(), ids_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
    }
}

// ---------------------------------------------------------------------------
// SimWorld

SimWorld::SimWorld(const NetworkParams& params, Mobility mobility, std::uint64_t seed)
    : rng(seed), params_(params), mobility_(mobility), arrival_rate_(params.lambda) {
    const int n = params.n;
    const int m = params.m;
    nodes.resize(n);
    for (auto& node : nodes) node.relay_queues.resize(n);
    flows.resize(n);

    set_destinations(random_derangement(n, rng));

    cells_.resize(n);
    pos_x_.assign(n, 0.0);
    pos_y_.assign(n, 0.0);
    if (mobility == Mobility::random_waypoint) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            const double x = u(rng);
            const double y = u(rng);
            place_continuous(i, x, y);
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const int c = uniform_below(rng, m * m);
            cells_[i] = Cell{c % m, c / m};
        }
    }

    cell_head_.assign(static_cast<std::size_t>(m) * m, -1);
    next_in_cell_.assign(n, -1);
    rebuild_occupancy();

    next_arrival_.assign(n, 0);
    for (int i = 0; i < n; ++i) schedule_next_arrival(i, -1);
}

void SimWorld::set_destinations(const std::vector<int>& dest) {
    const int n = node_count();
    if (static_cast<int>(dest.size()) != n) throw ParamError("destination map must have one entry per node");
    std::vector<int> source(n, -1);
    for (int i = 0; i < n; ++i) {
        const int d = dest[i];
        if (d < 0 || d >= n || d == i || source[d] != -1)
            throw ParamError("destination map must be a permutation without fixed points");
        source[d] = i;
    }
    dest_ = dest;
    source_ = std::move(source);
}

void SimWorld::place(int node, Cell c) {
    cells_[node] = wrap(c.x, c.y);
    rebuild_occupancy();
}

void SimWorld::place_continuous(int node, double x, double y) {
    const int m = params_.m;
    x -= std::floor(x);
    y -= std::floor(y);
    pos_x_[node] = x;
    pos_y_[node] = y;
    cells_[node] = Cell{std::min(static_cast<int>(x * m), m - 1), std::min(static_cast<int>(y * m), m - 1)};
    if (!cell_head_.empty()) rebuild_occupancy();
}

Cell SimWorld::wrap(int x, int y) const {
    const int m = params_.m;
    return Cell{((x % m) + m) % m, ((y % m) + m) % m};
}

int SimWorld::active_ec() const {
    const auto classes = static_cast<Slot>(params_.alpha) * params_.alpha;
    return static_cast<int>(slot % classes);
}

bool SimWorld::is_active(Cell c) const {
    const int ec = active_ec();
    const int a = params_.alpha;
    return c.x % a == ec % a && c.y % a == ec / a;
}

void SimWorld::set_arrival_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ParamError("arrival rate must satisfy 0 <= rate < 1");
    arrival_rate_ = rate;
    for (int i = 0; i < node_count(); ++i) schedule_next_arrival(i, slot - 1);
}

void SimWorld::schedule_next_arrival(int node, Slot after) {
    if (arrival_rate_ <= 0.0) {
        next_arrival_[node] = std::numeric_limits<Slot>::max();
        return;
    }
    // Gap between Bernoulli successes is geometric; one draw replaces a coin per slot.
    const auto failures = std::geometric_distribution<Slot>(arrival_rate_)(rng);
    next_arrival_[node] = after + 1 + failures;
}

void SimWorld::rebuild_occupancy() {
    for (const int c : occupied_) cell_head_[c] = -1;
    occupied_.clear();
    for (int i = node_count() - 1; i >= 0; --i) {
        const int c = cell_index(cells_[i]);
        if (cell_head_[c] == -1) occupied_.push_back(c);
        next_in_cell_[i] = cell_head_[c];
        cell_head_[c] = i;
    }
}

std::vector<int> SimWorld::nodes_in(Cell c) const {
    std::vector<int> out;
    for (int i = cell_head_[cell_index(wrap(c.x, c.y))]; i != -1; i = next_in_cell_[i]) out.push_back(i);
    return out;
}

int SimWorld::cell_population(Cell c) const {
    int k = 0;
    for (int i = cell_head_[cell_index(wrap(c.x, c.y))]; i != -1; i = next_in_cell_[i]) ++k;
    return k;
}

std::vector<int> SimWorld::coverage_peers(int node) const {
    std::vector<int> out;
    const Cell home = cells_[node];
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            for (int i = cell_head_[cell_index(wrap(home.x + dx, home.y + dy))]; i != -1; i = next_in_cell_[i]) {
                if (i != node) out.push_back(i);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Slot operations

void step_mobility(SimWorld& world) {
    const int n = world.node_count();
    const int m = world.params().m;
    auto& rng = world.rng;
    switch (world.mobility()) {
        case Mobility::iid:
            for (int i = 0; i < n; ++i) {
                const int c = uniform_below(rng, m * m);
                world.cells_[i] = Cell{c % m, c / m};
            }
            break;
        case Mobility::random_walk:
            for (int i = 0; i < n; ++i) {
                const int step = uniform_below(rng, 9);
                const Cell c = world.cells_[i];
                world.cells_[i] = world.wrap(c.x + step % 3 - 1, c.y + step / 3 - 1);
            }
            break;
        case Mobility::random_waypoint: {
            std::uniform_real_distribution<double> hop(1.0 / m, 3.0 / m);
            for (int i = 0; i < n; ++i) {
                double x = world.pos_x_[i] + hop(rng);
                double y = world.pos_y_[i] + hop(rng);
                x -= std::floor(x);
                y -= std::floor(y);
                world.pos_x_[i] = x;
                world.pos_y_[i] = y;
                world.cells_[i] = Cell{std::min(static_cast<int>(x * m), m - 1), std::min(static_cast<int>(y * m), m - 1)};
            }
            break;
        }
    }
    world.rebuild_occupancy();
}

void step_traffic(SimWorld& world) {
    for (int i = 0; i < world.node_count(); ++i) {
        if (world.next_arrival(i) != world.slot) continue;
        auto& node = world.nodes[i];
        const PacketId id = ++node.id_counter;
        node.source_queue.push_back(id);
        world.flows[i].gen_slot.push_back(world.slot);
        world.flows[i].deliver_slot.push_back(kNotDelivered);
        world.schedule_next_arrival(i, world.slot);
    }
}

std::vector<Transmission> schedule_slot(SimWorld& world) {
    std::vector<Transmission> out;
    const int m = world.params().m;
    const int a = world.params().alpha;
    const int ec = world.active_ec();
    for (int y = ec / a; y < m; y += a) {
        for (int x = ec % a; x < m; x += a) {
            const Cell c{x, y};
            const int k = world.cell_population(c);
            if (k == 0) continue;
            const int pick = uniform_below(world.rng, k);
            out.push_back(Transmission{world.nodes_in(c)[pick], c});
        }
    }
    return out;
}

TransmissionOutcome broadcast(SimWorld& world, int s) {
    TransmissionOutcome out;
    out.action = Action::broadcast;
    auto& src = world.nodes[s];
    if (src.source_queue.empty()) return out;

    const PacketId id = src.source_queue.front();
    const int d = world.destination(s);
    out.transmitted = true;
    out.packet = id;
    out.listeners = world.coverage_peers(s);
    for (const int r : out.listeners) {
        if (r == d) {
            auto& dst = world.nodes[d];
            if (dst.ack + 1 == id) {
                dst.ack = id;
                world.flows[s].deliver_slot[id - 1] = world.slot;
                out.delivered = true;
            }
        } else {
            world.nodes[r].relay_queues[d].push_back(id);
        }
    }
    src.source_queue.pop_front();
    src.broadcast_queue.push_back(id);
    return out;
}

TransmissionOutcome deliver(SimWorld& world, int s, int u) {
    TransmissionOutcome out;
    out.action = Action::delivery;
    out.transmitted = true;
    out.receiver = u;
    out.listeners = {u};

    const int v = world.source_of(u);
    auto& holder = world.nodes[s];
    IdFifo& queue = (v == s) ? holder.broadcast_queue : holder.relay_queues[u];
    auto& dst = world.nodes[u];
    const PacketId wanted = dst.ack + 1;
    if (!queue.contains(wanted)) return out;

    world.flows[v].deliver_slot[wanted - 1] = world.slot;
    dst.ack = wanted;
    queue.purge_through(wanted);
    out.packet = wanted;
    out.delivered = true;
    return out;
}

TransmissionOutcome execute_2hr(SimWorld& world, int s) {
    if (coin(world.rng, world.params().q)) return broadcast(world, s);

    const auto peers = world.coverage_peers(s);
    if (peers.empty()) {
        TransmissionOutcome idle;
        idle.action = Action::delivery;
        return idle;
    }
    const int u = peers[uniform_below(world.rng, static_cast<int>(peers.size()))];
    return deliver(world, s, u);
}

int interference_violations(const SimWorld& world, const std::vector<Transmission>& txs,
                            const std::vector<TransmissionOutcome>& outcomes) {
    const auto& p = world.params();
    const double r = p.radio_range;
    const double guard = (1.0 + p.delta) * r;
    constexpr double eps = 1e-12;
    const bool exact = world.mobility() == Mobility::random_waypoint;

    const auto min_dist = [&](int a, int b) {
        if (exact) {
            const auto [ax, ay] = world.position(a);
            const auto [bx, by] = world.position(b);
            return std::hypot(torus_gap(ax, bx), torus_gap(ay, by));
        }
        const Cell ca = world.cell(a);
        const Cell cb = world.cell(b);
        const int gx = std::max(torus_gap(ca.x, cb.x, p.m) - 1, 0);
        const int gy = std::max(torus_gap(ca.y, cb.y, p.m) - 1, 0);
        return std::hypot(gx, gy) / p.m;
    };
    const auto max_dist = [&](int a, int b) {
        if (exact) return min_dist(a, b);
        const Cell ca = world.cell(a);
        const Cell cb = world.cell(b);
        return std::hypot(torus_gap(ca.x, cb.x, p.m) + 1, torus_gap(ca.y, cb.y, p.m) + 1) / p.m;
    };

    int violations = 0;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        if (!outcomes[i].transmitted) continue;
        for (const int listener : outcomes[i].listeners) {
            if (max_dist(txs[i].transmitter, listener) > r + eps) ++violations;
            for (std::size_t k = 0; k < txs.size(); ++k) {
                if (k == i || !outcomes[k].transmitted) continue;
                if (min_dist(txs[k].transmitter, listener) < guard - eps) ++violations;
            }
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Departure statistics

void DepartureTrace::record(bool departed, double x) {
    if (departed) {
        ++departures;
        if (previous && slots > 0) ++lag1_pairs;
        sum_dx += x;
    }
    sum_x += x;
    sum_x2 += x * x;
    previous = departed;
    ++slots;
}

double DepartureTrace::mean() const { return slots ? static_cast<double>(departures) / slots : 0.0; }

double DepartureTrace::lag1_autocorrelation() const {
    if (slots < 2) return 0.0;
    const double mu = mean();
    const double var = mu - mu * mu;
    if (var <= 0.0) return 0.0;
    const double joint = static_cast<double>(lag1_pairs) / (slots - 1);
    return (joint - mu * mu) / var;
}

double DepartureTrace::queue_correlation() const {
    if (slots < 2) return 0.0;
    const double N = static_cast<double>(slots);
    const double mu = mean();
    const double mx = sum_x / N;
    const double var_d = mu - mu * mu;
    const double var_x = sum_x2 / N - mx * mx;
    if (var_d <= 0.0 || var_x <= 0.0) return 0.0;
    return (sum_dx / N - mu * mx) / std::sqrt(var_d * var_x);
}

// ---------------------------------------------------------------------------
// Runs

int advance_slot(SimWorld& world, bool check_interference, DepartureTrace* trace, int tagged) {
    step_mobility(world);
    step_traffic(world);
    const auto txs = schedule_slot(world);
    std::vector<TransmissionOutcome> outcomes;
    outcomes.reserve(txs.size());
    bool tagged_departed = false;
    for (const auto& tx : txs) {
        outcomes.push_back(execute_2hr(world, tx.transmitter));
        const auto& o = outcomes.back();
        if (tx.transmitter == tagged && o.action == Action::broadcast && o.transmitted) tagged_departed = true;
    }
    const int violations = check_interference ? interference_violations(world, txs, outcomes) : 0;
    if (trace != nullptr) {
        trace->record(tagged_departed, static_cast<double>(world.nodes[tagged].source_queue.size()));
    }
    ++world.slot;
    return violations;
}

std::vector<std::string> check_conservation(const SimWorld& world) {
    std::vector<std::string> problems;
    const auto complain = [&](int flow, const std::string& what) {
        std::ostringstream os;
        os << "flow " << flow << ": " << what;
        problems.push_back(os.str());
    };
    const auto increasing = [](const IdFifo& q) {
        const auto ids = q.to_vector();
        return std::adjacent_find(ids.begin(), ids.end(), std::greater_equal<>()) == ids.end();
    };

    const int n = world.node_count();
    for (int s = 0; s < n; ++s) {
        const auto& src = world.nodes[s];
        const int d = world.destination(s);
        const PacketId generated = src.id_counter;
        const PacketId ack = world.nodes[d].ack;
        const auto& log = world.flows[s];

        if (log.gen_slot.size() != generated) complain(s, "log size differs from generated count");
        if (!increasing(src.source_queue) || !increasing(src.broadcast_queue)) complain(s, "source IDs out of order");

        // Source queue must be the undistributed suffix [distributed+1, generated].
        const PacketId distributed = src.source_queue.empty() ? generated : src.source_queue.front() - 1;
        if (!src.source_queue.empty() &&
            (src.source_queue.back() != generated || src.source_queue.size() != generated - distributed))
            complain(s, "source queue is not a contiguous suffix");
        if (ack > distributed) complain(s, "destination acknowledged an undistributed packet");

        for (PacketId id = 1; id <= generated; ++id) {
            const Slot delivered_at = log.deliver_slot[id - 1];
            const bool should_be_delivered = id <= ack;
            if ((delivered_at != kNotDelivered) != should_be_delivered) {
                complain(s, "delivered set is not the prefix 1..ACK at id " + std::to_string(id));
                break;
            }
            if (should_be_delivered && delivered_at < log.gen_slot[id - 1]) complain(s, "delivered before generated");
            if (id > 1 && should_be_delivered && delivered_at < log.deliver_slot[id - 2])
                complain(s, "out-of-order delivery at id " + std::to_string(id));
        }
        if (!src.broadcast_queue.empty() && src.broadcast_queue.back() > distributed)
            complain(s, "broadcast queue holds an undistributed packet");
        // Every distributed, undelivered packet must still be held by its source.
        for (PacketId id = ack + 1; id <= distributed; ++id) {
            if (!src.broadcast_queue.contains(id)) {
                complain(s, "packet " + std::to_string(id) + " lost before delivery");
                break;
            }
        }

        for (int r = 0; r < n; ++r) {
            if (r == s) continue;
            const auto& q = world.nodes[r].relay_queues[d];
            if (!increasing(q)) complain(s, "relay queue IDs out of order at node " + std::to_string(r));
            if (!q.empty() && q.back() > distributed) complain(s, "relay holds an undistributed packet");
        }
    }
    return problems;
}

RunMetrics run(const NetworkParams& params, Mobility mobility, const RunOptions& opt, std::uint64_t seed) {
    if (opt.slots <= 0) throw ParamError("invalid slots: must be > 0");
    if (opt.warmup < 0 || opt.warmup >= opt.slots) throw ParamError("invalid warmup: must satisfy 0 <= warmup < slots");
    if (opt.tagged_source >= params.n) throw ParamError("tagged source out of range");

    SimWorld world(params, mobility, seed);
    const int n = params.n;

    RunMetrics out;
    std::optional<DepartureTrace> trace;
    if (opt.tagged_source >= 0) trace.emplace();

    std::size_t max_relay = 0;
    const auto sample_relay_queues = [&] {
        for (const auto& node : world.nodes)
            for (const auto& q : node.relay_queues) max_relay = std::max(max_relay, q.size());
    };

    // Window packets are those generated in [warmup, slots); IDs are issued in
    // generation order, so per flow they form one contiguous range.
    std::vector<PacketId> first_id(n, 0);
    while (world.slot < opt.slots) {
        if (world.slot == opt.warmup) {
            for (int s = 0; s < n; ++s) first_id[s] = world.nodes[s].id_counter + 1;
        }
        const bool measuring = world.slot >= opt.warmup;
        out.interference_violations +=
            advance_slot(world, opt.check_interference, measuring && trace ? &*trace : nullptr, opt.tagged_source);
        if ((world.slot & 4095) == 0) sample_relay_queues();
    }
    std::vector<PacketId> last_id(n);
    for (int s = 0; s < n; ++s) last_id[s] = world.nodes[s].id_counter;

    if (opt.drain) {
        const auto pending = [&] {
            for (int s = 0; s < n; ++s)
                if (world.nodes[world.destination(s)].ack < last_id[s]) return true;
            return false;
        };
        const Slot stop = opt.drain_limit > std::numeric_limits<Slot>::max() - opt.slots
                              ? std::numeric_limits<Slot>::max()
                              : opt.slots + opt.drain_limit;
        while (world.slot < stop && pending()) {
            out.interference_violations += advance_slot(world, opt.check_interference);
            if ((world.slot & 4095) == 0) sample_relay_queues();
        }
    }
    sample_relay_queues();

    const Slot window = opt.slots - opt.warmup;
    out.slots_observed = window;
    out.generated_count.assign(n, 0);
    out.delivered_count.assign(n, 0);
    out.window_deliveries.assign(n, 0);
    double throughput_sum = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto& log = world.flows[s];
        for (PacketId id = first_id[s]; id <= last_id[s]; ++id) {
            const Slot gen = log.gen_slot[id - 1];
            const Slot del = log.deliver_slot[id - 1];
            ++out.generated_count[s];
            if (del == kNotDelivered) {
                ++out.censored;
            } else {
                ++out.delivered_count[s];
                out.delay_samples.push_back(static_cast<double>(del - gen + 1));
            }
            if (opt.keep_records) out.records.push_back(Packet{s, world.destination(s), id, gen, del});
        }
        for (const Slot del : log.deliver_slot) {
            if (del >= opt.warmup && del < opt.slots) ++out.window_deliveries[s];
        }
        throughput_sum += static_cast<double>(out.window_deliveries[s]) / static_cast<double>(window);
    }
    out.per_node_throughput = throughput_sum / n;
    out.mean_delay = out.delay_samples.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : std::accumulate(out.delay_samples.begin(), out.delay_samples.end(), 0.0) /
                               static_cast<double>(out.delay_samples.size());
    out.max_relay_queue = max_relay;
    out.departures = trace;
    return out;
}

}  // namespace qbdmanet
