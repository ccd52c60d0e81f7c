#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qbdmanet/params.hpp"

namespace qbdmanet {

enum class Mobility { iid, random_walk, random_waypoint };

std::string_view to_string(Mobility mobility);
/// Accepts "iid", "random_walk", "random_waypoint". Throws ParamError otherwise.
Mobility parse_mobility(std::string_view name);

using Rng = std::mt19937_64;
using PacketId = std::uint32_t;
using Slot = std::int64_t;

constexpr Slot kNotDelivered = -1;

/// Derives the seed of replication `index` from a base seed (splitmix64).
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t index);

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct Packet {
    int source = 0;
    int destination = 0;
    PacketId id = 0;
    Slot gen_slot = 0;
    Slot deliver_slot = kNotDelivered;
};

/// FIFO of packet IDs. IDs enter in increasing order, which keeps lookup and
/// purge logarithmic.
class IdFifo {
public:
    bool empty() const { return head_ == ids_.size(); }
    std::size_t size() const { return ids_.size() - head_; }
    PacketId front() const { return ids_[head_]; }
    PacketId back() const { return ids_.back(); }
    void push_back(PacketId id) { ids_.push_back(id); }
    void pop_front();
    bool contains(PacketId id) const;
    /// Drops every ID <= id.
    void purge_through(PacketId id);
    std::vector<PacketId> to_vector() const { return {ids_.begin() + static_cast<std::ptrdiff_t>(head_), ids_.end()}; }

private:
    void compact();

    std::vector<PacketId> ids_;
    std::size_t head_ = 0;
};

struct NodeState {
    IdFifo source_queue;              ///< generated here, not yet broadcast
    IdFifo broadcast_queue;           ///< broadcast, not yet acknowledged
    std::vector<IdFifo> relay_queues; ///< indexed by destination node
    PacketId id_counter = 0;          ///< ID of the last generated packet
    PacketId ack = 0;                 ///< as a destination: last in-order packet received
};

/// Generation and delivery slots of every packet of one flow, indexed by ID-1.
struct FlowLog {
    std::vector<Slot> gen_slot;
    std::vector<Slot> deliver_slot;
};

struct Transmission {
    int transmitter = 0;
    Cell cell;
};

/// Full simulator state. Operations below mutate it slot by slot; a run is a
/// deterministic function of (params, mobility, seed).
class SimWorld {
public:
    SimWorld(const NetworkParams& params, Mobility mobility, std::uint64_t seed);

    const NetworkParams& params() const { return params_; }
    Mobility mobility() const { return mobility_; }
    int node_count() const { return params_.n; }

    Slot slot = 0;
    Rng rng;
    std::vector<NodeState> nodes;
    std::vector<FlowLog> flows;  ///< indexed by source node

    int destination(int node) const { return dest_[node]; }
    int source_of(int node) const { return source_[node]; }
    /// Replaces the traffic permutation; must be a derangement.
    void set_destinations(const std::vector<int>& dest);

    Cell cell(int node) const { return cells_[node]; }
    /// Continuous position in [0,1)^2; only tracked under random_waypoint.
    std::pair<double, double> position(int node) const { return {pos_x_[node], pos_y_[node]}; }
    void place(int node, Cell c);
    void place_continuous(int node, double x, double y);

    /// Round-robin equivalent class for the current slot, in [0, alpha^2).
    int active_ec() const;
    bool is_active(Cell c) const;

    double arrival_rate() const { return arrival_rate_; }
    /// Tests may switch traffic off (rate 0); otherwise 0 <= rate < 1.
    void set_arrival_rate(double rate);

    /// Nodes in the given cell, in a fixed deterministic order.
    std::vector<int> nodes_in(Cell c) const;
    /// Nodes in the 3x3 coverage neighbourhood of `node`, excluding it.
    std::vector<int> coverage_peers(int node) const;
    int cell_population(Cell c) const;

    // Internal to the slot loop.
    void rebuild_occupancy();
    Slot next_arrival(int node) const { return next_arrival_[node]; }
    void schedule_next_arrival(int node, Slot after);

    int cell_index(Cell c) const { return c.y * params_.m + c.x; }
    Cell wrap(int x, int y) const;

private:
    NetworkParams params_;
    Mobility mobility_;
    double arrival_rate_;
    std::vector<int> dest_;
    std::vector<int> source_;
    std::vector<Cell> cells_;
    std::vector<double> pos_x_;
    std::vector<double> pos_y_;
    std::vector<Slot> next_arrival_;
    // Bucket lists: head per cell, next per node.
    std::vector<int> cell_head_;
    std::vector<int> next_in_cell_;
    std::vector<int> occupied_;

    friend void step_mobility(SimWorld&);
};

/// Moves every node for the current slot.
void step_mobility(SimWorld& world);

/// Bernoulli(lambda) packet generation at every source for the current slot.
void step_traffic(SimWorld& world);

/// One uniformly chosen transmitter per occupied active cell.
std::vector<Transmission> schedule_slot(SimWorld& world);

enum class Action { idle, broadcast, delivery };

struct TransmissionOutcome {
    Action action = Action::idle;     ///< what the transmitter chose to do
    bool transmitted = false;         ///< false for an idle slot (nothing sent)
    int receiver = -1;                ///< delivery: handshake partner
    std::optional<PacketId> packet;   ///< packet broadcast or delivered
    bool delivered = false;           ///< some destination accepted a packet
    std::vector<int> listeners;       ///< nodes that heard the transmission
};

/// Packet-broadcast: distributes the head-of-line source packet to every node
/// in the coverage cells. Idle when the source queue is empty.
TransmissionOutcome broadcast(SimWorld& world, int transmitter);

/// Packet-delivery handshake with `receiver`. Delivers ACK+1 if held,
/// purging older copies of that flow from the transmitter's queue.
TransmissionOutcome deliver(SimWorld& world, int transmitter, int receiver);

/// Two-hop relay step: broadcast with probability q, otherwise hand-shake with
/// a uniformly chosen peer in the coverage cells (idle if there is none).
TransmissionOutcome execute_2hr(SimWorld& world, int transmitter);

/// Counts protocol-model violations among this slot's transmissions: a
/// listener farther than r from its transmitter, or closer than (1+delta) r
/// to any other transmitter. Cell geometry is used (worst case over points in
/// the cells) except under random_waypoint, which has exact positions.
int interference_violations(const SimWorld& world, const std::vector<Transmission>& transmissions,
                            const std::vector<TransmissionOutcome>& outcomes);

/// Steady-state departure statistics of one source (indicator D_t = source
/// broadcast a packet in slot t; X_t = its source-queue length after slot t).
struct DepartureTrace {
    std::int64_t slots = 0;
    std::int64_t departures = 0;
    std::int64_t lag1_pairs = 0;  ///< count of D_t = D_{t-1} = 1
    double sum_x = 0.0;
    double sum_x2 = 0.0;
    double sum_dx = 0.0;
    bool previous = false;

    void record(bool departed, double queue_length);
    double mean() const;
    double lag1_autocorrelation() const;
    double queue_correlation() const;
};

struct RunOptions {
    Slot slots = 2'000'000;
    Slot warmup = 200'000;
    /// After `slots`, keep running (traffic on) until every packet generated
    /// in the measurement window is delivered, for at most this many slots.
    Slot drain_limit = std::numeric_limits<Slot>::max();
    bool drain = true;
    bool keep_records = false;
    bool check_interference = false;
    int tagged_source = -1;
};

/// Measurements of one replication, or the aggregate of several (see stats.hpp).
struct RunMetrics {
    std::vector<double> delay_samples;             ///< slots, generation slot counted
    std::vector<std::int64_t> generated_count;     ///< per flow, in window
    std::vector<std::int64_t> delivered_count;     ///< per flow, window packets delivered
    std::vector<std::int64_t> window_deliveries;   ///< per flow, deliveries inside window
    Slot slots_observed = 0;
    double mean_delay = 0.0;
    double ci95_halfwidth = 0.0;
    bool ci_available = false;
    double per_node_throughput = 0.0;
    double throughput_ci95 = 0.0;
    int replications = 1;
    std::int64_t censored = 0;
    std::int64_t interference_violations = 0;
    std::size_t max_relay_queue = 0;
    std::vector<Packet> records;
    std::optional<DepartureTrace> departures;
};

/// Invariant checks used in debug runs and tests. Each returns a list of
/// human-readable problems (empty when consistent).
std::vector<std::string> check_conservation(const SimWorld& world);

/// Single replication. Throws ParamError on inconsistent slot settings.
RunMetrics run(const NetworkParams& params, Mobility mobility, const RunOptions& options, std::uint64_t seed);

/// Advances the world by one slot; returns the slot's interference violations
/// when asked to check them.
int advance_slot(SimWorld& world, bool check_interference = false, DepartureTrace* trace = nullptr,
                 int tagged_source = -1);

}  // namespace qbdmanet
