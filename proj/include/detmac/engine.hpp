#pragma once

// Discrete-event core. A World owns the node machines, the radio environment
// and the active schedule; run_until drives them slot by slot and returns the
// trace.

#include "detmac/csma.hpp"
#include "detmac/protocol.hpp"
#include "detmac/radio.hpp"
#include "detmac/rng.hpp"
#include "detmac/schedule.hpp"
#include "detmac/timing.hpp"
#include "detmac/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <variant>
#include <vector>

namespace detmac {

struct SlotBoundaryEvent {
    std::int64_t superframe = 0;
    int slot = 0;
};

struct TrafficEvent {
    std::size_t generator = 0;
};

using EventPayload = std::variant<SlotBoundaryEvent, TrafficEvent>;

struct Event {
    SimTime time;
    NodeId node = 0;
    std::uint64_t seq = 0;
    EventPayload payload;
};

/// Min-queue ordered by (time, node id, insertion sequence).
class EventQueue {
public:
    /// Throws PastEvent if `time` is earlier than the last popped event.
    void schedule(SimTime time, NodeId node, EventPayload payload);

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    const Event& top() const { return heap_.top(); }
    Event pop();
    SimTime now() const { return now_; }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const
        {
            return std::tie(a.time, a.node, a.seq) > std::tie(b.time, b.node, b.seq);
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    SimTime now_;
    std::uint64_t next_seq_ = 0;
};

struct TrafficSpec {
    enum class Kind { Periodic, Poisson, Sporadic, Saturated };
    NodeId source = 0;
    NodeId destination = 0;
    Kind kind = Kind::Periodic;
    /// Periodic: exact period. Poisson: mean gap. Sporadic: minimum gap, plus
    /// an exponential extra with the same mean.
    SimTime period = SimTime::micros(15360);
    SimTime start;
    int payload_symbols = kDataSymbols;

    bool operator==(const TrafficSpec&) const = default;
};

std::string_view to_string(TrafficSpec::Kind kind);

struct RequestSpec {
    NodeId node = 0;
    int level = 0;
    Direction direction = Direction::Uplink;
    std::int64_t at_superframe = 0;

    bool operator==(const RequestSpec&) const = default;
};

struct PdsSpec {
    NodeId owner = 0;
    NodeId peer = 0;
    int level = 0;
    Direction direction = Direction::Uplink;
    std::int64_t at_superframe = 0; ///< 0: in place before the first superbeacon

    bool operator==(const PdsSpec&) const = default;
};

struct WorldSpec {
    SuperframeConfig superframe;
    RadioParams radio;
    CsmaParams csma;
    EnergyProfile energy;
    std::vector<NodeSpec> nodes;
    std::vector<TrafficSpec> traffic;
    std::vector<RequestSpec> requests;
    std::vector<PdsSpec> pds;
    SgtsPolicy sgts;
    /// Receivers sample candidate partners' RSSI even with merging disabled.
    bool measure_rssi = false;
    std::uint64_t seed = 1;
    /// Starting table; none: one GBS per star coordinator in id order.
    std::optional<ScheduleTable> initial;

    bool operator==(const WorldSpec&) const = default;
};

/// Throws TopologyInvalid / ConfigViolation for inconsistent node sets.
void validate_topology(const WorldSpec& spec);

class World {
public:
    explicit World(WorldSpec spec);

    /// Processes every event strictly before `end` and returns the trace so far.
    Trace run_until(SimTime end);

    const WorldSpec& spec() const { return spec_; }
    const ScheduleTable& active_table() const { return active_; }
    const ScheduleTable& planned_table() const;
    const NodeMachine& node(NodeId id) const;
    const std::map<NodeId, NodeMachine>& nodes() const { return nodes_; }
    NodeId pan_id() const { return pan_id_; }

    struct Activation {
        std::int64_t superframe = 0;
        ScheduleTable table;
    };
    const std::vector<Activation>& schedule_history() const { return history_; }

    /// Data frames still queued (GTS and CAP queues).
    std::vector<Frame> pending_data() const;

private:
    struct Transmission {
        NodeId node = 0;
        Frame frame;
        double power_dbm = 0.0;
        SimTime start;
        SimTime end;
    };
    using AllocKey = std::tuple<NodeId, NodeId, int, int, int>;

    void on_slot_boundary(SimTime now, std::int64_t counter, int slot);
    void on_traffic(SimTime now, std::size_t generator);
    void start_superframe(SimTime now, std::int64_t counter);
    void activate(SimTime now, std::int64_t counter);
    void top_up_saturated(SimTime now);
    void run_guaranteed_slot(SimTime now, std::int64_t counter, int slot);
    void run_cap_window(SimTime start, SimTime end, std::int64_t counter, int first_slot);
    void end_superframe(SimTime now, std::int64_t counter);
    void deliver(NodeMachine& receiver, const Frame& frame, SimTime arrival, SimTime nominal, std::int64_t counter);
    void trace_confirms(SimTime now, NodeId node, const NodeMachine::Delivery& d, std::int64_t counter);
    bool routes_via_gts(NodeId source, NodeId destination) const;
    Frame make_data(NodeId source, NodeId destination, int symbols, SimTime now);
    NodeMachine& machine(NodeId id);
    RngStream& stream(std::map<NodeId, RngStream>& streams, NodeId id, std::string_view purpose);

    WorldSpec spec_;
    RadioEnvironment env_;
    ScheduleTable active_;
    std::map<NodeId, NodeMachine> nodes_;
    NodeId pan_id_ = 0;
    EventQueue queue_;
    Trace trace_;
    bool started_ = false;
    std::vector<Activation> history_;
    std::map<AllocKey, SimTime> gts_since_;
    std::map<NodeId, SimTime> synced_since_;
    std::map<NodeId, RngStream> rx_rng_;
    std::map<NodeId, RngStream> csma_rng_;
    std::map<NodeId, RngStream> traffic_rng_;
};

} // namespace detmac
