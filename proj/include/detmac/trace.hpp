#pragma once

// Simulation trace: typed records, a stable line format and a hash over it.

#include "detmac/frame.hpp"
#include "detmac/protocol.hpp"
#include "detmac/radio.hpp"
#include "detmac/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detmac {

struct TxRecord {
    FrameKind frame = FrameKind::Data;
    NodeId destination = kBroadcast;
    std::uint32_t sequence = 0;
    std::int64_t superframe = 0;
    int slot = 0;
    SimTime end;
    SimTime enqueued;
    std::string cell; ///< entry kind of the cell ("cap" for contention access)
    int level = -1;   ///< allocation level for data in guaranteed cells
    bool bounded = false; ///< frame entered the queue while its allocation was active
};

struct RxRecord {
    RxOutcome::Kind outcome = RxOutcome::Kind::Silent;
    NodeId from = 0;
    NodeId expected = kBroadcast;
    double rssi_dbm = 0.0;
    std::int64_t superframe = 0;
    int slot = 0;
    bool measurement = false;
    FrameKind frame = FrameKind::Data; ///< kind of the decoded frame
    std::uint32_t sequence = 0;
};

struct ScheduleRecord {
    std::string action;
    std::string detail;
    std::int64_t superframe = 0;
};

struct BeaconRecord {
    NodeId source = 0;
    std::int64_t anchor_offset_us = 0;
    std::int64_t superframe = 0;
};

struct EnergyRecord {
    std::array<SimTime, 4> time{}; ///< indexed by RadioState
    int wakeups = 0;
    double charge_uas = 0.0;
};

struct CsmaRecord {
    enum class Result { Transmit, Failure, Deferred };
    Result result = Result::Transmit;
    int backoffs = 0;
    FrameKind frame = FrameKind::Data;
    std::uint32_t sequence = 0;
    std::int64_t superframe = 0;
};

using TracePayload = std::variant<TxRecord, RxRecord, ScheduleRecord, BeaconRecord, EnergyRecord, CsmaRecord>;

struct TraceEvent {
    SimTime time;
    NodeId node = 0;
    std::uint64_t seq = 0;
    TracePayload payload;

    /// tx | rx-outcome | schedule-change | beacon | energy | csma
    std::string_view category() const;
};

class Trace {
public:
    void emit(SimTime time, NodeId node, TracePayload payload);

    /// Sorts by (time, node, emission sequence).
    void finalize();

    const std::vector<TraceEvent>& events() const { return events_; }

    /// Comment lines written before the records, e.g. the resolved configuration.
    std::vector<std::string>& header() { return header_; }
    const std::vector<std::string>& header() const { return header_; }

    template <class T>
    std::vector<const TraceEvent*> select() const
    {
        std::vector<const TraceEvent*> out;
        for (const auto& e : events_)
            if (std::holds_alternative<T>(e.payload))
                out.push_back(&e);
        return out;
    }

private:
    std::vector<TraceEvent> events_;
    std::vector<std::string> header_;
    std::uint64_t next_seq_ = 0;
};

std::string format_event(const TraceEvent& event);

/// Header lines prefixed with '#', then one line per event.
std::string trace_text(const Trace& trace);

std::uint64_t trace_hash(const Trace& trace);

} // namespace detmac
