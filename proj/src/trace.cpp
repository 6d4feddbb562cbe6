#include "detmac/trace.hpp"

#include "detmac/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace detmac {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string node_str(NodeId id)
{
    return id == kBroadcast ? std::string("*") : std::to_string(id);
}

std::string_view to_string(CsmaRecord::Result r)
{
    switch (r) {
    case CsmaRecord::Result::Transmit: return "transmit";
    case CsmaRecord::Result::Failure: return "failure";
    case CsmaRecord::Result::Deferred: return "deferred";
    }
    return "unknown";
}

} // namespace

std::string_view TraceEvent::category() const
{
    return std::visit(Overloaded{
                          [](const TxRecord&) { return std::string_view("tx"); },
                          [](const RxRecord&) { return std::string_view("rx-outcome"); },
                          [](const ScheduleRecord&) { return std::string_view("schedule-change"); },
                          [](const BeaconRecord&) { return std::string_view("beacon"); },
                          [](const EnergyRecord&) { return std::string_view("energy"); },
                          [](const CsmaRecord&) { return std::string_view("csma"); },
                      },
                      payload);
}

void Trace::emit(SimTime time, NodeId node, TracePayload payload)
{
    events_.push_back(TraceEvent{time, node, next_seq_++, std::move(payload)});
}

void Trace::finalize()
{
    std::stable_sort(events_.begin(), events_.end(), [](const TraceEvent& a, const TraceEvent& b) {
        if (a.time != b.time)
            return a.time < b.time;
        if (a.node != b.node)
            return a.node < b.node;
        return a.seq < b.seq;
    });
}

std::string format_event(const TraceEvent& e)
{
    std::ostringstream os;
    os << e.time.us << ' ' << e.node << ' ' << e.category();
    std::visit(Overloaded{
                   [&](const TxRecord& r) {
                       os << " frame=" << to_string(r.frame) << " dst=" << node_str(r.destination)
                          << " seq=" << r.sequence << " sf=" << r.superframe << " slot=" << r.slot
                          << " end=" << r.end.us << " enq=" << r.enqueued.us << " cell=" << r.cell;
                       if (r.level >= 0)
                           os << " level=" << r.level << " bounded=" << (r.bounded ? 1 : 0);
                   },
                   [&](const RxRecord& r) {
                       os << " outcome=" << to_string(r.outcome) << " from=" << r.from
                          << " expected=" << node_str(r.expected) << " rssi=" << fixed(r.rssi_dbm, 6)
                          << " sf=" << r.superframe << " slot=" << r.slot << " meas=" << (r.measurement ? 1 : 0);
                       if (r.outcome == RxOutcome::Kind::Received || r.outcome == RxOutcome::Kind::CapturedOther)
                           os << " frame=" << to_string(r.frame) << " seq=" << r.sequence;
                   },
                   [&](const ScheduleRecord& r) {
                       os << " action=" << r.action << " sf=" << r.superframe;
                       if (!r.detail.empty())
                           os << ' ' << r.detail;
                   },
                   [&](const BeaconRecord& r) {
                       os << " source=" << r.source << " offset=" << r.anchor_offset_us << " sf=" << r.superframe;
                   },
                   [&](const EnergyRecord& r) {
                       os << " dozing=" << r.time[0].us << " listening=" << r.time[1].us
                          << " transmitting=" << r.time[2].us << " waking=" << r.time[3].us
                          << " wakeups=" << r.wakeups << " charge_uas=" << fixed(r.charge_uas, 3);
                   },
                   [&](const CsmaRecord& r) {
                       os << " result=" << to_string(r.result) << " backoffs=" << r.backoffs
                          << " frame=" << to_string(r.frame) << " seq=" << r.sequence << " sf=" << r.superframe;
                   },
               },
               e.payload);
    return os.str();
}

std::string trace_text(const Trace& trace)
{
    std::string out;
    for (const auto& h : trace.header())
        out += "# " + h + '\n';
    for (const auto& e : trace.events())
        out += format_event(e) + '\n';
    return out;
}

std::uint64_t trace_hash(const Trace& trace)
{
    std::uint64_t h = fnv1a("");
    for (const auto& e : trace.events()) {
        h = fnv1a(format_event(e), h);
        h = fnv1a("\n", h);
    }
    return h;
}

} // namespace detmac
