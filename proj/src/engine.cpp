#include "detmac/engine.hpp"

#include "detmac/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>
#include <string>

namespace detmac {

namespace {

std::string describe_alloc(const Allocation& a)
{
    std::ostringstream os;
    os << "owner=" << a.owner << " peer=" << a.peer << " slot=" << a.slot_index << " level=" << a.level
       << " phase=" << a.phase << " origin=" << to_string(a.origin) << " dir=" << to_string(a.direction);
    return os.str();
}

bool overlaps(SimTime a0, SimTime a1, SimTime b0, SimTime b1)
{
    return a0 < b1 && b0 < a1;
}

const Allocation* owned_allocation(const SlotEntry& entry, NodeId owner, NodeId peer)
{
    if (const auto* g = std::get_if<Gts>(&entry))
        return g->alloc.owner == owner && g->alloc.peer == peer ? &g->alloc : nullptr;
    if (const auto* s = std::get_if<Sgts>(&entry)) {
        if (s->first.owner == owner && s->first.peer == peer)
            return &s->first;
        if (s->second.owner == owner && s->second.peer == peer)
            return &s->second;
    }
    return nullptr;
}

} // namespace

std::string_view to_string(TrafficSpec::Kind kind)
{
    switch (kind) {
    case TrafficSpec::Kind::Periodic: return "periodic";
    case TrafficSpec::Kind::Poisson: return "poisson";
    case TrafficSpec::Kind::Sporadic: return "sporadic";
    case TrafficSpec::Kind::Saturated: return "saturated";
    }
    return "unknown";
}

// --- event queue --------------------------------------------------------------

void EventQueue::schedule(SimTime time, NodeId node, EventPayload payload)
{
    if (time < now_)
        throw Error(Errc::PastEvent,
                    "event at " + std::to_string(time.us) + " us is before now (" + std::to_string(now_.us) + " us)");
    heap_.push(Event{time, node, next_seq_++, std::move(payload)});
}

Event EventQueue::pop()
{
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
}

// --- topology -------------------------------------------------------------------

void validate_topology(const WorldSpec& spec)
{
    spec.superframe.validate();
    spec.radio.validate();

    std::map<NodeId, const NodeSpec*> by_id;
    std::optional<NodeId> pan;
    for (const auto& n : spec.nodes) {
        if (n.id == kBroadcast)
            throw Error(Errc::TopologyInvalid, "node id reserved for broadcast");
        if (!by_id.emplace(n.id, &n).second)
            throw Error(Errc::TopologyInvalid, "duplicate node id " + std::to_string(n.id));
        if (n.role == Role::PanCoordinator) {
            if (pan)
                throw Error(Errc::TopologyInvalid, "more than one PAN coordinator");
            pan = n.id;
        }
        if (n.tx_power_dbm < spec.radio.tx_power_min_dbm || n.tx_power_dbm > spec.radio.tx_power_max_dbm)
            throw Error(Errc::ConfigViolation, "node " + std::to_string(n.id) + " tx power out of range");
        if (std::abs(n.clock_offset_us) > spec.radio.max_clock_error_us)
            throw Error(Errc::ConfigViolation, "node " + std::to_string(n.id) + " clock offset exceeds the bound");
    }
    if (!pan)
        throw Error(Errc::TopologyInvalid, "no PAN coordinator");

    RadioEnvironment env(spec.radio);
    for (const auto& n : spec.nodes)
        env.place(n.id, n.position);
    for (auto a = by_id.begin(); a != by_id.end(); ++a)
        for (auto b = std::next(a); b != by_id.end(); ++b)
            if (a->second->position == b->second->position)
                throw Error(Errc::TopologyInvalid, "nodes " + std::to_string(a->first) + " and "
                                                       + std::to_string(b->first) + " share a position");

    auto in_range = [&](NodeId from, NodeId to) {
        return mean_rssi_dbm(env, from, to, spec.radio.tx_power_max_dbm) >= spec.radio.sensitivity_dbm;
    };
    for (const auto& n : spec.nodes) {
        if (n.role == Role::StarCoordinator && !(in_range(n.id, *pan) && in_range(*pan, n.id)))
            throw Error(Errc::TopologyInvalid,
                        "coordinator " + std::to_string(n.id) + " is out of the PAN coordinator's range");
        if (n.role == Role::SimpleNode) {
            if (!n.parent || !by_id.contains(*n.parent))
                throw Error(Errc::TopologyInvalid, "node " + std::to_string(n.id) + " has no valid parent");
            if (by_id.at(*n.parent)->role == Role::SimpleNode)
                throw Error(Errc::TopologyInvalid, "parent of node " + std::to_string(n.id) + " is not a coordinator");
            if (!in_range(n.id, *n.parent))
                throw Error(Errc::TopologyInvalid, "node " + std::to_string(n.id) + " is out of its parent's range");
        }
    }

    const SimTime slot = slot_duration(spec.superframe);
    const SimTime guard = SimTime::micros(2 * spec.radio.max_clock_error_us);
    for (int symbols : {kBeaconSymbols, kDataSymbols, kRequestSymbols, kReportSymbols})
        if (SimTime::symbols(symbols) + guard > slot)
            throw Error(Errc::FrameTooLong, "frames do not fit a " + std::to_string(slot.us) + " us slot");
    for (const auto& t : spec.traffic) {
        if (!by_id.contains(t.source) || !by_id.contains(t.destination))
            throw Error(Errc::UnknownNode, "traffic references an unknown node");
        if (SimTime::symbols(t.payload_symbols) + guard > slot || t.payload_symbols <= 0)
            throw Error(Errc::FrameTooLong, "traffic payload does not fit one slot");
        if (t.kind != TrafficSpec::Kind::Saturated && t.period.us <= 0)
            throw Error(Errc::ConfigViolation, "traffic period must be > 0");
    }
    for (const auto& r : spec.requests)
        if (!by_id.contains(r.node))
            throw Error(Errc::UnknownNode, "request from unknown node " + std::to_string(r.node));
    for (const auto& p : spec.pds)
        if (!by_id.contains(p.owner) || !by_id.contains(p.peer))
            throw Error(Errc::UnknownNode, "PDS grant references an unknown node");
}

// --- world ----------------------------------------------------------------------

World::World(WorldSpec spec)
    : spec_(std::move(spec)),
      env_(spec_.radio),
      active_(spec_.initial ? *spec_.initial : ScheduleTable(spec_.superframe))
{
    validate_topology(spec_);
    if (active_.config() != spec_.superframe)
        throw Error(Errc::ConfigViolation, "initial table was built for another superframe configuration");

    std::set<NodeId> known;
    std::set<NodeId> mobile;
    for (const auto& n : spec_.nodes) {
        env_.place(n.id, n.position);
        known.insert(n.id);
        if (n.mobile)
            mobile.insert(n.id);
        if (n.role == Role::PanCoordinator) {
            pan_id_ = n.id;
            synced_since_.emplace(n.id, SimTime{});
        }
    }
    if (!spec_.initial)
        for (const auto& n : spec_.nodes)
            if (n.role == Role::StarCoordinator)
                active_.allocate_gbs(n.id);

    const bool measure = spec_.measure_rssi || spec_.sgts.enabled;
    for (const auto& n : spec_.nodes)
        nodes_.emplace(n.id, NodeMachine(n, pan_id_, spec_.superframe, measure));
    machine(pan_id_).make_pan(
        std::make_unique<PanScheduler>(active_, spec_.sgts, spec_.radio.sensitivity_dbm, known, mobile));

    for (const auto& p : spec_.pds) {
        if (p.at_superframe != 0)
            continue;
        NodeMachine::Delivery d;
        d.confirms_issued.push_back(
            machine(pan_id_).pan()->grant_pds(GtsRequest{p.owner, p.peer, p.level, p.direction, Origin::Pds}, -1));
        trace_confirms(SimTime{}, pan_id_, d, 0);
    }
}

NodeMachine& World::machine(NodeId id)
{
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw Error(Errc::UnknownNode, "node " + std::to_string(id));
    return it->second;
}

const NodeMachine& World::node(NodeId id) const
{
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw Error(Errc::UnknownNode, "node " + std::to_string(id));
    return it->second;
}

const ScheduleTable& World::planned_table() const
{
    return node(pan_id_).pan()->planned();
}

RngStream& World::stream(std::map<NodeId, RngStream>& streams, NodeId id, std::string_view purpose)
{
    auto it = streams.find(id);
    if (it == streams.end())
        it = streams.emplace(id, rng_stream(spec_.seed, id, purpose)).first;
    return it->second;
}

std::vector<Frame> World::pending_data() const
{
    std::vector<Frame> out;
    for (const auto& [id, m] : nodes_) {
        for (const auto& f : m.data_queue())
            out.push_back(f);
        for (const auto& f : m.cap_queue())
            if (f.kind == FrameKind::Data)
                out.push_back(f);
    }
    return out;
}

Trace World::run_until(SimTime end)
{
    if (!started_) {
        started_ = true;
        queue_.schedule(SimTime{}, pan_id_, SlotBoundaryEvent{0, 0});
        for (std::size_t i = 0; i < spec_.traffic.size(); ++i) {
            const auto& t = spec_.traffic[i];
            if (t.kind != TrafficSpec::Kind::Saturated)
                queue_.schedule(t.start, t.source, TrafficEvent{i});
        }
    }
    while (!queue_.empty() && queue_.top().time < end) {
        Event e = queue_.pop();
        if (const auto* s = std::get_if<SlotBoundaryEvent>(&e.payload))
            on_slot_boundary(e.time, s->superframe, s->slot);
        else
            on_traffic(e.time, std::get<TrafficEvent>(e.payload).generator);
    }
    for (const auto& [id, m] : nodes_) {
        const EnergyLedger ledger = m.energy();
        EnergyRecord r;
        for (int s = 0; s < 4; ++s)
            r.time[static_cast<std::size_t>(s)] = ledger.time_in(static_cast<RadioState>(s));
        r.wakeups = ledger.wakeups();
        r.charge_uas = ledger.charge_uas(spec_.energy);
        trace_.emit(end, id, r);
    }
    Trace out = trace_;
    out.finalize();
    return out;
}

Frame World::make_data(NodeId source, NodeId destination, int symbols, SimTime now)
{
    Frame f;
    f.kind = FrameKind::Data;
    f.source = source;
    f.destination = destination;
    f.payload_symbols = symbols;
    f.sequence = machine(source).next_sequence();
    f.enqueued = now;
    return f;
}

bool World::routes_via_gts(NodeId source, NodeId destination) const
{
    // An unsynchronised owner cannot use its slot yet; such frames go best-effort.
    if (!synced_since_.contains(source))
        return false;
    return std::any_of(active_.allocations().begin(), active_.allocations().end(),
                       [&](const Allocation& a) { return a.owner == source && a.peer == destination; });
}

void World::on_traffic(SimTime now, std::size_t generator)
{
    const TrafficSpec& t = spec_.traffic[generator];
    NodeMachine& m = machine(t.source);
    Frame f = make_data(t.source, t.destination, t.payload_symbols, now);
    if (routes_via_gts(t.source, t.destination))
        m.enqueue_data(std::move(f));
    else
        m.enqueue_cap(std::move(f));

    RngStream& rng = stream(traffic_rng_, t.source, "traffic");
    const double mean = static_cast<double>(t.period.us);
    SimTime gap = t.period;
    if (t.kind == TrafficSpec::Kind::Poisson)
        gap = SimTime::micros(std::max<std::int64_t>(1, static_cast<std::int64_t>(rng.exponential(mean))));
    else if (t.kind == TrafficSpec::Kind::Sporadic)
        gap = t.period + SimTime::micros(static_cast<std::int64_t>(rng.exponential(mean)));
    queue_.schedule(now + gap, t.source, TrafficEvent{generator});
}

void World::top_up_saturated(SimTime now)
{
    for (const auto& t : spec_.traffic) {
        if (t.kind != TrafficSpec::Kind::Saturated)
            continue;
        NodeMachine& m = machine(t.source);
        if (routes_via_gts(t.source, t.destination)) {
            if (!m.has_data_for(t.destination))
                m.enqueue_data(make_data(t.source, t.destination, t.payload_symbols, now));
        } else {
            const auto& q = m.cap_queue();
            const bool queued = std::any_of(q.begin(), q.end(), [&](const Frame& f) {
                return f.kind == FrameKind::Data && f.destination == t.destination;
            });
            if (!queued)
                m.enqueue_cap(make_data(t.source, t.destination, t.payload_symbols, now));
        }
    }
}

void World::activate(SimTime now, std::int64_t counter)
{
    const ScheduleTable& planned = planned_table();
    const bool changed = history_.empty() || !(planned == active_);
    active_ = planned;

    std::map<AllocKey, SimTime> since;
    for (const auto& a : active_.allocations()) {
        const AllocKey key{a.owner, a.peer, a.slot_index, a.level, a.phase};
        auto it = gts_since_.find(key);
        since[key] = it != gts_since_.end() ? it->second : now;
    }
    gts_since_ = std::move(since);

    if (changed) {
        history_.push_back(Activation{counter, active_});
        trace_.emit(now, pan_id_,
                    ScheduleRecord{"activate", "allocations=" + std::to_string(active_.allocations().size()),
                                   counter});
    }
}

void World::start_superframe(SimTime now, std::int64_t counter)
{
    for (const auto& p : spec_.pds) {
        if (p.at_superframe == 0 || p.at_superframe != counter)
            continue;
        NodeMachine::Delivery d;
        d.confirms_issued.push_back(machine(pan_id_).pan()->grant_pds(
            GtsRequest{p.owner, p.peer, p.level, p.direction, Origin::Pds}, counter));
        trace_confirms(now, pan_id_, d, counter);
    }
    for (const auto& r : spec_.requests) {
        if (r.at_superframe != counter)
            continue;
        try {
            const Frame& f = machine(r.node).request_gts(r.level, r.direction, now, counter);
            trace_.emit(now, r.node,
                        ScheduleRecord{"request", "level=" + std::to_string(r.level) + " seq="
                                                      + std::to_string(f.sequence),
                                       counter});
        } catch (const Error& e) {
            trace_.emit(now, r.node, ScheduleRecord{"request-rejected", std::string("reason=") + e.what(), counter});
        }
    }
    if (counter % active_.horizon() == 0)
        activate(now, counter);
    for (auto& [id, m] : nodes_)
        m.on_superframe_start(now, counter);
}

void World::on_slot_boundary(SimTime now, std::int64_t counter, int slot)
{
    const int slots = active_.slots();
    if (slot == 0)
        start_superframe(now, counter);
    top_up_saturated(now);

    const SlotEntry& entry = active_.entry_at(counter, slot);
    if (std::holds_alternative<Cap>(entry)) {
        const bool continues = slot > 0 && std::holds_alternative<Cap>(active_.entry_at(counter, slot - 1));
        if (!continues) {
            int last = slot;
            while (last + 1 < slots && std::holds_alternative<Cap>(active_.entry_at(counter, last + 1)))
                ++last;
            run_cap_window(now, slot_start(spec_.superframe, counter, last + 1), counter, slot);
        }
    } else {
        run_guaranteed_slot(now, counter, slot);
    }

    if (slot + 1 < slots) {
        queue_.schedule(slot_start(spec_.superframe, counter, slot + 1), pan_id_,
                        SlotBoundaryEvent{counter, slot + 1});
    } else {
        end_superframe(now, counter);
        queue_.schedule(slot_start(spec_.superframe, counter + 1, 0), pan_id_, SlotBoundaryEvent{counter + 1, 0});
    }
}

void World::run_guaranteed_slot(SimTime now, std::int64_t counter, int slot)
{
    using K = SlotAction::Kind;
    const SlotEntry& entry = active_.entry_at(counter, slot);
    const SimTime slot_len = slot_duration(spec_.superframe);
    const bool measure = spec_.measure_rssi || spec_.sgts.enabled;

    struct Listener {
        NodeId id;
        std::optional<NodeId> expected;
        bool measurement;
    };
    std::vector<Transmission> txs;
    std::vector<Listener> listeners;

    for (auto& [id, m] : nodes_) {
        SlotAction action;
        if (!m.synchronized(counter))
            action = SlotAction{K::Listen, m.sync_source(), false};
        else
            action = m.on_slot_boundary(active_, counter, slot);

        std::optional<Frame> frame;
        switch (action.kind) {
        case K::TransmitSuperbeacon:
        case K::TransmitBeacon: {
            Frame f;
            const bool super = action.kind == K::TransmitSuperbeacon;
            f.kind = super ? FrameKind::Superbeacon : FrameKind::Beacon;
            f.source = id;
            f.destination = kBroadcast;
            f.payload_symbols = kBeaconSymbols;
            f.sequence = m.next_sequence();
            f.enqueued = now;
            f.body = BeaconBody{super ? m.pan()->recent_confirms(counter) : m.relay_confirms()};
            frame = std::move(f);
            break;
        }
        case K::TransmitData:
            frame = m.pop_data_for(*action.peer);
            break;
        case K::Listen:
            listeners.push_back(Listener{id, action.peer, action.measurement});
            m.account(RadioState::Listening, slot_len, spec_.energy);
            break;
        case K::Doze:
        case K::Contend:
            m.account(RadioState::Dozing, slot_len, spec_.energy);
            break;
        }
        if (!frame)
            continue;

        const SimTime start = now + SimTime::micros(m.anchor_offset_us());
        const SimTime airtime = frame->airtime();
        m.account(RadioState::Transmitting, airtime, spec_.energy);
        m.account(RadioState::Dozing, slot_len - airtime, spec_.energy);

        TxRecord rec{frame->kind, frame->destination, frame->sequence, counter, slot, start + airtime,
                     frame->enqueued, std::string(entry_kind(entry))};
        if (frame->kind == FrameKind::Data) {
            if (const Allocation* a = owned_allocation(entry, id, frame->destination)) {
                rec.level = a->level;
                auto it = gts_since_.find(AllocKey{a->owner, a->peer, a->slot_index, a->level, a->phase});
                auto synced = synced_since_.find(id);
                rec.bounded = it != gts_since_.end() && synced != synced_since_.end()
                              && frame->enqueued >= std::max(it->second, synced->second);
            }
        }
        trace_.emit(start, id, std::move(rec));
        txs.push_back(Transmission{id, std::move(*frame), m.spec().tx_power_dbm, start, start + airtime});
    }

    if (txs.empty())
        return;
    std::vector<TransmissionAttempt> attempts;
    for (const auto& t : txs)
        attempts.push_back(TransmissionAttempt{t.node, t.frame, t.power_dbm, (t.start - now).us});
    SimTime latest_end;
    for (const auto& t : txs)
        latest_end = std::max(latest_end, t.end);

    for (const auto& l : listeners) {
        RxRecord rec;
        rec.expected = l.expected.value_or(kBroadcast);
        rec.superframe = counter;
        rec.slot = slot;
        rec.measurement = l.measurement;
        RxOutcome out;
        if (attempts.size() > 2) {
            out.kind = RxOutcome::Kind::Collision;
        } else {
            out = resolve_reception(env_, l.id, l.expected, attempts, stream(rx_rng_, l.id, "rx"));
        }
        rec.outcome = out.kind;
        rec.from = out.from;
        rec.rssi_dbm = out.rssi_dbm;
        if (out.decoded()) {
            rec.frame = txs[out.index].frame.kind;
            rec.sequence = txs[out.index].frame.sequence;
        }
        trace_.emit(out.decoded() ? txs[out.index].end : latest_end, l.id, rec);

        if (!out.decoded())
            continue;
        NodeMachine& m = machine(l.id);
        if (measure && std::holds_alternative<Gts>(entry))
            m.record_rssi(out.from, out.rssi_dbm);
        const Transmission& t = txs[out.index];
        if (t.frame.destination == l.id || t.frame.destination == kBroadcast)
            deliver(m, t.frame, t.start, now, counter);
    }
}

void World::run_cap_window(SimTime start, SimTime end, std::int64_t counter, int first_slot)
{
    const SimTime period = SimTime::symbols(kBackoffPeriodSymbols);
    const SimTime guard = SimTime::micros(2 * spec_.radio.max_clock_error_us);
    const double sensitivity = spec_.radio.sensitivity_dbm;

    std::vector<Transmission> txs;
    std::map<NodeId, SimTime> busy_until;
    std::map<NodeId, SimTime> tx_time;
    std::set<NodeId> deferred;
    std::set<NodeId> awake;

    for (SimTime t = start; t + period <= end; t += period) {
        for (auto& [id, m] : nodes_) {
            if (!m.synchronized(counter) || deferred.contains(id) || !m.has_cap_frame())
                continue;
            awake.insert(id);
            if (busy_until[id] > t)
                continue;

            const SimTime local = t + SimTime::micros(m.anchor_offset_us());
            bool busy = false;
            for (const auto& tx : txs) {
                if (tx.node != id && tx.start <= local && local < tx.end
                    && mean_rssi_dbm(env_, tx.node, id, tx.power_dbm) >= sensitivity) {
                    busy = true;
                    break;
                }
            }
            CsmaCa& csma = m.csma(spec_.csma);
            const int backoffs = csma.backoffs();
            switch (csma.on_boundary(busy, stream(csma_rng_, id, "csma"))) {
            case CsmaCa::Step::Wait:
                break;
            case CsmaCa::Step::Failure: {
                const Frame f = m.pop_cap();
                trace_.emit(local, id,
                            CsmaRecord{CsmaRecord::Result::Failure, backoffs + 1, f.kind, f.sequence, counter});
                break;
            }
            case CsmaCa::Step::Transmit: {
                const Frame& head = m.cap_head();
                if (t + period + head.airtime() + guard > end) {
                    csma.defer();
                    deferred.insert(id);
                    trace_.emit(local, id,
                                CsmaRecord{CsmaRecord::Result::Deferred, backoffs, head.kind, head.sequence, counter});
                    break;
                }
                Frame f = m.pop_cap();
                const SimTime tx_start = local + period;
                const SimTime airtime = f.airtime();
                trace_.emit(local, id,
                            CsmaRecord{CsmaRecord::Result::Transmit, backoffs, f.kind, f.sequence, counter});
                trace_.emit(tx_start, id,
                            TxRecord{f.kind, f.destination, f.sequence, counter, first_slot, tx_start + airtime,
                                     f.enqueued, "cap"});
                busy_until[id] = t + period + airtime;
                tx_time[id] += airtime;
                txs.push_back(Transmission{id, std::move(f), m.spec().tx_power_dbm, tx_start, tx_start + airtime});
                break;
            }
            }
        }
    }

    // Receptions: each frame is resolved against everything that overlaps it
    // at its destination; shared clusters are resolved once per receiver.
    std::map<std::pair<NodeId, std::vector<std::size_t>>, RxOutcome> cache;
    std::vector<std::pair<std::size_t, NodeId>> deliveries;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const Transmission& f = txs[i];
        const NodeId dst = f.frame.destination;
        auto it = nodes_.find(dst);
        if (it == nodes_.end() || !it->second.synchronized(counter))
            continue;
        if (!it->second.is_coordinator() && !awake.contains(dst))
            continue;

        RxRecord rec;
        rec.expected = f.node;
        rec.superframe = counter;
        rec.slot = first_slot;

        bool half_duplex = false;
        std::vector<std::size_t> cluster;
        for (std::size_t j = 0; j < txs.size(); ++j) {
            if (j != i && !overlaps(f.start, f.end, txs[j].start, txs[j].end))
                continue;
            if (txs[j].node == dst)
                half_duplex = true;
            else
                cluster.push_back(j);
        }

        RxOutcome out;
        if (half_duplex || cluster.size() > 2) {
            out.kind = RxOutcome::Kind::Collision;
        } else {
            auto key = std::make_pair(dst, cluster);
            auto hit = cache.find(key);
            if (hit == cache.end()) {
                SimTime origin = txs[cluster.front()].start;
                for (std::size_t j : cluster)
                    origin = std::min(origin, txs[j].start);
                std::vector<TransmissionAttempt> attempts;
                for (std::size_t j : cluster)
                    attempts.push_back(
                        TransmissionAttempt{txs[j].node, txs[j].frame, txs[j].power_dbm, (txs[j].start - origin).us});
                RxOutcome r = resolve_reception(env_, dst, std::nullopt, attempts, stream(rx_rng_, dst, "rx"));
                if (r.decoded())
                    r.index = cluster[r.index];
                hit = cache.emplace(std::move(key), r).first;
            }
            out = hit->second;
            if (out.decoded())
                out.kind = out.index == i ? RxOutcome::Kind::Received : RxOutcome::Kind::CapturedOther;
        }
        rec.outcome = out.kind;
        rec.from = out.from;
        rec.rssi_dbm = out.rssi_dbm;
        if (out.decoded()) {
            rec.frame = txs[out.index].frame.kind;
            rec.sequence = txs[out.index].frame.sequence;
        }
        trace_.emit(f.end, dst, rec);
        if (out.kind == RxOutcome::Kind::Received)
            deliveries.emplace_back(i, dst);
    }

    const SimTime window = end - start;
    for (auto& [id, m] : nodes_) {
        if (!m.synchronized(counter)) {
            m.account(RadioState::Listening, window, spec_.energy);
        } else if (m.is_coordinator() || awake.contains(id)) {
            const SimTime sent = tx_time[id];
            if (sent.us > 0)
                m.account(RadioState::Transmitting, sent, spec_.energy);
            m.account(RadioState::Listening, window - sent, spec_.energy);
        } else {
            m.account(RadioState::Dozing, window, spec_.energy);
        }
    }

    for (const auto& [i, dst] : deliveries) {
        const Transmission& t = txs[i];
        const SimTime nominal = t.start - SimTime::micros(node(t.node).anchor_offset_us());
        deliver(machine(dst), t.frame, t.start, nominal, counter);
    }
}

void World::end_superframe(SimTime now, std::int64_t counter)
{
    const SimTime idle = beacon_interval(spec_.superframe) - active_portion(spec_.superframe);
    if (idle.us > 0)
        for (auto& [id, m] : nodes_)
            m.account(RadioState::Dozing, idle, spec_.energy);

    if (!spec_.sgts.enabled || (counter + 1) % active_.horizon() != 0)
        return;
    for (auto& [id, m] : nodes_) {
        auto report = m.take_report(counter);
        if (!report)
            continue;
        if (id == pan_id_) {
            NodeMachine::Delivery d;
            d.merges = m.pan()->handle_report(*report, counter, d.confirms_issued);
            trace_confirms(now, id, d, counter);
            continue;
        }
        Frame f;
        f.kind = FrameKind::RssiReportMsg;
        f.source = id;
        f.destination = m.role() == Role::SimpleNode ? *m.spec().parent : pan_id_;
        f.payload_symbols = kReportSymbols;
        f.sequence = m.next_sequence();
        f.enqueued = now;
        f.body = std::move(*report);
        m.enqueue_cap(std::move(f));
    }
}

void World::deliver(NodeMachine& receiver, const Frame& frame, SimTime arrival, SimTime nominal,
                    std::int64_t counter)
{
    const NodeMachine::Delivery d = receiver.on_receive(frame, arrival, nominal, counter);
    if (d.synced) {
        synced_since_.emplace(receiver.id(), arrival);
        trace_.emit(arrival, receiver.id(), BeaconRecord{frame.source, receiver.anchor_offset_us(), counter});
    }
    trace_confirms(arrival, receiver.id(), d, counter);
}

void World::trace_confirms(SimTime now, NodeId node, const NodeMachine::Delivery& d, std::int64_t counter)
{
    for (const auto& c : d.confirms_issued) {
        std::string detail = "to=" + std::to_string(c.addressee) + " effective=" + std::to_string(c.effective_superframe);
        if (c.granted)
            trace_.emit(now, node, ScheduleRecord{"grant", detail + " " + describe_alloc(c.alloc), counter});
        else
            trace_.emit(now, node, ScheduleRecord{"refuse", detail + " reason=" + c.reason, counter});
    }
    for (const auto& m : d.merges) {
        const std::string pair = "first=" + std::to_string(m.first.owner) + "->" + std::to_string(m.first.peer)
                                 + " second=" + std::to_string(m.second.owner) + "->"
                                 + std::to_string(m.second.peer);
        if (const auto* moved = std::get_if<Allocation>(&m.result)) {
            trace_.emit(now, node, ScheduleRecord{"sgts-merge", pair + " " + describe_alloc(*moved), counter});
        } else if (const auto* refusal = std::get_if<MergeRefusal>(&m.result)) {
            std::ostringstream os;
            os << pair << " reason=" << to_string(refusal->reason) << " node=" << refusal->node;
            if (refusal->reason == MergeRefusal::Reason::InsufficientMargin)
                os << " margin=" << refusal->margin_db;
            trace_.emit(now, node, ScheduleRecord{"sgts-refused", os.str(), counter});
        } else {
            trace_.emit(now, node, ScheduleRecord{"sgts-no-report", pair, counter});
        }
    }
    for (const auto& c : d.confirms_received)
        trace_.emit(now, node,
                    ScheduleRecord{c.granted ? "confirm" : "refused",
                                   "effective=" + std::to_string(c.effective_superframe)
                                       + (c.granted ? " " + describe_alloc(c.alloc) : " reason=" + c.reason),
                                   counter});
}

} // namespace detmac
