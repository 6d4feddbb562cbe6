#include "detmac/protocol.hpp"

#include "detmac/error.hpp"

#include <algorithm>
#include <string>

namespace detmac {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr int kRequestRetryHorizons = 3;
constexpr int kMaxRequestRetries = 3;

bool same_request(const GtsRequest& r, const Allocation& a)
{
    return r.owner == a.owner && r.peer == a.peer && r.level == a.level;
}

} // namespace

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::PanCoordinator: return "pan";
    case Role::StarCoordinator: return "coordinator";
    case Role::SimpleNode: return "node";
    }
    return "unknown";
}

std::string_view to_string(RadioState state)
{
    switch (state) {
    case RadioState::Dozing: return "dozing";
    case RadioState::Listening: return "listening";
    case RadioState::Transmitting: return "transmitting";
    case RadioState::Waking: return "waking";
    }
    return "unknown";
}

std::string_view to_string(SlotAction::Kind kind)
{
    switch (kind) {
    case SlotAction::Kind::Doze: return "doze";
    case SlotAction::Kind::Listen: return "listen";
    case SlotAction::Kind::TransmitSuperbeacon: return "transmit-superbeacon";
    case SlotAction::Kind::TransmitBeacon: return "transmit-beacon";
    case SlotAction::Kind::TransmitData: return "transmit-data";
    case SlotAction::Kind::Contend: return "contend";
    }
    return "unknown";
}

// --- energy -----------------------------------------------------------------

void EnergyLedger::tick(RadioState state, SimTime duration)
{
    if (duration.us < 0)
        throw Error(Errc::InvalidArgument, "negative duration");
    time_[static_cast<std::size_t>(state)] += duration;
}

void EnergyLedger::wake(SimTime wake_time)
{
    auto& dozing = time_[static_cast<std::size_t>(RadioState::Dozing)];
    dozing -= std::min(dozing, wake_time);
    time_[static_cast<std::size_t>(RadioState::Waking)] += wake_time;
    ++wakeups_;
}

SimTime EnergyLedger::total() const
{
    SimTime sum;
    for (SimTime t : time_)
        sum += t;
    return sum;
}

double EnergyLedger::charge_uas(const EnergyProfile& profile) const
{
    return time_in(RadioState::Dozing).seconds() * profile.dozing_ua
           + time_in(RadioState::Listening).seconds() * profile.listening_ua
           + time_in(RadioState::Transmitting).seconds() * profile.transmitting_ua
           + time_in(RadioState::Waking).seconds() * profile.waking_ua;
}

// --- PAN scheduler ------------------------------------------------------------

PanScheduler::PanScheduler(ScheduleTable initial, SgtsPolicy policy, double sensitivity_dbm, std::set<NodeId> known,
                           std::set<NodeId> mobile)
    : planned_(std::move(initial)),
      policy_(policy),
      sensitivity_dbm_(sensitivity_dbm),
      known_(std::move(known)),
      mobile_(std::move(mobile))
{
}

std::int64_t PanScheduler::next_boundary(std::int64_t counter) const
{
    const std::int64_t h = planned_.horizon();
    const std::int64_t floor_div = counter >= 0 ? counter / h : -((-counter + h - 1) / h);
    return (floor_div + 1) * h;
}

GtsConfirm PanScheduler::handle_request(const GtsRequestBody& body, std::int64_t counter)
{
    const GtsRequest& req = body.request;
    GtsConfirm confirm;
    confirm.addressee = body.requester;
    confirm.issued_superframe = counter;
    confirm.effective_superframe = next_boundary(counter);
    confirm.alloc = Allocation{req.owner, req.peer, 0, req.level, 0, req.origin, req.direction};

    // Retransmitted requests get the allocation they already hold.
    for (const auto& a : planned_.allocations()) {
        if (same_request(req, a)) {
            confirm.granted = true;
            confirm.alloc = a;
            issued_.push_back(confirm);
            return confirm;
        }
    }
    if (!known_.contains(req.owner) || !known_.contains(req.peer)) {
        confirm.reason = std::string(to_string(Errc::UnknownNode));
    } else {
        try {
            confirm.alloc = planned_.allocate_gts(req);
            confirm.granted = true;
        } catch (const Error& e) {
            confirm.reason = std::string(to_string(e.code()));
        }
    }
    issued_.push_back(confirm);
    return confirm;
}

GtsConfirm PanScheduler::grant_pds(const GtsRequest& request, std::int64_t counter)
{
    GtsRequest req = request;
    req.origin = Origin::Pds;
    return handle_request(GtsRequestBody{req.owner, req}, counter);
}

std::vector<PanScheduler::MergeAttempt> PanScheduler::handle_report(const RssiReport& report, std::int64_t counter,
                                                                    std::vector<GtsConfirm>& confirms)
{
    reports_[report.receiver] = report;
    std::vector<MergeAttempt> attempts;
    if (!policy_.enabled)
        return attempts;

    std::vector<RssiReport> reports;
    for (const auto& [id, r] : reports_)
        reports.push_back(r);
    const MergePolicy merge_policy{policy_.threshold_db, counter, sensitivity_dbm_, mobile_};

    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Allocation> plain;
        for (const auto& a : planned_.allocations())
            if (std::holds_alternative<Gts>(planned_.cell(a.phase, a.slot_index)))
                plain.push_back(a);
        for (std::size_t i = 0; i < plain.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < plain.size() && !changed; ++j) {
                const Allocation& a = plain[i];
                const Allocation& b = plain[j];
                if (a.level != b.level || a.peer == b.peer || a.owner == b.owner)
                    continue;
                MergeAttempt attempt{a, b, std::string()};
                try {
                    auto outcome = planned_.try_merge_sgts(a, b, reports, merge_policy);
                    if (const auto* moved = std::get_if<Allocation>(&outcome)) {
                        attempt.result = *moved;
                        for (const Allocation& member : {a, *moved}) {
                            GtsConfirm c;
                            c.addressee = member.owner;
                            c.granted = true;
                            c.alloc = member;
                            c.issued_superframe = counter;
                            c.effective_superframe = next_boundary(counter);
                            issued_.push_back(c);
                            confirms.push_back(c);
                        }
                        changed = true;
                    } else {
                        attempt.result = std::get<MergeRefusal>(outcome);
                    }
                } catch (const Error& e) {
                    if (e.code() != Errc::MissingReport)
                        throw;
                    attempt.result = std::string(e.what());
                }
                attempts.push_back(std::move(attempt));
            }
        }
    }
    return attempts;
}

std::vector<GtsConfirm> PanScheduler::recent_confirms(std::int64_t counter) const
{
    std::vector<GtsConfirm> out;
    for (const auto& c : issued_)
        if (counter - c.issued_superframe < planned_.horizon())
            out.push_back(c);
    return out;
}

// --- node machine -------------------------------------------------------------

NodeMachine::NodeMachine(const NodeSpec& spec, NodeId pan_id, const SuperframeConfig& config, bool measure_rssi)
    : spec_(spec), pan_id_(pan_id), config_(config), measure_rssi_(measure_rssi)
{
    if (spec_.role == Role::SimpleNode && !spec_.parent)
        throw Error(Errc::TopologyInvalid, "simple node " + std::to_string(spec_.id) + " has no parent");
    if (spec_.role == Role::PanCoordinator)
        anchor_offset_us_ = 0;
}

NodeId NodeMachine::sync_source() const
{
    if (spec_.role == Role::SimpleNode && spec_.sync == SyncSource::Coordinator)
        return *spec_.parent;
    return pan_id_;
}

bool NodeMachine::synchronized(std::int64_t counter) const
{
    if (spec_.role == Role::PanCoordinator)
        return true;
    return last_sync_ >= 0 && counter - last_sync_ <= config_.horizon();
}

void NodeMachine::sync_to_superbeacon(SimTime arrival, SimTime nominal, std::int64_t counter)
{
    anchor_offset_us_ = (arrival - nominal).us + spec_.clock_offset_us;
    last_sync_ = counter;
}

SlotAction NodeMachine::on_slot_boundary(const ScheduleTable& table, std::int64_t counter, int slot) const
{
    using K = SlotAction::Kind;
    if (!synchronized(counter))
        throw Error(Errc::NotSynchronized, "node " + std::to_string(spec_.id));

    const NodeId me = spec_.id;
    const SlotEntry& entry = table.entry_at(counter, slot);

    auto transmit_or_doze = [&](const Allocation& a) {
        return has_data_for(a.peer) ? SlotAction{K::TransmitData, a.peer, false} : SlotAction{};
    };

    return std::visit(
        Overloaded{
            [&](const Superbeacon&) {
                if (spec_.role == Role::PanCoordinator)
                    return SlotAction{K::TransmitSuperbeacon, std::nullopt, false};
                if (sync_source() == pan_id_)
                    return SlotAction{K::Listen, pan_id_, false};
                return SlotAction{};
            },
            [&](const Gbs& g) {
                if (g.coordinator == me)
                    return SlotAction{K::TransmitBeacon, std::nullopt, false};
                if (sync_source() == g.coordinator)
                    return SlotAction{K::Listen, g.coordinator, false};
                return SlotAction{};
            },
            [&](const Gts& g) {
                const Allocation& a = g.alloc;
                if (a.owner == me)
                    return transmit_or_doze(a);
                if (a.peer == me)
                    return SlotAction{K::Listen, a.owner, false};
                if (measure_rssi_) {
                    for (const auto& mine : table.allocations())
                        if (mine.peer == me && mine.level == a.level && mine.owner != a.owner)
                            return SlotAction{K::Listen, a.owner, true};
                }
                return SlotAction{};
            },
            [&](const Sgts& g) {
                if (g.first.owner == me)
                    return transmit_or_doze(g.first);
                if (g.second.owner == me)
                    return transmit_or_doze(g.second);
                if (g.first.peer == me)
                    return SlotAction{K::Listen, g.first.owner, false};
                if (g.second.peer == me)
                    return SlotAction{K::Listen, g.second.owner, false};
                return SlotAction{};
            },
            [&](const Cap&) {
                if (has_cap_frame())
                    return SlotAction{K::Contend, std::nullopt, false};
                if (is_coordinator())
                    return SlotAction{K::Listen, std::nullopt, false};
                return SlotAction{};
            },
            [&](const Inactive&) { return SlotAction{}; },
        },
        entry);
}

Frame NodeMachine::make_frame(FrameKind kind, NodeId destination, int symbols, SimTime now)
{
    Frame f;
    f.kind = kind;
    f.source = spec_.id;
    f.destination = destination;
    f.payload_symbols = symbols;
    f.sequence = next_sequence();
    f.enqueued = now;
    return f;
}

const Frame& NodeMachine::request_gts(int level, Direction direction, SimTime now, std::int64_t counter)
{
    if (level < 0 || level > config_.n_max)
        throw Error(Errc::LevelOutOfRange, "level " + std::to_string(level));
    if (spec_.role == Role::PanCoordinator)
        throw Error(Errc::InvalidArgument, "the PAN coordinator does not request slots");

    const NodeId upstream = spec_.role == Role::SimpleNode ? *spec_.parent : pan_id_;
    GtsRequest req;
    req.level = level;
    req.direction = direction;
    req.origin = Origin::Requested;
    req.owner = direction == Direction::Uplink ? spec_.id : upstream;
    req.peer = direction == Direction::Uplink ? upstream : spec_.id;

    Frame f = make_frame(FrameKind::GtsRequest, upstream, kRequestSymbols, now);
    f.body = GtsRequestBody{spec_.id, req};
    pending_.push_back(PendingRequest{req, counter, 0});
    cap_.push_back(std::move(f));
    return cap_.back();
}

void NodeMachine::enqueue_data(Frame frame)
{
    data_.push_back(std::move(frame));
}

bool NodeMachine::has_data_for(NodeId peer) const
{
    return std::any_of(data_.begin(), data_.end(), [&](const Frame& f) { return f.destination == peer; });
}

Frame NodeMachine::pop_data_for(NodeId peer)
{
    auto it = std::find_if(data_.begin(), data_.end(), [&](const Frame& f) { return f.destination == peer; });
    if (it == data_.end())
        throw Error(Errc::InvalidArgument, "no queued frame for node " + std::to_string(peer));
    Frame f = std::move(*it);
    data_.erase(it);
    return f;
}

Frame NodeMachine::pop_cap()
{
    Frame f = std::move(cap_.front());
    cap_.pop_front();
    csma_.reset();
    return f;
}

void NodeMachine::enqueue_cap(Frame frame)
{
    cap_.push_back(std::move(frame));
}

CsmaCa& NodeMachine::csma(const CsmaParams& params)
{
    if (!csma_)
        csma_.emplace(params);
    return *csma_;
}

NodeMachine::Delivery NodeMachine::on_receive(const Frame& frame, SimTime arrival, SimTime nominal,
                                              std::int64_t counter)
{
    Delivery out;
    switch (frame.kind) {
    case FrameKind::Superbeacon:
    case FrameKind::Beacon: {
        if (frame.source == sync_source()) {
            sync_to_superbeacon(arrival, nominal, counter);
            out.synced = true;
        }
        const auto* body = std::get_if<BeaconBody>(&frame.body);
        if (!body)
            break;
        if (frame.kind == FrameKind::Superbeacon && spec_.role == Role::StarCoordinator)
            relay_confirms_ = body->confirms;
        for (const auto& c : body->confirms) {
            if (c.addressee != spec_.id)
                continue;
            const auto before = pending_.size();
            std::erase_if(pending_, [&](const PendingRequest& p) { return same_request(p.request, c.alloc); });
            if (pending_.size() != before)
                out.confirms_received.push_back(c);
        }
        break;
    }
    case FrameKind::GtsRequest: {
        const auto& body = std::get<GtsRequestBody>(frame.body);
        if (pan_) {
            out.confirms_issued.push_back(pan_->handle_request(body, counter));
        } else if (spec_.role == Role::StarCoordinator) {
            Frame relay = make_frame(FrameKind::GtsRequest, pan_id_, frame.payload_symbols, arrival);
            relay.body = body;
            cap_.push_back(std::move(relay));
        }
        break;
    }
    case FrameKind::RssiReportMsg: {
        const auto& report = std::get<RssiReport>(frame.body);
        if (pan_) {
            out.merges = pan_->handle_report(report, counter, out.confirms_issued);
        } else if (spec_.role == Role::StarCoordinator) {
            Frame relay = make_frame(FrameKind::RssiReportMsg, pan_id_, frame.payload_symbols, arrival);
            relay.body = report;
            cap_.push_back(std::move(relay));
        }
        break;
    }
    case FrameKind::Data:
        break;
    }
    return out;
}

void NodeMachine::on_superframe_start(SimTime now, std::int64_t counter)
{
    const std::int64_t timeout = static_cast<std::int64_t>(kRequestRetryHorizons) * config_.horizon();
    for (auto& p : pending_) {
        if (counter - p.sent_superframe <= timeout || p.retries >= kMaxRequestRetries)
            continue;
        const NodeId upstream = spec_.role == Role::SimpleNode ? *spec_.parent : pan_id_;
        Frame f = make_frame(FrameKind::GtsRequest, upstream, kRequestSymbols, now);
        f.body = GtsRequestBody{spec_.id, p.request};
        cap_.push_back(std::move(f));
        p.sent_superframe = counter;
        ++p.retries;
    }
    std::erase_if(pending_, [&](const PendingRequest& p) {
        return p.retries >= kMaxRequestRetries && counter - p.sent_superframe > timeout;
    });
}

void NodeMachine::record_rssi(NodeId from, double rssi)
{
    auto& [sum, count] = rssi_samples_[from];
    sum += rssi;
    ++count;
}

std::optional<RssiReport> NodeMachine::take_report(std::int64_t counter)
{
    if (!measure_rssi_ || rssi_samples_.empty())
        return std::nullopt;
    RssiReport report;
    report.receiver = spec_.id;
    report.superframe = counter;
    for (const auto& [from, acc] : rssi_samples_)
        report.rssi_dbm[from] = acc.first / acc.second;
    rssi_samples_.clear();
    return report;
}

void NodeMachine::account(RadioState state, SimTime duration, const EnergyProfile& profile)
{
    if (state == RadioState::Dozing) {
        doze_run_ += duration;
        return;
    }
    if (doze_run_ >= profile.wake_time && doze_run_.us > 0) {
        energy_.tick(RadioState::Dozing, doze_run_);
        energy_.wake(profile.wake_time);
    } else {
        energy_.tick(RadioState::Listening, doze_run_);
    }
    doze_run_ = SimTime{};
    energy_.tick(state, duration);
}

EnergyLedger NodeMachine::energy() const
{
    EnergyLedger out = energy_;
    out.tick(RadioState::Dozing, doze_run_);
    return out;
}

} // namespace detmac
