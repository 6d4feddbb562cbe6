#include "detmac/schedule.hpp"

#include "detmac/error.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <utility>

namespace detmac {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(const Allocation& a)
{
    std::ostringstream out;
    out << a.owner << "->" << a.peer << " slot " << a.slot_index << " level " << a.level << " phase "
        << a.phase;
    return out.str();
}

} // namespace

std::string_view to_string(Origin origin)
{
    return origin == Origin::Pds ? "pds" : "requested";
}

std::string_view to_string(Direction direction)
{
    return direction == Direction::Downlink ? "downlink" : "uplink";
}

std::string_view to_string(MergeRefusal::Reason reason)
{
    switch (reason) {
    case MergeRefusal::Reason::SameTransmitter: return "SameTransmitter";
    case MergeRefusal::Reason::SameReceiver: return "SameReceiver";
    case MergeRefusal::Reason::InsufficientMargin: return "InsufficientMargin";
    case MergeRefusal::Reason::MobileNode: return "MobileNode";
    }
    return "Unknown";
}

std::string_view entry_kind(const SlotEntry& entry)
{
    return std::visit(Overloaded{
                          [](const Superbeacon&) { return std::string_view("superbeacon"); },
                          [](const Gbs&) { return std::string_view("gbs"); },
                          [](const Gts&) { return std::string_view("gts"); },
                          [](const Sgts&) { return std::string_view("sgts"); },
                          [](const Cap&) { return std::string_view("cap"); },
                          [](const Inactive&) { return std::string_view("inactive"); },
                      },
                      entry);
}

bool is_guaranteed(const SlotEntry& entry)
{
    return !std::holds_alternative<Cap>(entry) && !std::holds_alternative<Inactive>(entry);
}

ScheduleTable::ScheduleTable(const SuperframeConfig& config) : config_(config)
{
    config_.validate();
    cells_.assign(static_cast<std::size_t>(horizon()) * slots(), Cap{});
    for (int s = 0; s < horizon(); ++s)
        mutable_cell(s, 0) = Superbeacon{};
}

const SlotEntry& ScheduleTable::cell(int superframe, int slot) const
{
    if (slot < 0 || slot >= slots())
        throw Error(Errc::SlotOutOfRange, "slot " + std::to_string(slot));
    if (superframe < 0 || superframe >= horizon())
        throw Error(Errc::SlotOutOfRange, "superframe " + std::to_string(superframe) + " outside horizon");
    return cells_[static_cast<std::size_t>(superframe) * slots() + slot];
}

SlotEntry& ScheduleTable::mutable_cell(int superframe, int slot)
{
    return const_cast<SlotEntry&>(std::as_const(*this).cell(superframe, slot));
}

const SlotEntry& ScheduleTable::entry_at(std::int64_t counter, int slot) const
{
    if (slot < 0 || slot >= slots())
        throw Error(Errc::SlotOutOfRange, "slot " + std::to_string(slot));
    if (counter < 0)
        throw Error(Errc::SlotOutOfRange, "negative superframe counter");
    return cell(static_cast<int>(counter % horizon()), slot);
}

void ScheduleTable::check_level(int level) const
{
    if (level < 0 || level > config_.n_max)
        throw Error(Errc::LevelOutOfRange,
                    "level " + std::to_string(level) + " outside [0, " + std::to_string(config_.n_max) + "]");
}

int ScheduleTable::occupied_cells(int superframe) const
{
    int n = 0;
    for (int slot = 0; slot < slots(); ++slot)
        if (!std::holds_alternative<Cap>(cell(superframe, slot)))
            ++n;
    return n;
}

bool ScheduleTable::cells_free(int slot, int level, int phase) const
{
    const int period = 1 << level;
    for (int s = phase; s < horizon(); s += period) {
        if (!std::holds_alternative<Cap>(cell(s, slot)))
            return false;
        const int cap_left = slots() - occupied_cells(s) - 1;
        if (cap_left < config_.min_cap_slots)
            return false;
    }
    return true;
}

int ScheduleTable::allocate_gbs(NodeId coordinator)
{
    if (gbs_.contains(coordinator))
        throw Error(Errc::DuplicateGbs, "coordinator " + std::to_string(coordinator) + " already holds a GBS");

    const int stride = config_.gbs_stride > 0 ? config_.gbs_stride : std::max(1, slots() / 4);
    std::vector<int> candidates;
    for (int slot = stride; slot < slots(); slot += stride)
        candidates.push_back(slot);
    for (int slot = 1; slot < slots(); ++slot)
        if (slot % stride != 0)
            candidates.push_back(slot);

    for (int slot : candidates) {
        if (cells_free(slot, 0, 0)) {
            place_gbs(coordinator, slot);
            return slot;
        }
    }
    throw Error(Errc::SlotExhausted, "no free beacon slot for coordinator " + std::to_string(coordinator));
}

void ScheduleTable::place_gbs(NodeId coordinator, int slot)
{
    if (gbs_.contains(coordinator))
        throw Error(Errc::DuplicateGbs, "coordinator " + std::to_string(coordinator) + " already holds a GBS");
    if (slot <= 0 || slot >= slots())
        throw Error(Errc::SlotOutOfRange, "GBS slot " + std::to_string(slot));
    if (!cells_free(slot, 0, 0))
        throw Error(Errc::SlotExhausted, "slot " + std::to_string(slot) + " is not free in every superframe");
    for (int s = 0; s < horizon(); ++s)
        mutable_cell(s, slot) = Gbs{coordinator};
    gbs_[coordinator] = slot;
}

Allocation ScheduleTable::allocate_gts(const GtsRequest& request)
{
    check_level(request.level);
    if (request.owner == request.peer)
        throw Error(Errc::InvalidArgument, "owner and peer must differ");

    const int period = 1 << request.level;
    std::optional<Allocation> best;
    int best_load = std::numeric_limits<int>::max();

    // Phase-major scan so ties resolve to the lowest phase, then lowest slot.
    for (int phase = 0; phase < period; ++phase) {
        for (int slot = 1; slot < slots(); ++slot) {
            if (!cells_free(slot, request.level, phase))
                continue;
            int load = 0;
            for (int s = 0; s < horizon(); ++s)
                load = std::max(load, occupied_cells(s) + ((s % period == phase) ? 1 : 0));
            if (load < best_load) {
                best_load = load;
                best = Allocation{request.owner, request.peer, slot,           request.level,
                                  phase,         request.origin, request.direction};
            }
        }
    }
    if (!best)
        throw Error(Errc::SlotExhausted, "no free (slot, phase) for level " + std::to_string(request.level)
                                             + " request of node " + std::to_string(request.owner));
    place_gts(*best);
    return *best;
}

void ScheduleTable::place_gts(const Allocation& alloc)
{
    check_level(alloc.level);
    if (alloc.owner == alloc.peer)
        throw Error(Errc::InvalidArgument, "owner and peer must differ");
    if (alloc.slot_index <= 0 || alloc.slot_index >= slots())
        throw Error(Errc::SlotOutOfRange, "GTS slot " + std::to_string(alloc.slot_index));
    if (alloc.phase < 0 || alloc.phase >= alloc.period())
        throw Error(Errc::InvalidArgument, "phase outside [0, 2^level)");
    if (!cells_free(alloc.slot_index, alloc.level, alloc.phase))
        throw Error(Errc::SlotExhausted, "cells of " + describe(alloc) + " are not free");
    for (int s = alloc.phase; s < horizon(); s += alloc.period())
        mutable_cell(s, alloc.slot_index) = Gts{alloc};
    allocations_.push_back(alloc);
}

void ScheduleTable::force_sgts(const Allocation& first, const Allocation& second)
{
    if (first.slot_index != second.slot_index || first.level != second.level || first.phase != second.phase)
        throw Error(Errc::InvalidArgument, "shared allocations must use the same slot, level and phase");
    place_gts(first);
    for (int s = first.phase; s < horizon(); s += first.period())
        mutable_cell(s, first.slot_index) = Sgts{first, second};
    allocations_.push_back(second);
}

void ScheduleTable::release(NodeId owner)
{
    const bool has_alloc = std::any_of(allocations_.begin(), allocations_.end(),
                                       [&](const Allocation& a) { return a.owner == owner; });
    if (!has_alloc && !gbs_.contains(owner))
        throw Error(Errc::UnknownOwner, "node " + std::to_string(owner) + " holds no allocation");

    for (auto& entry : cells_) {
        if (auto* gts = std::get_if<Gts>(&entry); gts && gts->alloc.owner == owner) {
            entry = Cap{};
        } else if (auto* sgts = std::get_if<Sgts>(&entry)) {
            const bool first = sgts->first.owner == owner;
            const bool second = sgts->second.owner == owner;
            if (first && second)
                entry = Cap{};
            else if (first)
                entry = Gts{sgts->second};
            else if (second)
                entry = Gts{sgts->first};
        } else if (auto* gbs = std::get_if<Gbs>(&entry); gbs && gbs->coordinator == owner) {
            entry = Cap{};
        }
    }
    std::erase_if(allocations_, [&](const Allocation& a) { return a.owner == owner; });
    gbs_.erase(owner);
}

MergeOutcome ScheduleTable::try_merge_sgts(const Allocation& first, const Allocation& second,
                                           const std::vector<RssiReport>& reports, const MergePolicy& policy)
{
    if (first.level != second.level)
        throw Error(Errc::InvalidArgument, "SGTS candidates must share a reservation level");
    for (const Allocation* a : {&first, &second}) {
        if (std::find(allocations_.begin(), allocations_.end(), *a) == allocations_.end())
            throw Error(Errc::InvalidArgument, "allocation " + describe(*a) + " is not in the table");
        const auto& entry = cell(a->phase, a->slot_index);
        if (!std::holds_alternative<Gts>(entry))
            throw Error(Errc::InvalidArgument, "allocation " + describe(*a) + " is not a plain GTS");
    }
    if (first == second)
        throw Error(Errc::InvalidArgument, "cannot merge an allocation with itself");

    if (first.owner == second.owner)
        return MergeRefusal{MergeRefusal::Reason::SameTransmitter, first.owner, 0.0};
    if (first.peer == second.peer)
        return MergeRefusal{MergeRefusal::Reason::SameReceiver, first.peer, 0.0};
    for (NodeId owner : {first.owner, second.owner})
        if (policy.mobile.contains(owner))
            return MergeRefusal{MergeRefusal::Reason::MobileNode, owner, 0.0};

    auto find_report = [&](NodeId receiver, NodeId wanted) -> const RssiReport& {
        const RssiReport* latest = nullptr;
        for (const auto& r : reports)
            if (r.receiver == receiver && (!latest || r.superframe > latest->superframe))
                latest = &r;
        if (!latest)
            throw Error(Errc::MissingReport, "no RSSI report from node " + std::to_string(receiver));
        if (policy.now_superframe - latest->superframe > horizon())
            throw Error(Errc::MissingReport, "RSSI report from node " + std::to_string(receiver) + " is stale");
        if (!latest->rssi_dbm.contains(wanted))
            throw Error(Errc::MissingReport, "report from node " + std::to_string(receiver)
                                                 + " does not cover transmitter " + std::to_string(wanted));
        return *latest;
    };
    auto margin = [&](const RssiReport& report, NodeId wanted, NodeId interferer) {
        auto it = report.rssi_dbm.find(interferer);
        const double interference = it != report.rssi_dbm.end() ? it->second : policy.sensitivity_dbm;
        return report.rssi_dbm.at(wanted) - interference;
    };

    const RssiReport& at_first = find_report(first.peer, first.owner);
    const RssiReport& at_second = find_report(second.peer, second.owner);
    const double margin_first = margin(at_first, first.owner, second.owner);
    const double margin_second = margin(at_second, second.owner, first.owner);
    if (margin_first < policy.threshold_db)
        return MergeRefusal{MergeRefusal::Reason::InsufficientMargin, first.peer, margin_first};
    if (margin_second < policy.threshold_db)
        return MergeRefusal{MergeRefusal::Reason::InsufficientMargin, second.peer, margin_second};

    Allocation moved = second;
    moved.slot_index = first.slot_index;
    moved.phase = first.phase;
    for (int s = second.phase; s < horizon(); s += second.period())
        mutable_cell(s, second.slot_index) = Cap{};
    for (int s = first.phase; s < horizon(); s += first.period())
        mutable_cell(s, first.slot_index) = Sgts{first, moved};
    *std::find(allocations_.begin(), allocations_.end(), second) = moved;
    return moved;
}

SimTime ScheduleTable::cap_duration(int superframe) const
{
    int n = 0;
    for (int slot = 0; slot < slots(); ++slot)
        if (std::holds_alternative<Cap>(cell(superframe, slot)))
            ++n;
    return slot_duration(config_) * n;
}

// The superbeacon slot counts as contention-free.
SimTime ScheduleTable::cfp_duration(int superframe) const
{
    int n = 0;
    for (int slot = 0; slot < slots(); ++slot)
        if (is_guaranteed(cell(superframe, slot)))
            ++n;
    return slot_duration(config_) * n;
}

void ScheduleTable::set_cell_unchecked(int superframe, int slot, SlotEntry entry)
{
    mutable_cell(superframe, slot) = std::move(entry);
}

void ScheduleTable::add_allocation_unchecked(const Allocation& alloc)
{
    allocations_.push_back(alloc);
}

std::string_view to_string(Violation::Rule rule)
{
    using R = Violation::Rule;
    switch (rule) {
    case R::MissingSuperbeacon: return "MissingSuperbeacon";
    case R::StraySuperbeacon: return "StraySuperbeacon";
    case R::DoubleBooking: return "DoubleBooking";
    case R::TooManyTransmitters: return "TooManyTransmitters";
    case R::SameReceiver: return "SameReceiver";
    case R::SameTransmitter: return "SameTransmitter";
    case R::Periodicity: return "Periodicity";
    case R::OrphanEntry: return "OrphanEntry";
    case R::LevelRange: return "LevelRange";
    case R::GbsLayout: return "GbsLayout";
    case R::CapShortage: return "CapShortage";
    case R::InactiveInActivePortion: return "InactiveInActivePortion";
    }
    return "Unknown";
}

std::vector<Violation> validate_schedule(const ScheduleTable& table)
{
    using R = Violation::Rule;
    std::vector<Violation> out;
    const auto& config = table.config();

    for (const auto& a : table.allocations()) {
        if (a.level < 0 || a.level > config.n_max || a.phase < 0 || a.phase >= a.period()
            || a.slot_index <= 0 || a.slot_index >= table.slots() || a.owner == a.peer)
            out.push_back({R::LevelRange, a.phase, a.slot_index, describe(a)});
    }

    for (int s = 0; s < table.horizon(); ++s) {
        int cap_cells = 0;
        for (int slot = 0; slot < table.slots(); ++slot) {
            std::vector<Allocation> claims;
            for (const auto& a : table.allocations())
                if (a.slot_index == slot && a.level >= 0 && a.level <= 16 && a.occupies(s))
                    claims.push_back(a);
            const SlotEntry& entry = table.cell(s, slot);
            auto report = [&](R rule, std::string detail) { out.push_back({rule, s, slot, std::move(detail)}); };

            if (slot == 0 && !std::holds_alternative<Superbeacon>(entry))
                report(R::MissingSuperbeacon, "slot 0 holds " + std::string(entry_kind(entry)));

            std::visit(Overloaded{
                           [&](const Superbeacon&) {
                               if (slot != 0)
                                   report(R::StraySuperbeacon, "superbeacon outside slot 0");
                               if (!claims.empty())
                                   report(R::DoubleBooking, "allocation on the superbeacon slot");
                           },
                           [&](const Gbs& g) {
                               auto it = table.gbs_slots().find(g.coordinator);
                               if (it == table.gbs_slots().end() || it->second != slot)
                                   report(R::GbsLayout, "unregistered GBS of " + std::to_string(g.coordinator));
                               if (!claims.empty())
                                   report(R::DoubleBooking, "allocation on a GBS");
                           },
                           [&](const Gts& g) {
                               if (claims.size() > 1)
                                   report(R::DoubleBooking, std::to_string(claims.size()) + " allocations in a GTS");
                               else if (claims.empty())
                                   report(R::OrphanEntry, describe(g.alloc));
                               else if (!(claims.front() == g.alloc))
                                   report(R::Periodicity, "cell holds " + describe(g.alloc));
                           },
                           [&](const Sgts& g) {
                               if (claims.size() > 2) {
                                   report(R::TooManyTransmitters, std::to_string(claims.size()) + " transmitters");
                               } else {
                                   const bool has_first = std::find(claims.begin(), claims.end(), g.first) != claims.end();
                                   const bool has_second = std::find(claims.begin(), claims.end(), g.second) != claims.end();
                                   if (!has_first || !has_second || claims.size() != 2)
                                       report(R::OrphanEntry, "SGTS members do not match allocations");
                               }
                               if (g.first.owner == g.second.owner)
                                   report(R::SameTransmitter, "owner " + std::to_string(g.first.owner));
                               if (g.first.peer == g.second.peer)
                                   report(R::SameReceiver, "peer " + std::to_string(g.first.peer));
                           },
                           [&](const Cap&) {
                               ++cap_cells;
                               if (claims.size() > 1)
                                   report(R::DoubleBooking, std::to_string(claims.size()) + " allocations on a CAP cell");
                               else if (claims.size() == 1)
                                   report(R::Periodicity, "missing " + describe(claims.front()));
                           },
                           [&](const Inactive&) {
                               report(R::InactiveInActivePortion, "inactive cell");
                               if (!claims.empty())
                                   report(R::Periodicity, "allocation on an inactive cell");
                           },
                       },
                       entry);
        }
        if (cap_cells < config.min_cap_slots)
            out.push_back({R::CapShortage, s, -1,
                           std::to_string(cap_cells) + " CAP cells, " + std::to_string(config.min_cap_slots)
                               + " required"});
    }

    for (const auto& [coordinator, slot] : table.gbs_slots()) {
        for (int s = 0; s < table.horizon(); ++s) {
            const auto* g = std::get_if<Gbs>(&table.cell(s, slot));
            if (!g || g->coordinator != coordinator)
                out.push_back({R::GbsLayout, s, slot, "GBS of " + std::to_string(coordinator) + " missing"});
        }
    }
    return out;
}

std::string dump_schedule(const ScheduleTable& table)
{
    const auto& c = table.config();
    std::ostringstream out;
    out << "# schedule bo=" << c.bo << " so=" << c.so << " n_max=" << c.n_max << " slots=" << c.slots_per_superframe
        << "\n";
    auto alloc_fields = [&](const Allocation& a) {
        out << " owner=" << a.owner << " peer=" << a.peer << " level=" << a.level << " phase=" << a.phase
            << " origin=" << to_string(a.origin) << " dir=" << to_string(a.direction);
    };
    for (int s = 0; s < table.horizon(); ++s) {
        for (int slot = 0; slot < table.slots(); ++slot) {
            const SlotEntry& entry = table.cell(s, slot);
            out << s << ' ' << slot << ' ' << entry_kind(entry);
            if (const auto* g = std::get_if<Gbs>(&entry))
                out << " coordinator=" << g->coordinator;
            else if (const auto* g = std::get_if<Gts>(&entry))
                alloc_fields(g->alloc);
            else if (const auto* g = std::get_if<Sgts>(&entry)) {
                alloc_fields(g->first);
                out << " |";
                alloc_fields(g->second);
            }
            out << '\n';
        }
    }
    return out.str();
}

} // namespace detmac
