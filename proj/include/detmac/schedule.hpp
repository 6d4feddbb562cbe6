#pragma once

// PAN-coordinator slot schedule: a table of (superframe, slot) cells covering
// one planning horizon of 2^n_max superframes, plus the allocation algorithms
// that fill it (GBS, GTS/PDS, SGTS merging) and a validator.

#include "detmac/timing.hpp"
#include "detmac/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detmac {

enum class Origin { Requested, Pds };
enum class Direction { Uplink, Downlink };

std::string_view to_string(Origin origin);
std::string_view to_string(Direction direction);

/// A recurring guaranteed slot: `slot_index` in every superframe s of the
/// horizon with s mod 2^level == phase.
struct Allocation {
    NodeId owner = 0; ///< transmitter
    NodeId peer = 0;  ///< receiver
    int slot_index = 0;
    int level = 0;
    int phase = 0;
    Origin origin = Origin::Requested;
    Direction direction = Direction::Uplink;

    int period() const { return 1 << level; }
    bool occupies(std::int64_t superframe) const { return superframe % period() == phase; }

    bool operator==(const Allocation&) const = default;
};

struct Superbeacon {
    bool operator==(const Superbeacon&) const = default;
};
struct Gbs {
    NodeId coordinator = 0;
    bool operator==(const Gbs&) const = default;
};
struct Gts {
    Allocation alloc;
    bool operator==(const Gts&) const = default;
};
/// Two transmitter/receiver pairs sharing one cell; never more than two.
struct Sgts {
    Allocation first;
    Allocation second;
    bool operator==(const Sgts&) const = default;
};
struct Cap {
    bool operator==(const Cap&) const = default;
};
struct Inactive {
    bool operator==(const Inactive&) const = default;
};

using SlotEntry = std::variant<Superbeacon, Gbs, Gts, Sgts, Cap, Inactive>;

std::string_view entry_kind(const SlotEntry& entry);

/// True for cells where transmission is reserved (superbeacon, GBS, GTS, SGTS).
bool is_guaranteed(const SlotEntry& entry);

struct GtsRequest {
    NodeId owner = 0;
    NodeId peer = 0;
    int level = 0;
    Direction direction = Direction::Uplink;
    Origin origin = Origin::Requested;
};

/// RSSI a receiver measured for each transmitter it heard above sensitivity.
struct RssiReport {
    NodeId receiver = 0;
    std::map<NodeId, double> rssi_dbm;
    std::int64_t superframe = 0;

    bool operator==(const RssiReport&) const = default;
};

struct MergePolicy {
    double threshold_db = 10.0;
    std::int64_t now_superframe = 0;
    /// Level assumed for a transmitter missing from a report.
    double sensitivity_dbm = -92.0;
    std::set<NodeId> mobile;
};

struct MergeRefusal {
    enum class Reason { SameTransmitter, SameReceiver, InsufficientMargin, MobileNode };
    Reason reason;
    NodeId node = 0;        ///< receiver (margin) or mobile owner concerned
    double margin_db = 0.0; ///< measured margin for InsufficientMargin

    bool operator==(const MergeRefusal&) const = default;
};

std::string_view to_string(MergeRefusal::Reason reason);

/// Outcome of try_merge_sgts: the merged (moved) second allocation, or why not.
using MergeOutcome = std::variant<Allocation, MergeRefusal>;

class ScheduleTable {
public:
    explicit ScheduleTable(const SuperframeConfig& config);

    const SuperframeConfig& config() const { return config_; }
    int horizon() const { return config_.horizon(); }
    int slots() const { return config_.slots_per_superframe; }

    /// Cell inside the horizon; superframe in [0, horizon), slot in [0, slots).
    const SlotEntry& cell(int superframe, int slot) const;

    /// Cell for an absolute superframe counter (modulo the horizon).
    const SlotEntry& entry_at(std::int64_t counter, int slot) const;

    const std::vector<Allocation>& allocations() const { return allocations_; }
    const std::map<NodeId, int>& gbs_slots() const { return gbs_; }

    /// Reserves one level-0 beacon slot for a star coordinator and returns it.
    int allocate_gbs(NodeId coordinator);

    /// Reserves the given slot as the coordinator's GBS.
    void place_gbs(NodeId coordinator, int slot);

    /// Chooses a (slot, phase) for the request and records the allocation.
    Allocation allocate_gts(const GtsRequest& request);

    /// Records an allocation at its given slot and phase; every cell must be CAP.
    void place_gts(const Allocation& alloc);

    /// Puts two allocations into the same cells without any radio check.
    /// Experiment setups use it to force a shared slot.
    void force_sgts(const Allocation& first, const Allocation& second);

    /// Frees every allocation and GBS owned by `owner`.
    void release(NodeId owner);

    /// Merges `second` into the cells of `first` when both receivers report
    /// enough margin. The table is only modified on success.
    MergeOutcome try_merge_sgts(const Allocation& first, const Allocation& second,
                                const std::vector<RssiReport>& reports, const MergePolicy& policy);

    SimTime cap_duration(int superframe) const;
    SimTime cfp_duration(int superframe) const;

    /// Number of non-CAP cells in a superframe of the horizon.
    int occupied_cells(int superframe) const;

    // Raw mutation for loaders and tests that need inconsistent tables.
    void set_cell_unchecked(int superframe, int slot, SlotEntry entry);
    void add_allocation_unchecked(const Allocation& alloc);

    bool operator==(const ScheduleTable&) const = default;

private:
    SlotEntry& mutable_cell(int superframe, int slot);
    bool cells_free(int slot, int level, int phase) const;
    void check_level(int level) const;

    SuperframeConfig config_;
    std::vector<SlotEntry> cells_;
    std::vector<Allocation> allocations_;
    std::map<NodeId, int> gbs_;
};

struct Violation {
    enum class Rule {
        MissingSuperbeacon,
        StraySuperbeacon,
        DoubleBooking,
        TooManyTransmitters,
        SameReceiver,
        SameTransmitter,
        Periodicity,
        OrphanEntry,
        LevelRange,
        GbsLayout,
        CapShortage,
        InactiveInActivePortion,
    };
    Rule rule;
    int superframe = -1;
    int slot = -1;
    std::string detail;
};

std::string_view to_string(Violation::Rule rule);

std::vector<Violation> validate_schedule(const ScheduleTable& table);

/// Line-oriented dump, one line per (superframe, slot).
std::string dump_schedule(const ScheduleTable& table);

} // namespace detmac
