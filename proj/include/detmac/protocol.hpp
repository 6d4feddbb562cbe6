#pragma once

// Per-node MAC state machines: PAN coordinator, star coordinators and simple
// nodes. Machines never touch each other; the engine moves frames between
// them through the radio model.

#include "detmac/csma.hpp"
#include "detmac/frame.hpp"
#include "detmac/radio.hpp"
#include "detmac/schedule.hpp"
#include "detmac/timing.hpp"

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

namespace detmac {

enum class Role { PanCoordinator, StarCoordinator, SimpleNode };
enum class RadioState { Dozing, Listening, Transmitting, Waking };
/// Whose beacon a node anchors its slot boundaries to.
enum class SyncSource { Pan, Coordinator };

std::string_view to_string(Role role);
std::string_view to_string(RadioState state);

/// Supply currents per radio state (MC13192-class transceiver).
struct EnergyProfile {
    double dozing_ua = 40.0;
    double listening_ua = 37000.0;
    double transmitting_ua = 30000.0;
    double waking_ua = 500.0;
    SimTime wake_time = SimTime::micros(330);

    bool operator==(const EnergyProfile&) const = default;
};

class EnergyLedger {
public:
    /// Adds `duration` to the time spent in `state`. Throws on negative durations.
    void tick(RadioState state, SimTime duration);

    /// Logs one doze-to-awake transition: `wake_time` is moved from dozing
    /// (as far as available) to waking.
    void wake(SimTime wake_time);

    SimTime time_in(RadioState state) const { return time_[static_cast<std::size_t>(state)]; }
    SimTime total() const;
    int wakeups() const { return wakeups_; }

    /// Accumulated charge in microampere-seconds.
    double charge_uas(const EnergyProfile& profile) const;
    double charge_uah(const EnergyProfile& profile) const { return charge_uas(profile) / 3600.0; }

    bool operator==(const EnergyLedger&) const = default;

private:
    std::array<SimTime, 4> time_{};
    int wakeups_ = 0;
};

struct NodeSpec {
    NodeId id = 0;
    Role role = Role::SimpleNode;
    std::optional<NodeId> parent; ///< coordinator of a simple node
    Position position;
    double tx_power_dbm = 3.6;
    std::int64_t clock_offset_us = 0;
    bool mobile = false;
    SyncSource sync = SyncSource::Coordinator;

    bool operator==(const NodeSpec&) const = default;
};

struct SlotAction {
    enum class Kind { Doze, Listen, TransmitSuperbeacon, TransmitBeacon, TransmitData, Contend };
    Kind kind = Kind::Doze;
    std::optional<NodeId> peer; ///< expected sender when listening, receiver when sending data
    bool measurement = false;   ///< listening only to sample a candidate partner's RSSI
};

std::string_view to_string(SlotAction::Kind kind);

struct SgtsPolicy {
    bool enabled = false;
    double threshold_db = 10.0;

    bool operator==(const SgtsPolicy&) const = default;
};

/// Scheduling state owned by the PAN coordinator. Decisions are made on the
/// planned table, which becomes active at the next horizon boundary.
class PanScheduler {
public:
    PanScheduler(ScheduleTable initial, SgtsPolicy policy, double sensitivity_dbm, std::set<NodeId> known,
                 std::set<NodeId> mobile);

    const ScheduleTable& planned() const { return planned_; }
    const SgtsPolicy& policy() const { return policy_; }

    /// First horizon boundary strictly after `counter`.
    std::int64_t next_boundary(std::int64_t counter) const;

    GtsConfirm handle_request(const GtsRequestBody& body, std::int64_t counter);

    /// Previously dedicated slot: allocation without a prior request.
    GtsConfirm grant_pds(const GtsRequest& request, std::int64_t counter);

    struct MergeAttempt {
        Allocation first;
        Allocation second;
        std::variant<Allocation, MergeRefusal, std::string> result; ///< string: MissingReport detail
    };

    /// Stores the report and tries every candidate pair; returns all attempts
    /// and the confirms for successful merges.
    std::vector<MergeAttempt> handle_report(const RssiReport& report, std::int64_t counter,
                                            std::vector<GtsConfirm>& confirms);

    /// Confirms issued during the last horizon, repeated in every superbeacon.
    std::vector<GtsConfirm> recent_confirms(std::int64_t counter) const;

    const std::map<NodeId, RssiReport>& reports() const { return reports_; }

private:
    ScheduleTable planned_;
    SgtsPolicy policy_;
    double sensitivity_dbm_;
    std::set<NodeId> known_;
    std::set<NodeId> mobile_;
    std::map<NodeId, RssiReport> reports_;
    std::vector<GtsConfirm> issued_;
};

class NodeMachine {
public:
    NodeMachine(const NodeSpec& spec, NodeId pan_id, const SuperframeConfig& config, bool measure_rssi);

    NodeId id() const { return spec_.id; }
    Role role() const { return spec_.role; }
    const NodeSpec& spec() const { return spec_; }
    bool is_coordinator() const { return spec_.role != Role::SimpleNode; }

    /// Node whose beacon anchors this node's clock.
    NodeId sync_source() const;
    bool synchronized(std::int64_t counter) const;

    /// Offset (us) of this node's slot boundaries from nominal time.
    std::int64_t anchor_offset_us() const { return anchor_offset_us_; }

    /// Anchors slot boundaries to a decoded beacon: the sender's own offset
    /// (arrival - nominal) plus this node's constant clock offset.
    void sync_to_superbeacon(SimTime arrival, SimTime nominal, std::int64_t counter);

    /// Action for the slot starting now. Throws NotSynchronized.
    SlotAction on_slot_boundary(const ScheduleTable& table, std::int64_t counter, int slot) const;

    /// Enqueues a GtsRequest for the CAP. Throws LevelOutOfRange.
    const Frame& request_gts(int level, Direction direction, SimTime now, std::int64_t counter);

    void enqueue_data(Frame frame);
    bool has_data_for(NodeId peer) const;
    Frame pop_data_for(NodeId peer);
    const std::deque<Frame>& data_queue() const { return data_; }

    /// Frames waiting for CAP access (requests, reports, best-effort data).
    bool has_cap_frame() const { return !cap_.empty(); }
    const Frame& cap_head() const { return cap_.front(); }
    const std::deque<Frame>& cap_queue() const { return cap_; }
    Frame pop_cap();
    void enqueue_cap(Frame frame);

    /// Contention state of the CAP head frame, created on first use.
    CsmaCa& csma(const CsmaParams& params);
    void reset_csma() { csma_.reset(); }

    struct Delivery {
        std::vector<GtsConfirm> confirms_received; ///< confirms addressed to this node
        std::vector<GtsConfirm> confirms_issued;   ///< PAN decisions
        std::vector<PanScheduler::MergeAttempt> merges;
        bool synced = false;
    };

    /// Handles a decoded frame addressed to this node (or broadcast).
    Delivery on_receive(const Frame& frame, SimTime arrival, SimTime nominal, std::int64_t counter);

    /// Periodic housekeeping at superframe start (request retries).
    void on_superframe_start(SimTime now, std::int64_t counter);

    void record_rssi(NodeId from, double rssi);
    /// Mean RSSI per heard transmitter since the last report; empty if none.
    std::optional<RssiReport> take_report(std::int64_t counter);

    /// Time accounting. A doze stretch of at least the wake-up time ends in a
    /// logged wake-up; a shorter one is spent idle listening instead.
    void account(RadioState state, SimTime duration, const EnergyProfile& profile);
    /// Ledger so far; an unfinished doze stretch counts as dozing.
    EnergyLedger energy() const;

    PanScheduler* pan() { return pan_.get(); }
    const PanScheduler* pan() const { return pan_.get(); }
    void make_pan(std::unique_ptr<PanScheduler> scheduler) { pan_ = std::move(scheduler); }

    std::uint32_t next_sequence() { return sequence_++; }

    struct PendingRequest {
        GtsRequest request;
        std::int64_t sent_superframe = 0;
        int retries = 0;
    };
    const std::vector<PendingRequest>& pending_requests() const { return pending_; }

    /// Confirms heard in the last superbeacon, repeated in this coordinator's beacon.
    const std::vector<GtsConfirm>& relay_confirms() const { return relay_confirms_; }

private:
    Frame make_frame(FrameKind kind, NodeId destination, int symbols, SimTime now);

    NodeSpec spec_;
    NodeId pan_id_;
    SuperframeConfig config_;
    bool measure_rssi_;

    std::int64_t anchor_offset_us_ = 0;
    std::int64_t last_sync_ = -1;

    std::deque<Frame> data_;
    std::deque<Frame> cap_;
    std::optional<CsmaCa> csma_;
    std::vector<PendingRequest> pending_;
    std::vector<GtsConfirm> relay_confirms_;
    std::map<NodeId, std::pair<double, int>> rssi_samples_;

    EnergyLedger energy_;
    SimTime doze_run_;
    std::uint32_t sequence_ = 0;
    std::unique_ptr<PanScheduler> pan_;
};

} // namespace detmac
