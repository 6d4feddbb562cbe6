#pragma once

// Experiment programs built on the engine: the three-star scheduling example, the
// shared-slot power sweeps, latency measurement and merge soundness.

#include "detmac/engine.hpp"
#include "detmac/schedule.hpp"
#include "detmac/trace.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace detmac {

// --- scheduling example -------------------------------------------------------

/// Node set of the scheduling example: PAN 0, coordinators 1-3, nodes 11, 21,
/// 22, 31, 32, 33 with requests in that order.
WorldSpec fig3_world();

/// Plans a table offline: GBS per coordinator (unless an initial table is
/// given), then PDS grants and requests in (at_superframe, file) order.
/// Refused requests are skipped.
ScheduleTable plan_schedule(const WorldSpec& spec);

ScheduleTable run_schedule_demo();

// --- shared-slot sweep ----------------------------------------------------------

/// Two pairs N1(11)->C1(1) and N2(21)->C2(2) with GTS at slots 3 and 4 and
/// both sharing slot 5. Each node's path to the other pair's receiver is
/// 10 dB weaker than to its own.
WorldSpec fig7_world(std::int64_t offset_n1_us, std::int64_t offset_n2_us, double sigma_db);

/// Same slots, but both nodes send to C1 from equal distances and share
/// its synchronization.
WorldSpec fig8_world(double sigma_db);

struct SweepParams {
    double power_min_dbm = -16.0;
    double power_max_dbm = 3.6;
    double power_step_db = 0.5;
    int trials_per_point = 500;
    double bin_width_db = 1.0;
    enum class Pass { Both, SweepN1, SweepN2 };
    Pass pass = Pass::Both;
    std::uint64_t seed = 1;

    bool operator==(const SweepParams&) const = default;
};

struct SweepPoint {
    double delta_db = 0.0; ///< bin centre of the measured RSSI(N1) - RSSI(N2)
    int trials = 0;
    int positives = 0;
    double rate() const { return trials > 0 ? static_cast<double>(positives) / trials : 0.0; }
};

struct PowerPoint {
    double power_n1_dbm = 0.0;
    double power_n2_dbm = 0.0;
    int trials = 0;
    int success_n1 = 0;
    int success_n2 = 0;
    int collisions = 0; ///< shared-slot collisions summed over both receivers
    double mean_delta_r1_db = 0.0;
    double mean_delta_r2_db = 0.0;
};

struct SweepResult {
    NodeId n1 = 0, n2 = 0, r1 = 0, r2 = 0;
    /// N1's success at its receiver against the delta measured there; rises with delta.
    std::vector<SweepPoint> curve_n1;
    /// N2's success at its receiver against the delta measured there; falls with delta.
    std::vector<SweepPoint> curve_n2;
    std::vector<PowerPoint> powers;
    std::uint64_t trace_hash = 0;
};

/// Runs the sweep through the engine. The base world's initial table must hold
/// a level-0 shared cell plus a level-0 GTS per transmitter. Throws BadTopology.
SweepResult run_sgts_sweep(const WorldSpec& base, const SweepParams& params);

struct WindowEstimate {
    double n1_lo = 0, n1_hi = 0; ///< delta where N1's fitted rate crosses lo / hi
    double n2_lo = 0, n2_hi = 0;
    /// Span where neither node reaches `hi`: n1_hi - n2_hi.
    double width_db = 0;
    /// Delta where the fitted curves intersect.
    double crossover_db = 0;
};

/// Throws NonMonotone when a level is never crossed or the curves never meet.
WindowEstimate estimate_window(const SweepResult& result, double lo = 0.05, double hi = 0.95);

/// Pool-adjacent-violators fit, weighted by `weights`.
std::vector<double> isotonic_fit(const std::vector<double>& values, const std::vector<double>& weights,
                                 bool increasing);

std::string sweep_table_csv(const SweepResult& result);
std::string sweep_powers_csv(const SweepResult& result);

// --- latency ----------------------------------------------------------------------

struct NodeLatency {
    NodeId node = 0;
    NodeId peer = 0;
    int level = -1;     ///< -1 for best-effort (CAP) traffic
    SimTime bound;      ///< zero for best-effort traffic
    SimTime max;
    double mean_us = 0.0;
    int frames = 0;
    std::map<std::int64_t, int> histogram; ///< latency in whole milliseconds -> frames
};

struct LatencyViolation {
    NodeId node = 0;
    std::uint32_t sequence = 0;
    SimTime latency;
    SimTime bound;
};

struct LatencyStats {
    std::vector<NodeLatency> guaranteed;
    std::vector<NodeLatency> best_effort;
    std::vector<LatencyViolation> violations;
};

/// Bound for a level-n allocation: 2^n beacon intervals plus one slot.
SimTime latency_bound(const SuperframeConfig& config, int level);

LatencyStats measure_gts_latency(const Trace& trace, const SuperframeConfig& config);
LatencyStats measure_gts_latency(const WorldSpec& spec, SimTime duration);

/// Random topology with GTS holders (PDS and requested), best-effort nodes,
/// clock offsets and conforming periodic or sporadic traffic.
WorldSpec random_latency_scenario(std::uint64_t seed);

/// Run length used with random_latency_scenario.
SimTime random_scenario_duration(const WorldSpec& spec);

/// Overlapping transmissions in non-shared guaranteed cells and overlapping
/// beacons anywhere; empty when the trace is clean.
std::vector<std::string> check_exclusivity(const Trace& trace);

// --- merge soundness ------------------------------------------------------------

struct MergeSoundness {
    int scenarios = 0;
    int merges = 0;          ///< scenarios in which the PAN accepted the merge
    long occurrences = 0;    ///< shared-slot occurrences observed after merging
    long failures = 0;       ///< occurrences where a receiver missed its own frame
    std::vector<double> accepted_margins_db; ///< smaller reported margin per merge
    double collision_rate() const { return occurrences ? static_cast<double>(failures) / occurrences : 0.0; }
};

/// Random two-pair deployments with merging enabled at `threshold_db`. Each
/// accepted merge is then observed until `occurrences` shared slots are
/// collected in total.
MergeSoundness run_merge_soundness(std::uint64_t seed, double threshold_db, double sigma_db, long occurrences);

} // namespace detmac
