// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include "detmac/error.hpp"
#include "detmac/harness.hpp"
#include "detmac/schedule.hpp"
#include "detmac/timing.hpp"

#include "../support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace detmac;

namespace {

// Pinned tolerances.
constexpr double kSweepStepDb = 0.5;          // criterion 3: one sweep step
constexpr double kCrossoverTolDb = 1.0;       // criterion 4
constexpr double kMonotoneSlack = 0.02;       // criterion 4: sampling noise
constexpr int kMonotoneMinTrials = 500;       // criterion 4: bins checked for monotonicity
constexpr double kAsymmetryShiftDb = 1.0;     // criterion 5
constexpr int kLatencyScenarios = 100;        // criteria 6 and 7
constexpr double kMergeRateLimit = 0.01;      // criterion 10
constexpr long kMergeOccurrences = 10000;     // criterion 10

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int number, const char* title, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = Outcome{false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail += " [over the " + std::to_string(static_cast<int>(limit_s)) + " s limit]";
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2f s", secs);
    std::cout << "criterion " << number << ": " << (o.pass ? "PASS" : "FAIL") << "  " << title << "  (" << timing
              << ")  " << o.detail << std::endl;
    failures += !o.pass;
}

std::string num(double v, int digits = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Outcome timing()
{
    bool ok = true;
    for (int bo = 0; bo <= 8; ++bo) {
        for (int so = 0; so <= bo; ++so) {
            const SuperframeConfig c{bo, so, 0, 16, 0, 0};
            ok &= beacon_interval(c).us == 15360LL << bo;
            ok &= active_portion(c).us == 15360LL << so;
        }
    }
    ok &= beacon_interval(SuperframeConfig{0, 0, 0, 16, 0, 0}).us == 15360;
    ok &= active_portion(SuperframeConfig{2, 2, 0, 16, 0, 0}).us == 61440;
    return {ok, "bo, so in [0, 8]; spot values 15360 us and 61440 us"};
}

Outcome scheduling_example()
{
    const ScheduleTable t = run_schedule_demo();
    bool ok = validate_schedule(t).empty();
    for (int s = 0; s < 8; ++s)
        ok &= std::holds_alternative<Superbeacon>(t.cell(s, 0));
    std::map<NodeId, int> gbs;
    for (int slot : {4, 8, 12})
        if (const auto* g = std::get_if<Gbs>(&t.cell(0, slot)))
            gbs[g->coordinator] = slot;
    ok &= gbs.size() == 3;
    std::map<NodeId, int> seen;
    for (int s = 0; s < 8; ++s)
        for (int slot = 0; slot < 16; ++slot)
            if (const auto* g = std::get_if<Gts>(&t.cell(s, slot)))
                ++seen[g->alloc.owner];
    const std::map<NodeId, int> expected{{11, 4}, {21, 4}, {22, 8}, {31, 8}, {32, 2}, {33, 1}};
    ok &= seen == expected;
    std::ostringstream d;
    d << "occupancy";
    for (const auto& [n, k] : seen)
        d << ' ' << n << ':' << k << "/8";
    d << "; violations " << validate_schedule(t).size();
    return {ok, d.str()};
}

Outcome analytic_window()
{
    SweepParams p;
    p.trials_per_point = 20;
    p.bin_width_db = kSweepStepDb;
    const SweepResult r = run_sgts_sweep(fig7_world(0, 0, 0.0), p);
    // Collision region: bins where neither pair gets through.
    double lo = 1e9, hi = -1e9;
    bool gaps = false;
    for (std::size_t i = 0; i < r.curve_n1.size(); ++i) {
        const auto& a = r.curve_n1[i];
        for (const auto& b : r.curve_n2) {
            if (b.delta_db != a.delta_db)
                continue;
            if (a.positives == 0 && b.positives == 0) {
                lo = std::min(lo, a.delta_db);
                hi = std::max(hi, a.delta_db);
            } else if (a.positives != a.trials && b.positives != b.trials) {
                gaps = true;
            }
        }
    }
    const WindowEstimate w = estimate_window(r);
    // Open interval (-5, 5): outermost colliding bins lie within one step of the edges.
    const bool ok = !gaps && std::abs(lo - (-5.0)) <= kSweepStepDb && std::abs(hi - 5.0) <= kSweepStepDb
                    && lo > -5.0 && hi < 5.0 && std::abs(w.width_db - 10.0) <= kSweepStepDb;
    return {ok, "collisions for delta in [" + num(lo, 1) + ", " + num(hi, 1) + "] dB; width " + num(w.width_db)
                    + " dB"};
}

bool monotone(const std::vector<SweepPoint>& pts, bool increasing, std::string& note)
{
    const SweepPoint* prev = nullptr;
    for (const auto& p : pts) {
        if (p.trials < kMonotoneMinTrials)
            continue;
        if (prev) {
            const double step = increasing ? p.rate() - prev->rate() : prev->rate() - p.rate();
            if (step < -kMonotoneSlack) {
                note = "dip of " + num(-step) + " at " + num(p.delta_db, 1) + " dB";
                return false;
            }
        }
        prev = &p;
    }
    return true;
}

Outcome symmetric_sweep()
{
    SweepParams p;
    p.trials_per_point = 500;
    const SweepResult r = run_sgts_sweep(fig8_world(2.0), p);
    const WindowEstimate w = estimate_window(r);
    std::string note;
    const bool m1 = monotone(r.curve_n1, true, note);
    const bool m2 = monotone(r.curve_n2, false, note);
    const bool ok = std::abs(w.crossover_db) <= kCrossoverTolDb && m1 && m2;
    return {ok, "crossover " + num(w.crossover_db) + " dB; monotone " + (m1 && m2 ? "yes" : "no " + note)};
}

Outcome asymmetric_sweep()
{
    SweepParams p;
    p.trials_per_point = 500;
    const WindowEstimate sym = estimate_window(run_sgts_sweep(fig7_world(0, 0, 2.0), p));
    const WindowEstimate adv = estimate_window(run_sgts_sweep(fig7_world(-3, 0, 2.0), p));
    // Node 1 is ahead; it wins at smaller deltas, so the crossover moves down.
    const double shift = sym.crossover_db - adv.crossover_db;
    return {shift >= kAsymmetryShiftDb, "crossover " + num(sym.crossover_db) + " dB -> " + num(adv.crossover_db)
                                            + " dB with node 11 3 us early (shift " + num(shift) + " dB)"};
}

struct RandomRuns {
    int scenarios = 0;
    long guaranteed_frames = 0;
    std::size_t latency_violations = 0;
    std::size_t exclusivity_violations = 0;
    std::string first_problem;
    double seconds = 0;
};

const RandomRuns& random_runs()
{
    static RandomRuns runs = [] {
        RandomRuns r;
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 1; i <= kLatencyScenarios; ++i) {
            const WorldSpec w = random_latency_scenario(static_cast<std::uint64_t>(i));
            World world(w);
            const Trace t = world.run_until(random_scenario_duration(w));
            const LatencyStats s = measure_gts_latency(t, w.superframe);
            const auto ex = check_exclusivity(t);
            for (const auto& g : s.guaranteed)
                r.guaranteed_frames += g.frames;
            r.latency_violations += s.violations.size();
            r.exclusivity_violations += ex.size();
            if (r.first_problem.empty() && !s.violations.empty())
                r.first_problem = "scenario " + std::to_string(i) + " node " + std::to_string(s.violations[0].node);
            if (r.first_problem.empty() && !ex.empty())
                r.first_problem = "scenario " + std::to_string(i) + ": " + ex[0];
            ++r.scenarios;
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return runs;
}

Outcome latency()
{
    const RandomRuns& r = random_runs();
    return {r.latency_violations == 0 && r.guaranteed_frames > 0,
            std::to_string(r.scenarios) + " scenarios, " + std::to_string(r.guaranteed_frames)
                + " guaranteed frames, " + std::to_string(r.latency_violations) + " violations "
                + r.first_problem};
}

Outcome exclusivity()
{
    const RandomRuns& r = random_runs();
    return {r.exclusivity_violations == 0,
            std::to_string(r.exclusivity_violations) + " overlaps in guaranteed cells or beacons "
                + r.first_problem};
}

Outcome scheduler_oracle()
{
    long tables = 0, requests = 0, mismatches = 0;
    for (int slots = 2; slots <= 4; ++slots) {
        for (int n_max = 0; n_max <= 2; ++n_max) {
            for (int min_cap = 0; min_cap < slots - 1; ++min_cap) {
                // Optional beacon slot held before the requests.
                for (int gbs = 0; gbs < slots; ++gbs) {
                    std::vector<int> levels;
                    std::function<void()> recurse = [&] {
                        ScheduleTable t(SuperframeConfig{0, 0, n_max, slots, min_cap, 0});
                        oracle::Grid grid(n_max, slots, min_cap);
                        bool feasible_gbs = true;
                        if (gbs > 0) {
                            bool free = true;
                            for (int s = 0; s < grid.horizon; ++s)
                                free &= grid.free_in(s) - 1 >= min_cap;
                            feasible_gbs = free;
                            if (free) {
                                t.place_gbs(99, gbs);
                                grid.take(gbs, 0, 0);
                            }
                        }
                        if (!feasible_gbs)
                            return;
                        ++tables;
                        for (std::size_t i = 0; i < levels.size(); ++i) {
                            ++requests;
                            const auto cand = grid.candidates(levels[i]);
                            GtsRequest req;
                            req.owner = static_cast<NodeId>(10 + i);
                            req.peer = 1;
                            req.level = levels[i];
                            try {
                                const Allocation a = t.allocate_gts(req);
                                const auto it =
                                    std::find(cand.begin(), cand.end(), std::make_pair(a.slot_index, a.phase));
                                mismatches += it == cand.end();
                                grid.take(a.slot_index, a.level, a.phase);
                            } catch (const Error& e) {
                                mismatches += !cand.empty() || e.code() != Errc::SlotExhausted;
                            }
                        }
                        mismatches += !validate_schedule(t).empty();
                        if (levels.size() == 6)
                            return;
                        for (int l = 0; l <= n_max; ++l) {
                            levels.push_back(l);
                            recurse();
                            levels.pop_back();
                        }
                    };
                    recurse();
                }
            }
        }
    }
    return {mismatches == 0, std::to_string(tables) + " request sequences, " + std::to_string(requests)
                                 + " requests, " + std::to_string(mismatches) + " disagreements"};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism(const std::string& cli, const std::string& scenario_dir)
{
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "detmac_acceptance";
    fs::remove_all(base);
    const std::string scenario = scenario_dir + "/fig7.scenario";
    int codes[2];
    for (int run = 0; run < 2; ++run) {
        const std::string cmd =
            "\"" + cli + "\" sweep \"" + scenario + "\" --seed 42 --out \"" + (base / std::to_string(run)).string() + "\"";
        codes[run] = std::system(cmd.c_str());
    }
    if (codes[0] != 0 || codes[1] != 0)
        return {false, "CLI exited with status " + std::to_string(codes[0]) + "/" + std::to_string(codes[1])};
    int files = 0;
    bool same = true;
    for (const auto& entry : fs::directory_iterator(base / "0")) {
        ++files;
        same &= slurp(entry.path()) == slurp(base / "1" / entry.path().filename());
    }
    const std::string summary = slurp(base / "0" / "summary.txt");
    const auto pos = summary.find("trace_hash: ");
    const std::string hash = pos == std::string::npos ? "?" : summary.substr(pos + 12, 16);
    fs::remove_all(base);
    return {same && files >= 3, std::to_string(files) + " files byte-identical across two runs; trace hash " + hash};
}

Outcome merge_soundness()
{
    const MergeSoundness m = run_merge_soundness(1, 10.0, 2.0, kMergeOccurrences);
    const bool ok = m.occurrences >= kMergeOccurrences && m.collision_rate() < kMergeRateLimit;
    return {ok, std::to_string(m.merges) + " merges over " + std::to_string(m.scenarios) + " deployments, "
                    + std::to_string(m.failures) + "/" + std::to_string(m.occurrences) + " failed occurrences ("
                    + num(100.0 * m.collision_rate(), 2) + "%)"};
}

} // namespace

int main(int argc, char** argv)
{
    const std::string cli = argc > 1 ? argv[1] : DETMAC_CLI_PATH;
    const std::string scenarios = argc > 2 ? argv[2] : DETMAC_SOURCE_DIR "/scenarios";

    report(1, "timing formulas", 1, timing);
    report(2, "scheduling example layout", 1, scheduling_example);
    report(3, "noise-free collision window", 10, analytic_window);
    report(4, "symmetric shared-slot sweep", 60, symmetric_sweep);
    report(5, "clock advance asymmetry", 60, asymmetric_sweep);
    report(6, "latency bound over random scenarios", 120, latency);
    report(7, "exclusivity and beacon safety", 0, exclusivity);
    report(8, "scheduler against brute force", 30, scheduler_oracle);
    report(9, "sweep determinism through the CLI", 120, [&] { return determinism(cli, scenarios); });
    report(10, "merge soundness", 60, merge_soundness);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures;
}
