#include "detmac/error.hpp"
#include "detmac/harness.hpp"

#include <doctest.h>

#include <cmath>

using namespace detmac;

namespace {

NodeSpec node(NodeId id, Role role, std::optional<NodeId> parent, Position p)
{
    NodeSpec n;
    n.id = id;
    n.role = role;
    n.parent = parent;
    n.position = p;
    return n;
}

WorldSpec one_link(int level, SuperframeConfig cfg = {0, 0, 3, 16, 0, 0})
{
    WorldSpec w;
    w.superframe = cfg;
    w.nodes.push_back(node(0, Role::PanCoordinator, std::nullopt, {0, 0}));
    w.nodes.push_back(node(1, Role::StarCoordinator, std::nullopt, {20, 0}));
    w.nodes.push_back(node(11, Role::SimpleNode, 1, {22, 2}));
    w.pds.push_back(PdsSpec{11, 1, level, Direction::Uplink, 0});
    return w;
}

SweepResult step_result()
{
    SweepResult r;
    for (int d = -10; d <= 10; ++d) {
        r.curve_n1.push_back(SweepPoint{static_cast<double>(d), 100, d >= 5 ? 100 : 0});
        r.curve_n2.push_back(SweepPoint{static_cast<double>(d), 100, d <= -5 ? 100 : 0});
    }
    return r;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("latency bound")
{
    const SuperframeConfig cfg{0, 0, 3, 16, 0, 0};
    CHECK(latency_bound(cfg, 0).us == 15360 + 960);
    CHECK(latency_bound(cfg, 3).us == 8 * 15360 + 960);
}

TEST_CASE("level-0 link with one frame per superframe stays within one interval")
{
    WorldSpec w = one_link(0);
    const SimTime bi = beacon_interval(w.superframe);
    w.traffic.push_back(TrafficSpec{11, 1, TrafficSpec::Kind::Periodic, bi, SimTime::micros(2 * 15360 + 123), kDataSymbols});
    const LatencyStats s = measure_gts_latency(w, bi * 40);
    REQUIRE(s.guaranteed.size() == 1);
    CHECK(s.guaranteed[0].frames >= 35);
    CHECK(s.guaranteed[0].max <= bi + slot_duration(w.superframe));
    CHECK(s.violations.empty());
}

TEST_CASE("level-3 frame arriving just after its slot waits almost the full period")
{
    WorldSpec w = one_link(3);
    const SuperframeConfig& cfg = w.superframe;
    const SimTime bi = beacon_interval(cfg);
    const Allocation a = plan_schedule(w).allocations().at(0);
    // One frame per period, each just after an occurrence of the slot.
    const SimTime start = slot_start(cfg, 8 + a.phase, a.slot_index + 1);
    w.traffic.push_back(TrafficSpec{11, 1, TrafficSpec::Kind::Periodic, bi * 8, start, kDataSymbols});
    const LatencyStats s = measure_gts_latency(w, bi * 64);
    REQUIRE(s.guaranteed.size() == 1);
    const auto& g = s.guaranteed[0];
    CHECK(g.frames >= 5);
    CHECK(g.max <= latency_bound(cfg, 3));
    CHECK(g.max >= bi * 8 - slot_duration(cfg) * 2);
    CHECK(s.violations.empty());
}

TEST_CASE("best-effort traffic under saturation has no bound")
{
    WorldSpec w = one_link(0);
    w.pds.clear();
    for (NodeId i = 12; i < 20; ++i) {
        w.nodes.push_back(node(i, Role::SimpleNode, 1, {20.0 + (i - 11), -2}));
        w.traffic.push_back(TrafficSpec{i, 1, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
    }
    const SimTime bi = beacon_interval(w.superframe);
    const LatencyStats s = measure_gts_latency(w, bi * 40);
    REQUIRE_FALSE(s.best_effort.empty());
    SimTime worst;
    for (const auto& n : s.best_effort)
        worst = std::max(worst, n.max);
    CHECK(worst > latency_bound(w.superframe, 0));
}

TEST_CASE("isotonic fit")
{
    const std::vector<double> v{0.1, 0.3, 0.2, 0.6, 0.5, 0.9};
    const std::vector<double> w(v.size(), 1.0);
    const auto up = isotonic_fit(v, w, true);
    CHECK(up[1] == doctest::Approx(0.25));
    CHECK(up[2] == doctest::Approx(0.25));
    CHECK(up[3] == doctest::Approx(0.55));
    for (std::size_t i = 1; i < up.size(); ++i)
        CHECK(up[i] >= up[i - 1]);
    const auto down = isotonic_fit(v, w, false);
    for (std::size_t i = 1; i < down.size(); ++i)
        CHECK(down[i] <= down[i - 1]);
}

TEST_CASE("window of ideal step curves")
{
    const WindowEstimate w = estimate_window(step_result());
    CHECK(w.n1_hi == doctest::Approx(4.95));
    CHECK(w.n2_hi == doctest::Approx(-4.95));
    CHECK(w.width_db == doctest::Approx(9.9));
    CHECK(w.crossover_db == doctest::Approx(0.0));
}

TEST_CASE("constant curve is rejected")
{
    SweepResult r = step_result();
    for (auto& p : r.curve_n1)
        p.positives = 50;
    CHECK_THROWS_AS(estimate_window(r), Error);
}

TEST_CASE("sweep is reproducible and needs a shared cell")
{
    SweepParams p;
    p.trials_per_point = 20;
    p.power_step_db = 2.0;
    const WorldSpec w = fig7_world(0, 0, 2.0);
    const SweepResult a = run_sgts_sweep(w, p);
    const SweepResult b = run_sgts_sweep(w, p);
    CHECK(a.trace_hash == b.trace_hash);
    CHECK(sweep_table_csv(a) == sweep_table_csv(b));
    p.seed = 2;
    CHECK(run_sgts_sweep(w, p).trace_hash != a.trace_hash);

    WorldSpec plain = w;
    plain.initial.reset();
    CHECK_THROWS_AS(run_sgts_sweep(plain, p), Error);
}

TEST_CASE("noise-free sweep gives a step at the capture threshold")
{
    SweepParams p;
    p.trials_per_point = 5;
    p.bin_width_db = 0.5;
    const SweepResult r = run_sgts_sweep(fig7_world(0, 0, 0.0), p);
    for (const auto& pt : r.curve_n1)
        CHECK(pt.rate() == (pt.delta_db >= 5.0 - 1e-9 ? 1.0 : 0.0));
    for (const auto& pt : r.curve_n2)
        CHECK(pt.rate() == (pt.delta_db <= -5.0 + 1e-9 ? 1.0 : 0.0));
    const WindowEstimate w = estimate_window(r);
    CHECK(std::abs(w.width_db - 10.0) <= 0.5);
}

TEST_CASE("random scenarios are valid and reproducible")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const WorldSpec w = random_latency_scenario(seed);
        CHECK_NOTHROW(validate_topology(w));
        CHECK(w == random_latency_scenario(seed));
    }
}

} // TEST_SUITE
