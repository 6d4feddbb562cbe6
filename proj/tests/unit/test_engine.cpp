#include "detmac/engine.hpp"
#include "detmac/error.hpp"
#include "detmac/harness.hpp"

#include <doctest.h>

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

// PAN, one coordinator and `children` simple nodes around it.
WorldSpec star(int children, SuperframeConfig cfg = {0, 0, 3, 16, 0, 0})
{
    WorldSpec w;
    w.superframe = cfg;
    w.nodes.push_back(node(0, Role::PanCoordinator, std::nullopt, {0, 0}));
    w.nodes.push_back(node(1, Role::StarCoordinator, std::nullopt, {20, 0}));
    for (int i = 0; i < children; ++i)
        w.nodes.push_back(node(static_cast<NodeId>(11 + i), Role::SimpleNode, 1, {22.0 + i, 2.0}));
    return w;
}

TrafficSpec periodic(NodeId src, NodeId dst, SimTime period, SimTime start = {})
{
    return TrafficSpec{src, dst, TrafficSpec::Kind::Periodic, period, start, kDataSymbols};
}

Errc code_of(const WorldSpec& w)
{
    try {
        validate_topology(w);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("topology accepted");
    return Errc::InvalidArgument;
}

const ScheduleTable& table_at(const World& world, std::int64_t sf)
{
    const ScheduleTable* t = &world.schedule_history().front().table;
    for (const auto& a : world.schedule_history())
        if (a.superframe <= sf)
            t = &a.table;
    return *t;
}

} // namespace

TEST_SUITE("engine") {

TEST_CASE("event queue order and causality")
{
    EventQueue q;
    CHECK(q.empty());
    q.schedule(SimTime::micros(10), 2, TrafficEvent{0});
    q.schedule(SimTime::micros(10), 1, TrafficEvent{1});
    q.schedule(SimTime::micros(5), 9, TrafficEvent{2});
    CHECK(q.pop().node == 9);
    CHECK(q.pop().node == 1);
    CHECK(q.now().us == 10);
    CHECK_THROWS_AS(q.schedule(SimTime::micros(4), 1, TrafficEvent{3}), Error);
    CHECK(q.pop().node == 2);
    CHECK(q.empty());
}

TEST_CASE("one superframe holds one superbeacon")
{
    World world(star(0));
    const Trace t = world.run_until(beacon_interval(world.spec().superframe));
    int superbeacons = 0;
    for (const TraceEvent* e : t.select<TxRecord>())
        superbeacons += std::get<TxRecord>(e->payload).frame == FrameKind::Superbeacon;
    CHECK(superbeacons == 1);

    World idle(star(0));
    CHECK(idle.run_until(SimTime{}).events().size() == idle.nodes().size());
}

TEST_CASE("identical seeds give identical traces")
{
    WorldSpec w = star(3);
    w.traffic.push_back(TrafficSpec{11, 1, TrafficSpec::Kind::Poisson, SimTime::micros(8000), {}, kDataSymbols});
    w.traffic.push_back(TrafficSpec{12, 1, TrafficSpec::Kind::Poisson, SimTime::micros(8000), {}, kDataSymbols});
    w.requests.push_back(RequestSpec{13, 1, Direction::Uplink, 0});
    w.seed = 5;
    const auto a = trace_text(World(w).run_until(SimTime::micros(500'000)));
    const auto b = trace_text(World(w).run_until(SimTime::micros(500'000)));
    CHECK(a == b);
    w.seed = 6;
    CHECK(trace_text(World(w).run_until(SimTime::micros(500'000))) != a);
}

TEST_CASE("topology checks")
{
    WorldSpec far = star(1);
    far.nodes[1].position = {50000, 0};
    far.nodes[2].position = {50002, 2};
    CHECK(code_of(far) == Errc::TopologyInvalid);

    WorldSpec orphan = star(1);
    orphan.nodes[2].parent = 7;
    CHECK(code_of(orphan) == Errc::TopologyInvalid);

    WorldSpec two_pans = star(1);
    two_pans.nodes[1].role = Role::PanCoordinator;
    CHECK(code_of(two_pans) == Errc::TopologyInvalid);

    WorldSpec stacked = star(2);
    stacked.nodes[3].position = stacked.nodes[2].position;
    CHECK(code_of(stacked) == Errc::TopologyInvalid);

    WorldSpec loud = star(1);
    loud.nodes[2].tx_power_dbm = 10.0;
    CHECK(code_of(loud) == Errc::ConfigViolation);

    WorldSpec stranger = star(1);
    stranger.traffic.push_back(periodic(11, 99, SimTime::micros(15360)));
    CHECK(code_of(stranger) == Errc::UnknownNode);
}

TEST_CASE("slot accounting and beacon spacing")
{
    const SuperframeConfig cfg{2, 1, 2, 16, 0, 0};
    WorldSpec w = star(2, cfg);
    w.pds.push_back(PdsSpec{11, 1, 1, Direction::Uplink, 0});
    w.pds.push_back(PdsSpec{12, 1, 0, Direction::Uplink, 0});
    World world(w);
    const Trace t = world.run_until(beacon_interval(cfg) * 12);

    const ScheduleTable& table = world.active_table();
    for (int s = 0; s < table.horizon(); ++s)
        CHECK(table.cap_duration(s) + table.cfp_duration(s) == active_portion(cfg));

    std::vector<SimTime> sb;
    for (const TraceEvent* e : t.select<TxRecord>())
        if (std::get<TxRecord>(e->payload).frame == FrameKind::Superbeacon)
            sb.push_back(e->time);
    REQUIRE(sb.size() == 12);
    for (std::size_t i = 1; i < sb.size(); ++i)
        CHECK(sb[i] - sb[i - 1] == beacon_interval(cfg));
}

TEST_CASE("nodes only transmit in guaranteed cells they own")
{
    WorldSpec w = fig3_world();
    for (const auto& n : w.nodes)
        if (n.role == Role::SimpleNode)
            w.traffic.push_back(periodic(n.id, *n.parent, SimTime::micros(7000), SimTime::micros(n.id * 100)));
    World world(w);
    const Trace t = world.run_until(beacon_interval(w.superframe) * 40);
    int checked = 0;
    for (const TraceEvent* e : t.select<TxRecord>()) {
        const auto& r = std::get<TxRecord>(e->payload);
        const SlotEntry& entry = table_at(world, r.superframe).entry_at(r.superframe, r.slot);
        if (const auto* g = std::get_if<Gts>(&entry)) {
            CHECK(g->alloc.owner == e->node);
            ++checked;
        } else if (const auto* b = std::get_if<Gbs>(&entry)) {
            CHECK(b->coordinator == e->node);
        } else if (std::holds_alternative<Superbeacon>(entry)) {
            CHECK(e->node == world.pan_id());
        }
    }
    CHECK(checked > 0);
    CHECK(check_exclusivity(t).empty());
}

TEST_CASE("saturated contention loses frames")
{
    WorldSpec w = star(10);
    for (int i = 0; i < 10; ++i)
        w.traffic.push_back(TrafficSpec{static_cast<NodeId>(11 + i), 1, TrafficSpec::Kind::Saturated, {}, {}, kDataSymbols});
    World world(w);
    const Trace t = world.run_until(beacon_interval(w.superframe) * 30);
    int sent = 0, received = 0, failures = 0;
    for (const TraceEvent* e : t.select<TxRecord>())
        sent += e->node >= 11 && std::get<TxRecord>(e->payload).frame == FrameKind::Data;
    for (const TraceEvent* e : t.select<RxRecord>()) {
        const auto& r = std::get<RxRecord>(e->payload);
        received += e->node == 1 && r.outcome == RxOutcome::Kind::Received && r.frame == FrameKind::Data;
    }
    for (const TraceEvent* e : t.select<CsmaRecord>())
        failures += std::get<CsmaRecord>(e->payload).result == CsmaRecord::Result::Failure;
    MESSAGE("sent=" << sent << " received=" << received << " failures=" << failures);
    CHECK(sent > 0);
    CHECK(received < sent);
}

TEST_CASE("energy records cover the whole run")
{
    World world(star(1));
    const SimTime end = beacon_interval(world.spec().superframe) * 10;
    const Trace t = world.run_until(end);
    const auto records = t.select<EnergyRecord>();
    REQUIRE(records.size() == 3);
    for (const TraceEvent* e : records) {
        const auto& r = std::get<EnergyRecord>(e->payload);
        SimTime total;
        for (SimTime x : r.time)
            total += x;
        CHECK(total == end);
    }
}

} // TEST_SUITE
