#include "detmac/error.hpp"
#include "detmac/protocol.hpp"

#include <doctest.h>

using namespace detmac;

namespace {

const SuperframeConfig kCfg{0, 0, 3, 16, 0, 0};

NodeSpec spec_of(NodeId id, Role role, std::optional<NodeId> parent = std::nullopt, std::int64_t offset = 0)
{
    NodeSpec n;
    n.id = id;
    n.role = role;
    n.parent = parent;
    n.clock_offset_us = offset;
    return n;
}

Frame data_to(NodeId src, NodeId dst)
{
    Frame f;
    f.kind = FrameKind::Data;
    f.source = src;
    f.destination = dst;
    f.payload_symbols = kDataSymbols;
    return f;
}

PanScheduler pan_with(ScheduleTable t)
{
    return PanScheduler(std::move(t), SgtsPolicy{}, -92.0, {0, 1, 2, 3, 11, 21, 22, 31, 32, 33}, {});
}

} // namespace

TEST_SUITE("protocol") {

TEST_CASE("slot actions")
{
    ScheduleTable t(kCfg);
    t.allocate_gbs(1);
    const Allocation a = t.allocate_gts(GtsRequest{11, 1, 0, Direction::Uplink, Origin::Requested});

    NodeMachine pan(spec_of(0, Role::PanCoordinator), 0, kCfg, false);
    CHECK(pan.on_slot_boundary(t, 0, 0).kind == SlotAction::Kind::TransmitSuperbeacon);

    NodeMachine coord(spec_of(1, Role::StarCoordinator), 0, kCfg, false);
    coord.sync_to_superbeacon(SimTime{}, SimTime{}, 0);
    CHECK(coord.on_slot_boundary(t, 0, t.gbs_slots().at(1)).kind == SlotAction::Kind::TransmitBeacon);
    CHECK(coord.on_slot_boundary(t, 0, a.slot_index).kind == SlotAction::Kind::Listen);

    NodeMachine node(spec_of(11, Role::SimpleNode, 1), 0, kCfg, false);
    CHECK_THROWS_AS(node.on_slot_boundary(t, 0, a.slot_index), Error);
    node.sync_to_superbeacon(SimTime{}, SimTime{}, 0);
    CHECK(node.on_slot_boundary(t, 0, a.slot_index).kind == SlotAction::Kind::Doze);
    node.enqueue_data(data_to(11, 1));
    const SlotAction act = node.on_slot_boundary(t, 0, a.slot_index);
    CHECK(act.kind == SlotAction::Kind::TransmitData);
    CHECK(act.peer == NodeId{1});
    CHECK(node.on_slot_boundary(t, 0, t.gbs_slots().at(1)).kind == SlotAction::Kind::Listen);
}

TEST_CASE("request handling at the PAN")
{
    PanScheduler pan = pan_with(ScheduleTable(kCfg));
    const GtsConfirm c = pan.handle_request(GtsRequestBody{33, GtsRequest{33, 3, 3, Direction::Uplink, Origin::Requested}}, 2);
    REQUIRE(c.granted);
    CHECK(c.effective_superframe == 8);
    CHECK(c.alloc.level == 3);
    int present = 0;
    for (int s = 0; s < 8; ++s)
        present += std::holds_alternative<Gts>(pan.planned().cell(s, c.alloc.slot_index));
    CHECK(present == 1);

    const GtsConfirm p = pan.grant_pds(GtsRequest{22, 2, 0, Direction::Uplink, Origin::Requested}, 0);
    CHECK(p.granted);
    CHECK(p.alloc.origin == Origin::Pds);
}

TEST_CASE("request on a full table is refused")
{
    ScheduleTable t(kCfg);
    for (NodeId i = 0; i < 15; ++i)
        t.allocate_gts(GtsRequest{100 + i, 1, 0, Direction::Uplink, Origin::Pds});
    PanScheduler pan(t, SgtsPolicy{}, -92.0, {1, 11}, {});
    const GtsConfirm c = pan.handle_request(GtsRequestBody{11, GtsRequest{11, 1, 0, Direction::Uplink, Origin::Requested}}, 0);
    CHECK_FALSE(c.granted);
    CHECK(c.reason == "SlotExhausted");
}

TEST_CASE("next boundary uses floor division")
{
    PanScheduler pan = pan_with(ScheduleTable(kCfg));
    CHECK(pan.next_boundary(-1) == 0);
    CHECK(pan.next_boundary(0) == 8);
    CHECK(pan.next_boundary(7) == 8);
    CHECK(pan.next_boundary(8) == 16);
}

TEST_CASE("clock offsets shift slot anchors")
{
    NodeMachine on_time(spec_of(11, Role::SimpleNode, 1, 0), 0, kCfg, false);
    NodeMachine early(spec_of(21, Role::SimpleNode, 2, -3), 0, kCfg, false);
    on_time.sync_to_superbeacon(SimTime::micros(1000), SimTime::micros(1000), 4);
    early.sync_to_superbeacon(SimTime::micros(1000), SimTime::micros(1000), 4);
    CHECK(on_time.anchor_offset_us() == 0);
    CHECK(early.anchor_offset_us() == -3);

    NodeMachine a(spec_of(11, Role::SimpleNode, 1, 2), 0, kCfg, false);
    NodeMachine b(spec_of(12, Role::SimpleNode, 1, 2), 0, kCfg, false);
    a.sync_to_superbeacon(SimTime::micros(1007), SimTime::micros(1000), 4);
    b.sync_to_superbeacon(SimTime::micros(1007), SimTime::micros(1000), 4);
    CHECK(a.anchor_offset_us() - b.anchor_offset_us() == 0);
}

TEST_CASE("energy ledger")
{
    const EnergyProfile profile;
    EnergyLedger l;
    l.tick(RadioState::Dozing, SimTime::micros(1'000'000));
    CHECK(l.charge_uas(profile) == doctest::Approx(40.0));

    const EnergyLedger before = l;
    l.tick(RadioState::Listening, SimTime{});
    CHECK(l == before);
    CHECK_THROWS_AS(l.tick(RadioState::Listening, SimTime::micros(-1)), Error);

    NodeMachine m(spec_of(11, Role::SimpleNode, 1), 0, kCfg, false);
    m.account(RadioState::Dozing, SimTime::micros(5000), profile);
    m.account(RadioState::Listening, SimTime::micros(960), profile);
    CHECK(m.energy().wakeups() == 1);
    CHECK(m.energy().time_in(RadioState::Waking).us == 330);
    CHECK(m.energy().time_in(RadioState::Dozing).us == 5000 - 330);
    CHECK(m.energy().total().us == 5960);
}

TEST_CASE("rssi report carries the mean per transmitter")
{
    NodeMachine m(spec_of(1, Role::StarCoordinator), 0, kCfg, true);
    CHECK_FALSE(m.take_report(0));
    m.record_rssi(11, -50.0);
    m.record_rssi(11, -54.0);
    m.record_rssi(21, -70.0);
    const auto r = m.take_report(3);
    REQUIRE(r);
    CHECK(r->receiver == 1);
    CHECK(r->rssi_dbm.at(11) == doctest::Approx(-52.0));
    CHECK(r->rssi_dbm.at(21) == doctest::Approx(-70.0));
    CHECK_FALSE(m.take_report(4));
}

TEST_CASE("requests above the horizon are rejected locally")
{
    NodeMachine m(spec_of(11, Role::SimpleNode, 1), 0, kCfg, false);
    CHECK_THROWS_AS(m.request_gts(4, Direction::Uplink, SimTime{}, 0), Error);
    const Frame& f = m.request_gts(3, Direction::Uplink, SimTime{}, 0);
    CHECK(f.kind == FrameKind::GtsRequest);
    CHECK(m.has_cap_frame());
}

} // TEST_SUITE
