from pathlib import Path

import pytest

import detmac

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def load(name):
    return detmac.load_scenario(str(SCENARIOS / name))


def test_round_trip():
    sc = load("fig3.scenario")
    assert detmac.parse_scenario(sc.serialize()) == sc
    assert 33 in sc.node_ids


def test_parse_error_carries_code():
    with pytest.raises(detmac.DetmacError) as info:
        detmac.parse_scenario("superframe: {bo: 1, so: 2}\n")
    assert info.value.code == "ParseError"
    assert "SO <= BO" in str(info.value)


def test_timing():
    assert detmac.beacon_interval_us(0) == 15360
    assert detmac.beacon_interval_us(2) == 61440


def test_schedule():
    out = detmac.schedule(load("fig3.scenario"))
    assert out["violations"] == []
    assert out["gbs"] == {1: 4, 2: 8, 3: 12}
    levels = {a["owner"]: a["level"] for a in out["allocations"]}
    assert levels[33] == 3 and levels[22] == 0
    assert detmac.schedule(load("fig9.scenario"))["violations"]


def test_run_is_reproducible():
    sc = load("fig3.scenario")
    a = detmac.run(sc, superframes=16)
    b = detmac.run(sc, superframes=16)
    assert a["hash"] == b["hash"]
    assert a["exclusivity_violations"] == []
    sc.seed = sc.seed + 1
    assert detmac.run(sc, superframes=16)["hash"] != a["hash"]


def test_latency_within_bound():
    sc = load("fig3.scenario")
    out = detmac.latency(sc)
    assert out["violations"] == []
    assert out["guaranteed"]
    for n in out["guaranteed"]:
        assert n["max_us"] <= detmac.latency_bound_us(sc, n["level"])


def test_sweep_small():
    out = detmac.sweep(load("fig7.scenario"), trials=20)
    assert out["curve_n1"] and out["curve_n2"]
    assert out["csv"].splitlines()[0]


def test_cli():
    code, out, _ = detmac.cli(["schedule", str(SCENARIOS / "fig3.scenario")])
    assert code == 0
    assert "violations: 0" in out
    assert detmac.cli(["frobnicate"])[0] == 2
