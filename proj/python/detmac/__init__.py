"""Python interface to the detmac simulator."""

from ._core import (
    DetmacError,
    Scenario,
    beacon_interval_us,
    cli,
    latency,
    latency_bound_us,
    load_scenario,
    parse_scenario,
    run,
    schedule,
    sweep,
)

__all__ = [
    "DetmacError",
    "Scenario",
    "beacon_interval_us",
    "cli",
    "latency",
    "latency_bound_us",
    "load_scenario",
    "parse_scenario",
    "run",
    "schedule",
    "sweep",
]
