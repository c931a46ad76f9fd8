"""Simulated co-transport of an object by a mobile manipulator and a walking operator."""

import json as _json

from ._core import (
    PROTOCOL_NAME,
    PROTOCOL_VERSION,
    ReplayError,
    ScenarioError,
    ScriptError,
    SessionCore,
    Simulation,
    compute_intensity,
    concave_hull,
    convex_hull,
    replay,
    run_headless,
    select_warning,
    validate_scenario,
)


def frame(sim):
    """Telemetry frame of `sim` as a dict."""
    return _json.loads(sim.frame_json())


__all__ = [
    "PROTOCOL_NAME",
    "PROTOCOL_VERSION",
    "ReplayError",
    "ScenarioError",
    "ScriptError",
    "SessionCore",
    "Simulation",
    "compute_intensity",
    "concave_hull",
    "convex_hull",
    "frame",
    "replay",
    "run_headless",
    "select_warning",
    "validate_scenario",
]
