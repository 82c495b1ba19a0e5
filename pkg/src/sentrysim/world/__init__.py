"""Deterministic discrete-time building simulation."""

from sentrysim.world.floorplan import (
    Door,
    FloorPlan,
    FloorPlanError,
    Room,
    Zone,
    load_floorplan,
    parse_floorplan,
    room_of,
)
from sentrysim.world.scenario import FireEmitter, ScenarioError, ScenarioScript, TimedAction, load_scenario
from sentrysim.world.sim import (
    ActionError,
    BadActionValueError,
    UnknownActionError,
    UnknownActorError,
    apply_action,
    ground_truth_visible,
    initial_state,
    step,
    validate_action,
)
from sentrysim.world.state import (
    AGENT_CLASSES,
    Agent,
    DoorState,
    FireSource,
    WorldState,
)

__all__ = [
    "AGENT_CLASSES",
    "ActionError",
    "Agent",
    "BadActionValueError",
    "Door",
    "DoorState",
    "FireEmitter",
    "FireSource",
    "FloorPlan",
    "FloorPlanError",
    "Room",
    "ScenarioError",
    "ScenarioScript",
    "TimedAction",
    "UnknownActionError",
    "UnknownActorError",
    "WorldState",
    "Zone",
    "apply_action",
    "ground_truth_visible",
    "initial_state",
    "load_floorplan",
    "load_scenario",
    "parse_floorplan",
    "room_of",
    "step",
    "validate_action",
]
