"""The simulation stepper and the action interface.

`step` is pure: it never mutates its input state and, for a fixed floorplan
and script, produces a bit-identical state sequence on every run. All motion
and growth laws are evaluated in a fixed order on 64-bit floats.
"""

from __future__ import annotations

import math
from dataclasses import replace

from sentrysim.geometry import CameraView, Vec3, project_extent
from sentrysim.world.floorplan import FloorPlan, point_in_building, room_of
from sentrysim.world.scenario import ScenarioScript
from sentrysim.world.state import (
    AGENT_CLASSES,
    DOOR_OPEN,
    DOOR_CLOSED,
    TEMPERATURE_PER_INTENSITY,
    Agent,
    DoorState,
    FireSource,
    WorldState,
)

WAYPOINT_TOLERANCE_M = 0.01


class ActionError(ValueError):
    """Base class for action failures."""


class UnknownActorError(ActionError):
    pass


class UnknownActionError(ActionError):
    pass


class BadActionValueError(ActionError):
    pass


def initial_state(plan: FloorPlan, script: ScenarioScript) -> WorldState:
    """World at tick 0: doors locked, base temperatures, t<=0 actions applied."""
    state = WorldState(
        tick=0,
        dt=script.dt,
        doors=tuple(DoorState(door_id=d.door_id) for d in plan.doors),
        room_temperatures={room.room_id: room.base_temperature for room in plan.rooms},
        rng_seed=script.seed,
    )
    for action in script.actions:
        if action.time <= 0.0:
            state = apply_action(state, plan, script, action.actor_id, action.name, action.value)
    return state


def _move_agent(agent: Agent, dt: float) -> Agent:
    if not agent.waypoints or agent.speed <= 0.0:
        return agent
    target = agent.waypoints[0]
    delta = target - agent.position
    distance = delta.norm()
    budget = agent.speed * dt
    if distance > budget:
        scale = budget / distance
        position = agent.position + delta.scaled(scale)
    else:
        position = target
    waypoints = agent.waypoints
    while waypoints and (waypoints[0] - position).norm() <= WAYPOINT_TOLERANCE_M:
        position = waypoints[0]
        waypoints = waypoints[1:]
    return replace(agent, position=position, waypoints=waypoints)


def step(state: WorldState, plan: FloorPlan, script: ScenarioScript) -> WorldState:
    """Advance the world one tick of script.dt seconds."""
    old_clock = state.clock
    new_tick = state.tick + 1
    new_clock = new_tick * state.dt

    agents = tuple(_move_agent(agent, state.dt) for agent in state.agents)

    fires = tuple(
        replace(fire, intensity=min(1.0, fire.intensity + fire.growth_rate * state.dt))
        for fire in state.fires
    )

    temperatures = {}
    for room in plan.rooms:
        peak = 0.0
        for fire in fires:
            if fire.room_id == room.room_id and fire.intensity > peak:
                peak = fire.intensity
        temperatures[room.room_id] = room.base_temperature + TEMPERATURE_PER_INTENSITY * peak

    doors = []
    for door in state.doors:
        if door.mode == DOOR_OPEN and door.opened_at is not None:
            hold = plan.door(door.door_id).hold_open_seconds
            if new_clock - door.opened_at >= hold:
                door = replace(door, mode=DOOR_CLOSED, opened_at=None)
        doors.append(door)

    next_state = replace(
        state,
        tick=new_tick,
        agents=agents,
        doors=tuple(doors),
        fires=fires,
        room_temperatures=temperatures,
    )

    for action in script.actions:
        if old_clock < action.time <= new_clock:
            next_state = apply_action(
                next_state, plan, script, action.actor_id, action.name, action.value
            )
    return next_state


def _parse_floats(token: str, count: int) -> list[float]:
    parts = token.split(",")
    if len(parts) != count:
        raise BadActionValueError(f"expected {count} comma-separated values, got {token!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise BadActionValueError(f"unparsable number in {token!r}") from exc


def apply_action(
    state: WorldState,
    plan: FloorPlan,
    script: ScenarioScript,
    actor_id: str,
    name: str,
    value: str,
) -> WorldState:
    """Apply one named action to an actor and return the updated state.

    Actors are fire emitters (by configured id), doors (by door id), agents
    (by agent id), and the built-in "power" actor.
    """
    if name in ("fire", "startFire"):
        emitter = script.emitter(actor_id)
        if emitter is None:
            raise UnknownActorError(f"unknown fire emitter: {actor_id!r}")
        if value != "startFire":
            raise BadActionValueError(f"unsupported fire action value: {value!r}")
        room = room_of(plan, emitter.location)
        if room is None:
            raise BadActionValueError(f"fire emitter {actor_id!r} located outside any room")
        fire = FireSource(
            location=emitter.location,
            room_id=room,
            intensity=0.0,
            growth_rate=emitter.growth_rate,
        )
        return replace(state, fires=state.fires + (fire,))

    if name == "door":
        door = state.door(actor_id)
        if door is None:
            raise UnknownActorError(f"unknown door: {actor_id!r}")
        if value == "open":
            return state.with_door(replace(door, mode=DOOR_OPEN, opened_at=state.clock))
        if value == "grant" or value.startswith("grant:"):
            credential = value.partition(":")[2] or "badge"
            return state.with_door(
                replace(
                    door,
                    mode=DOOR_OPEN,
                    opened_at=state.clock,
                    granted_credentials_pending=door.granted_credentials_pending + 1,
                    last_credential=credential,
                )
            )
        raise BadActionValueError(f"unsupported door action value: {value!r}")

    if name == "power":
        if actor_id != "power":
            raise UnknownActorError(f"unknown power actor: {actor_id!r}")
        if value == "cut":
            return replace(state, power_on=False)
        if value == "restore":
            return replace(state, power_on=True)
        raise BadActionValueError(f"unsupported power action value: {value!r}")

    if name == "agent":
        if value.startswith("walkTo:"):
            agent = state.agent(actor_id)
            if agent is None:
                raise UnknownActorError(f"unknown agent: {actor_id!r}")
            x, y = _parse_floats(value.partition(":")[2], 2)
            if not point_in_building(plan, x, y):
                raise BadActionValueError(f"walk target outside building: {x},{y}")
            return state.with_agent(replace(agent, waypoints=(Vec3(x, y, 0.0),)))
        if value.startswith("spawn:"):
            if state.agent(actor_id) is not None:
                raise BadActionValueError(f"agent already exists: {actor_id!r}")
            parts = value.partition(":")[2].split(",")
            if len(parts) != 3:
                raise BadActionValueError(f"spawn needs class,x,y: {value!r}")
            agent_class = parts[0]
            if agent_class not in AGENT_CLASSES:
                raise BadActionValueError(f"unknown agent class: {agent_class!r}")
            try:
                x, y = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise BadActionValueError(f"unparsable spawn position in {value!r}") from exc
            if not point_in_building(plan, x, y):
                raise BadActionValueError(f"spawn position outside building: {x},{y}")
            agent = Agent(agent_id=actor_id, agent_class=agent_class, position=Vec3(x, y, 0.0))
            return replace(state, agents=state.agents + (agent,))
        raise BadActionValueError(f"unsupported agent action value: {value!r}")

    raise UnknownActionError(f"unknown action name: {name!r}")


def validate_action(
    state: WorldState,
    plan: FloorPlan,
    script: ScenarioScript,
    actor_id: str,
    name: str,
    value: str,
) -> None:
    """Dry-run an action against the current state, raising on failure.

    Used by the control API to answer 404/400 before scheduling the action at
    the next tick boundary.
    """
    apply_action(state, plan, script, actor_id, name, value)


def ground_truth_visible(
    plan: FloorPlan, state: WorldState, camera: CameraView
) -> list[tuple[str, str, tuple[Vec3, Vec3]]]:
    """Agents visible to the camera, with their world-space bounding boxes.

    An agent is visible when its room is on the camera's visibility list and
    its box intersects the view frustum; wall occlusion is modeled by the
    visibility list alone.
    """
    visible = []
    for agent in state.agents:
        room = room_of(plan, agent.position)
        if room is None or room not in camera.visibility:
            continue
        if project_extent(camera, agent.box_corners()) is None:
            continue
        visible.append((agent.agent_id, agent.agent_class, agent.world_box()))
    return visible


def agent_depth(camera: CameraView, agent: Agent) -> float:
    forward, _, _ = camera.basis()
    center = Vec3(agent.position.x, agent.position.y, agent.height / 2.0)
    return (center - camera.position).dot(forward)


def fire_extent_corners(fire: FireSource) -> list[Vec3]:
    """World-space corners of a fire's visual extent, scaled by intensity."""
    half = 0.75 * fire.intensity
    height = 1.8 * fire.intensity
    return [
        Vec3(fire.location.x + dx, fire.location.y + dy, z)
        for z in (0.0, height)
        for dx in (-half, half)
        for dy in (-half, half)
    ]


def horizon_row(camera: CameraView) -> float:
    """Image row of the horizon (level with the camera) for floor shading."""
    return camera.image_height / 2.0 + camera.focal_px * math.tan(camera.pitch)
