"""Immutable world state: agents, doors, fires, power, temperatures."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from sentrysim.geometry import Vec3, upright_box_corners

AGENT_CLASSES = (
    "person",
    "staff",
    "intruder",
    "weapon_rifle",
    "weapon_pistol",
    "weapon_machete",
    "weapon_axe",
)

DOOR_LOCKED = "locked"
DOOR_CLOSED = "closed"
DOOR_OPEN = "open"
DOOR_MODES = (DOOR_LOCKED, DOOR_CLOSED, DOOR_OPEN)

DEFAULT_FIRE_GROWTH_RATE = 0.05  # intensity per second


@dataclass(frozen=True)
class Agent:
    """A walking character. All agent classes are person-shaped; the weapon_*
    classes label carried objects, not different geometry."""

    agent_id: str
    agent_class: str
    position: Vec3
    height: float = 1.75
    width: float = 0.5
    speed: float = 1.4
    waypoints: tuple[Vec3, ...] = ()
    credential: str | None = None

    def __post_init__(self) -> None:
        if self.agent_class not in AGENT_CLASSES:
            raise ValueError(f"unknown agent class: {self.agent_class}")
        if self.height <= 0 or self.width <= 0 or self.speed < 0:
            raise ValueError(f"bad agent dimensions/speed for {self.agent_id}")
        if self.position.z != 0.0:
            raise ValueError(f"agent {self.agent_id} must stand on the floor (z=0)")

    def box_corners(self) -> list[Vec3]:
        return upright_box_corners(self.position.x, self.position.y, self.width, self.height)

    def world_box(self) -> tuple[Vec3, Vec3]:
        hw = self.width / 2.0
        return (
            Vec3(self.position.x - hw, self.position.y - hw, 0.0),
            Vec3(self.position.x + hw, self.position.y + hw, self.height),
        )


@dataclass(frozen=True)
class DoorState:
    door_id: str
    mode: str = DOOR_LOCKED
    opened_at: float | None = None
    granted_credentials_pending: int = 0
    last_credential: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in DOOR_MODES:
            raise ValueError(f"unknown door mode: {self.mode}")
        if (self.opened_at is not None) != (self.mode == DOOR_OPEN):
            raise ValueError(f"door {self.door_id}: opened_at must be set iff open")
        if self.granted_credentials_pending < 0:
            raise ValueError(f"door {self.door_id}: negative grant count")


@dataclass(frozen=True)
class FireSource:
    location: Vec3
    room_id: str
    intensity: float = 0.0
    growth_rate: float = DEFAULT_FIRE_GROWTH_RATE

    def __post_init__(self) -> None:
        if not (0.0 <= self.intensity <= 1.0):
            raise ValueError(f"fire intensity out of range: {self.intensity}")


TEMPERATURE_PER_INTENSITY = 40.0  # deg C added at full fire intensity


@dataclass(frozen=True)
class WorldState:
    """One tick of the simulated building. clock == tick * dt exactly."""

    tick: int
    dt: float
    agents: tuple[Agent, ...] = ()
    doors: tuple[DoorState, ...] = ()
    fires: tuple[FireSource, ...] = ()
    power_on: bool = True
    room_temperatures: Mapping[str, float] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "room_temperatures", MappingProxyType(dict(self.room_temperatures)))

    @property
    def clock(self) -> float:
        return self.tick * self.dt

    def agent(self, agent_id: str) -> Agent | None:
        for agent in self.agents:
            if agent.agent_id == agent_id:
                return agent
        return None

    def door(self, door_id: str) -> DoorState | None:
        for door in self.doors:
            if door.door_id == door_id:
                return door
        return None

    def with_door(self, updated: DoorState) -> "WorldState":
        doors = tuple(updated if d.door_id == updated.door_id else d for d in self.doors)
        return replace(self, doors=doors)

    def with_agent(self, updated: Agent) -> "WorldState":
        agents = tuple(updated if a.agent_id == updated.agent_id else a for a in self.agents)
        return replace(self, agents=agents)

    def max_fire_intensity(self, room_id: str) -> float:
        best = 0.0
        for fire in self.fires:
            if fire.room_id == room_id and fire.intensity > best:
                best = fire.intensity
        return best
