"""Scenario scripts: seeded, timed action sequences driving the simulation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from sentrysim.geometry import Vec3
from sentrysim.world.state import DEFAULT_FIRE_GROWTH_RATE

SCENARIO_SCHEMA_VERSION = 1
DEFAULT_DT = 0.1


class ScenarioError(ValueError):
    """Raised for unparsable or invalid scenario files."""


@dataclass(frozen=True)
class TimedAction:
    time: float
    actor_id: str
    name: str
    value: str


@dataclass(frozen=True)
class FireEmitter:
    """A named spawn point for fire incidents, addressable from actions."""

    actor_id: str
    location: Vec3
    growth_rate: float = DEFAULT_FIRE_GROWTH_RATE


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    seed: int = 0
    dt: float = DEFAULT_DT
    duration: float = 10.0
    actions: tuple[TimedAction, ...] = ()
    fire_emitters: tuple[FireEmitter, ...] = ()

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ScenarioError(f"scenario {self.name}: dt must be positive")
        if self.duration < 0:
            raise ScenarioError(f"scenario {self.name}: negative duration")
        for action in self.actions:
            if not (0.0 <= action.time <= self.duration):
                raise ScenarioError(
                    f"scenario {self.name}: action at t={action.time} outside [0, {self.duration}]"
                )
        times = [a.time for a in self.actions]
        if times != sorted(times):
            raise ScenarioError(f"scenario {self.name}: actions must be sorted by time")

    def emitter(self, actor_id: str) -> FireEmitter | None:
        for emitter in self.fire_emitters:
            if emitter.actor_id == actor_id:
                return emitter
        return None

    def with_seed(self, seed: int) -> "ScenarioScript":
        return replace(self, seed=seed)

    def total_ticks(self) -> int:
        return int(round(self.duration / self.dt))


def parse_scenario(data: object) -> ScenarioScript:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    version = data.get("schema_version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(f"unsupported scenario schema_version: {version!r}")

    emitters = []
    for entry in data.get("fire_emitters", []):
        try:
            loc = entry["location"]
            emitters.append(
                FireEmitter(
                    actor_id=str(entry["id"]),
                    location=Vec3(float(loc[0]), float(loc[1]), 0.0),
                    growth_rate=float(entry.get("growth_rate", DEFAULT_FIRE_GROWTH_RATE)),
                )
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ScenarioError(f"bad fire emitter {entry!r}: {exc}") from exc

    actions = []
    for entry in data.get("actions", []):
        try:
            actions.append(
                TimedAction(
                    time=float(entry["time"]),
                    actor_id=str(entry["actor"]),
                    name=str(entry["name"]),
                    value=str(entry["value"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad action entry {entry!r}: {exc}") from exc
    actions.sort(key=lambda a: a.time)  # stable: same-time actions keep file order

    try:
        return ScenarioScript(
            name=str(data.get("name", "unnamed")),
            seed=int(data.get("seed", 0)),
            dt=float(data.get("dt", DEFAULT_DT)),
            duration=float(data.get("duration", 10.0)),
            actions=tuple(actions),
            fire_emitters=tuple(emitters),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad scenario fields: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario {path}: {exc}") from exc
    return parse_scenario(data)
