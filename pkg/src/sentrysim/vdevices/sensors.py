"""Non-video virtual sensors and state-change notification generation.

Sensors are sampled every tick but only emit on change: booleans and door
modes on any transition, temperatures only when crossing a configured
threshold, and door access grants as one pulse per granted credential.
Sequence numbers are gapless per sensor within a run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from sentrysim.world.floorplan import FloorPlan
from sentrysim.world.state import WorldState

SENSOR_KINDS = ("smoke_fire", "temperature", "flood", "door_access", "power")

SMOKE_TRIGGER_INTENSITY = 0.15
DEFAULT_TEMP_THRESHOLDS = (45.0,)

ACCESS_CHANNEL_SUFFIX = "/access"


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    kind: str
    room_id: str | None = None
    door_id: str | None = None
    temp_thresholds: tuple[float, ...] = DEFAULT_TEMP_THRESHOLDS
    flood_schedule: tuple[tuple[float, bool], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind: {self.kind}")
        if self.kind == "door_access" and not self.door_id:
            raise ValueError(f"door_access sensor {self.sensor_id} needs a door id")


@dataclass(frozen=True)
class SensorReading:
    sensor_id: str
    kind: str
    value: object
    sim_time: float


@dataclass(frozen=True)
class StateChangeNotification:
    sensor_id: str
    kind: str
    old_value: object
    new_value: object
    sim_time: float
    seq: int
    snapshot: bool = False

    def to_doc(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "kind": self.kind,
            "old_value": self.old_value,
            "new_value": self.new_value,
            "sim_time": self.sim_time,
            "seq": self.seq,
            "snapshot": self.snapshot,
        }

    @staticmethod
    def from_doc(doc: dict) -> "StateChangeNotification":
        return StateChangeNotification(
            sensor_id=doc["sensor_id"],
            kind=doc["kind"],
            old_value=doc["old_value"],
            new_value=doc["new_value"],
            sim_time=doc["sim_time"],
            seq=doc["seq"],
            snapshot=bool(doc.get("snapshot", False)),
        )


class UnknownSensorError(KeyError):
    pass


def read_sensor(spec: SensorSpec, snapshot: WorldState, plan: FloorPlan) -> SensorReading:
    """Current value of one sensor from a world snapshot."""
    t = snapshot.clock
    if spec.kind == "smoke_fire":
        value = snapshot.max_fire_intensity(spec.room_id or "") >= SMOKE_TRIGGER_INTENSITY
    elif spec.kind == "temperature":
        if spec.room_id not in snapshot.room_temperatures:
            raise UnknownSensorError(f"temperature sensor {spec.sensor_id}: unknown room {spec.room_id}")
        value = snapshot.room_temperatures[spec.room_id]
    elif spec.kind == "flood":
        value = False
        for at, flooded in spec.flood_schedule:
            if at <= t:
                value = flooded
    elif spec.kind == "door_access":
        door = snapshot.door(spec.door_id or "")
        if door is None:
            raise UnknownSensorError(f"door sensor {spec.sensor_id}: unknown door {spec.door_id}")
        value = door.mode
    elif spec.kind == "power":
        value = snapshot.power_on
    else:  # pragma: no cover - guarded by SensorSpec
        raise UnknownSensorError(spec.kind)
    return SensorReading(sensor_id=spec.sensor_id, kind=spec.kind, value=value, sim_time=t)


def diff_readings(
    prev: dict[str, SensorReading],
    next_readings: dict[str, SensorReading],
    temp_thresholds: dict[str, tuple[float, ...]] | None = None,
) -> list[tuple[str, str, object, object]]:
    """Changed (sensor_id, kind, old, new) entries between two sweeps.

    Temperature changes count only when they cross one of the sensor's
    thresholds in either direction; all other kinds report any change.
    """
    if set(prev) != set(next_readings):
        raise ValueError("prev and next readings must cover the same sensor set")
    thresholds = temp_thresholds or {}
    changes = []
    for sensor_id in sorted(next_readings):
        old = prev[sensor_id]
        new = next_readings[sensor_id]
        if old.value == new.value:
            continue
        if new.kind == "temperature":
            crossed = False
            for limit in thresholds.get(sensor_id, DEFAULT_TEMP_THRESHOLDS):
                rising = old.value < limit <= new.value
                falling = new.value < limit <= old.value
                if rising or falling:
                    crossed = True
                    break
            if not crossed:
                continue
        changes.append((sensor_id, new.kind, old.value, new.value))
    return changes


class SensorBank:
    """Samples a fixed sensor set each tick and assigns notification sequence
    numbers. Owned by the single-threaded orchestrator."""

    def __init__(self, specs: Iterable[SensorSpec]):
        self.specs = tuple(specs)
        ids = [s.sensor_id for s in self.specs]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate sensor ids")
        self._seq: dict[str, int] = {}
        self._last_readings: dict[str, SensorReading] | None = None
        self._last_changed: dict[str, float] = {}
        self._grant_counts: dict[str, int] = {}
        self._temp_thresholds = {
            s.sensor_id: s.temp_thresholds for s in self.specs if s.kind == "temperature"
        }

    def _next_seq(self, sensor_id: str) -> int:
        seq = self._seq.get(sensor_id, 0) + 1
        self._seq[sensor_id] = seq
        return seq

    def read_all(self, snapshot: WorldState, plan: FloorPlan) -> dict[str, SensorReading]:
        return {spec.sensor_id: read_sensor(spec, snapshot, plan) for spec in self.specs}

    def scan(self, snapshot: WorldState, plan: FloorPlan) -> list[StateChangeNotification]:
        """Sample all sensors and emit notifications for changes since the
        previous scan. The first scan establishes the baseline silently."""
        readings = self.read_all(snapshot, plan)
        t = snapshot.clock
        notes: list[StateChangeNotification] = []
        if self._last_readings is not None:
            for sensor_id, kind, old, new in diff_readings(
                self._last_readings, readings, self._temp_thresholds
            ):
                notes.append(
                    StateChangeNotification(
                        sensor_id=sensor_id,
                        kind=kind,
                        old_value=old,
                        new_value=new,
                        sim_time=t,
                        seq=self._next_seq(sensor_id),
                    )
                )
                self._last_changed[sensor_id] = t
        self._last_readings = readings

        for spec in self.specs:
            if spec.kind != "door_access":
                continue
            door = snapshot.door(spec.door_id or "")
            if door is None:
                continue
            channel = spec.sensor_id + ACCESS_CHANNEL_SUFFIX
            previous = self._grant_counts.get(channel, 0)
            for _ in range(door.granted_credentials_pending - previous):
                notes.append(
                    StateChangeNotification(
                        sensor_id=channel,
                        kind="door_access",
                        old_value=None,
                        new_value=door.last_credential or "badge",
                        sim_time=t,
                        seq=self._next_seq(channel),
                    )
                )
            self._grant_counts[channel] = door.granted_credentials_pending
        return notes

    def current_readings(self) -> list[SensorReading]:
        """Latest sampled readings, sorted by sensor id (empty before the
        first scan)."""
        if self._last_readings is None:
            return []
        return sorted(self._last_readings.values(), key=lambda r: r.sensor_id)

    def last_changed(self, sensor_id: str) -> float | None:
        return self._last_changed.get(sensor_id)

    def snapshot_notifications(self) -> list[StateChangeNotification]:
        """Full current-state burst sent to newly connected clients."""
        if self._last_readings is None:
            return []
        return [
            StateChangeNotification(
                sensor_id=reading.sensor_id,
                kind=reading.kind,
                old_value=None,
                new_value=reading.value,
                sim_time=reading.sim_time,
                seq=self._seq.get(reading.sensor_id, 0),
                snapshot=True,
            )
            for reading in sorted(self._last_readings.values(), key=lambda r: r.sensor_id)
        ]
