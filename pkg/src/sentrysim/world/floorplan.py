"""Floorplan model and loader.

Floorplans are human-editable YAML with an embedded schema version. Rooms are
axis-aligned footprints; doors are wall segments connecting two rooms (or a
room and the outside); zones are tagged sub-rectangles of a room.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from sentrysim.geometry import Rect, Vec3

FLOORPLAN_SCHEMA_VERSION = 1

OUTSIDE = "outside"


class FloorPlanError(ValueError):
    """Raised for unparsable or invalid floorplan files."""


@dataclass(frozen=True)
class Room:
    room_id: str
    rect: Rect
    base_temperature: float


@dataclass(frozen=True)
class Door:
    """A wall-segment door. `connects` entries are room ids or "outside"."""

    door_id: str
    p1: tuple[float, float]
    p2: tuple[float, float]
    connects: tuple[str, str]
    hold_open_seconds: float = 5.0


@dataclass(frozen=True)
class Zone:
    zone_id: str
    room_id: str
    rect: Rect
    purpose: str = "general"


@dataclass(frozen=True)
class FloorPlan:
    rooms: tuple[Room, ...]
    doors: tuple[Door, ...]
    zones: tuple[Zone, ...]

    def room(self, room_id: str) -> Room:
        for room in self.rooms:
            if room.room_id == room_id:
                return room
        raise KeyError(room_id)

    def door(self, door_id: str) -> Door:
        for door in self.doors:
            if door.door_id == door_id:
                return door
        raise KeyError(door_id)

    def zone(self, zone_id: str) -> Zone:
        for zone in self.zones:
            if zone.zone_id == zone_id:
                return zone
        raise KeyError(zone_id)

    def restricted_zones(self) -> tuple[Zone, ...]:
        return tuple(z for z in self.zones if z.purpose == "restricted")


def room_of(plan: FloorPlan, p: Vec3) -> str | None:
    """Room whose footprint contains (x, y), or None when outside.

    Footprints are half-open (closed min edges, open max edges), so a point on
    a shared wall resolves to exactly one room.
    """
    for room in plan.rooms:
        if room.rect.contains(p.x, p.y):
            return room.room_id
    return None


def point_in_building(plan: FloorPlan, x: float, y: float) -> bool:
    """Inside the union of room footprints or on a door segment."""
    for room in plan.rooms:
        if room.rect.contains(x, y):
            return True
    for door in plan.doors:
        if _on_segment(door.p1, door.p2, x, y):
            return True
    return False


def _on_segment(p1: tuple[float, float], p2: tuple[float, float], x: float, y: float, tol: float = 1e-9) -> bool:
    (x1, y1), (x2, y2) = p1, p2
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if abs(cross) > tol:
        return False
    dot = (x - x1) * (x2 - x1) + (y - y1) * (y2 - y1)
    length_sq = (x2 - x1) ** 2 + (y2 - y1) ** 2
    return -tol <= dot <= length_sq + tol


def _on_rect_boundary(rect: Rect, p: tuple[float, float], tol: float = 1e-9) -> bool:
    x, y = p
    on_x_edge = (abs(x - rect.x0) <= tol or abs(x - rect.x1) <= tol) and rect.y0 - tol <= y <= rect.y1 + tol
    on_y_edge = (abs(y - rect.y0) <= tol or abs(y - rect.y1) <= tol) and rect.x0 - tol <= x <= rect.x1 + tol
    return on_x_edge or on_y_edge


def parse_floorplan(data: object) -> FloorPlan:
    if not isinstance(data, dict):
        raise FloorPlanError("floorplan root must be a mapping")
    version = data.get("schema_version")
    if version != FLOORPLAN_SCHEMA_VERSION:
        raise FloorPlanError(f"unsupported floorplan schema_version: {version!r}")

    rooms = []
    for entry in data.get("rooms", []):
        try:
            rooms.append(
                Room(
                    room_id=str(entry["id"]),
                    rect=Rect(*(float(v) for v in entry["rect"])),
                    base_temperature=float(entry.get("base_temperature", 20.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FloorPlanError(f"bad room entry {entry!r}: {exc}") from exc

    doors = []
    for entry in data.get("doors", []):
        try:
            seg = entry["segment"]
            connects = entry["connects"]
            doors.append(
                Door(
                    door_id=str(entry["id"]),
                    p1=(float(seg[0][0]), float(seg[0][1])),
                    p2=(float(seg[1][0]), float(seg[1][1])),
                    connects=(str(connects[0]), str(connects[1])),
                    hold_open_seconds=float(entry.get("hold_open_seconds", 5.0)),
                )
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FloorPlanError(f"bad door entry {entry!r}: {exc}") from exc

    zones = []
    for entry in data.get("zones", []):
        try:
            zones.append(
                Zone(
                    zone_id=str(entry["id"]),
                    room_id=str(entry["room"]),
                    rect=Rect(*(float(v) for v in entry["rect"])),
                    purpose=str(entry.get("purpose", "general")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FloorPlanError(f"bad zone entry {entry!r}: {exc}") from exc

    plan = FloorPlan(rooms=tuple(rooms), doors=tuple(doors), zones=tuple(zones))
    _validate(plan)
    return plan


def _validate(plan: FloorPlan) -> None:
    seen: set[str] = set()
    for room in plan.rooms:
        if room.room_id in seen:
            raise FloorPlanError(f"duplicate room id: {room.room_id}")
        seen.add(room.room_id)
    for a_idx, a in enumerate(plan.rooms):
        for b in plan.rooms[a_idx + 1 :]:
            if a.rect.overlap_area(b.rect) > 0.0:
                raise FloorPlanError(f"rooms overlap: {a.room_id} and {b.room_id}")

    room_ids = {room.room_id for room in plan.rooms}
    for door in plan.doors:
        for side in door.connects:
            if side == OUTSIDE:
                continue
            if side not in room_ids:
                raise FloorPlanError(f"door {door.door_id} connects unknown room: {side}")
            rect = plan.room(side).rect
            if not (_on_rect_boundary(rect, door.p1) and _on_rect_boundary(rect, door.p2)):
                raise FloorPlanError(f"door {door.door_id} detached from room {side} boundary")

    for zone in plan.zones:
        if zone.room_id not in room_ids:
            raise FloorPlanError(f"zone {zone.zone_id} references unknown room: {zone.room_id}")
        if not plan.room(zone.room_id).rect.contains_rect(zone.rect):
            raise FloorPlanError(f"zone {zone.zone_id} extends outside room {zone.room_id}")


def load_floorplan(path: str | Path) -> FloorPlan:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FloorPlanError(f"cannot read floorplan {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FloorPlanError(f"malformed floorplan {path}: {exc}") from exc
    return parse_floorplan(data)
