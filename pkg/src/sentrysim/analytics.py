"""Per-camera visual analytics: detection, tracking, door transitions, fire score.

Detection segments the reserved class colors out of rendered frames with
4-connected components, so on non-overlapping scenes it reproduces the
renderer's ground truth exactly. Tracking is greedy same-class IoU
association. The door-transition detector fires on the falling edge of the
person-at-door predicate: overlap(door, person)/area(door) > delta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from sentrysim.geometry import Box
from sentrysim.vdevices.render import CLASS_COLORS, FIRE_BLUE, FIRE_GREEN_HI, FIRE_GREEN_LO, FIRE_RED, Frame

MIN_DETECTION_AREA = 64  # px^2
IOU_MATCH_THRESHOLD = 0.3
TRACK_RETIRE_TICKS = 15
DOOR_OVERLAP_DELTA = 0.5
FIRE_SCORE_SATURATION = 0.05  # fraction of frame pixels at which score hits 1.0

# Nominal projected areas used only to derive a confidence channel.
DEFAULT_EXPECTED_AREA = {cls: 3000 for cls in CLASS_COLORS}


@dataclass(frozen=True)
class Detection:
    bbox: Box
    agent_class: str
    confidence: float
    camera_id: str
    tick: int


@dataclass
class Track:
    track_id: int
    agent_class: str
    bbox: Box
    first_seen: int
    last_seen: int
    at_door: bool = False
    zone_id: str | None = None
    dwell: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DoorTransitionEvent:
    camera_id: str
    door_id: str
    track_id: int
    sim_time: float
    agent_class: str


def detect(
    frame: Frame,
    min_area: int = MIN_DETECTION_AREA,
    expected_area: dict[str, int] | None = None,
) -> list[Detection]:
    """Segment reserved class colors into detections (4-connectivity).

    Components smaller than min_area are discarded. Output is ordered by
    bbox top-left, then class, for determinism.
    """
    expected = expected_area or DEFAULT_EXPECTED_AREA
    pixels = frame.pixels
    detections: list[Detection] = []
    for agent_class, color in CLASS_COLORS.items():
        mask = (
            (pixels[:, :, 0] == color[0])
            & (pixels[:, :, 1] == color[1])
            & (pixels[:, :, 2] == color[2])
        )
        if not mask.any():
            continue
        labels, count = ndimage.label(mask)  # default structure: 4-connectivity
        slices = ndimage.find_objects(labels)
        for index, slc in enumerate(slices, start=1):
            if slc is None:
                continue
            area = int(np.count_nonzero(labels[slc] == index))
            if area < min_area:
                continue
            rows, cols = slc
            bbox = Box(int(cols.start), int(rows.start), int(cols.stop), int(rows.stop))
            confidence = min(1.0, area / expected.get(agent_class, 3000))
            detections.append(
                Detection(
                    bbox=bbox,
                    agent_class=agent_class,
                    confidence=confidence,
                    camera_id=frame.camera_id,
                    tick=frame.tick,
                )
            )
    detections.sort(key=lambda d: (d.bbox.y0, d.bbox.x0, d.bbox.y1, d.bbox.x1, d.agent_class))
    return detections


def overlap_ratio(door_box: Box, person_box: Box) -> float:
    """area(door intersect person) / area(door), on half-open pixel rects."""
    if door_box.area <= 0:
        raise ValueError("door box must have positive area")
    inter = door_box.intersect(person_box)
    if inter is None:
        return 0.0
    return inter.area / door_box.area


def update_tracks(
    tracks: list[Track],
    detections: list[Detection],
    tick: int,
    next_track_id: int,
    iou_threshold: float = IOU_MATCH_THRESHOLD,
    retire_after: int = TRACK_RETIRE_TICKS,
) -> tuple[list[Track], dict[int, Detection], int]:
    """Greedy same-class IoU association of detections to tracks.

    Returns (surviving tracks, assignments by track id, next free track id).
    Track ids are never reused within a run; tracks unseen for more than
    retire_after ticks are dropped before matching.
    """
    for det in detections:
        if det.camera_id != detections[0].camera_id or det.tick != tick:
            raise ValueError("detections must come from one camera and the current tick")

    alive = [t for t in tracks if tick - t.last_seen <= retire_after]

    pairs = []
    for t_idx, track in enumerate(alive):
        for d_idx, det in enumerate(detections):
            if det.agent_class != track.agent_class:
                continue
            score = track.bbox.iou(det.bbox)
            if score >= iou_threshold:
                pairs.append((score, t_idx, d_idx))
    pairs.sort(key=lambda p: (-p[0], alive[p[1]].track_id, p[2]))

    matched_tracks: set[int] = set()
    matched_dets: set[int] = set()
    assignments: dict[int, Detection] = {}
    for score, t_idx, d_idx in pairs:
        if t_idx in matched_tracks or d_idx in matched_dets:
            continue
        matched_tracks.add(t_idx)
        matched_dets.add(d_idx)
        track = alive[t_idx]
        det = detections[d_idx]
        track.bbox = det.bbox
        track.last_seen = tick
        assignments[track.track_id] = det

    for d_idx, det in enumerate(detections):
        if d_idx in matched_dets:
            continue
        track = Track(
            track_id=next_track_id,
            agent_class=det.agent_class,
            bbox=det.bbox,
            first_seen=tick,
            last_seen=tick,
        )
        next_track_id += 1
        alive.append(track)
        assignments[track.track_id] = det

    return alive, assignments, next_track_id


def door_transitions(
    tracks: list[Track],
    door_box: Box,
    delta: float,
    sim_time: float,
    camera_id: str,
    door_id: str,
    current_tick: int,
) -> list[DoorTransitionEvent]:
    """Update each person track's at-door state; emit falling-edge events.

    The at-door predicate uses a strict inequality: a ratio exactly equal to
    delta does not count. Only tracks seen on the current tick can emit (a
    retired track never produces a late transition).
    """
    events = []
    for track in tracks:
        was_at_door = track.at_door
        if track.last_seen != current_tick:
            continue
        ratio = overlap_ratio(door_box, track.bbox)
        track.at_door = ratio > delta
        if was_at_door and not track.at_door:
            events.append(
                DoorTransitionEvent(
                    camera_id=camera_id,
                    door_id=door_id,
                    track_id=track.track_id,
                    sim_time=sim_time,
                    agent_class=track.agent_class,
                )
            )
    return events


def fire_score(frame: Frame) -> float:
    """Fraction of fire-band pixels, normalized so 5% of the frame scores 1.0."""
    pixels = frame.pixels
    mask = (
        (pixels[:, :, 0] == FIRE_RED)
        & (pixels[:, :, 1] >= FIRE_GREEN_LO)
        & (pixels[:, :, 2] == FIRE_BLUE)
    )
    fraction = float(np.count_nonzero(mask & (pixels[:, :, 1] < FIRE_GREEN_HI))) / pixels[:, :, 0].size
    return min(1.0, fraction / FIRE_SCORE_SATURATION)


@dataclass(frozen=True)
class ZoneRegion:
    """Image region (feet position) mapped to a floorplan zone."""

    box: Box
    zone_id: str


@dataclass(frozen=True)
class AnalyticsConfig:
    camera_id: str
    room_id: str | None = None
    door_id: str | None = None
    door_box: Box | None = None
    delta: float = DOOR_OVERLAP_DELTA
    zone_regions: tuple[ZoneRegion, ...] = ()
    min_area: int = MIN_DETECTION_AREA


@dataclass(frozen=True)
class AnalyticsResult:
    camera_id: str
    tick: int
    sim_time: float
    detections: list[Detection]
    assignments: dict[int, Detection]
    tracks: list[Track]
    transitions: list[DoorTransitionEvent]
    fire_score: float


class CameraAnalytics:
    """Stateful per-camera worker: tracker state is confined to one camera."""

    def __init__(self, config: AnalyticsConfig):
        self.config = config
        self.tracks: list[Track] = []
        self._next_track_id = 1
        self._last_frame_time: float | None = None

    def _zone_of(self, bbox: Box) -> str | None:
        x, y = bbox.bottom_center()
        for region in self.config.zone_regions:
            if region.box.x0 <= x < region.box.x1 and region.box.y0 <= y < region.box.y1:
                return region.zone_id
        return None

    def process(self, frame: Frame) -> AnalyticsResult:
        if frame.camera_id != self.config.camera_id:
            raise ValueError(
                f"frame from {frame.camera_id!r} fed to analytics for {self.config.camera_id!r}"
            )
        detections = detect(frame, min_area=self.config.min_area)
        self.tracks, assignments, self._next_track_id = update_tracks(
            self.tracks, detections, frame.tick, self._next_track_id
        )

        elapsed = 0.0
        if self._last_frame_time is not None:
            elapsed = frame.sim_time - self._last_frame_time
        self._last_frame_time = frame.sim_time
        for track in self.tracks:
            if track.track_id not in assignments:
                continue
            track.zone_id = self._zone_of(track.bbox)
            # A track created on this frame has no dwell interval behind it.
            if track.zone_id is not None and elapsed > 0.0 and track.first_seen < frame.tick:
                track.dwell[track.zone_id] = track.dwell.get(track.zone_id, 0.0) + elapsed

        transitions: list[DoorTransitionEvent] = []
        if self.config.door_box is not None and self.config.door_id is not None:
            transitions = door_transitions(
                self.tracks,
                self.config.door_box,
                self.config.delta,
                frame.sim_time,
                self.config.camera_id,
                self.config.door_id,
                frame.tick,
            )

        return AnalyticsResult(
            camera_id=frame.camera_id,
            tick=frame.tick,
            sim_time=frame.sim_time,
            detections=detections,
            assignments=assignments,
            tracks=list(self.tracks),
            transitions=transitions,
            fire_score=fire_score(frame),
        )

    def detection_payload(self, result: AnalyticsResult) -> dict:
        """Bus payload for one processed frame (detection-set schema)."""
        return {
            "type": "detection-set",
            "camera_id": result.camera_id,
            "room_id": self.config.room_id,
            "tick": result.tick,
            "sim_time": result.sim_time,
            "fire_score": result.fire_score,
            "tracks": [
                {
                    "track_id": t.track_id,
                    "class": t.agent_class,
                    "bbox": list(t.bbox.as_tuple()),
                    "confidence": result.assignments[t.track_id].confidence,
                    "zone_id": t.zone_id,
                    "dwell": dict(sorted(t.dwell.items())),
                }
                for t in result.tracks
                if t.track_id in result.assignments
            ],
        }
