"""Rule engine: correlates events from the broker into typed alarms.

The engine is a single logical consumer that processes records in global
publish order. It is idempotent per (topic, offset): reprocessing any prefix
of the event log (at-least-once delivery) changes nothing. Alarm ids are
sequence numbers, so identical event logs produce byte-identical alarm logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from sentrysim.bus import EventRecord

ALARM_TYPES = (
    "tailgating",
    "crowding",
    "loitering",
    "fire",
    "environmental",
    "power",
    "device_lost",
)

ALARM_OPEN = "open"
ALARM_ACKNOWLEDGED = "acknowledged"
ALARM_REJECTED = "rejected"

DEFAULT_SEVERITIES: Mapping[str, int] = {
    "tailgating": 4,
    "crowding": 3,
    "loitering": 3,
    "fire": 4,
    "environmental": 3,
    "power": 5,
    "device_lost": 2,
}


@dataclass(frozen=True)
class RuleConfig:
    delta: float = 0.5
    crowd_limit: int = 4
    loiter_seconds: float = 30.0
    temp_alarm_c: float = 45.0
    fire_visual_threshold: float = 0.6
    correlation_window_s: float = 20.0
    black_frame_confirmations: int = 3
    fire_dedup_s: float = 60.0
    episode_grace_s: float = 1.0
    crowd_debounce_ticks: int = 2
    severities: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_SEVERITIES))

    def __post_init__(self) -> None:
        numeric = (
            self.delta,
            self.crowd_limit,
            self.loiter_seconds,
            self.temp_alarm_c,
            self.fire_visual_threshold,
            self.correlation_window_s,
            self.black_frame_confirmations,
            self.fire_dedup_s,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("rule config values must be positive")


@dataclass(frozen=True)
class EvidenceRef:
    topic: str
    offset: int
    sim_time: float

    def to_doc(self) -> dict:
        return {"topic": self.topic, "offset": self.offset, "sim_time": self.sim_time}


class IllegalAlarmTransition(ValueError):
    pass


@dataclass
class Alarm:
    """A raised threat. State moves open -> acknowledged or open -> rejected."""

    alarm_id: str
    alarm_type: str
    severity: int
    sim_time: float
    evidence: tuple[EvidenceRef, ...]
    camera_id: str | None = None
    room_id: str | None = None
    source: str | None = None
    confidence: float | None = None
    state: str = ALARM_OPEN
    operator: str | None = None

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValueError(f"alarm {self.alarm_id} must carry evidence")

    def transition(self, verb: str, operator: str) -> None:
        if self.state != ALARM_OPEN:
            raise IllegalAlarmTransition(
                f"alarm {self.alarm_id} is {self.state}; cannot {verb}"
            )
        if verb == "acknowledge":
            self.state = ALARM_ACKNOWLEDGED
        elif verb == "reject":
            self.state = ALARM_REJECTED
        else:
            raise IllegalAlarmTransition(f"unknown verb {verb!r}")
        self.operator = operator

    def earliest_evidence_time(self) -> float:
        return min(ref.sim_time for ref in self.evidence)


@dataclass
class DoorEpisode:
    """One door-open interval; grants and transitions correlate within it."""

    door_id: str
    opened_at: float
    closed_at: float | None = None
    grants: list[EvidenceRef] = field(default_factory=list)
    transitions: list[EvidenceRef] = field(default_factory=list)
    open_ref: EvidenceRef | None = None

    def end_time(self, window_s: float) -> float:
        return self.closed_at if self.closed_at is not None else self.opened_at + window_s


@dataclass(frozen=True)
class AlarmDraft:
    alarm_type: str
    sim_time: float
    evidence: tuple[EvidenceRef, ...]
    camera_id: str | None = None
    room_id: str | None = None
    door_id: str | None = None
    source: str | None = None
    confidence: float | None = None


def eval_tailgating(episode: DoorEpisode, cfg: RuleConfig, now: float) -> AlarmDraft | None:
    """More door transitions than access grants means someone followed in."""
    if len(episode.transitions) <= len(episode.grants):
        return None
    evidence = tuple(episode.grants) + tuple(episode.transitions)
    return AlarmDraft(
        alarm_type="tailgating",
        sim_time=now,
        evidence=evidence,
        door_id=episode.door_id,
    )


@dataclass
class CrowdState:
    consecutive: int = 0
    armed: bool = True
    recent_refs: tuple[EvidenceRef, ...] = ()


def eval_crowding(state: CrowdState, count: int, cfg: RuleConfig, ref: EvidenceRef) -> bool:
    """Debounced room-occupancy check; one alarm per violation episode.

    Returns True when an alarm should fire now. The state re-arms only after
    the count drops below the limit.
    """
    violating = count > cfg.crowd_limit
    if violating:
        state.consecutive += 1
        state.recent_refs = (state.recent_refs + (ref,))[-cfg.crowd_debounce_ticks :]
    else:
        state.consecutive = 0
        state.recent_refs = ()
        if count < cfg.crowd_limit:
            state.armed = True
        return False
    if state.armed and state.consecutive >= cfg.crowd_debounce_ticks:
        state.armed = False
        return True
    return False


def eval_loitering(dwell_seconds: float, cfg: RuleConfig) -> bool:
    return dwell_seconds > cfg.loiter_seconds


def eval_environment_temperature(old: object, new: object, cfg: RuleConfig) -> bool:
    """Rising crossing of the temperature alarm threshold."""
    if not isinstance(new, (int, float)):
        return False
    if new < cfg.temp_alarm_c:
        return False
    return not isinstance(old, (int, float)) or old < cfg.temp_alarm_c


@dataclass
class FireRoomState:
    alarm_id: str
    raised_at: float
    sources: set[str]
    confidence: float


class RuleEngine:
    """Routes broker records to rule evaluators and publishes alarms.

    `publish` receives alarm / alarm-update payload dicts and must return the
    offset they were appended at (used only for diagnostics).
    """

    def __init__(
        self,
        cfg: RuleConfig,
        publish: Callable[[dict, float], int],
        restricted_zones: frozenset[str] = frozenset(),
        sensor_rooms: Mapping[str, str] | None = None,
    ):
        self.cfg = cfg
        self.publish = publish
        self.restricted_zones = restricted_zones
        self.sensor_rooms = dict(sensor_rooms or {})  # static device-location data

        self.seen: set[tuple[str, int]] = set()
        self.watermark = 0.0
        self.alarm_seq = 0
        self.skipped_payloads = 0

        self.episodes: dict[str, DoorEpisode] = {}
        self.pending_grants: dict[str, list[EvidenceRef]] = {}
        self.crowd: dict[str, CrowdState] = {}
        self.loiter_fired: set[tuple[str, int, str]] = set()
        self.fire_rooms: dict[str, FireRoomState] = {}
        self.visual_streak: dict[str, int] = {}
        self.visual_refs: dict[str, list[EvidenceRef]] = {}
        self.black_counts: dict[str, int] = {}
        self.black_refs: dict[str, EvidenceRef] = {}
        self.power_outage_active = False
        self.temp_armed: dict[str, bool] = {}
        self.flood_armed: dict[str, bool] = {}
        self.device_lost_active: set[str] = set()

    # -- alarm emission ----------------------------------------------------

    def _next_alarm_id(self) -> str:
        self.alarm_seq += 1
        return f"alarm-{self.alarm_seq:04d}"

    def _emit(self, draft: AlarmDraft) -> str:
        alarm_id = self._next_alarm_id()
        payload = {
            "type": "alarm",
            "alarm_id": alarm_id,
            "alarm_type": draft.alarm_type,
            "severity": self.cfg.severities.get(draft.alarm_type, 3),
            "sim_time": draft.sim_time,
            "camera_id": draft.camera_id,
            "room_id": draft.room_id,
            "door_id": draft.door_id,
            "source": draft.source,
            "confidence": draft.confidence,
            "evidence": [ref.to_doc() for ref in draft.evidence],
        }
        self.publish(payload, draft.sim_time)
        return alarm_id

    def _emit_update(
        self,
        alarm_id: str,
        sim_time: float,
        source: str | None = None,
        confidence: float | None = None,
        extra_evidence: tuple[EvidenceRef, ...] = (),
    ) -> None:
        payload = {
            "type": "alarm-update",
            "alarm_id": alarm_id,
            "sim_time": sim_time,
            "source": source,
            "confidence": confidence,
            "evidence_add": [ref.to_doc() for ref in extra_evidence],
        }
        self.publish(payload, sim_time)

    # -- episode lifecycle ---------------------------------------------------

    def _finalize_episode(self, episode: DoorEpisode, now: float) -> None:
        draft = eval_tailgating(episode, self.cfg, now)
        if draft is not None:
            self._emit(draft)

    def _finalize_due_episodes(self) -> None:
        due = []
        for door_id, episode in self.episodes.items():
            if episode.closed_at is not None:
                if self.watermark >= episode.closed_at + self.cfg.episode_grace_s:
                    due.append(door_id)
            elif self.watermark >= episode.opened_at + self.cfg.correlation_window_s:
                episode.closed_at = episode.opened_at + self.cfg.correlation_window_s
                due.append(door_id)
        for door_id in due:
            self._finalize_episode(self.episodes.pop(door_id), self.watermark)

    def _open_episode(self, door_id: str, t: float, ref: EvidenceRef) -> None:
        existing = self.episodes.pop(door_id, None)
        if existing is not None:
            if existing.closed_at is None:
                existing.closed_at = t
            self._finalize_episode(existing, t)
        episode = DoorEpisode(door_id=door_id, opened_at=t, open_ref=ref)
        pending = self.pending_grants.pop(door_id, [])
        for grant in pending:
            if grant.sim_time >= t - 1.0:
                episode.grants.append(grant)
        self.episodes[door_id] = episode

    # -- fire path -----------------------------------------------------------

    def _fire_trigger(
        self,
        room_id: str,
        source: str,
        confidence: float,
        evidence: tuple[EvidenceRef, ...],
        camera_id: str | None,
        t: float,
    ) -> None:
        state = self.fire_rooms.get(room_id)
        if state is not None and t - state.raised_at < self.cfg.fire_dedup_s:
            if source not in state.sources:
                state.sources.add(source)
                state.confidence = max(state.confidence, confidence)
                self._emit_update(
                    state.alarm_id,
                    t,
                    source="both",
                    confidence=state.confidence,
                    extra_evidence=evidence,
                )
            return
        alarm_id = self._emit(
            AlarmDraft(
                alarm_type="fire",
                sim_time=t,
                evidence=evidence,
                camera_id=camera_id,
                room_id=room_id,
                source=source,
                confidence=confidence,
            )
        )
        self.fire_rooms[room_id] = FireRoomState(
            alarm_id=alarm_id, raised_at=t, sources={source}, confidence=confidence
        )

    # -- record routing --------------------------------------------------------

    def process(self, record: EventRecord) -> None:
        key = (record.topic, record.offset)
        if key in self.seen:
            return
        self.seen.add(key)

        if record.sim_time > self.watermark:
            self.watermark = record.sim_time
        ref = EvidenceRef(record.topic, record.offset, record.sim_time)
        payload = record.payload
        kind = payload.get("type")

        if kind == "sensor-change":
            self._on_sensor_change(payload, ref)
        elif kind == "access-granted":
            self._on_access_granted(payload, ref)
        elif kind == "door-transition":
            self._on_door_transition(payload, ref)
        elif kind == "frame-metadata":
            self._on_frame_metadata(payload, ref)
        elif kind == "detection-set":
            self._on_detection_set(payload, ref)
        elif kind in ("alarm", "alarm-update"):
            pass  # own output topic; ignored when subscribed for monitoring
        else:
            self.skipped_payloads += 1

        self._finalize_due_episodes()

    def state_snapshot(self) -> dict:
        """Debugging view of the engine's correlation state."""
        return {
            "watermark": self.watermark,
            "alarms_emitted": self.alarm_seq,
            "records_seen": len(self.seen),
            "skipped_payloads": self.skipped_payloads,
            "episodes": {
                door_id: {
                    "opened_at": e.opened_at,
                    "closed_at": e.closed_at,
                    "grants": len(e.grants),
                    "transitions": len(e.transitions),
                }
                for door_id, e in sorted(self.episodes.items())
            },
            "crowd": {
                room: {"consecutive": s.consecutive, "armed": s.armed}
                for room, s in sorted(self.crowd.items())
            },
            "fire_rooms": {
                room: {"alarm_id": s.alarm_id, "sources": sorted(s.sources)}
                for room, s in sorted(self.fire_rooms.items())
            },
            "black_counts": dict(sorted(self.black_counts.items())),
            "power_outage_active": self.power_outage_active,
            "loiters_fired": sorted(f"{c}/{t}/{z}" for c, t, z in self.loiter_fired),
        }

    def flush(self, end_time: float) -> None:
        """End of stream: finalize every episode whose door closed and those
        whose correlation window expired by end_time."""
        if end_time > self.watermark:
            self.watermark = end_time
        self._finalize_due_episodes()
        for door_id in list(self.episodes):
            episode = self.episodes[door_id]
            if episode.closed_at is not None:
                self._finalize_episode(self.episodes.pop(door_id), self.watermark)

    # -- handlers ---------------------------------------------------------------

    def _on_sensor_change(self, payload: Mapping, ref: EvidenceRef) -> None:
        sensor_id = str(payload.get("sensor_id"))
        kind = payload.get("kind")
        old = payload.get("old_value")
        new = payload.get("new_value")
        t = ref.sim_time
        is_snapshot = bool(payload.get("snapshot", False))

        if kind == "door_access" and isinstance(new, str) and new in ("open", "closed", "locked"):
            door_id = str(payload.get("door_id") or sensor_id)
            if is_snapshot:
                return
            if new == "open":
                self._open_episode(door_id, t, ref)
            else:
                episode = self.episodes.get(door_id)
                if episode is not None and episode.closed_at is None:
                    episode.closed_at = t
            return

        if is_snapshot:
            # Snapshot burst establishes baselines without triggering.
            if kind == "temperature" and isinstance(new, (int, float)):
                self.temp_armed[sensor_id] = new < self.cfg.temp_alarm_c
            if kind == "power":
                self.power_outage_active = self.power_outage_active and new is False
            return

        room_id = self.sensor_rooms.get(sensor_id)

        if kind == "smoke_fire" and new is True:
            self._fire_trigger(room_id or sensor_id, "sensor", 1.0, (ref,), None, t)
            return

        if kind == "temperature":
            armed = self.temp_armed.get(sensor_id, True)
            if eval_environment_temperature(old, new, self.cfg) and armed:
                self.temp_armed[sensor_id] = False
                self._emit(
                    AlarmDraft(
                        alarm_type="environmental",
                        sim_time=t,
                        evidence=(ref,),
                        room_id=room_id,
                    )
                )
            elif isinstance(new, (int, float)) and new < self.cfg.temp_alarm_c:
                self.temp_armed[sensor_id] = True
            return

        if kind == "flood":
            if new is True and self.flood_armed.get(sensor_id, True):
                self.flood_armed[sensor_id] = False
                self._emit(
                    AlarmDraft(
                        alarm_type="environmental",
                        sim_time=t,
                        evidence=(ref,),
                        room_id=room_id,
                    )
                )
            elif new is False:
                self.flood_armed[sensor_id] = True
            return

        if kind == "power":
            if new is False:
                if not self.power_outage_active:
                    self.power_outage_active = True
                    self._emit(AlarmDraft(alarm_type="power", sim_time=t, evidence=(ref,)))
            else:
                self.power_outage_active = False
                self.black_counts.clear()
                self.black_refs.clear()
            return

        if kind == "device":
            if new == "lost" and sensor_id not in self.device_lost_active:
                self.device_lost_active.add(sensor_id)
                self._emit(
                    AlarmDraft(
                        alarm_type="device_lost",
                        sim_time=t,
                        evidence=(ref,),
                        camera_id=sensor_id,
                    )
                )
            elif new == "up":
                self.device_lost_active.discard(sensor_id)
            return

    def _on_access_granted(self, payload: Mapping, ref: EvidenceRef) -> None:
        door_id = str(payload.get("door_id"))
        episode = self.episodes.get(door_id)
        if episode is not None and (episode.closed_at is None or ref.sim_time <= episode.closed_at):
            episode.grants.append(ref)
            return
        pending = self.pending_grants.setdefault(door_id, [])
        pending.append(ref)
        cutoff = self.watermark - self.cfg.correlation_window_s
        self.pending_grants[door_id] = [g for g in pending if g.sim_time >= cutoff]

    def _on_door_transition(self, payload: Mapping, ref: EvidenceRef) -> None:
        door_id = str(payload.get("door_id"))
        episode = self.episodes.get(door_id)
        if episode is None:
            return
        end = episode.end_time(self.cfg.correlation_window_s)
        if episode.opened_at <= ref.sim_time <= end:
            episode.transitions.append(ref)

    def _on_frame_metadata(self, payload: Mapping, ref: EvidenceRef) -> None:
        camera_id = str(payload.get("camera_id"))
        if payload.get("all_black"):
            self.black_counts[camera_id] = self.black_counts.get(camera_id, 0) + 1
            self.black_refs[camera_id] = ref
        else:
            self.black_counts[camera_id] = 0
            self.black_refs.pop(camera_id, None)
        if self.power_outage_active:
            return
        confirmed = sorted(
            cam
            for cam, count in self.black_counts.items()
            if count >= self.cfg.black_frame_confirmations
        )
        if len(confirmed) >= 2:
            self.power_outage_active = True
            evidence = tuple(self.black_refs[cam] for cam in confirmed)
            self._emit(AlarmDraft(alarm_type="power", sim_time=ref.sim_time, evidence=evidence))

    def _on_detection_set(self, payload: Mapping, ref: EvidenceRef) -> None:
        camera_id = str(payload.get("camera_id"))
        room_id = payload.get("room_id")
        tracks = payload.get("tracks") or []
        t = ref.sim_time

        if room_id:
            state = self.crowd.setdefault(str(room_id), CrowdState())
            if eval_crowding(state, len(tracks), self.cfg, ref):
                self._emit(
                    AlarmDraft(
                        alarm_type="crowding",
                        sim_time=t,
                        evidence=state.recent_refs or (ref,),
                        camera_id=camera_id,
                        room_id=str(room_id),
                    )
                )

        for track in tracks:
            zone_id = track.get("zone_id")
            if zone_id is None or zone_id not in self.restricted_zones:
                continue
            dwell = float(track.get("dwell", {}).get(zone_id, 0.0))
            key = (camera_id, int(track.get("track_id", -1)), str(zone_id))
            if key in self.loiter_fired or not eval_loitering(dwell, self.cfg):
                continue
            self.loiter_fired.add(key)
            self._emit(
                AlarmDraft(
                    alarm_type="loitering",
                    sim_time=t,
                    evidence=(ref,),
                    camera_id=camera_id,
                    room_id=str(room_id) if room_id else None,
                )
            )

        score = float(payload.get("fire_score", 0.0))
        if score >= self.cfg.fire_visual_threshold:
            self.visual_streak[camera_id] = self.visual_streak.get(camera_id, 0) + 1
            refs = self.visual_refs.setdefault(camera_id, [])
            refs.append(ref)
            del refs[:-2]
            if self.visual_streak[camera_id] >= 2 and room_id:
                self._fire_trigger(
                    str(room_id), "visual", score, tuple(refs), camera_id, t
                )
        else:
            self.visual_streak[camera_id] = 0
            self.visual_refs.pop(camera_id, None)
