"""Rule evaluators and the engine's correlation/idempotence contracts."""

from __future__ import annotations

import pytest

from sentrysim.bus import EventRecord
from sentrysim.rules import (
    Alarm,
    CrowdState,
    DoorEpisode,
    EvidenceRef,
    IllegalAlarmTransition,
    RuleConfig,
    RuleEngine,
    eval_crowding,
    eval_environment_temperature,
    eval_loitering,
    eval_tailgating,
)

CFG = RuleConfig()


def ref(topic="events.door", offset=0, t=1.0) -> EvidenceRef:
    return EvidenceRef(topic, offset, t)


class TestEvalTailgating:
    def _episode(self, grants: int, transitions: int) -> DoorEpisode:
        episode = DoorEpisode(door_id="d", opened_at=1.0, closed_at=6.0)
        episode.grants = [ref("events.access", i, 1.0) for i in range(grants)]
        episode.transitions = [ref("events.door", i, 3.0 + i) for i in range(transitions)]
        return episode

    def test_one_grant_one_transition_no_alarm(self):
        assert eval_tailgating(self._episode(1, 1), CFG, now=7.0) is None

    def test_one_grant_two_transitions_alarms(self):
        draft = eval_tailgating(self._episode(1, 2), CFG, now=7.0)
        assert draft is not None
        assert draft.alarm_type == "tailgating"
        assert len(draft.evidence) == 3  # the grant plus both transitions

    def test_zero_grants_one_transition_alarms(self):
        draft = eval_tailgating(self._episode(0, 1), CFG, now=7.0)
        assert draft is not None

    def test_equal_counts_no_alarm(self):
        assert eval_tailgating(self._episode(2, 2), CFG, now=7.0) is None


class TestEvalCrowding:
    def test_count_at_limit_never_alarms(self):
        state = CrowdState()
        assert not any(eval_crowding(state, CFG.crowd_limit, CFG, ref()) for _ in range(10))

    def test_single_tick_spike_debounced(self):
        state = CrowdState()
        assert not eval_crowding(state, 5, CFG, ref())
        assert not eval_crowding(state, 4, CFG, ref())
        assert not eval_crowding(state, 4, CFG, ref())

    def test_two_episodes_two_alarms(self):
        state = CrowdState()
        fired = []
        for count in [5, 5, 5, 5, 5, 3, 3, 5, 5]:
            fired.append(eval_crowding(state, count, CFG, ref()))
        assert fired.count(True) == 2
        assert fired[1] and fired[8]  # second violating tick of each episode

    def test_rearm_requires_count_below_limit(self):
        state = CrowdState()
        for count in [5, 5]:
            eval_crowding(state, count, CFG, ref())
        # Drop to exactly the limit: not a violation, but not below it either.
        eval_crowding(state, 4, CFG, ref())
        assert not eval_crowding(state, 5, CFG, ref())
        assert not eval_crowding(state, 5, CFG, ref())  # still disarmed
        eval_crowding(state, 3, CFG, ref())  # below limit: re-arms
        eval_crowding(state, 5, CFG, ref())
        assert eval_crowding(state, 5, CFG, ref())


class TestEvalLoiteringAndEnvironment:
    def test_dwell_below_threshold(self):
        assert not eval_loitering(29.9, CFG)

    def test_dwell_above_threshold(self):
        assert eval_loitering(30.1, CFG)

    def test_temperature_rising_cross(self):
        assert eval_environment_temperature(44.0, 46.0, CFG)
        assert not eval_environment_temperature(44.0, 44.9, CFG)
        assert not eval_environment_temperature(46.0, 47.0, CFG)  # already above


def record(topic: str, offset: int, payload: dict, t: float) -> EventRecord:
    return EventRecord(topic=topic, offset=offset, key="k", sim_time=t, wall_seq=offset, payload=payload)


class EngineHarness:
    """RuleEngine wired to an in-memory alarm list."""

    def __init__(self, cfg: RuleConfig = CFG, restricted=frozenset({"restricted-1"}),
                 sensor_rooms=None):
        self.published: list[dict] = []
        self.engine = RuleEngine(
            cfg,
            publish=lambda payload, t: (self.published.append(payload), len(self.published) - 1)[1],
            restricted_zones=restricted,
            sensor_rooms=sensor_rooms or {"smoke-1": "oproom", "temp-1": "oproom"},
        )
        self._offsets: dict[str, int] = {}
        self.records: list[EventRecord] = []

    def feed(self, topic: str, payload: dict, t: float) -> EventRecord:
        offset = self._offsets.get(topic, 0)
        self._offsets[topic] = offset + 1
        rec = record(topic, offset, payload, t)
        self.records.append(rec)
        self.engine.process(rec)
        return rec

    def alarms(self, alarm_type: str | None = None) -> list[dict]:
        out = [p for p in self.published if p["type"] == "alarm"]
        if alarm_type:
            out = [p for p in out if p["alarm_type"] == alarm_type]
        return out

    def door_mode(self, door: str, old: str, new: str, t: float):
        return self.feed(
            "events.sensor",
            {"type": "sensor-change", "sensor_id": door, "kind": "door_access",
             "old_value": old, "new_value": new, "sim_time": t, "seq": 1, "snapshot": False,
             "door_id": door},
            t,
        )

    def grant(self, door: str, t: float):
        return self.feed(
            "events.access",
            {"type": "access-granted", "door_id": door, "credential": "b", "sim_time": t},
            t,
        )

    def transition(self, door: str, track: int, t: float):
        return self.feed(
            "events.door",
            {"type": "door-transition", "camera_id": "cam", "door_id": door,
             "track_id": track, "sim_time": t, "class": "person"},
            t,
        )

    def tick_detection(self, t: float, tracks=(), score=0.0, room="oproom", cam="cam-room"):
        return self.feed(
            f"detections.{cam}",
            {"type": "detection-set", "camera_id": cam, "room_id": room,
             "tick": int(t * 10), "sim_time": t, "fire_score": score,
             "tracks": list(tracks)},
            t,
        )


class TestEngineTailgatingTrace:
    def test_canonical_log_yields_one_alarm(self):
        h = EngineHarness()
        h.grant("door-1", 1.0)
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 3.0)
        h.transition("door-1", 2, 5.0)
        h.door_mode("door-1", "open", "closed", 6.0)
        # Grace has not elapsed yet: no alarm.
        assert h.alarms("tailgating") == []
        h.tick_detection(7.1)  # watermark past closed_at + grace
        alarms = h.alarms("tailgating")
        assert len(alarms) == 1
        evidence = alarms[0]["evidence"]
        topics = sorted(e["topic"] for e in evidence)
        assert topics == ["events.access", "events.door", "events.door"]

    def test_authorized_passage_no_alarm(self):
        h = EngineHarness()
        h.grant("door-1", 1.0)
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 3.0)
        h.door_mode("door-1", "open", "closed", 6.0)
        h.tick_detection(8.0)
        assert h.alarms("tailgating") == []

    def test_grant_before_open_absorbed(self):
        h = EngineHarness()
        h.grant("door-1", 0.95)
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 2.0)
        h.door_mode("door-1", "open", "closed", 5.0)
        h.engine.flush(10.0)
        assert h.alarms("tailgating") == []

    def test_two_doors_independent_episodes(self):
        h = EngineHarness()
        h.door_mode("door-1", "locked", "open", 1.0)
        h.door_mode("door-2", "locked", "open", 1.5)
        h.transition("door-1", 1, 2.0)
        h.transition("door-2", 7, 2.5)
        h.door_mode("door-1", "open", "closed", 3.0)
        h.door_mode("door-2", "open", "closed", 3.5)
        h.engine.flush(10.0)
        alarms = h.alarms("tailgating")
        assert len(alarms) == 2
        assert sorted(a["door_id"] for a in alarms) == ["door-1", "door-2"]

    def test_window_expiry_closes_episode(self):
        h = EngineHarness()
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 2.0)
        # Door never closes; watermark sails past the correlation window.
        h.tick_detection(1.0 + CFG.correlation_window_s + 0.1)
        assert len(h.alarms("tailgating")) == 1

    def test_transition_outside_episode_ignored(self):
        h = EngineHarness()
        h.transition("door-1", 1, 2.0)  # door never opened
        h.engine.flush(10.0)
        assert h.alarms("tailgating") == []


class TestEngineFire:
    def test_sensor_path(self):
        h = EngineHarness()
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "smoke-1", "kind": "smoke_fire",
                "old_value": False, "new_value": True, "sim_time": 5.0, "seq": 1,
                "snapshot": False}, 5.0)
        alarms = h.alarms("fire")
        assert len(alarms) == 1
        assert alarms[0]["source"] == "sensor"
        assert alarms[0]["confidence"] == 1.0
        assert alarms[0]["room_id"] == "oproom"

    def test_visual_path_needs_two_consecutive_frames(self):
        h = EngineHarness()
        h.tick_detection(1.0, score=0.7)
        assert h.alarms("fire") == []
        h.tick_detection(1.1, score=0.05)  # streak broken
        h.tick_detection(1.2, score=0.7)
        assert h.alarms("fire") == []
        h.tick_detection(1.3, score=0.75)
        alarms = h.alarms("fire")
        assert len(alarms) == 1
        assert alarms[0]["source"] == "visual"
        assert alarms[0]["confidence"] == 0.75
        assert len(alarms[0]["evidence"]) == 2

    def test_sensor_then_visual_upgrades_to_both(self):
        h = EngineHarness()
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "smoke-1", "kind": "smoke_fire",
                "old_value": False, "new_value": True, "sim_time": 5.0, "seq": 1,
                "snapshot": False}, 5.0)
        h.tick_detection(6.0, score=0.9)
        h.tick_detection(6.1, score=0.9)
        updates = [p for p in h.published if p["type"] == "alarm-update"]
        assert len(updates) == 1
        assert updates[0]["source"] == "both"
        assert updates[0]["alarm_id"] == h.alarms("fire")[0]["alarm_id"]
        assert len(h.alarms("fire")) == 1  # deduplicated, not duplicated

    def test_dedup_window_expires(self):
        cfg = RuleConfig(fire_dedup_s=10.0)
        h = EngineHarness(cfg)
        for t in (5.0, 16.0):
            h.feed("events.sensor",
                   {"type": "sensor-change", "sensor_id": "smoke-1", "kind": "smoke_fire",
                    "old_value": False, "new_value": True, "sim_time": t, "seq": 1,
                    "snapshot": False}, t)
        assert len(h.alarms("fire")) == 2


class TestEnginePower:
    def test_sensor_cut_alarms_once(self):
        h = EngineHarness()
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "power-1", "kind": "power",
                "old_value": True, "new_value": False, "sim_time": 2.0, "seq": 1,
                "snapshot": False}, 2.0)
        assert len(h.alarms("power")) == 1

    def _black_frame(self, h, cam, t, black=True):
        h.feed(f"frames.{cam}",
               {"type": "frame-metadata", "camera_id": cam, "tick": int(t * 10),
                "sim_time": t, "byte_size": 230400, "all_black": black}, t)

    def test_single_camera_blackout_insufficient(self):
        h = EngineHarness()
        for k in range(5):
            self._black_frame(h, "cam-a", 1.0 + k * 0.1)
        assert h.alarms("power") == []

    def test_two_cameras_blackout_alarms(self):
        h = EngineHarness()
        for k in range(3):
            self._black_frame(h, "cam-a", 1.0 + k * 0.1)
            self._black_frame(h, "cam-b", 1.0 + k * 0.1)
        alarms = h.alarms("power")
        assert len(alarms) == 1
        assert len(alarms[0]["evidence"]) == 2

    def test_black_streak_reset_by_live_frame(self):
        h = EngineHarness()
        for k in range(2):
            self._black_frame(h, "cam-a", 1.0 + k * 0.1)
            self._black_frame(h, "cam-b", 1.0 + k * 0.1)
        self._black_frame(h, "cam-a", 1.2, black=False)
        self._black_frame(h, "cam-b", 1.2)
        self._black_frame(h, "cam-a", 1.3)
        self._black_frame(h, "cam-b", 1.3)
        assert h.alarms("power") == []


class TestEngineCrowdingLoitering:
    def _tracks(self, n, zone=None, dwell=0.0):
        return [
            {"track_id": i, "class": "person", "bbox": [0, 0, 10, 10],
             "confidence": 0.9, "zone_id": zone, "dwell": {zone: dwell} if zone else {}}
            for i in range(n)
        ]

    def test_crowding_trace(self):
        h = EngineHarness()
        h.tick_detection(1.0, tracks=self._tracks(5))
        assert h.alarms("crowding") == []
        h.tick_detection(1.1, tracks=self._tracks(5))
        assert len(h.alarms("crowding")) == 1
        h.tick_detection(1.2, tracks=self._tracks(5))
        assert len(h.alarms("crowding")) == 1  # still one per episode

    def test_loitering_once_per_track(self):
        h = EngineHarness()
        h.tick_detection(1.0, tracks=self._tracks(1, zone="restricted-1", dwell=31.0))
        h.tick_detection(1.1, tracks=self._tracks(1, zone="restricted-1", dwell=31.1))
        assert len(h.alarms("loitering")) == 1

    def test_non_restricted_zone_ignored(self):
        h = EngineHarness()
        h.tick_detection(1.0, tracks=self._tracks(1, zone="lobby", dwell=99.0))
        assert h.alarms("loitering") == []


class TestEngineContracts:
    def _run_log(self, records) -> list[dict]:
        h = EngineHarness()
        for rec in records:
            h.engine.process(rec)
        h.engine.flush(30.0)
        return h.published

    def _canonical_records(self):
        h = EngineHarness()
        h.grant("door-1", 1.0)
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 3.0)
        h.transition("door-1", 2, 5.0)
        h.door_mode("door-1", "open", "closed", 6.0)
        h.tick_detection(8.0)
        return h.records

    def test_idempotence_under_prefix_replay(self):
        records = self._canonical_records()
        base = self._run_log(records)
        for prefix_len in (1, 3, len(records)):
            duplicated = records[:prefix_len] + records
            assert self._run_log(duplicated) == base

    def test_determinism_same_log_same_alarms(self):
        records = self._canonical_records()
        assert self._run_log(records) == self._run_log(records)

    def test_snapshot_records_never_trigger(self):
        h = EngineHarness()
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "power-1", "kind": "power",
                "old_value": None, "new_value": False, "sim_time": 0.0, "seq": 0,
                "snapshot": True}, 0.0)
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "smoke-1", "kind": "smoke_fire",
                "old_value": None, "new_value": True, "sim_time": 0.0, "seq": 0,
                "snapshot": True}, 0.0)
        assert h.published == []

    def test_unknown_payloads_counted_not_fatal(self):
        h = EngineHarness()
        h.feed("events.sensor",
               {"type": "sensor-change", "sensor_id": "x", "kind": "mystery",
                "old_value": 1, "new_value": 2, "sim_time": 1.0, "seq": 1,
                "snapshot": False}, 1.0)
        rec = record("scratch", 0, {"type": "unknown-kind"}, 1.0)
        h.engine.process(rec)
        assert h.engine.skipped_payloads == 1
        assert h.published == []


class TestStateSnapshot:
    def test_snapshot_reflects_episode_and_counters(self):
        h = EngineHarness()
        h.grant("door-1", 1.0)
        h.door_mode("door-1", "locked", "open", 1.0)
        h.transition("door-1", 1, 2.0)
        snapshot = h.engine.state_snapshot()
        assert snapshot["episodes"]["door-1"] == {
            "opened_at": 1.0, "closed_at": None, "grants": 1, "transitions": 1,
        }
        assert snapshot["records_seen"] == 3
        assert snapshot["alarms_emitted"] == 0
        assert snapshot["watermark"] == 2.0


class TestAlarmStateMachine:
    def _alarm(self) -> Alarm:
        return Alarm(
            alarm_id="alarm-0001", alarm_type="fire", severity=4, sim_time=1.0,
            evidence=(ref(),),
        )

    def test_acknowledge_open(self):
        alarm = self._alarm()
        alarm.transition("acknowledge", "op")
        assert alarm.state == "acknowledged"
        assert alarm.operator == "op"

    def test_reject_after_acknowledge_illegal(self):
        alarm = self._alarm()
        alarm.transition("acknowledge", "op")
        with pytest.raises(IllegalAlarmTransition):
            alarm.transition("reject", "op")

    def test_evidence_required(self):
        with pytest.raises(ValueError):
            Alarm(alarm_id="a", alarm_type="fire", severity=1, sim_time=0.0, evidence=())

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            RuleConfig(crowd_limit=0)
