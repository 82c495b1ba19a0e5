"""System config, alarm store, run reports, persistence and replay."""

from __future__ import annotations

from pathlib import Path

import pytest

from sentrysim.assets import demo_floorplan_path, scenario_path
from sentrysim.bus import Broker, TOPIC_ALARMS
from sentrysim.rules import IllegalAlarmTransition
from sentrysim.service.alarms import AlarmStore, UnknownAlarmError, alarm_to_doc
from sentrysim.service.config import ConfigError, find_scenario, list_scenarios, load_system_config
from sentrysim.service.orchestrator import run
from sentrysim.service.persist import ReplayError, replay
from sentrysim.service.report import load_report_json, render_report


class TestConfig:
    def test_demo_config_loads(self, demo_config):
        assert len(demo_config.cameras) == 3
        assert any(not c.ingest for c in demo_config.cameras)
        assert demo_config.rules.crowd_limit == 4

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_system_config("/nonexistent/config.yaml")

    def test_duplicate_ports_named(self, tmp_path):
        config = tmp_path / "config.yaml"
        config.write_text(
            f"""
schema_version: 1
floorplan: {demo_floorplan_path()}
scenario: {scenario_path("empty")}
ports: {{control: 20001, console: 9000}}
cameras:
  - {{id: cam-a, port: 9000, position: [0, 0, 2], visibility: [corridor]}}
"""
        )
        with pytest.raises(ConfigError, match="console API.*cam-a|cam-a.*console API"):
            load_system_config(config)

    def test_scenario_lookup(self, demo_config):
        path = find_scenario(demo_config, "fire")
        assert path.name == "fire.yaml"
        with pytest.raises(ConfigError):
            find_scenario(demo_config, "no-such-thing")

    def test_list_scenarios(self, demo_config):
        names = list_scenarios(demo_config)
        assert {"tailgating", "authorized", "fire", "power_cut", "crowding",
                "loitering", "empty", "corridor_walk"} <= set(names)

    def test_fps_overrides(self, demo_config):
        from sentrysim.service.config import apply_fps_overrides

        overridden = apply_fps_overrides(demo_config, {"cam-room": 2.0})
        fps = {c.camera_id: c.fps for c in overridden.cameras}
        assert fps["cam-room"] == 2.0
        assert fps["cam-corridor"] == 10.0
        with pytest.raises(ConfigError, match="ghost"):
            apply_fps_overrides(demo_config, {"ghost": 5.0})

    def test_ptz_defaults_from_config(self, tmp_path):
        config_path = tmp_path / "config.yaml"
        config_path.write_text(
            f"""
schema_version: 1
floorplan: {demo_floorplan_path()}
scenario: {scenario_path("empty")}
cameras:
  - id: cam-a
    position: [0, 0, 2]
    visibility: [corridor]
    ptz: {{pan: 0.2, zoom: 4.0}}
"""
        )
        config = load_system_config(config_path)
        view = config.cameras[0].camera_view()
        assert view.ptz.pan == 0.2
        assert view.ptz.zoom == 4.0

    def test_bad_rules_rejected(self, tmp_path):
        config = tmp_path / "config.yaml"
        config.write_text(
            f"""
schema_version: 1
floorplan: {demo_floorplan_path()}
scenario: {scenario_path("empty")}
rules: {{crowd_limit: -3}}
"""
        )
        with pytest.raises(ConfigError, match="rules"):
            load_system_config(config)


def alarm_payload(n=1, t=2.0, alarm_type="fire"):
    return {
        "type": "alarm", "alarm_id": f"alarm-{n:04d}", "alarm_type": alarm_type,
        "severity": 4, "sim_time": t, "camera_id": None, "room_id": "oproom",
        "door_id": None, "source": "sensor", "confidence": 1.0,
        "evidence": [{"topic": "events.sensor", "offset": 0, "sim_time": t - 0.5}],
    }


class TestAlarmStore:
    def test_sync_materializes_alarms(self):
        broker = Broker()
        store = AlarmStore(broker)
        broker.publish(TOPIC_ALARMS, "a", alarm_payload(), sim_time=2.0)
        assert store.sync() == 1
        alarm = store.get("alarm-0001")
        assert alarm.alarm_type == "fire"
        assert alarm.state == "open"

    def test_acknowledge_updates_and_publishes(self):
        broker = Broker()
        store = AlarmStore(broker)
        broker.publish(TOPIC_ALARMS, "a", alarm_payload())
        store.sync()
        alarm = store.alarm_command("alarm-0001", "acknowledge", "kim")
        assert alarm.state == "acknowledged"
        update = broker.records_of(TOPIC_ALARMS)[-1].payload
        assert update["type"] == "alarm-update"
        assert update["state"] == "acknowledged"
        assert update["operator"] == "kim"
        store.sync()  # applying our own update record must be harmless
        assert store.get("alarm-0001").state == "acknowledged"

    def test_reject_acknowledged_is_illegal(self):
        broker = Broker()
        store = AlarmStore(broker)
        broker.publish(TOPIC_ALARMS, "a", alarm_payload())
        store.sync()
        store.alarm_command("alarm-0001", "acknowledge", "kim")
        with pytest.raises(IllegalAlarmTransition):
            store.alarm_command("alarm-0001", "reject", "kim")

    def test_unknown_alarm(self):
        store = AlarmStore(Broker())
        with pytest.raises(UnknownAlarmError):
            store.alarm_command("alarm-9999", "acknowledge", "kim")

    def test_update_record_merges_source(self):
        broker = Broker()
        store = AlarmStore(broker)
        broker.publish(TOPIC_ALARMS, "a", alarm_payload())
        broker.publish(TOPIC_ALARMS, "a", {
            "type": "alarm-update", "alarm_id": "alarm-0001", "sim_time": 3.0,
            "source": "both", "confidence": 1.0,
            "evidence_add": [{"topic": "detections.cam-room", "offset": 4, "sim_time": 2.9}],
        })
        store.sync()
        alarm = store.get("alarm-0001")
        assert alarm.source == "both"
        assert len(alarm.evidence) == 2

    def test_query_filters_and_pagination(self):
        broker = Broker()
        store = AlarmStore(broker)
        for n, (t, typ) in enumerate([(1.0, "fire"), (2.0, "power"), (3.0, "fire")], start=1):
            broker.publish(TOPIC_ALARMS, "a", alarm_payload(n, t, typ))
        store.sync()
        assert [a.alarm_id for a in store.query_alarms()] == [
            "alarm-0001", "alarm-0002", "alarm-0003"]
        assert [a.alarm_id for a in store.query_alarms(alarm_type="fire")] == [
            "alarm-0001", "alarm-0003"]
        assert [a.alarm_id for a in store.query_alarms(since=1.5, until=2.5)] == ["alarm-0002"]
        assert [a.alarm_id for a in store.query_alarms(limit=1, offset=1)] == ["alarm-0002"]
        assert store.query_alarms(state="acknowledged") == []

    def test_latency_in_doc(self):
        broker = Broker()
        store = AlarmStore(broker)
        broker.publish(TOPIC_ALARMS, "a", alarm_payload(t=2.0))
        store.sync()
        doc = alarm_to_doc(store.get("alarm-0001"))
        assert doc["latency"] == pytest.approx(0.5)


class TestRunAndReport:
    def test_empty_scenario_zero_alarms(self, scenario_config):
        report = run(scenario_config("empty"))
        assert report.alarm_counts == {}
        assert report.ticks == 20

    def test_report_files_and_figures(self, tailgating_run):
        report, log_dir = tailgating_run
        assert report.alarm_counts == {"tailgating": 1}
        files = render_report(log_dir)
        names = {f.name for f in files}
        assert names == {"alarms.csv", "topics.csv", "alarm_timeline.png",
                         "topic_counts.png", "alarm_latency.png"}
        for f in files:
            assert f.exists() and f.stat().st_size > 0
        alarms_csv = next(f for f in files if f.name == "alarms.csv").read_text()
        assert "tailgating" in alarms_csv

    def test_report_latency_consistent(self, tailgating_run):
        report, log_dir = tailgating_run
        doc = load_report_json(Path(log_dir) / "report.json")
        for alarm in doc["alarms"]:
            earliest = min(e["sim_time"] for e in alarm["evidence"])
            assert alarm["latency"] == pytest.approx(alarm["sim_time"] - earliest)

    def test_evidence_offsets_exist_in_dumps(self, tailgating_run):
        report, log_dir = tailgating_run
        lengths = {}
        for dump in (Path(log_dir) / "topics").glob("*.jsonl"):
            lengths[dump.name[:-6]] = len(dump.read_text().splitlines())
        for alarm in report.alarms:
            for evidence in alarm["evidence"]:
                assert evidence["offset"] < lengths[evidence["topic"]]


class TestReplay:
    def test_replay_reproduces_alarm_log(self, tailgating_run):
        _, log_dir = tailgating_run
        result = replay(log_dir)
        assert result.matches
        assert len(result.replayed) == 1

    def test_replay_of_empty_logs(self, tmp_path, scenario_config):
        run(scenario_config("empty"), log_dir=tmp_path)
        result = replay(tmp_path)
        assert result.matches
        assert result.replayed == []

    def test_missing_logdir(self, tmp_path):
        with pytest.raises(ReplayError):
            replay(tmp_path / "nope")

    def test_truncated_line_reported(self, tailgating_run, tmp_path):
        _, log_dir = tailgating_run
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(log_dir, broken)
        dump = broken / "topics" / "events.door.jsonl"
        text = dump.read_text().splitlines()
        dump.write_text("\n".join(text[:-1] + [text[-1][: len(text[-1]) // 2]]) + "\n")
        with pytest.raises(Exception, match=r"events\.door\.jsonl:\d+"):
            replay(broken)
