"""Realtime mode over the network path: HTTP snapshot polling and WS sensors."""

from __future__ import annotations

import socket
import time
from dataclasses import replace

from sentrysim.bus import Broker, TOPIC_SENSOR_EVENTS, frames_topic
from sentrysim.gateway import BackoffPolicy, SensorIngest, WebSocketSensorClient
from sentrysim.service.config import MODE_REALTIME
from sentrysim.service.orchestrator import Runtime
from sentrysim.vdevices.alarm_manager import AlarmManagerServer
from sentrysim.vdevices.sensors import StateChangeNotification


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def test_realtime_run_paces_and_uses_http_gateway(demo_config, tmp_path):
    scenario = tmp_path / "short.yaml"
    scenario.write_text(
        """
schema_version: 1
name: short
seed: 42
dt: 0.1
duration: 0.5
actions:
  - {time: 0.2, actor: power, name: power, value: "cut"}
"""
    )
    cameras = tuple(replace(c, port=0) for c in demo_config.cameras)
    config = replace(
        demo_config.with_scenario(scenario),
        mode=MODE_REALTIME,
        servers_enabled=True,
        control_port=0,
        console_port=0,
        cameras=cameras,
    )
    runtime = Runtime(config)
    try:
        started = time.monotonic()
        report = runtime.run_to_completion()
        elapsed = time.monotonic() - started
        # Paced to the wall clock: 0.5 s of sim time takes at least that long.
        assert elapsed >= 0.5
        assert report.ticks == 5
        # Frames flowed through the HTTP snapshot path (PNG decode included).
        assert report.topic_counts[frames_topic("cam-room")] >= 4
        assert report.topic_counts[frames_topic("cam-corridor")] >= 4
        assert report.alarm_counts.get("power") == 1
        black_flags = [
            r.payload["all_black"] for r in runtime.broker.records_of(frames_topic("cam-room"))
        ]
        assert any(black_flags), "power cut must reach the HTTP-polled frames"
    finally:
        runtime.shutdown()


def test_ws_client_reconnects_and_resyncs():
    """Dropping the server mid-run: the client reconnects and the fresh
    snapshot burst resynchronizes downstream state."""
    port = free_port()
    burst_value = {"n": 0}

    def snapshot():
        return [
            StateChangeNotification(
                sensor_id="smoke-1", kind="smoke_fire", old_value=None,
                new_value=bool(burst_value["n"]), sim_time=0.0, seq=burst_value["n"],
                snapshot=True,
            )
        ]

    server = AlarmManagerServer(snapshot_fn=snapshot, port=port)
    server.start()
    broker = Broker()
    ingest = SensorIngest(broker)
    client = WebSocketSensorClient(
        f"ws://127.0.0.1:{port}/notifications", ingest,
        policy=BackoffPolicy(base=0.05, factor=1.0, cap=0.05),
    )
    client.start()
    try:
        deadline = time.monotonic() + 5
        while broker.topic_length(TOPIC_SENSOR_EVENTS) < 1:
            assert time.monotonic() < deadline
            time.sleep(0.01)

        server.stop()
        burst_value["n"] = 1
        server = AlarmManagerServer(snapshot_fn=snapshot, port=port)
        server.start()

        deadline = time.monotonic() + 10
        while broker.topic_length(TOPIC_SENSOR_EVENTS) < 2:
            assert time.monotonic() < deadline, "client never reconnected"
            time.sleep(0.01)
        records = broker.records_of(TOPIC_SENSOR_EVENTS)
        assert records[0].payload["snapshot"] and records[1].payload["snapshot"]
        assert records[1].payload["seq"] == 1  # second burst reflects new state
    finally:
        client.stop()
        server.stop()
