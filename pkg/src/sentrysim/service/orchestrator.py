"""Orchestrator: wires world -> devices -> gateway -> analytics -> rules -> alarms.

The orchestrator owns the tick loop. Device servers and remote clients only
ever see immutable per-tick snapshots; control requests are validated
synchronously and applied at the next tick boundary. In as-fast-as-possible
mode the whole pipeline is driven synchronously in publish order, which makes
two runs with identical configuration produce identical topic dumps and alarm
logs.
"""

from __future__ import annotations

import json
import logging
import time
from pathlib import Path

from sentrysim.analytics import CameraAnalytics
from sentrysim.bus import (
    Broker,
    MultiConsumer,
    TOPIC_ACCESS_EVENTS,
    TOPIC_ALARMS,
    TOPIC_DOOR_EVENTS,
    TOPIC_SENSOR_EVENTS,
    TopicDumpWriter,
    detections_topic,
    frames_topic,
)
from sentrysim.gateway import CameraIngest, DirectCameraClient, HttpCameraClient, PtzGateway, SensorIngest, WebSocketSensorClient
from sentrysim.rules import RuleEngine
from sentrysim.service.alarms import AlarmStore
from sentrysim.service.config import MODE_REALTIME, SystemConfig
from sentrysim.service.report import RunReport, build_report, write_report_json
from sentrysim.vdevices.alarm_manager import AlarmManagerHub, AlarmManagerServer
from sentrysim.vdevices.camera_server import CameraDevice, CameraHttpServer
from sentrysim.vdevices.control import ControlHttpServer, ControlQueue, PendingAction
from sentrysim.vdevices.sensors import SensorBank
from sentrysim.world import apply_action, initial_state, load_floorplan, load_scenario, step, validate_action

logger = logging.getLogger(__name__)

ENGINE_TOPICS_STATIC = (TOPIC_SENSOR_EVENTS, TOPIC_ACCESS_EVENTS, TOPIC_DOOR_EVENTS)


class StartupError(RuntimeError):
    pass


class Runtime:
    """A fully wired monitoring stack over one scenario run."""

    def __init__(self, config: SystemConfig, log_dir: str | Path | None = None):
        self.config = config
        self.plan = load_floorplan(config.floorplan_path)
        script = load_scenario(config.scenario_path)
        if config.seed is not None:
            script = script.with_seed(config.seed)
        self.script = script

        self.broker = Broker()
        self.log_dir = Path(log_dir) if log_dir else None
        self._dump: TopicDumpWriter | None = None
        if self.log_dir is not None:
            self._dump = TopicDumpWriter(self.log_dir / "topics")
            self.broker.add_tap(self._dump)

        self.state = initial_state(self.plan, script)
        self.control_queue = ControlQueue()

        self.devices: dict[str, CameraDevice] = {}
        self.analytics: dict[str, CameraAnalytics] = {}
        self.ingests: dict[str, CameraIngest] = {}
        self.ptz_gateway = PtzGateway()
        engine_topics = list(ENGINE_TOPICS_STATIC)
        for entry in sorted(config.cameras, key=lambda c: c.camera_id):
            device = CameraDevice(
                entry.camera_view(), self.plan, ground_truth_enabled=config.ground_truth_endpoint
            )
            self.devices[entry.camera_id] = device
            self.analytics[entry.camera_id] = CameraAnalytics(entry.analytics_config())
            engine_topics += [frames_topic(entry.camera_id), detections_topic(entry.camera_id)]

        self.sensor_bank = SensorBank(config.sensors)
        self.hub = AlarmManagerHub()
        self.sensor_ingest = SensorIngest(self.broker)

        restricted = frozenset(z.zone_id for z in self.plan.restricted_zones())
        sensor_rooms = {s.sensor_id: s.room_id for s in config.sensors if s.room_id}
        self.engine = RuleEngine(
            config.rules,
            publish=lambda payload, sim_time: self.broker.publish(
                TOPIC_ALARMS, key=str(payload.get("alarm_id")), payload=payload, sim_time=sim_time
            ),
            restricted_zones=restricted,
            sensor_rooms=sensor_rooms,
        )
        self.engine_consumer = MultiConsumer(self.broker, engine_topics, group="rule-engine")
        self.store = AlarmStore(self.broker)

        # Network servers (started on demand).
        self.camera_servers: dict[str, CameraHttpServer] = {}
        self.control_server: ControlHttpServer | None = None
        self.alarm_server: AlarmManagerServer | None = None
        self.console_server = None
        self._ws_sensor_client: WebSocketSensorClient | None = None
        self._started = False
        self._wall_started = 0.0

    # -- control path -------------------------------------------------------

    def schedule_action(self, actor_id: str, name: str, value: str) -> int:
        """Validate an action against the current state and queue it for the
        next tick boundary. Raises the world action errors on bad input."""
        validate_action(self.state, self.plan, self.script, actor_id, name, value)
        self.control_queue.push(PendingAction(actor_id, name, value))
        return self.state.tick + 1

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._wall_started = time.monotonic()
        module = "devices"
        try:
            for device in self.devices.values():
                device.publish_tick(self.state)
            module = "sensors"
            self.sensor_bank.scan(self.state, self.plan)  # establishes baseline
            module = "gateway"
            use_http = self.config.servers_enabled and self.config.mode == MODE_REALTIME
            if self.config.servers_enabled:
                self._start_servers()
            for camera_id, device in self.devices.items():
                entry = next(c for c in self.config.cameras if c.camera_id == camera_id)
                if not entry.ingest:
                    continue
                if use_http:
                    server = self.camera_servers[camera_id]
                    client = HttpCameraClient(camera_id, f"http://127.0.0.1:{server.port}")
                else:
                    client = DirectCameraClient(device)
                ingest = CameraIngest(
                    camera_id=camera_id,
                    client=client,
                    fps=entry.fps,
                    tick_rate_hz=1.0 / self.script.dt,
                    broker=self.broker,
                )
                ingest.start()
                self.ingests[camera_id] = ingest
                self.ptz_gateway.register(camera_id, client)
            if use_http and self.alarm_server is not None:
                self._ws_sensor_client = WebSocketSensorClient(
                    f"ws://127.0.0.1:{self.alarm_server.port}/notifications", self.sensor_ingest
                )
                self._ws_sensor_client.start()
            else:
                self.hub.subscribe(
                    self.sensor_ingest.on_notification,
                    snapshot=self.sensor_bank.snapshot_notifications(),
                )
            module = "pipeline"
            self._process_cameras(tick=0)
            self._drain_engine()
            self.store.sync()
            self._started = True
        except Exception as exc:
            self.shutdown()
            raise StartupError(f"startup failed in {module}: {exc}") from exc

    def _start_servers(self) -> None:
        from sentrysim.service.console_api import ConsoleServer  # avoid import cycle

        for camera_id, device in self.devices.items():
            entry = next(c for c in self.config.cameras if c.camera_id == camera_id)
            server = CameraHttpServer(device, port=entry.port)
            server.start()
            self.camera_servers[camera_id] = server
        self.alarm_server = AlarmManagerServer(
            snapshot_fn=self.sensor_bank.snapshot_notifications, port=0
        )
        self.alarm_server.start()
        self.hub.attach_server(self.alarm_server)
        self.control_server = ControlHttpServer(self.schedule_action, port=self.config.control_port)
        self.control_server.start()
        self.console_server = ConsoleServer(self, port=self.config.console_port)
        self.console_server.start()

    def shutdown(self) -> None:
        if self._ws_sensor_client is not None:
            self._ws_sensor_client.stop()
        for ingest in self.ingests.values():
            try:
                ingest.stop()
            except Exception:
                pass
        if self.console_server is not None:
            self.console_server.stop()
        if self.control_server is not None:
            self.control_server.stop()
        if self.alarm_server is not None:
            self.alarm_server.stop()
        for server in self.camera_servers.values():
            server.stop()
        if self._dump is not None:
            self._dump.close()

    # -- tick pipeline ---------------------------------------------------------

    def _process_cameras(self, tick: int) -> None:
        for camera_id in sorted(self.ingests):
            ingest = self.ingests[camera_id]
            frame = ingest.on_tick(tick, now=self.state.clock)
            if frame is None:
                continue
            worker = self.analytics[camera_id]
            result = worker.process(frame)
            for transition in result.transitions:
                self.broker.publish(
                    TOPIC_DOOR_EVENTS,
                    key=transition.door_id,
                    payload={
                        "type": "door-transition",
                        "camera_id": transition.camera_id,
                        "door_id": transition.door_id,
                        "track_id": transition.track_id,
                        "sim_time": transition.sim_time,
                        "class": transition.agent_class,
                    },
                    sim_time=transition.sim_time,
                )
            self.broker.publish(
                detections_topic(camera_id),
                key=camera_id,
                payload=worker.detection_payload(result),
                sim_time=result.sim_time,
            )

    def _drain_engine(self) -> None:
        while True:
            batch = self.engine_consumer.poll(max_records=512)
            if not batch:
                break
            for record in batch:
                self.engine.process(record)
            self.engine_consumer.commit_all()

    def tick_once(self) -> None:
        self.state = step(self.state, self.plan, self.script)
        for pending in self.control_queue.drain():
            try:
                self.state = apply_action(
                    self.state, self.plan, self.script, pending.actor_id, pending.name, pending.value
                )
            except Exception as exc:
                logger.warning("queued action failed at tick %d: %s", self.state.tick, exc)
        for device in self.devices.values():
            device.publish_tick(self.state)
        notifications = self.sensor_bank.scan(self.state, self.plan)
        self.hub.dispatch(notifications)
        self._process_cameras(self.state.tick)
        self._drain_engine()
        self.store.sync()

    def run_to_completion(self) -> RunReport:
        self.start()
        realtime = self.config.mode == MODE_REALTIME
        total_ticks = self.script.total_ticks()
        wall_start = time.monotonic()
        try:
            for tick_index in range(1, total_ticks + 1):
                if realtime:
                    deadline = wall_start + tick_index * self.script.dt
                    delay = deadline - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                self.tick_once()
        except KeyboardInterrupt:
            logger.info("interrupted at tick %d; flushing", self.state.tick)
        self.engine.flush(self.script.duration)
        self._drain_engine()
        self.store.sync()
        wall_seconds = time.monotonic() - wall_start
        report = build_report(
            scenario=self.script.name,
            seed=self.script.seed,
            sim_duration=self.script.duration,
            ticks=self.state.tick,
            wall_seconds=wall_seconds,
            store=self.store,
            broker=self.broker,
        )
        if self.log_dir is not None:
            write_report_json(report, self.log_dir / "report.json")
            engine_doc = {
                "rules": {
                    k: (dict(v) if isinstance(v, dict) else v)
                    for k, v in vars(self.config.rules).items()
                },
                "restricted_zones": sorted(self.engine.restricted_zones),
                "sensor_rooms": self.engine.sensor_rooms,
                "end_time": self.script.duration,
            }
            (self.log_dir / "engine.json").write_text(json.dumps(engine_doc, indent=2, sort_keys=True))
            (self.log_dir / "engine-state.json").write_text(
                json.dumps(self.engine.state_snapshot(), indent=2, sort_keys=True)
            )
        return report


def run(config: SystemConfig, log_dir: str | Path | None = None) -> RunReport:
    """Run a configured scenario to completion and return its report."""
    runtime = Runtime(config, log_dir=log_dir)
    try:
        return runtime.run_to_completion()
    finally:
        runtime.shutdown()
