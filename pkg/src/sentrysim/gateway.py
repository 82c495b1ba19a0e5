"""Device gateway: pulls camera frames, consumes sensor pushes, forwards PTZ.

Workers never block the simulator; they fetch the latest snapshot on their
own cadence. In deterministic (direct) mode each worker is driven
synchronously by the orchestrator's tick loop; in network mode the same
workers run against HTTP/WebSocket clients.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Protocol

import httpx
from websockets.asyncio.client import connect as ws_connect

from sentrysim.bus import (
    Broker,
    TOPIC_ACCESS_EVENTS,
    TOPIC_SENSOR_EVENTS,
    frames_topic,
)
from sentrysim.vdevices.camera_server import CameraDevice
from sentrysim.vdevices.render import Frame
from sentrysim.vdevices.sensors import ACCESS_CHANNEL_SUFFIX, StateChangeNotification

logger = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    pass


@dataclass(frozen=True)
class BackoffPolicy:
    base: float = 0.5
    factor: float = 2.0
    cap: float = 30.0

    def delay(self, attempt: int) -> float:
        return min(self.cap, self.base * self.factor**attempt)


class CameraClient(Protocol):
    def attach(self) -> None: ...

    def detach(self) -> None: ...

    def fetch(self) -> Frame: ...

    def ptz(self, pan: float, tilt: float, zoom: float) -> dict: ...


class DirectCameraClient:
    """In-process client against a CameraDevice; the deterministic path."""

    def __init__(self, device: CameraDevice):
        self.device = device
        self._attached = False

    def attach(self) -> None:
        if not self._attached:
            self.device.attach()
            self._attached = True

    def detach(self) -> None:
        if self._attached:
            self.device.detach()
            self._attached = False

    def fetch(self) -> Frame:
        if not self._attached:
            raise GatewayError("camera client not attached")
        return self.device.current_frame()

    def ptz(self, pan: float, tilt: float, zoom: float) -> dict:
        state = self.device.apply_ptz_command(pan, tilt, zoom)
        return {"pan": state.pan, "tilt": state.tilt, "zoom": state.zoom}


class HttpCameraClient:
    """Polls a camera's HTTP server; frames decode from PNG snapshots."""

    def __init__(self, camera_id: str, base_url: str, timeout: float = 5.0):
        self.camera_id = camera_id
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout)

    def attach(self) -> None:  # attachment is per-request over HTTP
        pass

    def detach(self) -> None:
        self._client.close()

    def fetch(self) -> Frame:
        response = self._client.get(f"{self.base_url}/snapshot")
        response.raise_for_status()
        tick = int(response.headers.get("X-Sim-Tick", "0"))
        sim_time = float(response.headers.get("X-Sim-Time", "0"))
        return Frame.from_png_bytes(self.camera_id, tick, sim_time, response.content)

    def ptz(self, pan: float, tilt: float, zoom: float) -> dict:
        response = self._client.get(
            f"{self.base_url}/ptz", params={"pan": pan, "tilt": tilt, "zoom": zoom}
        )
        response.raise_for_status()
        return response.json()


DEVICE_LOST_FAILURES = 3


class CameraIngest:
    """Fetches frames at the configured rate and publishes their metadata.

    Fetch failures follow the backoff policy; the third consecutive failure
    publishes a device-lost event (once per outage).
    """

    def __init__(
        self,
        camera_id: str,
        client: CameraClient,
        fps: float,
        tick_rate_hz: float,
        broker: Broker,
        frame_sink: Callable[[Frame], None] | None = None,
        policy: BackoffPolicy = BackoffPolicy(),
    ):
        if not (0.0 < fps <= 60.0):
            raise GatewayError(f"fps out of range: {fps}")
        self.camera_id = camera_id
        self.client = client
        self.fps = fps
        self.interval_ticks = max(1, round(tick_rate_hz / fps))
        self.broker = broker
        self.frame_sink = frame_sink
        self.policy = policy
        self.failures = 0
        self.attempt = 0
        self.lost_published = False
        self._next_attempt_at = 0.0
        self.topic = frames_topic(camera_id)

    def start(self) -> None:
        self.client.attach()

    def stop(self) -> None:
        self.client.detach()

    def on_tick(self, tick: int, now: float) -> Frame | None:
        if tick % self.interval_ticks != 0:
            return None
        return self.poll_once(now)

    def poll_once(self, now: float) -> Frame | None:
        if now < self._next_attempt_at:
            return None
        try:
            frame = self.client.fetch()
        except Exception:
            self.failures += 1
            self._next_attempt_at = now + self.policy.delay(self.attempt)
            self.attempt += 1
            if self.failures == DEVICE_LOST_FAILURES and not self.lost_published:
                self.lost_published = True
                self.broker.publish(
                    TOPIC_SENSOR_EVENTS,
                    key=self.camera_id,
                    payload={
                        "type": "sensor-change",
                        "sensor_id": self.camera_id,
                        "kind": "device",
                        "old_value": "up",
                        "new_value": "lost",
                        "snapshot": False,
                    },
                    sim_time=now,
                )
            return None
        if self.lost_published:
            self.broker.publish(
                TOPIC_SENSOR_EVENTS,
                key=self.camera_id,
                payload={
                    "type": "sensor-change",
                    "sensor_id": self.camera_id,
                    "kind": "device",
                    "old_value": "lost",
                    "new_value": "up",
                    "snapshot": False,
                },
                sim_time=frame.sim_time,
            )
        self.failures = 0
        self.attempt = 0
        self.lost_published = False
        self._next_attempt_at = 0.0
        self.broker.publish(
            self.topic,
            key=self.camera_id,
            payload={
                "type": "frame-metadata",
                "camera_id": self.camera_id,
                "tick": frame.tick,
                "sim_time": frame.sim_time,
                "byte_size": int(frame.pixels.size),
                "all_black": frame.is_all_black(),
            },
            sim_time=frame.sim_time,
        )
        if self.frame_sink is not None:
            self.frame_sink(frame)
        return frame


class SensorIngest:
    """Publishes sensor state-change notifications onto the broker.

    Door-access grant pulses go to events.access in addition to
    events.sensor. Malformed messages are counted, logged, and skipped.
    """

    def __init__(self, broker: Broker):
        self.broker = broker
        self.malformed = 0

    def on_notification(self, note: StateChangeNotification) -> None:
        doc = note.to_doc()
        payload = {"type": "sensor-change", **doc}
        if note.kind == "door_access" and note.sensor_id.endswith(ACCESS_CHANNEL_SUFFIX):
            payload["door_id"] = note.sensor_id[: -len(ACCESS_CHANNEL_SUFFIX)]
        elif note.kind == "door_access":
            payload["door_id"] = note.sensor_id
        self.broker.publish(TOPIC_SENSOR_EVENTS, key=note.sensor_id, payload=payload, sim_time=note.sim_time)
        if (
            note.kind == "door_access"
            and note.sensor_id.endswith(ACCESS_CHANNEL_SUFFIX)
            and not note.snapshot
        ):
            self.broker.publish(
                TOPIC_ACCESS_EVENTS,
                key=note.sensor_id,
                payload={
                    "type": "access-granted",
                    "door_id": note.sensor_id[: -len(ACCESS_CHANNEL_SUFFIX)],
                    "credential": note.new_value,
                    "sim_time": note.sim_time,
                },
                sim_time=note.sim_time,
            )

    def on_message(self, raw: str) -> None:
        try:
            doc = json.loads(raw)
            note = StateChangeNotification.from_doc(doc)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            self.malformed += 1
            logger.warning("skipping malformed sensor message: %s", exc)
            return
        self.on_notification(note)


class WebSocketSensorClient:
    """Background consumer of the alarm manager's /notifications endpoint.

    Reconnects with the gateway backoff policy; each (re)connect replays the
    server's snapshot burst, which resynchronizes state downstream.
    """

    def __init__(self, url: str, ingest: SensorIngest, policy: BackoffPolicy = BackoffPolicy()):
        self.url = url
        self.ingest = ingest
        self.policy = policy
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="sensor-ws-client", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _run(self) -> None:
        asyncio.run(self._consume())

    async def _consume(self) -> None:
        attempt = 0
        while not self._stop.is_set():
            try:
                async with ws_connect(self.url) as conn:
                    attempt = 0
                    while not self._stop.is_set():
                        try:
                            raw = await asyncio.wait_for(conn.recv(), timeout=0.25)
                        except asyncio.TimeoutError:
                            continue
                        self.ingest.on_message(raw)
            except Exception:
                if self._stop.is_set():
                    return
                await asyncio.sleep(self.policy.delay(attempt))
                attempt += 1


class PtzGateway:
    """Forwards PTZ commands to registered cameras."""

    def __init__(self) -> None:
        self._clients: dict[str, CameraClient] = {}

    def register(self, camera_id: str, client: CameraClient) -> None:
        self._clients[camera_id] = client

    def forward_ptz(self, camera_id: str, pan_delta: float, tilt_delta: float, zoom: float) -> dict:
        client = self._clients.get(camera_id)
        if client is None:
            raise GatewayError(f"unknown camera: {camera_id!r}")
        return client.ptz(pan_delta, tilt_delta, zoom)
