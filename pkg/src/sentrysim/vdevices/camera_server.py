"""Virtual PTZ camera device and its per-camera HTTP server.

The device renders on demand only: frames are produced when an attached
client asks for a snapshot or a stream part, never as a side effect of the
simulation advancing. A camera with no attached clients keeps a render
counter of zero for the whole run.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from sentrysim.geometry import CameraView, PtzState, apply_ptz
from sentrysim.vdevices.render import Frame, render_frame, visible_agent_boxes
from sentrysim.world.floorplan import FloorPlan
from sentrysim.world.state import WorldState

STREAM_BOUNDARY = "sentryframe"


class CameraDevice:
    """One virtual camera: current view, latest world snapshot, render cache."""

    def __init__(self, view: CameraView, plan: FloorPlan, ground_truth_enabled: bool = False):
        self.plan = plan
        self.ground_truth_enabled = ground_truth_enabled
        self._view = view
        self._snapshot: WorldState | None = None
        self._cache_key: tuple[int, CameraView] | None = None
        self._cache_frame: Frame | None = None
        self.render_count = 0
        self._clients = 0
        self._lock = threading.Lock()
        self._tick_changed = threading.Condition(self._lock)

    @property
    def camera_id(self) -> str:
        return self._view.camera_id

    @property
    def view(self) -> CameraView:
        with self._lock:
            return self._view

    @property
    def client_count(self) -> int:
        with self._lock:
            return self._clients

    def publish_tick(self, snapshot: WorldState) -> None:
        with self._tick_changed:
            self._snapshot = snapshot
            self._tick_changed.notify_all()

    def attach(self) -> None:
        with self._lock:
            self._clients += 1

    def detach(self) -> None:
        with self._lock:
            self._clients = max(0, self._clients - 1)

    def apply_ptz_command(self, pan_delta: float, tilt_delta: float, zoom_absolute: float) -> PtzState:
        with self._lock:
            ptz = apply_ptz(self._view.ptz, pan_delta, tilt_delta, zoom_absolute)
            self._view = self._view.with_ptz(ptz)
            return ptz

    def current_frame(self) -> Frame:
        """Render the latest snapshot; cached per (tick, view). Requires an
        attached client (callers attach around the fetch)."""
        with self._lock:
            snapshot = self._snapshot
            if snapshot is None:
                raise RuntimeError(f"camera {self.camera_id}: no snapshot published yet")
            key = (snapshot.tick, self._view)
            if self._cache_key == key and self._cache_frame is not None:
                return self._cache_frame
            frame = render_frame(self._view, snapshot, self.plan)
            self.render_count += 1
            self._cache_key = key
            self._cache_frame = frame
            return frame

    def wait_for_new_tick(self, last_tick: int | None, timeout: float = 0.5) -> int | None:
        """Block until a snapshot newer than last_tick arrives; None on timeout."""
        with self._tick_changed:
            if self._snapshot is not None and (last_tick is None or self._snapshot.tick != last_tick):
                return self._snapshot.tick
            self._tick_changed.wait(timeout)
            if self._snapshot is not None and (last_tick is None or self._snapshot.tick != last_tick):
                return self._snapshot.tick
            return None

    def ground_truth_record(self, tick: int) -> dict | None:
        """Ground-truth boxes for the given tick; requires test mode and that
        the tick is the currently published one."""
        with self._lock:
            if self._snapshot is None or self._snapshot.tick != tick:
                return None
            boxes = visible_agent_boxes(self._view, self._snapshot, self.plan)
            return {
                "camera_id": self.camera_id,
                "tick": tick,
                "sim_time": self._snapshot.clock,
                "objects": [
                    {"agent_id": agent_id, "class": agent_class, "bbox": list(box.as_tuple())}
                    for agent_id, agent_class, box in boxes
                ],
            }


class _CameraRequestHandler(BaseHTTPRequestHandler):
    server: "CameraHttpServer"

    def log_message(self, format: str, *args) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        device = self.server.device
        url = urlparse(self.path)
        query = parse_qs(url.query)

        if url.path == "/snapshot":
            device.attach()
            try:
                frame = device.current_frame()
            except RuntimeError as exc:
                self._send_json(503, {"error": str(exc)})
                return
            finally:
                device.detach()
            data = frame.to_png_bytes()
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("X-Sim-Tick", str(frame.tick))
            self.send_header("X-Sim-Time", repr(frame.sim_time))
            self.end_headers()
            self.wfile.write(data)
            return

        if url.path == "/stream":
            device.attach()
            try:
                self.send_response(200)
                self.send_header(
                    "Content-Type", f"multipart/x-mixed-replace; boundary={STREAM_BOUNDARY}"
                )
                self.end_headers()
                last_tick: int | None = None
                while not self.server.stopping.is_set():
                    tick = device.wait_for_new_tick(last_tick)
                    if tick is None:
                        continue
                    last_tick = tick
                    data = device.current_frame().to_png_bytes()
                    part = (
                        f"--{STREAM_BOUNDARY}\r\n"
                        f"Content-Type: image/png\r\n"
                        f"Content-Length: {len(data)}\r\n\r\n"
                    ).encode()
                    self.wfile.write(part + data + b"\r\n")
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                device.detach()
            return

        if url.path == "/ptz":
            try:
                pan = float(query.get("pan", ["0"])[0])
                tilt = float(query.get("tilt", ["0"])[0])
                zoom = float(query.get("zoom", [str(device.view.ptz.zoom)])[0])
            except ValueError:
                self._send_json(400, {"error": "pan/tilt/zoom must be numbers"})
                return
            try:
                ptz = device.apply_ptz_command(pan, tilt, zoom)
            except ValueError as exc:
                self._send_json(400, {"error": str(exc)})
                return
            self._send_json(200, {"pan": ptz.pan, "tilt": ptz.tilt, "zoom": ptz.zoom})
            return

        if url.path == "/ground_truth":
            if not device.ground_truth_enabled:
                self._send_json(403, {"error": "ground truth disabled"})
                return
            try:
                tick = int(query.get("tick", [""])[0])
            except ValueError:
                self._send_json(400, {"error": "tick must be an integer"})
                return
            record = device.ground_truth_record(tick)
            if record is None:
                self._send_json(404, {"error": f"tick {tick} not available"})
                return
            self._send_json(200, record)
            return

        self._send_json(404, {"error": f"unknown path {url.path}"})


class CameraHttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, device: CameraDevice, port: int = 0, host: str = "127.0.0.1"):
        super().__init__((host, port), _CameraRequestHandler)
        self.device = device
        self.stopping = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self.serve_forever, name=f"camera-http-{self.device.camera_id}", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self.stopping.set()
        self.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.server_close()
