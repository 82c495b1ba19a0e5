"""REST action handler: GET /action?id=&name=&value= schedules world actions.

Requests are validated against the current world state immediately (so the
client gets 404/400 synchronously) and applied by the orchestrator at the
next tick boundary.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable
from urllib.parse import parse_qs, urlparse

from sentrysim.world.sim import BadActionValueError, UnknownActionError, UnknownActorError

DEFAULT_CONTROL_PORT = 20001


@dataclass(frozen=True)
class PendingAction:
    actor_id: str
    name: str
    value: str


class ControlQueue:
    """Thread-safe queue of actions drained at tick boundaries."""

    def __init__(self) -> None:
        self._pending: list[PendingAction] = []
        self._lock = threading.Lock()

    def push(self, action: PendingAction) -> None:
        with self._lock:
            self._pending.append(action)

    def drain(self) -> list[PendingAction]:
        with self._lock:
            drained = self._pending
            self._pending = []
            return drained


class _ControlRequestHandler(BaseHTTPRequestHandler):
    server: "ControlHttpServer"

    def log_message(self, format: str, *args) -> None:
        pass

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path != "/action":
            self._send_json(404, {"error": f"unknown path {url.path}"})
            return
        query = parse_qs(url.query)
        missing = [k for k in ("id", "name", "value") if k not in query]
        if missing:
            self._send_json(400, {"error": f"missing query parameters: {', '.join(missing)}"})
            return
        actor_id = query["id"][0]
        name = query["name"][0]
        value = query["value"][0]
        try:
            scheduled_tick = self.server.schedule(actor_id, name, value)
        except UnknownActorError as exc:
            self._send_json(404, {"error": str(exc)})
            return
        except (UnknownActionError, BadActionValueError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(
            200, {"actor": actor_id, "action": f"{name}:{value}", "scheduled_tick": scheduled_tick}
        )


class ControlHttpServer(ThreadingHTTPServer):
    """HTTP front for the control queue.

    `schedule` validates via the supplied callback (raising the world action
    errors) and returns the tick at which the action will apply.
    """

    daemon_threads = True

    def __init__(
        self,
        schedule: Callable[[str, str, str], int],
        port: int = DEFAULT_CONTROL_PORT,
        host: str = "127.0.0.1",
    ):
        super().__init__((host, port), _ControlRequestHandler)
        self.schedule = schedule
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, name="control-http", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.server_close()
