"""Alarm manager: fans sensor state-change notifications out to clients.

In-process listeners (the deterministic gateway path) receive notifications
synchronously; remote clients connect to the WebSocket endpoint
/notifications and receive a full current-state snapshot burst (one message
per sensor, flagged snapshot=true) followed by live changes, each serialized
as one JSON object.
"""

from __future__ import annotations

import asyncio
import json
import threading
from typing import Callable, Iterable

from websockets.asyncio.server import ServerConnection, serve

from sentrysim.vdevices.sensors import StateChangeNotification

NOTIFICATIONS_PATH = "/notifications"

Listener = Callable[[StateChangeNotification], None]


class AlarmManagerHub:
    """Synchronous fanout used inside the orchestrator's tick loop."""

    def __init__(self) -> None:
        self._listeners: list[Listener] = []
        self._server: "AlarmManagerServer | None" = None

    def subscribe(self, listener: Listener, snapshot: Iterable[StateChangeNotification] = ()) -> None:
        for note in snapshot:
            listener(note)
        self._listeners.append(listener)

    def attach_server(self, server: "AlarmManagerServer") -> None:
        self._server = server

    def dispatch(self, notifications: list[StateChangeNotification]) -> None:
        for note in notifications:
            for listener in self._listeners:
                listener(note)
        if self._server is not None and notifications:
            self._server.broadcast(notifications)


class AlarmManagerServer:
    """WebSocket server for remote device drivers."""

    def __init__(
        self,
        snapshot_fn: Callable[[], list[StateChangeNotification]],
        port: int = 0,
        host: str = "127.0.0.1",
    ):
        self._snapshot_fn = snapshot_fn
        self._host = host
        self._requested_port = port
        self.port: int | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._connections: set[ServerConnection] = set()
        self._started = threading.Event()
        self._stop: asyncio.Event | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="alarm-manager-ws", daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=10):
            raise RuntimeError("alarm manager WebSocket server failed to start")

    def _run(self) -> None:
        asyncio.run(self._main())

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        async with serve(self._handler, self._host, self._requested_port) as server:
            self.port = server.sockets[0].getsockname()[1]
            self._started.set()
            await self._stop.wait()

    async def _handler(self, conn: ServerConnection) -> None:
        if conn.request is None or conn.request.path != NOTIFICATIONS_PATH:
            await conn.close(code=1008, reason="unknown path")
            return
        for note in self._snapshot_fn():
            await conn.send(json.dumps(note.to_doc()))
        self._connections.add(conn)
        try:
            async for _ in conn:
                pass  # clients do not speak
        finally:
            self._connections.discard(conn)

    async def _broadcast(self, messages: list[str]) -> None:
        for conn in list(self._connections):
            try:
                for message in messages:
                    await conn.send(message)
            except Exception:
                self._connections.discard(conn)

    def broadcast(self, notifications: list[StateChangeNotification]) -> None:
        """Queue notifications to every connected client, preserving order."""
        if self._loop is None or not notifications:
            return
        messages = [json.dumps(n.to_doc()) for n in notifications]
        asyncio.run_coroutine_threadsafe(self._broadcast(messages), self._loop)

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)
        if self._thread is not None:
            self._thread.join(timeout=5)
