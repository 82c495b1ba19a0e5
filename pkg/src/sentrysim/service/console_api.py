"""Operator console API: alarm queries/commands, devices, actions, live push."""

from __future__ import annotations

import asyncio
import threading
import time
from pathlib import Path
from typing import TYPE_CHECKING

import uvicorn
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from sentrysim.service.alarms import UnknownAlarmError, alarm_to_doc
from sentrysim.rules import IllegalAlarmTransition
from sentrysim.world.sim import BadActionValueError, UnknownActionError, UnknownActorError

if TYPE_CHECKING:
    from sentrysim.service.orchestrator import Runtime


class OperatorCommand(BaseModel):
    operator: str = "operator"


class ActionRequest(BaseModel):
    id: str
    name: str
    value: str


class _PushRegistry:
    """Fans alarm payloads from the orchestrator thread into WS queues."""

    def __init__(self) -> None:
        self._subscribers: list[tuple[asyncio.AbstractEventLoop, asyncio.Queue]] = []
        self._lock = threading.Lock()

    def subscribe(self, loop: asyncio.AbstractEventLoop, queue: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers.append((loop, queue))

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        with self._lock:
            self._subscribers = [(l, q) for l, q in self._subscribers if q is not queue]

    def push(self, payload: dict) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
        for loop, queue in subscribers:
            try:
                loop.call_soon_threadsafe(queue.put_nowait, payload)
            except RuntimeError:
                pass  # loop already closed


def build_app(runtime: "Runtime", static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="sentrysim console", version="0.1.0")
    push = _PushRegistry()
    runtime.store.add_listener(push.push)
    # Sensor changes ride the same push channel so the console's sensor
    # panel updates live alongside alarms.
    runtime.hub.subscribe(
        lambda note: push.push({"type": "sensor-change", **note.to_doc()})
    )

    @app.get("/api/alarms")
    def get_alarms(
        state: str | None = None,
        type: str | None = None,
        since: float | None = None,
        until: float | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[dict]:
        alarms = runtime.store.query_alarms(
            state=state, alarm_type=type, since=since, until=until, limit=limit, offset=offset
        )
        return [alarm_to_doc(a) for a in alarms]

    def _command(alarm_id: str, verb: str, body: OperatorCommand) -> dict:
        try:
            alarm = runtime.store.alarm_command(alarm_id, verb, body.operator)
        except UnknownAlarmError:
            raise HTTPException(status_code=404, detail=f"unknown alarm {alarm_id}")
        except IllegalAlarmTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return alarm_to_doc(alarm)

    @app.post("/api/alarms/{alarm_id}/ack")
    def ack_alarm(alarm_id: str, body: OperatorCommand = OperatorCommand()) -> dict:
        return _command(alarm_id, "acknowledge", body)

    @app.post("/api/alarms/{alarm_id}/reject")
    def reject_alarm(alarm_id: str, body: OperatorCommand = OperatorCommand()) -> dict:
        return _command(alarm_id, "reject", body)

    @app.get("/api/devices")
    def get_devices() -> dict:
        cameras = []
        for entry in runtime.config.cameras:
            server = runtime.camera_servers.get(entry.camera_id)
            port = server.port if server is not None else entry.port
            cameras.append(
                {
                    "camera_id": entry.camera_id,
                    "room": entry.room_id,
                    "port": port,
                    "stream_url": f"http://127.0.0.1:{port}/stream",
                    "snapshot_url": f"http://127.0.0.1:{port}/snapshot",
                    "fps": entry.fps,
                }
            )
        readings = {r.sensor_id: r for r in runtime.sensor_bank.current_readings()}
        sensors = []
        for spec in runtime.config.sensors:
            reading = readings.get(spec.sensor_id)
            sensors.append(
                {
                    "sensor_id": spec.sensor_id,
                    "kind": spec.kind,
                    "room": spec.room_id,
                    "door": spec.door_id,
                    "value": reading.value if reading else None,
                    "changed_at": runtime.sensor_bank.last_changed(spec.sensor_id),
                }
            )
        return {"cameras": cameras, "sensors": sensors}

    @app.get("/api/floorplan")
    def get_floorplan() -> dict:
        plan = runtime.plan
        return {
            "rooms": [
                {"room_id": r.room_id, "rect": [r.rect.x0, r.rect.y0, r.rect.x1, r.rect.y1]}
                for r in plan.rooms
            ],
            "doors": [
                {"door_id": d.door_id, "segment": [list(d.p1), list(d.p2)], "connects": list(d.connects)}
                for d in plan.doors
            ],
            "zones": [
                {
                    "zone_id": z.zone_id,
                    "room": z.room_id,
                    "rect": [z.rect.x0, z.rect.y0, z.rect.x1, z.rect.y1],
                    "purpose": z.purpose,
                }
                for z in plan.zones
            ],
            "cameras": [
                {
                    "camera_id": c.camera_id,
                    "position": [c.position.x, c.position.y, c.position.z],
                    "room": c.room_id,
                }
                for c in runtime.config.cameras
            ],
        }

    @app.get("/api/scenario")
    def get_scenario() -> dict:
        return {
            "name": runtime.script.name,
            "seed": runtime.script.seed,
            "dt": runtime.script.dt,
            "duration": runtime.script.duration,
            "tick": runtime.state.tick,
            "fire_emitters": [e.actor_id for e in runtime.script.fire_emitters],
            "doors": [d.door_id for d in runtime.plan.doors],
        }

    @app.post("/api/actions")
    def post_action(body: ActionRequest) -> dict:
        try:
            scheduled_tick = runtime.schedule_action(body.id, body.name, body.value)
        except UnknownActorError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (UnknownActionError, BadActionValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"actor": body.id, "action": f"{body.name}:{body.value}", "scheduled_tick": scheduled_tick}

    @app.websocket("/api/alarm-stream")
    async def alarm_stream(ws: WebSocket) -> None:
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()
        push.subscribe(asyncio.get_running_loop(), queue)
        try:
            for alarm in runtime.store.all_alarms():
                await ws.send_json({"type": "alarm-snapshot", **alarm_to_doc(alarm)})
            while True:
                payload = await queue.get()
                await ws.send_json(payload)
        except WebSocketDisconnect:
            pass
        finally:
            push.unsubscribe(queue)

    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = Path("frontend/dist")
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app


class ConsoleServer:
    """Uvicorn-in-a-thread wrapper for the console app."""

    def __init__(self, runtime: "Runtime", port: int, host: str = "127.0.0.1"):
        self.app = build_app(runtime)
        self._config = uvicorn.Config(
            self.app, host=host, port=port, log_level="warning", loop="asyncio"
        )
        self._server = uvicorn.Server(self._config)
        self._thread: threading.Thread | None = None
        self.port = port

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.run, name="console-api", daemon=True)
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("console API failed to start")
            if not self._thread.is_alive():
                raise RuntimeError("console API thread exited during startup")
            time.sleep(0.01)
        for server in self._server.servers:
            for socket in server.sockets:
                self.port = socket.getsockname()[1]

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5)
