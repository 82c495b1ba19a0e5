"""Alarm service: materializes the alarms topic into an operator-facing store."""

from __future__ import annotations

import threading
import time
from typing import Callable

from sentrysim.bus import Broker, TOPIC_ALARMS
from sentrysim.rules import (
    ALARM_OPEN,
    Alarm,
    EvidenceRef,
    IllegalAlarmTransition,
)


class UnknownAlarmError(KeyError):
    pass


class AlarmStore:
    """Consumes alarm records, applies updates, and serves operator queries.

    Raise-time ordering is stable under pagination: alarms sort by
    (sim_time, alarm_id).
    """

    def __init__(self, broker: Broker, group: str = "alarm-service"):
        self.broker = broker
        self._consumer = broker.subscribe(TOPIC_ALARMS, group)
        self._alarms: dict[str, Alarm] = {}
        self._lock = threading.Lock()
        self._listeners: list[Callable[[dict], None]] = []

    def add_listener(self, listener: Callable[[dict], None]) -> None:
        self._listeners.append(listener)

    def _notify(self, payload: dict) -> None:
        for listener in self._listeners:
            listener(payload)

    def sync(self) -> int:
        """Poll the alarms topic and apply every new record. Returns the
        number of records applied."""
        applied = 0
        while True:
            batch = self._consumer.poll(max_records=256)
            if not batch:
                break
            for record in batch:
                self._apply(dict(record.payload))
                applied += 1
            self._consumer.commit()
        return applied

    def _apply(self, payload: dict) -> None:
        kind = payload.get("type")
        with self._lock:
            if kind == "alarm":
                evidence = tuple(
                    EvidenceRef(e["topic"], e["offset"], e["sim_time"])
                    for e in payload.get("evidence", [])
                )
                alarm = Alarm(
                    alarm_id=payload["alarm_id"],
                    alarm_type=payload["alarm_type"],
                    severity=int(payload.get("severity", 3)),
                    sim_time=float(payload["sim_time"]),
                    evidence=evidence,
                    camera_id=payload.get("camera_id"),
                    room_id=payload.get("room_id"),
                    source=payload.get("source"),
                    confidence=payload.get("confidence"),
                )
                self._alarms[alarm.alarm_id] = alarm
            elif kind == "alarm-update":
                alarm = self._alarms.get(payload.get("alarm_id", ""))
                if alarm is None:
                    return
                if payload.get("source"):
                    alarm.source = payload["source"]
                if payload.get("confidence") is not None:
                    alarm.confidence = payload["confidence"]
                if payload.get("evidence_add"):
                    alarm.evidence = alarm.evidence + tuple(
                        EvidenceRef(e["topic"], e["offset"], e["sim_time"])
                        for e in payload["evidence_add"]
                    )
                if payload.get("state"):
                    alarm.state = payload["state"]
                    alarm.operator = payload.get("operator")
            else:
                return
        self._notify(payload)

    def get(self, alarm_id: str) -> Alarm:
        with self._lock:
            alarm = self._alarms.get(alarm_id)
        if alarm is None:
            raise UnknownAlarmError(alarm_id)
        return alarm

    def alarm_command(self, alarm_id: str, verb: str, operator: str) -> Alarm:
        """Acknowledge or reject an open alarm; publishes the transition."""
        alarm = self.get(alarm_id)
        with self._lock:
            alarm.transition(verb, operator)  # raises IllegalAlarmTransition
            payload = {
                "type": "alarm-update",
                "alarm_id": alarm_id,
                "state": alarm.state,
                "operator": operator,
                "sim_time": alarm.sim_time,
                "wall_time": time.time(),
            }
        self.broker.publish(TOPIC_ALARMS, key=alarm_id, payload=payload, sim_time=alarm.sim_time)
        self._notify(payload)
        return alarm

    def query_alarms(
        self,
        state: str | None = None,
        alarm_type: str | None = None,
        since: float | None = None,
        until: float | None = None,
        limit: int | None = None,
        offset: int = 0,
    ) -> list[Alarm]:
        with self._lock:
            alarms = sorted(self._alarms.values(), key=lambda a: (a.sim_time, a.alarm_id))
        if state is not None:
            alarms = [a for a in alarms if a.state == state]
        if alarm_type is not None:
            alarms = [a for a in alarms if a.alarm_type == alarm_type]
        if since is not None:
            alarms = [a for a in alarms if a.sim_time >= since]
        if until is not None:
            alarms = [a for a in alarms if a.sim_time <= until]
        if offset:
            alarms = alarms[offset:]
        if limit is not None:
            alarms = alarms[:limit]
        return alarms

    def all_alarms(self) -> list[Alarm]:
        return self.query_alarms()

    def open_alarms(self) -> list[Alarm]:
        return self.query_alarms(state=ALARM_OPEN)


def alarm_to_doc(alarm: Alarm) -> dict:
    return {
        "alarm_id": alarm.alarm_id,
        "alarm_type": alarm.alarm_type,
        "severity": alarm.severity,
        "sim_time": alarm.sim_time,
        "camera_id": alarm.camera_id,
        "room_id": alarm.room_id,
        "source": alarm.source,
        "confidence": alarm.confidence,
        "state": alarm.state,
        "operator": alarm.operator,
        "evidence": [ref.to_doc() for ref in alarm.evidence],
        "latency": alarm.sim_time - alarm.earliest_evidence_time(),
    }


__all__ = [
    "AlarmStore",
    "IllegalAlarmTransition",
    "UnknownAlarmError",
    "alarm_to_doc",
]
