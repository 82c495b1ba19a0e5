"""Replay persisted event logs through a fresh rule engine.

Replaying the topic dumps of a prior run (everything except the alarms topic)
must reproduce the original alarm log exactly: same payloads in the same
order, with alarm ids already normalized as sequence numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from sentrysim.bus import TOPIC_ALARMS, load_topic_dumps
from sentrysim.rules import RuleConfig, RuleEngine


class ReplayError(ValueError):
    pass


@dataclass(frozen=True)
class ReplayResult:
    original: list[dict]
    replayed: list[dict]

    @property
    def matches(self) -> bool:
        return self.original == self.replayed


def _load_engine_settings(log_dir: Path) -> tuple[RuleConfig, frozenset[str], dict, float]:
    engine_path = log_dir / "engine.json"
    if not engine_path.exists():
        raise ReplayError(f"missing engine settings: {engine_path}")
    doc = json.loads(engine_path.read_text())
    return (
        RuleConfig(**doc["rules"]),
        frozenset(doc.get("restricted_zones", [])),
        dict(doc.get("sensor_rooms", {})),
        float(doc.get("end_time", 0.0)),
    )


def load_alarm_log(log_dir: str | Path) -> list[dict]:
    path = Path(log_dir) / "topics" / f"{TOPIC_ALARMS}.jsonl"
    if not path.exists():
        return []
    records = load_topic_dumps(path.parent)
    return [dict(r.payload) for r in records if r.topic == TOPIC_ALARMS]


def replay(log_dir: str | Path) -> ReplayResult:
    """Feed a run's persisted events back through the rule engine."""
    log_dir = Path(log_dir)
    topics_dir = log_dir / "topics"
    if not topics_dir.is_dir():
        raise ReplayError(f"no topic dumps under {log_dir}")
    rules, restricted, sensor_rooms, end_time = _load_engine_settings(log_dir)

    records = load_topic_dumps(topics_dir, exclude=(TOPIC_ALARMS,))
    replayed: list[dict] = []
    engine = RuleEngine(
        rules,
        publish=lambda payload, sim_time: (replayed.append(payload), len(replayed) - 1)[1],
        restricted_zones=restricted,
        sensor_rooms=sensor_rooms,
    )
    for record in records:
        engine.process(record)
    engine.flush(end_time)

    original = load_alarm_log(log_dir)
    # Operator transitions (ack/reject) are interactive, not rule output.
    original = [p for p in original if not (p.get("type") == "alarm-update" and p.get("state"))]
    return ReplayResult(original=original, replayed=replayed)
