"""In-process publish/subscribe broker with totally ordered topics.

Each topic is a single append-only log; offsets are contiguous from 0.
Consumer groups track committed offsets, so re-subscribing after a crash
replays from the last commit (at-least-once delivery). Publishing may block
when a topic's backlog against its slowest consumer exceeds the configured
capacity; records are never dropped.
"""

from __future__ import annotations

import fnmatch
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

TOPIC_ALARMS = "alarms"
TOPIC_DOOR_EVENTS = "events.door"
TOPIC_SENSOR_EVENTS = "events.sensor"
TOPIC_ACCESS_EVENTS = "events.access"


def frames_topic(camera_id: str) -> str:
    return f"frames.{camera_id}"


def detections_topic(camera_id: str) -> str:
    return f"detections.{camera_id}"


# Payloads are JSON-serializable mappings with a "type" tag; each conventional
# topic accepts a fixed set of payload types.
TOPIC_SCHEMAS: tuple[tuple[str, frozenset[str]], ...] = (
    ("frames.*", frozenset({"frame-metadata"})),
    ("detections.*", frozenset({"detection-set"})),
    (TOPIC_DOOR_EVENTS, frozenset({"door-transition"})),
    (TOPIC_SENSOR_EVENTS, frozenset({"sensor-change"})),
    (TOPIC_ACCESS_EVENTS, frozenset({"access-granted"})),
    (TOPIC_ALARMS, frozenset({"alarm", "alarm-update"})),
)


class SchemaError(ValueError):
    """Payload type does not match the topic's declared schema."""


class CommitError(ValueError):
    """Commit offset ahead of the consumer's position."""


class DumpError(ValueError):
    """A persisted topic dump line cannot be parsed."""


def allowed_payload_types(topic: str) -> frozenset[str] | None:
    for pattern, types in TOPIC_SCHEMAS:
        if fnmatch.fnmatchcase(topic, pattern):
            return types
    return None


@dataclass(frozen=True)
class EventRecord:
    topic: str
    offset: int
    key: str
    sim_time: float
    wall_seq: int
    payload: Mapping[str, object]

    def to_json(self) -> str:
        doc = {
            "topic": self.topic,
            "offset": self.offset,
            "key": self.key,
            "sim_time": self.sim_time,
            "wall_seq": self.wall_seq,
            "payload": self.payload,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "EventRecord":
        doc = json.loads(line)
        return EventRecord(
            topic=doc["topic"],
            offset=doc["offset"],
            key=doc["key"],
            sim_time=doc["sim_time"],
            wall_seq=doc["wall_seq"],
            payload=doc["payload"],
        )


class _Topic:
    __slots__ = ("name", "records", "consumers")

    def __init__(self, name: str):
        self.name = name
        self.records: list[EventRecord] = []
        self.consumers: list["Consumer"] = []


@dataclass
class Consumer:
    """A group member's cursor over one topic. Not safe for concurrent use
    by multiple threads."""

    broker: "Broker"
    topic: str
    group: str
    position: int = 0

    def poll(self, max_records: int = 100, timeout: float = 0.0) -> list[EventRecord]:
        return self.broker.poll(self, max_records=max_records, timeout=timeout)

    def commit(self, offset: int | None = None) -> None:
        self.broker.commit(self, self.position if offset is None else offset)


class Broker:
    def __init__(self, capacity: int | None = None):
        self._capacity = capacity
        self._topics: dict[str, _Topic] = {}
        self._committed: dict[tuple[str, str], int] = {}
        self._wall_seq = 0
        self._lock = threading.Lock()
        self._appended = threading.Condition(self._lock)
        self._consumed = threading.Condition(self._lock)
        self._taps: list[Callable[[EventRecord], None]] = []

    def add_tap(self, tap: Callable[[EventRecord], None]) -> None:
        """Register a callback invoked (under the broker lock) per publish."""
        with self._lock:
            self._taps.append(tap)

    def _topic(self, name: str) -> _Topic:
        topic = self._topics.get(name)
        if topic is None:
            topic = _Topic(name)
            self._topics[name] = topic
        return topic

    def _backlog(self, topic: _Topic) -> int:
        if not topic.consumers:
            return len(topic.records)
        return len(topic.records) - min(c.position for c in topic.consumers)

    def publish(self, topic_name: str, key: str, payload: Mapping[str, object], sim_time: float = 0.0) -> int:
        allowed = allowed_payload_types(topic_name)
        if allowed is not None and payload.get("type") not in allowed:
            raise SchemaError(
                f"payload type {payload.get('type')!r} not allowed on topic {topic_name!r}"
            )
        with self._lock:
            topic = self._topic(topic_name)
            if self._capacity is not None:
                while self._backlog(topic) >= self._capacity:
                    self._consumed.wait()
            offset = len(topic.records)
            record = EventRecord(
                topic=topic_name,
                offset=offset,
                key=key,
                sim_time=sim_time,
                wall_seq=self._wall_seq,
                payload=payload,
            )
            self._wall_seq += 1
            topic.records.append(record)
            for tap in self._taps:
                tap(record)
            self._appended.notify_all()
            return offset

    def subscribe(self, topic_name: str, group: str) -> Consumer:
        with self._lock:
            topic = self._topic(topic_name)
            start = self._committed.get((group, topic_name), 0)
            consumer = Consumer(broker=self, topic=topic_name, group=group, position=start)
            topic.consumers.append(consumer)
            return consumer

    def unsubscribe(self, consumer: Consumer) -> None:
        with self._lock:
            topic = self._topics.get(consumer.topic)
            if topic and consumer in topic.consumers:
                topic.consumers.remove(consumer)
                self._consumed.notify_all()

    def poll(self, consumer: Consumer, max_records: int = 100, timeout: float = 0.0) -> list[EventRecord]:
        deadline = time.monotonic() + timeout
        with self._lock:
            topic = self._topic(consumer.topic)
            while len(topic.records) <= consumer.position:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self._appended.wait(remaining)
            start = consumer.position
            end = min(len(topic.records), start + max_records)
            batch = topic.records[start:end]
            consumer.position = end
            self._consumed.notify_all()
            return batch

    def commit(self, consumer: Consumer, offset: int) -> None:
        with self._lock:
            if offset > consumer.position:
                raise CommitError(
                    f"commit offset {offset} beyond position {consumer.position} on {consumer.topic}"
                )
            key = (consumer.group, consumer.topic)
            self._committed[key] = max(self._committed.get(key, 0), offset)

    def committed_offset(self, topic: str, group: str) -> int:
        with self._lock:
            return self._committed.get((group, topic), 0)

    def topic_length(self, topic_name: str) -> int:
        with self._lock:
            topic = self._topics.get(topic_name)
            return len(topic.records) if topic else 0

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def records_of(self, topic_name: str) -> list[EventRecord]:
        with self._lock:
            topic = self._topics.get(topic_name)
            return list(topic.records) if topic else []

    def record_exists(self, topic_name: str, offset: int) -> bool:
        with self._lock:
            topic = self._topics.get(topic_name)
            return topic is not None and 0 <= offset < len(topic.records)

    def peek(self, topic_name: str, position: int) -> EventRecord | None:
        with self._lock:
            topic = self._topics.get(topic_name)
            if topic is None or position >= len(topic.records):
                return None
            return topic.records[position]


class MultiConsumer:
    """Merged cursor over several topics in global publish (wall_seq) order.

    The merge is exact over records already published; it lets a replayed
    dump stream reproduce live processing order record for record.
    """

    def __init__(self, broker: Broker, topics: Iterable[str], group: str):
        self.broker = broker
        self.consumers = {t: broker.subscribe(t, group) for t in topics}

    def poll(self, max_records: int = 100, timeout: float = 0.0) -> list[EventRecord]:
        batch: list[EventRecord] = []
        deadline = time.monotonic() + timeout
        while len(batch) < max_records:
            head: EventRecord | None = None
            head_consumer: Consumer | None = None
            for consumer in self.consumers.values():
                candidate = self.broker.peek(consumer.topic, consumer.position)
                if candidate is not None and (head is None or candidate.wall_seq < head.wall_seq):
                    head = candidate
                    head_consumer = consumer
            if head is None or head_consumer is None:
                if batch or time.monotonic() >= deadline:
                    break
                time.sleep(0.001)
                continue
            head_consumer.position += 1
            batch.append(head)
        return batch

    def commit_all(self) -> None:
        for consumer in self.consumers.values():
            consumer.commit()


class TopicDumpWriter:
    """Append-only line-per-record topic dumps for replay and regression."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._files: dict[str, object] = {}
        self._lock = threading.Lock()

    def __call__(self, record: EventRecord) -> None:
        with self._lock:
            handle = self._files.get(record.topic)
            if handle is None:
                handle = (self.directory / f"{record.topic}.jsonl").open("a")
                self._files[record.topic] = handle
            handle.write(record.to_json() + "\n")
            handle.flush()

    def close(self) -> None:
        with self._lock:
            for handle in self._files.values():
                handle.close()
            self._files.clear()


def load_topic_dumps(directory: str | Path, exclude: Iterable[str] = ()) -> list[EventRecord]:
    """Load every *.jsonl topic dump under a directory, merged by wall_seq."""
    directory = Path(directory)
    excluded = set(exclude)
    records: list[EventRecord] = []
    for path in sorted(directory.glob("*.jsonl")):
        topic_name = path.name[: -len(".jsonl")]
        if topic_name in excluded:
            continue
        with path.open() as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(EventRecord.from_json(line))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DumpError(f"{path.name}:{line_no}: corrupt record: {exc}") from exc
    records.sort(key=lambda r: r.wall_seq)
    return records
