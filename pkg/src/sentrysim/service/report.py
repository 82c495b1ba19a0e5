"""Run reports: summary JSON, delimited exports, and rendered figures."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from sentrysim.bus import Broker
from sentrysim.rules import ALARM_TYPES
from sentrysim.service.alarms import AlarmStore, alarm_to_doc


@dataclass(frozen=True)
class RunReport:
    scenario: str
    seed: int
    sim_duration: float
    ticks: int
    wall_seconds: float
    alarm_counts: dict[str, int] = field(default_factory=dict)
    alarms: list[dict] = field(default_factory=list)
    topic_counts: dict[str, int] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "sim_duration": self.sim_duration,
            "ticks": self.ticks,
            "wall_seconds": self.wall_seconds,
            "alarm_counts": self.alarm_counts,
            "alarms": self.alarms,
            "topic_counts": self.topic_counts,
        }


def build_report(
    scenario: str,
    seed: int,
    sim_duration: float,
    ticks: int,
    wall_seconds: float,
    store: AlarmStore,
    broker: Broker,
) -> RunReport:
    alarms = [alarm_to_doc(a) for a in store.all_alarms()]
    counts: dict[str, int] = {}
    for alarm in alarms:
        counts[alarm["alarm_type"]] = counts.get(alarm["alarm_type"], 0) + 1
    topic_counts = {topic: broker.topic_length(topic) for topic in broker.topics()}
    return RunReport(
        scenario=scenario,
        seed=seed,
        sim_duration=sim_duration,
        ticks=ticks,
        wall_seconds=wall_seconds,
        alarm_counts=counts,
        alarms=alarms,
        topic_counts=topic_counts,
    )


def write_report_json(report: RunReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_doc(), indent=2, sort_keys=True))


def load_report_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


ALARM_CSV_FIELDS = [
    "alarm_id",
    "alarm_type",
    "severity",
    "sim_time",
    "latency",
    "state",
    "source",
    "confidence",
    "camera_id",
    "room_id",
]


def render_report(log_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render a persisted run into CSV tables and PNG figures.

    Returns the list of files written.
    """
    log_dir = Path(log_dir)
    report = load_report_json(log_dir / "report.json")
    out = Path(out_dir) if out_dir else log_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    alarms_csv = out / "alarms.csv"
    with alarms_csv.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=ALARM_CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for alarm in report["alarms"]:
            writer.writerow(alarm)
    written.append(alarms_csv)

    topics_csv = out / "topics.csv"
    with topics_csv.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["topic", "records"])
        for topic, count in sorted(report["topic_counts"].items()):
            writer.writerow([topic, count])
    written.append(topics_csv)

    written.append(_figure_alarm_timeline(report, out / "alarm_timeline.png"))
    written.append(_figure_topic_counts(report, out / "topic_counts.png"))
    written.append(_figure_alarm_latency(report, out / "alarm_latency.png"))
    return written


def _figure_alarm_timeline(report: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    lanes = {alarm_type: i for i, alarm_type in enumerate(ALARM_TYPES)}
    alarms = report["alarms"]
    for alarm in alarms:
        lane = lanes.get(alarm["alarm_type"], len(lanes))
        ax.scatter(alarm["sim_time"], lane, s=30 + 12 * alarm.get("severity", 3), zorder=3)
        ax.annotate(
            alarm["alarm_id"],
            (alarm["sim_time"], lane),
            textcoords="offset points",
            xytext=(4, 5),
            fontsize=7,
        )
    ax.set_yticks(list(lanes.values()))
    ax.set_yticklabels(list(lanes.keys()), fontsize=8)
    ax.set_xlim(0, max(report["sim_duration"], 1e-9))
    ax.set_xlabel("sim time [s]")
    ax.set_title(f"alarms — {report['scenario']} (seed {report['seed']})")
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _figure_topic_counts(report: dict, path: Path) -> Path:
    topics = sorted(report["topic_counts"].items())
    fig, ax = plt.subplots(figsize=(8, 0.6 + 0.4 * max(1, len(topics))))
    names = [t for t, _ in topics]
    counts = [c for _, c in topics]
    ax.barh(range(len(topics)), counts)
    ax.set_yticks(range(len(topics)))
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("records")
    ax.set_title("event records per topic")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _figure_alarm_latency(report: dict, path: Path) -> Path:
    alarms = report["alarms"]
    fig, ax = plt.subplots(figsize=(8, 2.6))
    if alarms:
        ids = [a["alarm_id"] for a in alarms]
        latencies = [a["latency"] for a in alarms]
        ax.bar(range(len(ids)), latencies)
        ax.set_xticks(range(len(ids)))
        ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("latency [s]")
    ax.set_title("sim-time latency from earliest evidence to alarm")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
