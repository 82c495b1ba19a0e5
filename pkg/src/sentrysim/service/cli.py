"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from sentrysim.assets import demo_config_path
from sentrysim.service.config import (
    ConfigError,
    apply_fps_overrides,
    find_scenario,
    list_scenarios,
    load_system_config,
)
from sentrysim.service.orchestrator import run
from sentrysim.service.persist import ReplayError, replay
from sentrysim.service.report import render_report
from sentrysim.world.floorplan import FloorPlanError
from sentrysim.world.scenario import ScenarioError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

CONFIG_ERRORS = (ConfigError, FloorPlanError, ScenarioError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentrysim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario through the full monitoring stack")
    p_run.add_argument("--config", default=None, help="system config file (default: packaged demo)")
    p_run.add_argument("--scenario", default=None, help="scenario name from the config's scenario dir")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--fast", action="store_true", help="as-fast-as-possible mode (no wall-clock pacing)")
    p_run.add_argument("--servers", action="store_true", help="force device/console servers on")
    p_run.add_argument("--out", default=None, help="log directory for topic dumps and the report")
    p_run.add_argument(
        "--fps", action="append", default=[], metavar="CAMERA=FPS",
        help="override one camera's ingest frame rate (repeatable)",
    )

    p_report = sub.add_parser("report", help="render figures and CSV tables from a run's log directory")
    p_report.add_argument("logdir")
    p_report.add_argument("--out", default=None, help="output directory (default <logdir>/report)")

    p_replay = sub.add_parser("replay", help="re-run persisted events through the rule engine")
    p_replay.add_argument("logdir")

    p_list = sub.add_parser("list-scenarios", help="list scenarios known to a config")
    p_list.add_argument("--config", default=None)

    return parser


def _resolve_config(path_arg: str | None):
    path = Path(path_arg) if path_arg else demo_config_path()
    return load_system_config(path)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args.config)
    if args.scenario:
        config = config.with_scenario(find_scenario(config, args.scenario))
    config = config.with_overrides(
        seed=args.seed, fast=args.fast or None, servers=True if args.servers else None
    )
    if args.fps:
        overrides = {}
        for item in args.fps:
            camera_id, _, value = item.partition("=")
            try:
                overrides[camera_id] = float(value)
            except ValueError:
                raise ConfigError(f"bad --fps override: {item!r} (expected CAMERA=FPS)")
        config = apply_fps_overrides(config, overrides)
    report = run(config, log_dir=args.out)
    print(f"scenario {report.scenario!r} seed {report.seed}: "
          f"{report.ticks} ticks in {report.wall_seconds:.2f}s wall")
    for alarm_type, count in sorted(report.alarm_counts.items()):
        print(f"  {alarm_type}: {count}")
    if not report.alarm_counts:
        print("  no alarms")
    if args.out:
        print(f"logs written to {args.out}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    files = render_report(args.logdir, args.out)
    for path in files:
        print(path)
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    result = replay(args.logdir)
    print(f"original alarm records: {len(result.original)}")
    print(f"replayed alarm records: {len(result.replayed)}")
    if result.matches:
        print("replay matches the original alarm log")
        return EXIT_OK
    print("MISMATCH between replayed and original alarm logs")
    return EXIT_RUNTIME


def _cmd_list_scenarios(args: argparse.Namespace) -> int:
    config = _resolve_config(args.config)
    for name in list_scenarios(config):
        print(name)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "report": _cmd_report,
        "replay": _cmd_replay,
        "list-scenarios": _cmd_list_scenarios,
    }
    try:
        return handlers[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures
        logging.getLogger(__name__).exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
