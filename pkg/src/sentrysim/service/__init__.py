"""Orchestration, alarm service, operator API, persistence, and the CLI."""

from sentrysim.service.config import CameraEntry, ConfigError, SystemConfig, load_system_config
from sentrysim.service.orchestrator import Runtime, run
from sentrysim.service.report import RunReport

__all__ = [
    "CameraEntry",
    "ConfigError",
    "RunReport",
    "Runtime",
    "SystemConfig",
    "load_system_config",
    "run",
]
