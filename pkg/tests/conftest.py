"""Shared fixtures: demo configuration, canonical scenario runs, helpers."""

from __future__ import annotations

import math

import pytest

from sentrysim.assets import demo_config_path
from sentrysim.geometry import CameraView, Vec3
from sentrysim.service.config import find_scenario, load_system_config
from sentrysim.service.orchestrator import run


@pytest.fixture(scope="session")
def demo_config():
    return load_system_config(demo_config_path())


@pytest.fixture(scope="session")
def scenario_config(demo_config):
    def pick(name: str):
        return demo_config.with_scenario(find_scenario(demo_config, name))

    return pick


@pytest.fixture(scope="session")
def tailgating_run(scenario_config, tmp_path_factory):
    log_dir = tmp_path_factory.mktemp("tailgating")
    report = run(scenario_config("tailgating"), log_dir=log_dir)
    return report, log_dir


@pytest.fixture
def room_camera() -> CameraView:
    """The demo room camera pose, standalone for geometry-level tests."""
    return CameraView(
        camera_id="cam-room",
        position=Vec3(5.0, 11.0, 2.5),
        base_yaw=math.radians(-90.0),
        base_pitch=math.radians(-10.0),
        base_hfov=math.radians(90.0),
        image_width=320,
        image_height=240,
        visibility=("oproom",),
    )
