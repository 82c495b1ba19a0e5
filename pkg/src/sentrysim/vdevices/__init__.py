"""Virtual devices: PTZ cameras, sensors, the alarm manager, and remote control."""

from sentrysim.geometry import Box, CameraView, PtzState, apply_ptz, effective_hfov, project_extent, project_point
from sentrysim.vdevices.render import CLASS_COLORS, FIRE_GREEN_LO, FIRE_GREEN_HI, Frame, project_agent, render_frame
from sentrysim.vdevices.sensors import (
    SENSOR_KINDS,
    SensorBank,
    SensorReading,
    SensorSpec,
    StateChangeNotification,
    diff_readings,
)

__all__ = [
    "Box",
    "CLASS_COLORS",
    "CameraView",
    "FIRE_GREEN_HI",
    "FIRE_GREEN_LO",
    "Frame",
    "PtzState",
    "SENSOR_KINDS",
    "SensorBank",
    "SensorReading",
    "SensorSpec",
    "StateChangeNotification",
    "apply_ptz",
    "diff_readings",
    "effective_hfov",
    "project_agent",
    "project_extent",
    "project_point",
    "render_frame",
]
