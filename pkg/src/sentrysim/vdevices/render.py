"""Flat-shaded software rasterizer for virtual camera frames.

Agents render as filled rectangles in reserved per-class colors that never
appear in the background, floor, or fire palette, which makes downstream
color-segmentation detection well-posed. Fire renders inside a reserved
red-orange band with deterministic per-pixel flicker. Rendering is a pure
function of (camera, world snapshot, floorplan), so identical inputs give
identical pixel buffers on any platform.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from sentrysim.geometry import Box, CameraView, project_extent
from sentrysim.world.floorplan import FloorPlan, room_of
from sentrysim.world.sim import agent_depth, fire_extent_corners, horizon_row
from sentrysim.world.state import Agent, WorldState

BACKGROUND_COLOR = (128, 128, 128)
FLOOR_COLOR = (90, 90, 90)

# Reserved class colors. None may equal the background/floor shades or fall in
# the fire band (R=255, G in [96,160), B=0).
CLASS_COLORS: dict[str, tuple[int, int, int]] = {
    "person": (0, 0, 255),
    "staff": (0, 128, 255),
    "intruder": (255, 0, 255),
    "weapon_rifle": (255, 255, 0),
    "weapon_pistol": (0, 255, 255),
    "weapon_machete": (0, 255, 0),
    "weapon_axe": (255, 0, 0),
}

FIRE_RED = 255
FIRE_BLUE = 0
FIRE_GREEN_LO = 96
FIRE_GREEN_HI = 160  # exclusive


@dataclass(frozen=True)
class Frame:
    """One rendered camera frame plus hidden ground truth for test oracles."""

    camera_id: str
    tick: int
    sim_time: float
    pixels: np.ndarray  # (height, width, 3) uint8
    ground_truth: tuple[tuple[str, str, Box], ...] = ()

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def is_all_black(self) -> bool:
        return not self.pixels.any()

    def to_png_bytes(self) -> bytes:
        buffer = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buffer, format="PNG")
        return buffer.getvalue()

    @staticmethod
    def from_png_bytes(camera_id: str, tick: int, sim_time: float, data: bytes) -> "Frame":
        image = Image.open(io.BytesIO(data)).convert("RGB")
        return Frame(
            camera_id=camera_id,
            tick=tick,
            sim_time=sim_time,
            pixels=np.asarray(image, dtype=np.uint8),
        )


def project_agent(cam: CameraView, agent: Agent) -> Box | None:
    """Image rectangle of the agent's box, or None when out of view."""
    return project_extent(cam, agent.box_corners())


def visible_agent_boxes(
    cam: CameraView, snapshot: WorldState, plan: FloorPlan
) -> list[tuple[str, str, Box]]:
    """Painted-order (far to near) agent rectangles for rendering and oracles."""
    if not snapshot.power_on:
        return []
    candidates = []
    for agent in snapshot.agents:
        room = room_of(plan, agent.position)
        if room is None or room not in cam.visibility:
            continue
        box = project_agent(cam, agent)
        if box is None:
            continue
        candidates.append((agent_depth(cam, agent), agent.agent_id, agent.agent_class, box))
    candidates.sort(key=lambda c: (-c[0], c[1]))
    return [(agent_id, agent_class, box) for _, agent_id, agent_class, box in candidates]


def _flicker_field(tick: int, box: Box, seed: int) -> np.ndarray:
    """Deterministic per-pixel flicker values in [0, 64) for a fire rectangle."""
    xs = np.arange(box.x0, box.x1, dtype=np.uint32)
    ys = np.arange(box.y0, box.y1, dtype=np.uint32)
    gx, gy = np.meshgrid(xs, ys)
    with np.errstate(over="ignore"):
        h = (
            np.uint32(tick) * np.uint32(0x9E3779B1)
            ^ gx * np.uint32(0x85EBCA77)
            ^ gy * np.uint32(0xC2B2AE3D)
            ^ np.uint32(seed & 0xFFFFFFFF) * np.uint32(0x27D4EB2F)
        )
        h ^= h >> np.uint32(15)
        h *= np.uint32(0x2C1B3C6D)
        h ^= h >> np.uint32(12)
    return (h & np.uint32(63)).astype(np.uint8)


def render_frame(cam: CameraView, snapshot: WorldState, plan: FloorPlan) -> Frame:
    height, width = cam.image_height, cam.image_width
    if not snapshot.power_on:
        return Frame(
            camera_id=cam.camera_id,
            tick=snapshot.tick,
            sim_time=snapshot.clock,
            pixels=np.zeros((height, width, 3), dtype=np.uint8),
        )

    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:, :] = BACKGROUND_COLOR
    floor_start = int(math.ceil(horizon_row(cam)))
    if floor_start < height:
        pixels[max(0, floor_start) :, :] = FLOOR_COLOR

    ground_truth = visible_agent_boxes(cam, snapshot, plan)
    for _, agent_class, box in ground_truth:
        pixels[box.y0 : box.y1, box.x0 : box.x1] = CLASS_COLORS[agent_class]

    fires = []
    for fire in snapshot.fires:
        if fire.intensity <= 0.0:
            continue
        if room_of(plan, fire.location) not in cam.visibility:
            continue
        box = project_extent(cam, fire_extent_corners(fire))
        if box is None or box.area == 0:
            continue
        depth = (fire.location - cam.position).dot(cam.basis()[0])
        fires.append((depth, box))
    fires.sort(key=lambda f: -f[0])
    for _, box in fires:
        flicker = _flicker_field(snapshot.tick, box, snapshot.rng_seed)
        region = pixels[box.y0 : box.y1, box.x0 : box.x1]
        region[:, :, 0] = FIRE_RED
        region[:, :, 1] = FIRE_GREEN_LO + flicker
        region[:, :, 2] = FIRE_BLUE

    return Frame(
        camera_id=cam.camera_id,
        tick=snapshot.tick,
        sim_time=snapshot.clock,
        pixels=pixels,
        ground_truth=tuple(ground_truth),
    )
