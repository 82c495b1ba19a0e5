"""World- and image-space geometry: vectors, rectangles, and the pinhole camera.

All world coordinates are meters in a right-handed frame with z up. Image
coordinates are pixels, u rightward and v downward, origin at the top-left
corner. Every function here is pure and operates on 64-bit floats in a fixed
evaluation order so that repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

PAN_LIMIT = math.pi
TILT_LIMIT = math.pi / 2
ZOOM_MIN = 1.0
ZOOM_MAX = 32.0


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: ({self.x}, {self.y}, {self.z})")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the floor plane, x0 <= x1 and y0 <= y1.

    Containment is half-open (closed on min edges, open on max edges) so a
    point on a shared wall belongs to exactly one room.
    """

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate rect: {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def overlap_area(self, other: "Rect") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        if w <= 0.0 or h <= 0.0:
            return 0.0
        return w * h


@dataclass(frozen=True)
class Box:
    """Integer pixel rectangle, half-open: x in [x0, x1), y in [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate box: {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def intersect(self, other: "Box") -> "Box | None":
        x0 = max(self.x0, other.x0)
        y0 = max(self.y0, other.y0)
        x1 = min(self.x1, other.x1)
        y1 = min(self.y1, other.y1)
        if x1 <= x0 or y1 <= y0:
            return None
        return Box(x0, y0, x1, y1)

    def iou(self, other: "Box") -> float:
        inter = self.intersect(other)
        if inter is None:
            return 0.0
        union = self.area + other.area - inter.area
        return inter.area / union if union > 0 else 0.0

    def bottom_center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, float(self.y1))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class PtzState:
    """Pan/tilt offsets (radians, added to the mount pose) and absolute zoom."""

    pan: float = 0.0
    tilt: float = 0.0
    zoom: float = 1.0

    def __post_init__(self) -> None:
        if not (-PAN_LIMIT <= self.pan <= PAN_LIMIT):
            raise ValueError(f"pan out of range: {self.pan}")
        if not (-TILT_LIMIT <= self.tilt <= TILT_LIMIT):
            raise ValueError(f"tilt out of range: {self.tilt}")
        if not (ZOOM_MIN <= self.zoom <= ZOOM_MAX):
            raise ValueError(f"zoom out of range: {self.zoom}")


def apply_ptz(ptz: PtzState, pan_delta: float, tilt_delta: float, zoom_absolute: float) -> PtzState:
    """Accumulate pan/tilt deltas and set absolute zoom, clamping to limits."""
    if not (math.isfinite(pan_delta) and math.isfinite(tilt_delta) and math.isfinite(zoom_absolute)):
        raise ValueError("PTZ command values must be finite")
    return PtzState(
        pan=clamp(ptz.pan + pan_delta, -PAN_LIMIT, PAN_LIMIT),
        tilt=clamp(ptz.tilt + tilt_delta, -TILT_LIMIT, TILT_LIMIT),
        zoom=clamp(zoom_absolute, ZOOM_MIN, ZOOM_MAX),
    )


def effective_hfov(base_hfov: float, zoom: float) -> float:
    """Zoom narrows the field of view optically: 2*atan(tan(base/2)/zoom)."""
    return 2.0 * math.atan(math.tan(base_hfov / 2.0) / zoom)


@dataclass(frozen=True)
class CameraView:
    """A mounted camera: pose, optics, PTZ state, and visibility metadata.

    `visibility` lists the rooms whose contents the camera can see; wall
    occlusion is modeled entirely by this list. `door_box` is the pre-stored
    image rectangle of the monitored door, used by the analytics stage.
    """

    camera_id: str
    position: Vec3
    base_yaw: float
    base_pitch: float
    base_hfov: float
    image_width: int
    image_height: int
    ptz: PtzState = field(default_factory=PtzState)
    visibility: tuple[str, ...] = ()
    door_box: Box | None = None
    listen_port: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.base_hfov < math.pi):
            raise ValueError(f"hfov out of range: {self.base_hfov}")
        if self.image_width < 16 or self.image_height < 16:
            raise ValueError("image dimensions must be >= 16 px")
        if self.door_box is not None:
            bounds = Box(0, 0, self.image_width, self.image_height)
            if self.door_box.intersect(bounds) != self.door_box:
                raise ValueError(f"door_box {self.door_box} outside image bounds")

    @property
    def yaw(self) -> float:
        return self.base_yaw + self.ptz.pan

    @property
    def pitch(self) -> float:
        return self.base_pitch + self.ptz.tilt

    @property
    def hfov(self) -> float:
        return effective_hfov(self.base_hfov, self.ptz.zoom)

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(self.hfov / 2.0)

    def with_ptz(self, ptz: PtzState) -> "CameraView":
        return replace(self, ptz=ptz)

    def image_bounds(self) -> Box:
        return Box(0, 0, self.image_width, self.image_height)

    def basis(self) -> tuple[Vec3, Vec3, Vec3]:
        """Forward, right, up unit vectors of the current camera pose."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        forward = Vec3(cp * cy, cp * sy, sp)
        right = Vec3(sy, -cy, 0.0)
        up = Vec3(-sp * cy, -sp * sy, cp)
        return forward, right, up


def project_point(cam: CameraView, p: Vec3) -> tuple[float, float] | None:
    """Pinhole projection of a world point; None when at or behind the camera.

    Projected coordinates may fall outside the image; callers clip.
    """
    forward, right, up = cam.basis()
    d = p - cam.position
    depth = d.dot(forward)
    if depth <= 0.0:
        return None
    f = cam.focal_px
    u = cam.image_width / 2.0 + f * (d.dot(right) / depth)
    v = cam.image_height / 2.0 - f * (d.dot(up) / depth)
    return (u, v)


def project_extent(cam: CameraView, corners: list[Vec3]) -> Box | None:
    """Project corner points and return their image-space bounding box.

    Returns None when every corner is behind the camera or the bounding box
    of the in-front corners misses the image entirely.
    """
    u_min = v_min = math.inf
    u_max = v_max = -math.inf
    any_in_front = False
    for corner in corners:
        uv = project_point(cam, corner)
        if uv is None:
            continue
        any_in_front = True
        u, v = uv
        u_min = min(u_min, u)
        u_max = max(u_max, u)
        v_min = min(v_min, v)
        v_max = max(v_max, v)
    if not any_in_front:
        return None
    raw = Box(
        int(math.floor(u_min)),
        int(math.floor(v_min)),
        int(math.ceil(u_max)),
        int(math.ceil(v_max)),
    )
    return raw.intersect(cam.image_bounds())


def upright_box_corners(center_x: float, center_y: float, width: float, height: float) -> list[Vec3]:
    """Corners of an axis-aligned box standing on the floor (z in [0, height])."""
    hw = width / 2.0
    return [
        Vec3(center_x + dx, center_y + dy, z)
        for z in (0.0, height)
        for dx in (-hw, hw)
        for dy in (-hw, hw)
    ]
