"""System configuration: devices, ports, rules, scenario selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from sentrysim.analytics import AnalyticsConfig, ZoneRegion
from sentrysim.geometry import Box, CameraView, PtzState, Vec3
from sentrysim.rules import RuleConfig
from sentrysim.vdevices.sensors import SensorSpec

CONFIG_SCHEMA_VERSION = 1
DEFAULT_CONTROL_PORT = 20001
DEFAULT_CONSOLE_PORT = 8800

MODE_FAST = "fast"
MODE_REALTIME = "realtime"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CameraEntry:
    camera_id: str
    port: int
    fps: float
    position: Vec3
    yaw: float
    pitch: float
    hfov: float
    width: int
    height: int
    visibility: tuple[str, ...]
    room_id: str | None = None
    door_id: str | None = None
    door_box: Box | None = None
    zone_regions: tuple[ZoneRegion, ...] = ()
    delta: float = 0.5
    min_area: int = 64
    ptz: PtzState = PtzState()
    ingest: bool = True  # False leaves the camera unattended (no VMS client)

    def camera_view(self) -> CameraView:
        return CameraView(
            camera_id=self.camera_id,
            position=self.position,
            base_yaw=self.yaw,
            base_pitch=self.pitch,
            base_hfov=self.hfov,
            image_width=self.width,
            image_height=self.height,
            ptz=self.ptz,
            visibility=self.visibility,
            door_box=self.door_box,
            listen_port=self.port,
        )

    def with_fps(self, fps: float) -> "CameraEntry":
        return replace(self, fps=fps)

    def analytics_config(self) -> AnalyticsConfig:
        return AnalyticsConfig(
            camera_id=self.camera_id,
            room_id=self.room_id,
            door_id=self.door_id,
            door_box=self.door_box,
            delta=self.delta,
            zone_regions=self.zone_regions,
            min_area=self.min_area,
        )


@dataclass(frozen=True)
class SystemConfig:
    floorplan_path: Path
    scenario_path: Path
    scenarios_dir: Path | None = None
    seed: int | None = None
    mode: str = MODE_FAST
    control_port: int = DEFAULT_CONTROL_PORT
    console_port: int = DEFAULT_CONSOLE_PORT
    cameras: tuple[CameraEntry, ...] = ()
    sensors: tuple[SensorSpec, ...] = ()
    rules: RuleConfig = field(default_factory=RuleConfig)
    servers_enabled: bool = False
    ground_truth_endpoint: bool = False

    def with_scenario(self, scenario_path: Path) -> "SystemConfig":
        return replace(self, scenario_path=scenario_path)

    def with_overrides(
        self, seed: int | None = None, fast: bool | None = None, servers: bool | None = None
    ) -> "SystemConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if fast:
            cfg = replace(cfg, mode=MODE_FAST)
        if servers is not None:
            cfg = replace(cfg, servers_enabled=servers)
        return cfg


def _parse_box(values: object, what: str) -> Box:
    try:
        x0, y0, x1, y1 = (int(v) for v in values)  # type: ignore[misc]
        return Box(x0, y0, x1, y1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad box for {what}: {values!r}") from exc


def _parse_camera(entry: dict) -> CameraEntry:
    try:
        camera_id = str(entry["id"])
        position = entry["position"]
        resolution = entry.get("resolution", [320, 240])
        zones = []
        for zone_entry in entry.get("zones", []):
            zones.append(
                ZoneRegion(
                    box=_parse_box(zone_entry["box"], f"camera {camera_id} zone"),
                    zone_id=str(zone_entry["zone"]),
                )
            )
        door_box = entry.get("door_box")
        ptz_entry = entry.get("ptz", {}) or {}
        ptz = PtzState(
            pan=float(ptz_entry.get("pan", 0.0)),
            tilt=float(ptz_entry.get("tilt", 0.0)),
            zoom=float(ptz_entry.get("zoom", 1.0)),
        )
        return CameraEntry(
            camera_id=camera_id,
            port=int(entry.get("port", 0)),
            fps=float(entry.get("fps", 10.0)),
            position=Vec3(float(position[0]), float(position[1]), float(position[2])),
            yaw=math.radians(float(entry.get("yaw_deg", 0.0))),
            pitch=math.radians(float(entry.get("pitch_deg", 0.0))),
            hfov=math.radians(float(entry.get("hfov_deg", 90.0))),
            width=int(resolution[0]),
            height=int(resolution[1]),
            visibility=tuple(str(r) for r in entry.get("visibility", [])),
            room_id=str(entry["room"]) if "room" in entry else None,
            door_id=str(entry["door"]) if "door" in entry else None,
            door_box=_parse_box(door_box, f"camera {camera_id} door_box") if door_box else None,
            zone_regions=tuple(zones),
            delta=float(entry.get("delta", 0.5)),
            min_area=int(entry.get("min_area", 64)),
            ptz=ptz,
            ingest=bool(entry.get("ingest", True)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad camera entry {entry!r}: {exc}") from exc


def _parse_sensor(entry: dict) -> SensorSpec:
    try:
        schedule = tuple(
            (float(item[0]), bool(item[1])) for item in entry.get("schedule", [])
        )
        return SensorSpec(
            sensor_id=str(entry["id"]),
            kind=str(entry["kind"]),
            room_id=str(entry["room"]) if "room" in entry else None,
            door_id=str(entry["door"]) if "door" in entry else None,
            temp_thresholds=tuple(float(v) for v in entry.get("thresholds", [45.0])),
            flood_schedule=schedule,
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad sensor entry {entry!r}: {exc}") from exc


def _check_ports(config: SystemConfig) -> None:
    claimed: dict[int, str] = {}
    def claim(port: int, owner: str) -> None:
        if port == 0:
            return  # ephemeral
        if port in claimed:
            raise ConfigError(f"duplicate port {port}: {claimed[port]} and {owner}")
        claimed[port] = owner

    claim(config.control_port, "control API")
    claim(config.console_port, "console API")
    for camera in config.cameras:
        claim(camera.port, f"camera {camera.camera_id}")


def load_system_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    if data.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version: {data.get('schema_version')!r}")

    base = path.parent

    def resolve(rel: object, what: str) -> Path:
        if not isinstance(rel, str):
            raise ConfigError(f"missing {what} in config")
        resolved = (base / rel).resolve()
        if not resolved.exists():
            raise ConfigError(f"{what} does not exist: {resolved}")
        return resolved

    mode = str(data.get("mode", MODE_FAST))
    if mode not in (MODE_FAST, MODE_REALTIME):
        raise ConfigError(f"unknown mode: {mode!r}")

    rules_data = data.get("rules", {}) or {}
    try:
        rules = RuleConfig(**rules_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad rules config: {exc}") from exc

    ports = data.get("ports", {}) or {}
    scenarios_dir = None
    if "scenarios_dir" in data:
        scenarios_dir = resolve(data["scenarios_dir"], "scenarios_dir")

    config = SystemConfig(
        floorplan_path=resolve(data.get("floorplan"), "floorplan"),
        scenario_path=resolve(data.get("scenario"), "scenario"),
        scenarios_dir=scenarios_dir,
        seed=int(data["seed"]) if data.get("seed") is not None else None,
        mode=mode,
        control_port=int(ports.get("control", DEFAULT_CONTROL_PORT)),
        console_port=int(ports.get("console", DEFAULT_CONSOLE_PORT)),
        cameras=tuple(_parse_camera(e) for e in data.get("cameras", [])),
        sensors=tuple(_parse_sensor(e) for e in data.get("sensors", [])),
        rules=rules,
        servers_enabled=bool(data.get("servers", mode == MODE_REALTIME)),
        ground_truth_endpoint=bool(data.get("ground_truth_endpoint", False)),
    )
    _check_ports(config)
    return config


def find_scenario(config: SystemConfig, name: str) -> Path:
    """Resolve a scenario by name against the config's scenario directory."""
    candidates = []
    if config.scenarios_dir is not None:
        candidates.append(config.scenarios_dir / f"{name}.yaml")
    candidates.append(config.scenario_path.parent / f"{name}.yaml")
    for candidate in candidates:
        if candidate.exists():
            return candidate
    raise ConfigError(f"scenario {name!r} not found (searched {[str(c) for c in candidates]})")


def list_scenarios(config: SystemConfig) -> list[str]:
    directory = config.scenarios_dir or config.scenario_path.parent
    return sorted(p.stem for p in directory.glob("*.yaml"))


def apply_fps_overrides(config: SystemConfig, overrides: dict[str, float]) -> SystemConfig:
    """Per-device CLI overrides of the ingest frame rate."""
    known = {c.camera_id for c in config.cameras}
    for camera_id in overrides:
        if camera_id not in known:
            raise ConfigError(f"fps override for unknown camera: {camera_id!r}")
    cameras = tuple(
        c.with_fps(overrides[c.camera_id]) if c.camera_id in overrides else c
        for c in config.cameras
    )
    return replace(config, cameras=cameras)
