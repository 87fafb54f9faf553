"""Robot configuration: JSON sections for chassis, manipulator, ptru,
bus, sensors, rates and limits, with defaults for every field.

Validation failures carry the dotted field path so a bad file points at
the offending entry.  The resolved configuration hashes canonically for
the record/replay contract.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .devicebus import ModuleDescriptor, Registry, default_registry
from .locomotion import BodyTwist, ChassisGeometry
from .manipulator import ManipulatorGeometry
from .ptru import BASELINE_NOMINAL_MM, PTRUWorkspace
from .world import LidarParams, PlantParams, SonarParams

__all__ = ["ConfigError", "RobotConfig", "RatesConfig", "load_config", "config_hash"]

TICK_HZ = 100


class ConfigError(ValueError):
    """Invalid configuration; the message names the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class RatesConfig:
    camera_pose_hz: int = 30
    map_hz: int = 10
    bus_report_hz: int = 10
    scan_hz: int = 10
    sonar_hz: int = 20
    imu_hz: int = 100

    def __post_init__(self) -> None:
        for name in ("camera_pose_hz", "map_hz", "bus_report_hz", "scan_hz", "sonar_hz", "imu_hz"):
            v = getattr(self, name)
            if not 1 <= v <= TICK_HZ:
                raise ConfigError(f"rates.{name}", f"must be in 1..{TICK_HZ}")
        if self.map_hz > 10:
            raise ConfigError("rates.map_hz", "map topic must stay at or under 10 Hz")


@dataclass(frozen=True)
class PTRUConfig:
    workspace: PTRUWorkspace = field(default_factory=PTRUWorkspace)
    rate_limit_rad_s: float = 3.0
    latency_estimate_s: float = 0.0
    baseline_mm: float = BASELINE_NOMINAL_MM
    head_height_m: float = 1.45  # camera center above the floor


@dataclass(frozen=True)
class MappingConfig:
    resolution_m: float = 0.05
    # explicit extent; None means derive from the scenario bounding box
    origin_xy: tuple[float, float] | None = None
    width_cells: int | None = None
    height_cells: int | None = None
    log_odds_free: float = -0.4
    log_odds_hit: float = 0.85
    occupied_threshold: float = 0.5
    use_odometry_pose: bool = False


@dataclass(frozen=True)
class ServerConfig:
    client_queue_limit: int = 10_000
    ee_move_min_duration_s: float = 0.1


@dataclass(frozen=True)
class RobotConfig:
    chassis: ChassisGeometry = field(default_factory=ChassisGeometry)
    manipulator: ManipulatorGeometry = field(default_factory=ManipulatorGeometry)
    ptru: PTRUConfig = field(default_factory=PTRUConfig)
    registry: Registry = field(default_factory=default_registry)
    lidar: LidarParams = field(default_factory=LidarParams)
    sonar: SonarParams = field(default_factory=SonarParams)
    plant: PlantParams = field(default_factory=PlantParams)
    rates: RatesConfig = field(default_factory=RatesConfig)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    raw: dict = field(default_factory=dict, compare=False)


def _expect(mapping: dict, path: str, known: set[str]) -> None:
    for key in mapping:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")


def _num(section: dict, path: str, key: str, default: float) -> float:
    v = section.get(key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", "must be a finite number")
    return float(v)


def _int(section: dict, path: str, key: str, default: int) -> int:
    v = section.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}", "must be an integer")
    return v


def _chassis(section: dict, limits: dict) -> ChassisGeometry:
    _expect(section, "chassis", {"wheel_radius_m", "half_base_x_m", "half_base_y_m", "encoder_sign"})
    sign = section.get("encoder_sign", [1, -1, 1, -1])
    if not isinstance(sign, list) or len(sign) != 4:
        raise ConfigError("chassis.encoder_sign", "must be a list of four +/-1")
    max_twist = limits.get("max_twist", [1.0, 1.0, 2.0])
    if not isinstance(max_twist, list) or len(max_twist) != 3:
        raise ConfigError("limits.max_twist", "must be [vx, vy, w]")
    try:
        return ChassisGeometry(
            wheel_radius_m=_num(section, "chassis", "wheel_radius_m", 0.05),
            half_base_x_m=_num(section, "chassis", "half_base_x_m", 0.15),
            half_base_y_m=_num(section, "chassis", "half_base_y_m", 0.15),
            encoder_sign=tuple(int(s) for s in sign),
            max_twist=BodyTwist(*(float(v) for v in max_twist)),
            max_wheel_accel_rad_s2=_num(
                limits, "limits", "max_wheel_accel_rad_s2", 50.0
            ),
        )
    except ValueError as exc:
        raise ConfigError("chassis", str(exc)) from None


def _manipulator(section: dict) -> ManipulatorGeometry:
    _expect(
        section,
        "manipulator",
        {"link_lengths_m", "lift_range_m", "joint_limits_rad", "gripper_max_m",
         "payload_limit_kg", "z_offset_m"},
    )
    links = section.get("link_lengths_m", [0.10, 0.20, 0.20, 0.05, 0.10, 0.10])
    if not isinstance(links, list) or len(links) != 6:
        raise ConfigError("manipulator.link_lengths_m", "must list l0..l5")
    lift = section.get("lift_range_m", [0.0, 0.8])
    limits = section.get(
        "joint_limits_rad",
        [
            [-math.pi / 2, math.pi / 2],
            [0.0, math.pi],
            [-math.pi, math.pi],
            [-math.pi / 2, math.pi / 2],
            [-math.pi, math.pi],
        ],
    )
    if not isinstance(limits, list) or len(limits) != 5:
        raise ConfigError("manipulator.joint_limits_rad", "must cover theta1..theta5")
    try:
        return ManipulatorGeometry(
            link_lengths_m=tuple(float(v) for v in links),
            lift_range_m=(float(lift[0]), float(lift[1])),
            joint_limits_rad=tuple((float(lo), float(hi)) for lo, hi in limits),
            gripper_max_m=_num(section, "manipulator", "gripper_max_m", 0.08),
            payload_limit_kg=_num(section, "manipulator", "payload_limit_kg", 1.0),
            z_offset_m=_num(section, "manipulator", "z_offset_m", 0.0),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError("manipulator", str(exc)) from None


def _ptru(section: dict) -> PTRUConfig:
    _expect(
        section,
        "ptru",
        {"pan_limit_rad", "tilt_limit_rad", "roll_limit_rad", "rate_limit_rad_s",
         "latency_estimate_s", "baseline_mm", "head_height_m"},
    )
    return PTRUConfig(
        workspace=PTRUWorkspace(
            pan_limit_rad=_num(section, "ptru", "pan_limit_rad", math.radians(160.0)),
            tilt_limit_rad=_num(section, "ptru", "tilt_limit_rad", math.radians(60.0)),
            roll_limit_rad=_num(section, "ptru", "roll_limit_rad", math.radians(45.0)),
        ),
        rate_limit_rad_s=_num(section, "ptru", "rate_limit_rad_s", 3.0),
        latency_estimate_s=_num(section, "ptru", "latency_estimate_s", 0.0),
        baseline_mm=_num(section, "ptru", "baseline_mm", BASELINE_NOMINAL_MM),
        head_height_m=_num(section, "ptru", "head_height_m", 1.45),
    )


def _bus(section: dict) -> Registry:
    _expect(section, "bus", {"modules"})
    if "modules" not in section:
        return default_registry()
    registry = Registry()
    for i, entry in enumerate(section["modules"]):
        path = f"bus.modules[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "must be an object")
        try:
            registry.register(
                ModuleDescriptor(
                    device_id=_int(entry, path, "id", -1),
                    kind=entry.get("kind", ""),
                    label=entry.get("label", ""),
                    read_payload_bytes=_int(entry, path, "read_bytes", 0),
                    write_payload_bytes=_int(entry, path, "write_bytes", 0),
                    poll_rate_hz=_int(entry, path, "poll_hz", 100),
                )
            )
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return registry


def _sensors(section: dict, limits: dict) -> tuple[LidarParams, SonarParams, PlantParams, dict]:
    _expect(section, "sensors", {"lidar", "sonar", "imu"})
    lidar_s = section.get("lidar", {})
    _expect(lidar_s, "sensors.lidar", {"beams", "range_min_m", "range_max_m", "sigma_m", "rate_hz"})
    sonar_s = section.get("sonar", {})
    _expect(sonar_s, "sensors.sonar", {"range_max_m", "sigma_m", "rate_hz", "placements"})
    imu_s = section.get("imu", {})
    _expect(imu_s, "sensors.imu", {"gyro_sigma", "accel_sigma", "rate_hz"})

    try:
        lidar = LidarParams(
            beam_count=_int(lidar_s, "sensors.lidar", "beams", 360),
            range_min_m=_num(lidar_s, "sensors.lidar", "range_min_m", 0.15),
            range_max_m=_num(lidar_s, "sensors.lidar", "range_max_m", 12.0),
            noise_sigma_m=_num(lidar_s, "sensors.lidar", "sigma_m", 0.0),
            rate_hz=_int(lidar_s, "sensors.lidar", "rate_hz", 10),
        )
    except ValueError as exc:
        raise ConfigError("sensors.lidar", str(exc)) from None

    kwargs: dict[str, Any] = dict(
        range_max_m=_num(sonar_s, "sensors.sonar", "range_max_m", 4.0),
        noise_sigma_m=_num(sonar_s, "sensors.sonar", "sigma_m", 0.0),
        rate_hz=_int(sonar_s, "sensors.sonar", "rate_hz", 20),
    )
    if "placements" in sonar_s:
        pl = sonar_s["placements"]
        if not isinstance(pl, list) or len(pl) != 12:
            raise ConfigError("sensors.sonar.placements", "must list 12 mounts")
        kwargs["placements"] = tuple(tuple(float(v) for v in p) for p in pl)
    sonar = SonarParams(**kwargs)

    arm_rates = limits.get("arm_rate_limits", [0.2, 1.5, 1.5, 1.5, 1.5, 1.5, 0.1])
    if not isinstance(arm_rates, list) or len(arm_rates) != 7:
        raise ConfigError("limits.arm_rate_limits", "must list 7 rates (lift, 5 joints, gripper)")
    plant = PlantParams(
        robot_radius_m=_num(limits, "limits", "robot_radius_m", 0.21),
        arm_tau_s=_num(limits, "limits", "arm_tau_s", 0.05),
        arm_rate_limits=tuple(float(v) for v in arm_rates),
        ptru_tau_s=_num(limits, "limits", "ptru_tau_s", 0.02),
        ptru_rate_limit_rad_s=_num(limits, "limits", "ptru_plant_rate_rad_s", 6.0),
        imu_gyro_sigma=_num(imu_s, "sensors.imu", "gyro_sigma", 0.0),
        imu_accel_sigma=_num(imu_s, "sensors.imu", "accel_sigma", 0.0),
    )
    return lidar, sonar, plant, imu_s


def load_config(source: str | Path | dict | None = None) -> RobotConfig:
    """Build a RobotConfig from a JSON file, a dict, or pure defaults."""
    if source is None:
        data: dict = {}
    elif isinstance(source, dict):
        data = source
    else:
        text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    _expect(
        data, "",
        {"chassis", "manipulator", "ptru", "bus", "sensors", "rates", "limits",
         "mapping", "server"},
    )
    limits = data.get("limits", {})
    _expect(
        limits, "limits",
        {"max_twist", "max_wheel_accel_rad_s2", "arm_rate_limits", "arm_tau_s",
         "robot_radius_m", "ptru_tau_s", "ptru_plant_rate_rad_s"},
    )
    rates_s = data.get("rates", {})
    _expect(
        rates_s, "rates",
        {"camera_pose_hz", "map_hz", "bus_report_hz", "scan_hz", "sonar_hz", "imu_hz"},
    )
    lidar, sonar, plant, imu_s = _sensors(data.get("sensors", {}), limits)
    mapping_s = data.get("mapping", {})
    _expect(
        mapping_s, "mapping",
        {"resolution_m", "origin_xy", "width_cells", "height_cells",
         "log_odds_free", "log_odds_hit", "occupied_threshold", "use_odometry_pose"},
    )
    origin = mapping_s.get("origin_xy")
    if origin is not None and (not isinstance(origin, list) or len(origin) != 2):
        raise ConfigError("mapping.origin_xy", "must be [x, y]")
    server_s = data.get("server", {})
    _expect(server_s, "server", {"client_queue_limit", "ee_move_min_duration_s"})

    rates = RatesConfig(
        camera_pose_hz=_int(rates_s, "rates", "camera_pose_hz", 30),
        map_hz=_int(rates_s, "rates", "map_hz", 10),
        bus_report_hz=_int(rates_s, "rates", "bus_report_hz", 10),
        scan_hz=lidar.rate_hz,
        sonar_hz=sonar.rate_hz,
        imu_hz=_int(imu_s, "sensors.imu", "rate_hz", 100),
    )
    return RobotConfig(
        chassis=_chassis(data.get("chassis", {}), limits),
        manipulator=_manipulator(data.get("manipulator", {})),
        ptru=_ptru(data.get("ptru", {})),
        registry=_bus(data.get("bus", {})),
        lidar=lidar,
        sonar=sonar,
        plant=plant,
        rates=rates,
        mapping=MappingConfig(
            resolution_m=_num(mapping_s, "mapping", "resolution_m", 0.05),
            origin_xy=tuple(float(v) for v in origin) if origin is not None else None,
            width_cells=mapping_s.get("width_cells"),
            height_cells=mapping_s.get("height_cells"),
            log_odds_free=_num(mapping_s, "mapping", "log_odds_free", -0.4),
            log_odds_hit=_num(mapping_s, "mapping", "log_odds_hit", 0.85),
            occupied_threshold=_num(mapping_s, "mapping", "occupied_threshold", 0.5),
            use_odometry_pose=bool(mapping_s.get("use_odometry_pose", False)),
        ),
        server=ServerConfig(
            client_queue_limit=_int(server_s, "server", "client_queue_limit", 10_000),
            ee_move_min_duration_s=_num(server_s, "server", "ee_move_min_duration_s", 0.1),
        ),
        raw=data,
    )


def config_hash(config: RobotConfig) -> str:
    """Stable digest of the resolved configuration."""
    parts = {
        "chassis": [
            config.chassis.wheel_radius_m,
            config.chassis.half_base_x_m,
            config.chassis.half_base_y_m,
            list(config.chassis.encoder_sign),
            list(config.chassis.max_twist.as_tuple()),
            config.chassis.max_wheel_accel_rad_s2,
        ],
        "manipulator": [
            list(config.manipulator.link_lengths_m),
            list(config.manipulator.lift_range_m),
            [list(p) for p in config.manipulator.joint_limits_rad],
            config.manipulator.gripper_max_m,
            config.manipulator.payload_limit_kg,
            config.manipulator.z_offset_m,
        ],
        "ptru": [
            config.ptru.workspace.pan_limit_rad,
            config.ptru.workspace.tilt_limit_rad,
            config.ptru.workspace.roll_limit_rad,
            config.ptru.rate_limit_rad_s,
            config.ptru.latency_estimate_s,
            config.ptru.baseline_mm,
            config.ptru.head_height_m,
        ],
        "bus": [
            [d.device_id, d.kind, d.label, d.read_payload_bytes,
             d.write_payload_bytes, d.poll_rate_hz]
            for d in config.registry
        ],
        "lidar": [
            config.lidar.beam_count, config.lidar.angle_min_rad,
            config.lidar.range_min_m, config.lidar.range_max_m,
            config.lidar.noise_sigma_m, config.lidar.rate_hz,
        ],
        "sonar": [
            config.sonar.range_max_m, config.sonar.noise_sigma_m,
            config.sonar.rate_hz, [list(p) for p in config.sonar.placements],
        ],
        "plant": [
            config.plant.robot_radius_m, config.plant.arm_tau_s,
            list(config.plant.arm_rate_limits), config.plant.ptru_tau_s,
            config.plant.ptru_rate_limit_rad_s,
            config.plant.imu_gyro_sigma, config.plant.imu_accel_sigma,
        ],
        "rates": [
            config.rates.camera_pose_hz, config.rates.map_hz,
            config.rates.bus_report_hz, config.rates.scan_hz,
            config.rates.sonar_hz, config.rates.imu_hz,
        ],
        "mapping": [
            config.mapping.resolution_m,
            list(config.mapping.origin_xy) if config.mapping.origin_xy else None,
            config.mapping.width_cells, config.mapping.height_cells,
            config.mapping.log_odds_free, config.mapping.log_odds_hit,
            config.mapping.occupied_threshold, config.mapping.use_odometry_pose,
        ],
    }
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
