"""Deterministic 2D indoor world.

Holds the wall segments, the robot plant state (chassis pose, arm and
head joints), a virtual clock, and the seeded noise generators for
sensor synthesis.  All evolution is a pure function of the scenario,
the seed, and the command stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .locomotion import (
    BodyTwist,
    ChassisGeometry,
    Pose2D,
    WheelSpeeds,
    advance_pose,
    normalize_angle,
    twist_from_wheel_speeds,
)
from .manipulator import JointConfig, ManipulatorGeometry, clamp_joints
from .ptru import (
    PTRUAngles,
    PTRUWorkspace,
    Quaternion,
    quat_about_axis,
    quat_log_rotvec,
    quat_multiply,
    quaternion_from_ptru_angles,
)

__all__ = [
    "IMUSample",
    "LidarParams",
    "Scan",
    "ScenarioError",
    "SonarParams",
    "World",
    "load_scenario",
    "raycast_lidar",
    "sample_sonar",
    "step",
    "synthesize_imu",
]

SONAR_COUNT = 12


class ScenarioError(ValueError):
    """Malformed scenario document; message carries the line number."""


@dataclass(frozen=True)
class LidarParams:
    beam_count: int = 360
    angle_min_rad: float = 0.0
    range_min_m: float = 0.15
    range_max_m: float = 12.0
    noise_sigma_m: float = 0.0
    rate_hz: int = 10

    def __post_init__(self) -> None:
        if self.beam_count < 1:
            raise ValueError("beam_count must be >= 1")
        if not 0.0 <= self.range_min_m < self.range_max_m:
            raise ValueError("require 0 <= range_min < range_max")

    @property
    def angle_increment_rad(self) -> float:
        return 2.0 * math.pi / self.beam_count


@dataclass(frozen=True)
class SonarParams:
    range_max_m: float = 4.0
    noise_sigma_m: float = 0.0
    rate_hz: int = 20
    # (forward offset, lateral offset, mount angle) per sensor, body frame
    placements: tuple[tuple[float, float, float], ...] = tuple(
        (0.0, 0.0, i * math.pi / 6.0) for i in range(SONAR_COUNT)
    )


@dataclass(frozen=True)
class Scan:
    angle_min_rad: float
    angle_max_rad: float
    angle_increment_rad: float
    range_min_m: float
    range_max_m: float
    ranges_m: tuple[float, ...]
    stamp_s: float


@dataclass(frozen=True)
class IMUSample:
    orientation: Quaternion
    angular_velocity_rad_s: tuple[float, float, float]
    linear_acceleration_m_s2: tuple[float, float, float]
    stamp_s: float


@dataclass(frozen=True)
class PlantParams:
    """Actuator tracking behavior of the simulated plant."""

    robot_radius_m: float = 0.21
    arm_tau_s: float = 0.05
    arm_rate_limits: tuple[float, ...] = (0.2, 1.5, 1.5, 1.5, 1.5, 1.5, 0.1)
    ptru_tau_s: float = 0.02
    ptru_rate_limit_rad_s: float = 6.0
    imu_gyro_sigma: float = 0.0
    imu_accel_sigma: float = 0.0


class World:
    """Mutable simulation state; advance it with step()."""

    def __init__(
        self,
        segments: list[tuple[float, float, float, float]],
        start: Pose2D,
        seed: int = 0,
        chassis: ChassisGeometry | None = None,
        arm_geometry: ManipulatorGeometry | None = None,
        ptru_workspace: PTRUWorkspace | None = None,
        plant: PlantParams | None = None,
    ):
        self.segments = [tuple(float(v) for v in s) for s in segments]
        self.pose = start
        self.twist = BodyTwist()
        self.joints = JointConfig(lift_m=0.0)
        self.ptru = PTRUAngles()
        self.clock_s = 0.0
        self.seed = int(seed)
        self.chassis = chassis or ChassisGeometry()
        self.arm_geometry = arm_geometry or ManipulatorGeometry()
        self.ptru_workspace = ptru_workspace or PTRUWorkspace()
        self.plant = plant or PlantParams()

        self._lidar_rng = np.random.default_rng([self.seed, 1])
        self._sonar_rng = np.random.default_rng([self.seed, 2])
        self._imu_rng = np.random.default_rng([self.seed, 3])

        # previous-step snapshot for finite-difference IMU synthesis
        self._prev_pose = start
        self._prev_twist = BodyTwist()
        self._prev_ptru = PTRUAngles()
        self._prev_dt = 0.0

        self._seg_a = np.zeros((0, 2))
        self._seg_d = np.zeros((0, 2))
        if self.segments:
            arr = np.asarray(self.segments, dtype=float)
            self._seg_a = arr[:, 0:2]
            self._seg_d = arr[:, 2:4] - arr[:, 0:2]

    # -- geometry ----------------------------------------------------------

    def bounding_box(self, margin: float = 1.0) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over walls and start pose, padded."""
        xs = [self.pose.x_m]
        ys = [self.pose.y_m]
        for x1, y1, x2, y2 in self.segments:
            xs += [x1, x2]
            ys += [y1, y2]
        if not self.segments:
            margin = max(margin, 5.0)
        return (min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin)

    def cast_rays(self, origins: np.ndarray, angles: np.ndarray, range_max: float) -> np.ndarray:
        """Nearest wall distance per ray, or range_max when nothing is hit."""
        n = len(angles)
        if n == 0:
            return np.zeros(0)
        u = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (n, 2)
        if len(self._seg_a) == 0:
            return np.full(n, range_max)
        rel = self._seg_a[None, :, :] - origins[:, None, :]       # (n, s, 2)
        d = self._seg_d[None, :, :]                               # (1, s, 2)
        denom = u[:, None, 0] * d[..., 1] - u[:, None, 1] * d[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rel[..., 0] * d[..., 1] - rel[..., 1] * d[..., 0]) / denom
            v = (u[:, None, 1] * rel[..., 0] - u[:, None, 0] * rel[..., 1]) / denom
        hit = (np.abs(denom) > 1e-12) & (v >= 0.0) & (v <= 1.0) & (t > 1e-9)
        t = np.where(hit, t, np.inf)
        best = t.min(axis=1)
        return np.minimum(best, range_max)

    def distance_to_walls(self, x: float, y: float) -> float:
        if len(self._seg_a) == 0:
            return math.inf
        p = np.array([x, y])
        rel = p[None, :] - self._seg_a
        seg_len_sq = (self._seg_d**2).sum(axis=1)
        tt = np.clip(
            np.divide(
                (rel * self._seg_d).sum(axis=1),
                seg_len_sq,
                out=np.zeros_like(seg_len_sq),
                where=seg_len_sq > 0,
            ),
            0.0,
            1.0,
        )
        closest = self._seg_a + tt[:, None] * self._seg_d
        return float(np.sqrt(((p[None, :] - closest) ** 2).sum(axis=1)).min())

    # -- dynamics ----------------------------------------------------------

    def _translation_limit(self, start: tuple[float, float], delta: tuple[float, float]) -> float:
        """Largest fraction of delta the robot disc may travel before touching a wall."""
        radius = self.plant.robot_radius_m
        dist = math.hypot(*delta)
        if dist == 0.0 or len(self._seg_a) == 0:
            return 1.0
        s_min = 1.0
        for (ax, ay), (dx, dy) in zip(self._seg_a, self._seg_d):
            s = _swept_disc_entry(start, delta, (ax, ay), (dx, dy), radius)
            if s is not None:
                s_min = min(s_min, s)
        return max(0.0, s_min)

    def step(
        self,
        dt_s: float,
        wheel_cmd: WheelSpeeds | None = None,
        joint_cmd: JointConfig | None = None,
        ptru_cmd: PTRUAngles | None = None,
    ) -> "World":
        """Advance the plant one interval; stops translation at wall contact."""
        if not dt_s > 0.0:
            raise ValueError("dt_s must be > 0")
        self._prev_pose = self.pose
        self._prev_twist = self.twist
        self._prev_ptru = self.ptru
        self._prev_dt = dt_s

        twist = (
            twist_from_wheel_speeds(wheel_cmd, self.chassis)
            if wheel_cmd is not None
            else BodyTwist()
        )
        free = advance_pose(self.pose, twist, dt_s)
        delta = (free.x_m - self.pose.x_m, free.y_m - self.pose.y_m)
        s = self._translation_limit((self.pose.x_m, self.pose.y_m), delta)
        self.pose = Pose2D(
            self.pose.x_m + s * delta[0],
            self.pose.y_m + s * delta[1],
            free.heading_rad,  # the disc may always rotate in place
        )
        self.twist = twist if s >= 1.0 else BodyTwist(
            twist.vx_m_s * s, twist.vy_m_s * s, twist.w_rad_s
        )

        if joint_cmd is not None:
            self.joints = self._track_joints(self.joints, joint_cmd, dt_s)
        if ptru_cmd is not None:
            self.ptru = self._track_ptru(self.ptru, ptru_cmd, dt_s)
        self.clock_s += dt_s
        return self

    def _track_joints(self, current: JointConfig, cmd: JointConfig, dt: float) -> JointConfig:
        cmd = clamp_joints(cmd, self.arm_geometry)
        alpha = 1.0 - math.exp(-dt / self.plant.arm_tau_s)
        limits = self.plant.arm_rate_limits
        vals = list(current.as_tuple())
        targets = cmd.as_tuple()
        for i in range(7):
            delta = (targets[i] - vals[i]) * alpha
            cap = limits[i] * dt
            vals[i] += max(-cap, min(cap, delta))
        return JointConfig(lift_m=vals[0], theta_rad=tuple(vals[1:6]), gripper_m=vals[6])

    def _track_ptru(self, current: PTRUAngles, cmd: PTRUAngles, dt: float) -> PTRUAngles:
        cmd = self.ptru_workspace.clamp(cmd)
        alpha = 1.0 - math.exp(-dt / self.plant.ptru_tau_s)
        cap = self.plant.ptru_rate_limit_rad_s * dt
        out = []
        for cur, tgt in zip(current.as_tuple(), cmd.as_tuple()):
            delta = (tgt - cur) * alpha
            out.append(cur + max(-cap, min(cap, delta)))
        return PTRUAngles(*out)

    # -- sensors -----------------------------------------------------------

    def lidar_scan(self, params: LidarParams) -> Scan:
        offsets = params.angle_min_rad + np.arange(params.beam_count) * params.angle_increment_rad
        angles = self.pose.heading_rad + offsets
        origins = np.repeat(
            np.array([[self.pose.x_m, self.pose.y_m]]), params.beam_count, axis=0
        )
        ranges = self.cast_rays(origins, angles, params.range_max_m)
        if params.noise_sigma_m > 0.0:
            hit = ranges < params.range_max_m
            noise = self._lidar_rng.normal(0.0, params.noise_sigma_m, params.beam_count)
            ranges = np.where(hit, ranges + noise, ranges)
        ranges = np.clip(ranges, params.range_min_m, params.range_max_m)
        # readings at or below range_min carry no information: report no-return
        ranges = np.where(ranges <= params.range_min_m, params.range_max_m, ranges)
        return Scan(
            angle_min_rad=params.angle_min_rad,
            angle_max_rad=params.angle_min_rad
            + (params.beam_count - 1) * params.angle_increment_rad,
            angle_increment_rad=params.angle_increment_rad,
            range_min_m=params.range_min_m,
            range_max_m=params.range_max_m,
            ranges_m=tuple(float(r) for r in ranges),
            stamp_s=self.clock_s,
        )

    def sonar_ranges(self, params: SonarParams) -> tuple[float, ...]:
        if len(params.placements) != SONAR_COUNT:
            raise ValueError(f"expected {SONAR_COUNT} sonar placements")
        h = self.pose.heading_rad
        c, s = math.cos(h), math.sin(h)
        origins = np.array(
            [
                (
                    self.pose.x_m + c * fx - s * fy,
                    self.pose.y_m + s * fx + c * fy,
                )
                for fx, fy, _ in params.placements
            ]
        )
        angles = np.array([h + a for _, _, a in params.placements])
        ranges = self.cast_rays(origins, angles, params.range_max_m)
        if params.noise_sigma_m > 0.0:
            hit = ranges < params.range_max_m
            noise = self._sonar_rng.normal(0.0, params.noise_sigma_m, SONAR_COUNT)
            ranges = np.where(hit, np.clip(ranges + noise, 0.0, params.range_max_m), ranges)
        return tuple(float(r) for r in ranges)

    def imu_sample(self, mount: str) -> IMUSample:
        """Synthesize one IMU reading for the body or head mount."""
        if mount not in ("body", "head"):
            raise ValueError("mount must be 'body' or 'head'")
        body_q = quat_about_axis("z", self.pose.heading_rad)
        if mount == "head":
            q = quat_multiply(body_q, quaternion_from_ptru_angles(self.ptru)).normalized()
            prev_q = quat_multiply(
                quat_about_axis("z", self._prev_pose.heading_rad),
                quaternion_from_ptru_angles(self._prev_ptru),
            ).normalized()
        else:
            q = body_q.normalized()
            prev_q = quat_about_axis("z", self._prev_pose.heading_rad).normalized()

        dt = self._prev_dt
        if dt > 0.0:
            gyro = tuple(
                v / dt for v in quat_log_rotvec(quat_multiply(prev_q.conjugate(), q))
            )
            h0, h1 = self._prev_pose.heading_rad, self.pose.heading_rad
            v0 = _body_to_world(self._prev_twist, h0)
            v1 = _body_to_world(self.twist, h1)
            a_world = ((v1[0] - v0[0]) / dt, (v1[1] - v0[1]) / dt)
            ch, sh = math.cos(h1), math.sin(h1)
            accel = (ch * a_world[0] + sh * a_world[1], -sh * a_world[0] + ch * a_world[1], 0.0)
        else:
            gyro = (0.0, 0.0, 0.0)
            accel = (0.0, 0.0, 0.0)

        gs = self.plant.imu_gyro_sigma
        as_ = self.plant.imu_accel_sigma
        if gs > 0.0 or as_ > 0.0:
            ng = self._imu_rng.normal(0.0, gs if gs > 0 else 0.0, 3)
            na = self._imu_rng.normal(0.0, as_ if as_ > 0 else 0.0, 3)
            gyro = tuple(g + e for g, e in zip(gyro, ng))
            accel = tuple(a + e for a, e in zip(accel, na))
        return IMUSample(
            orientation=q,
            angular_velocity_rad_s=gyro,
            linear_acceleration_m_s2=accel,
            stamp_s=self.clock_s,
        )


def _body_to_world(twist: BodyTwist, heading: float) -> tuple[float, float]:
    c, s = math.cos(heading), math.sin(heading)
    return (twist.vx_m_s * c - twist.vy_m_s * s, twist.vx_m_s * s + twist.vy_m_s * c)


def _point_segment_distance(
    px: float, py: float, ax: float, ay: float, dx: float, dy: float
) -> float:
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    u = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg_len_sq))
    return math.hypot(px - (ax + u * dx), py - (ay + u * dy))


def _swept_disc_entry(
    start: tuple[float, float],
    delta: tuple[float, float],
    seg_a: tuple[float, float],
    seg_d: tuple[float, float],
    radius: float,
) -> float | None:
    """Earliest s in [0, 1] where a disc moving by s*delta first touches the segment.

    Equivalent to intersecting the center ray with the segment's capsule of
    the disc radius.  Returns None when the sweep stays clear.
    """
    ax, ay = seg_a
    dx, dy = seg_d
    px, py = start
    mx, my = delta
    seg_len_sq = dx * dx + dy * dy

    # already in contact: block immediately when the motion closes distance
    d_start = _point_segment_distance(px, py, ax, ay, dx, dy)
    if d_start <= radius:
        d_end = _point_segment_distance(px + mx, py + my, ax, ay, dx, dy)
        return 0.0 if d_end < d_start else None

    entries: list[float] = []

    # flat sides: signed line distance reaches +/- radius while the contact
    # point projects inside the segment and the disc is moving inward
    if seg_len_sq > 0.0:
        seg_len = math.sqrt(seg_len_sq)
        nx, ny = -dy / seg_len, dx / seg_len
        d0 = (px - ax) * nx + (py - ay) * ny
        dv = mx * nx + my * ny
        if abs(dv) > 1e-15:
            for target in (radius, -radius):
                s = (target - d0) / dv
                if not 0.0 <= s <= 1.0:
                    continue
                if target * dv >= 0.0:  # moving away from this side
                    continue
                cx, cy = px + s * mx, py + s * my
                u = ((cx - ax) * dx + (cy - ay) * dy) / seg_len_sq
                if 0.0 <= u <= 1.0:
                    entries.append(s)

    # endpoint caps: |p + s*delta - e| = radius with inward radial velocity
    for ex, ey in ((ax, ay), (ax + dx, ay + dy)):
        fx, fy = px - ex, py - ey
        a = mx * mx + my * my
        if a <= 0.0:
            continue
        b = 2.0 * (fx * mx + fy * my)
        c = fx * fx + fy * fy - radius * radius
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            continue
        sq = math.sqrt(disc)
        for s in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
            if 0.0 <= s <= 1.0 and (b + 2.0 * a * s) < 0.0:
                entries.append(s)

    if not entries:
        return None
    return min(entries)


def load_scenario(
    text: str,
    *,
    seed_override: int | None = None,
    **world_kwargs,
) -> World:
    """Parse a line-oriented scenario document into a World.

    Directives: `wall x1 y1 x2 y2`, `start x y heading`, `seed N`,
    `#` comments.  Lengths in meters, angles in radians.
    """
    segments: list[tuple[float, float, float, float]] = []
    start: Pose2D | None = None
    seed = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        word, args = parts[0], parts[1:]
        try:
            if word == "wall":
                if len(args) != 4:
                    raise ValueError("wall needs 4 coordinates")
                vals = [float(v) for v in args]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError("non-finite coordinate")
                segments.append(tuple(vals))
            elif word == "start":
                if len(args) != 3:
                    raise ValueError("start needs x y heading")
                vals = [float(v) for v in args]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError("non-finite coordinate")
                start = Pose2D(vals[0], vals[1], normalize_angle(vals[2]))
            elif word == "seed":
                if len(args) != 1:
                    raise ValueError("seed needs one integer")
                seed = int(args[0])
            else:
                raise ValueError(f"unknown directive {word!r}")
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
    if start is None:
        raise ScenarioError("scenario has no start pose")
    if seed_override is not None:
        seed = seed_override
    return World(segments, start, seed=seed, **world_kwargs)


# Operation-style wrappers used by callers that prefer free functions.

def step(world: World, dt_s: float, wheel_cmd=None, joint_cmd=None, ptru_cmd=None) -> World:
    return world.step(dt_s, wheel_cmd, joint_cmd, ptru_cmd)


def raycast_lidar(world: World, params: LidarParams) -> Scan:
    return world.lidar_scan(params)


def sample_sonar(world: World, params: SonarParams) -> tuple[float, ...]:
    return world.sonar_ranges(params)


def synthesize_imu(world: World, mount: str) -> IMUSample:
    return world.imu_sample(mount)
