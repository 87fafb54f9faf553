"""Pan-Tilt-Roll head unit: orientation conversions, motion prediction,
and stereo-baseline adjustment.

The joint extraction follows the head controller's ZYX convention:

    pan  = atan2(-2(qx qy - qw qz), qw^2 + qx^2 - qy^2 - qz^2)
    tilt = asin(2(qx qz + qw qy))
    roll = atan2(-2(qy qz - qw qx), qw^2 - qx^2 - qy^2 + qz^2)

Its inverse composes elemental rotations as q = Rx(roll) * Ry(tilt) * Rz(pan),
which makes the extraction a left inverse away from gimbal lock.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

__all__ = [
    "GIMBAL_LOCK_MARGIN",
    "HeadSampleHistory",
    "NoDataError",
    "PTRUAngles",
    "PTRUWorkspace",
    "Quaternion",
    "StereoRig",
    "predict_head_pose",
    "ptru_angles_from_quaternion",
    "quaternion_from_ptru_angles",
]

GIMBAL_LOCK_MARGIN = 1e-9
NORM_TOLERANCE = 1e-6

BASELINE_MIN_MM = 50.0
BASELINE_MAX_MM = 70.0
BASELINE_NOMINAL_MM = 60.0


class NoDataError(ValueError):
    """Raised when a prediction is requested from an empty history."""


@dataclass(frozen=True)
class Quaternion:
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero quaternion")
        return canonical(Quaternion(self.w / n, self.x / n, self.y / n, self.z / n))

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


def canonical(q: Quaternion) -> Quaternion:
    """Fix the sign ambiguity: w >= 0, ties broken on the first nonzero part."""
    for v in q.as_tuple():
        if v > 0.0:
            return q
        if v < 0.0:
            return Quaternion(-q.w, -q.x, -q.y, -q.z)
    return q


def quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_about_axis(axis: str, angle_rad: float) -> Quaternion:
    h = 0.5 * angle_rad
    c, s = math.cos(h), math.sin(h)
    if axis == "x":
        return Quaternion(c, s, 0.0, 0.0)
    if axis == "y":
        return Quaternion(c, 0.0, s, 0.0)
    if axis == "z":
        return Quaternion(c, 0.0, 0.0, s)
    raise ValueError(f"unknown axis {axis!r}")


def quat_log_rotvec(q: Quaternion) -> tuple[float, float, float]:
    """Rotation vector (axis * angle) of a unit quaternion, shortest arc."""
    q = canonical(q)
    vnorm = math.sqrt(q.x**2 + q.y**2 + q.z**2)
    if vnorm < 1e-15:
        return (0.0, 0.0, 0.0)
    angle = 2.0 * math.atan2(vnorm, q.w)
    k = angle / vnorm
    return (q.x * k, q.y * k, q.z * k)


def quat_exp_rotvec(rv: tuple[float, float, float]) -> Quaternion:
    """Unit quaternion for a rotation vector (axis * angle)."""
    angle = math.sqrt(rv[0] ** 2 + rv[1] ** 2 + rv[2] ** 2)
    if angle < 1e-15:
        return Quaternion(1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]).normalized()
    k = math.sin(0.5 * angle) / angle
    return Quaternion(math.cos(0.5 * angle), rv[0] * k, rv[1] * k, rv[2] * k)


@dataclass(frozen=True)
class PTRUAngles:
    pan_rad: float = 0.0
    tilt_rad: float = 0.0
    roll_rad: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.pan_rad, self.tilt_rad, self.roll_rad)


@dataclass(frozen=True)
class PTRUWorkspace:
    """Symmetric joint ranges of the head unit, radians."""

    pan_limit_rad: float = math.radians(160.0)
    tilt_limit_rad: float = math.radians(60.0)
    roll_limit_rad: float = math.radians(45.0)

    def clamp(self, a: PTRUAngles) -> PTRUAngles:
        def c(v: float, lim: float) -> float:
            return max(-lim, min(lim, v))

        return PTRUAngles(
            c(a.pan_rad, self.pan_limit_rad),
            c(a.tilt_rad, self.tilt_limit_rad),
            c(a.roll_rad, self.roll_limit_rad),
        )


def ptru_angles_from_quaternion(q: Quaternion) -> PTRUAngles:
    """Extract pan/tilt/roll joint targets from a unit head orientation.

    At gimbal lock (|sin tilt| -> 1) pan is set to zero and roll absorbs
    the remaining rotation about the locked axis.
    """
    if abs(q.norm() - 1.0) > NORM_TOLERANCE:
        raise ValueError(f"quaternion norm {q.norm():.9f} is not unit")
    q = q.normalized()
    w, x, y, z = q.as_tuple()

    sin_tilt = 2.0 * (x * z + w * y)
    sin_tilt = max(-1.0, min(1.0, sin_tilt))
    if abs(sin_tilt) > 1.0 - GIMBAL_LOCK_MARGIN:
        # Locked: only pan+/-roll observable; convention puts it all in roll.
        return PTRUAngles(
            pan_rad=0.0,
            tilt_rad=math.copysign(math.pi / 2.0, sin_tilt),
            roll_rad=2.0 * math.atan2(x, w),
        )
    return PTRUAngles(
        pan_rad=math.atan2(-2.0 * (x * y - w * z), w * w + x * x - y * y - z * z),
        tilt_rad=math.asin(sin_tilt),
        roll_rad=math.atan2(-2.0 * (y * z - w * x), w * w - x * x - y * y + z * z),
    )


def quaternion_from_ptru_angles(a: PTRUAngles) -> Quaternion:
    """Compose pan/tilt/roll back into a unit quaternion (w >= 0)."""
    if not all(math.isfinite(v) for v in a.as_tuple()):
        raise ValueError("angles must be finite")
    q = quat_multiply(
        quat_about_axis("x", a.roll_rad),
        quat_multiply(quat_about_axis("y", a.tilt_rad), quat_about_axis("z", a.pan_rad)),
    )
    return q.normalized()


class HeadSampleHistory:
    """Bounded ring of timestamped head orientations, strictly increasing stamps."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._ring: deque[tuple[float, Quaternion]] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._ring)

    def push(self, stamp_s: float, q: Quaternion) -> None:
        if self._ring and stamp_s <= self._ring[-1][0]:
            raise ValueError("sample stamps must be strictly increasing")
        self._ring.append((stamp_s, q.normalized()))

    def latest(self) -> tuple[float, Quaternion]:
        if not self._ring:
            raise NoDataError("head history is empty")
        return self._ring[-1]

    def last_two(self) -> tuple[tuple[float, Quaternion], tuple[float, Quaternion]]:
        if len(self._ring) < 2:
            raise NoDataError("need two samples")
        return self._ring[-2], self._ring[-1]


def predict_head_pose(history: HeadSampleHistory, horizon_s: float) -> Quaternion:
    """Extrapolate the latest head sample by horizon_s at constant angular rate.

    Velocity is estimated from the last two samples via the quaternion
    logarithm; one sample or a zero horizon returns the latest sample.
    """
    if horizon_s < 0.0:
        raise ValueError("horizon_s must be >= 0")
    stamp, latest = history.latest()
    if horizon_s == 0.0 or len(history) < 2:
        return latest
    (t0, q0), (t1, q1) = history.last_two()
    rv = quat_log_rotvec(quat_multiply(q0.conjugate(), q1))
    scale = horizon_s / (t1 - t0)
    step = (rv[0] * scale, rv[1] * scale, rv[2] * scale)
    return quat_multiply(q1, quat_exp_rotvec(step)).normalized()


class StereoRig:
    """Adjustable stereo camera pair; baseline clamped to its mechanical range."""

    def __init__(self, baseline_mm: float = BASELINE_NOMINAL_MM):
        self.baseline_mm = self.set_baseline(baseline_mm)

    def set_baseline(self, target_mm: float) -> float:
        if not math.isfinite(target_mm):
            raise ValueError("baseline must be finite")
        self.baseline_mm = max(BASELINE_MIN_MM, min(BASELINE_MAX_MM, target_mm))
        return self.baseline_mm
