"""Mecanum drive kinematics and dead-reckoning odometry.

The four-wheel Mecanum base is holonomic: a body twist (vx, vy, w) maps
linearly to the four wheel angular rates, and the Moore-Penrose
pseudo-inverse of that map recovers the twist from sensed wheel speeds.
Odometry integrates the recovered twist in the world frame using a
midpoint-heading rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "BodyTwist",
    "ChassisGeometry",
    "Pose2D",
    "WheelSpeeds",
    "clamp_twist",
    "integrate_odometry",
    "normalize_angle",
    "twist_from_wheel_speeds",
    "wheel_speeds_from_twist",
]


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class BodyTwist:
    """Planar body-frame velocity command: longitudinal, lateral, angular."""

    vx_m_s: float = 0.0
    vy_m_s: float = 0.0
    w_rad_s: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.vx_m_s, self.vy_m_s, self.w_rad_s)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass(frozen=True)
class WheelSpeeds:
    """Angular rates of wheels 1..4 in rad/s."""

    w1: float = 0.0
    w2: float = 0.0
    w3: float = 0.0
    w4: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass(frozen=True)
class Pose2D:
    """World-frame pose; heading is kept in (-pi, pi] by every update."""

    x_m: float = 0.0
    y_m: float = 0.0
    heading_rad: float = 0.0


@dataclass(frozen=True)
class ChassisGeometry:
    """Mecanum chassis parameters.

    wheel_radius_m is the wheel radius r, half_base_x_m / half_base_y_m the
    center-to-wheel half distances, so the lever arm is their sum.
    encoder_sign maps sensed encoder rates to the kinematic wheel-speed
    convention (mirrored motor mounting flips alternate wheels).
    """

    wheel_radius_m: float = 0.05
    half_base_x_m: float = 0.15
    half_base_y_m: float = 0.15
    encoder_sign: tuple[int, int, int, int] = (1, -1, 1, -1)
    max_twist: BodyTwist = field(default_factory=lambda: BodyTwist(1.0, 1.0, 2.0))
    max_wheel_accel_rad_s2: float = 50.0

    def __post_init__(self) -> None:
        if not self.wheel_radius_m > 0.0:
            raise ValueError("wheel_radius_m must be > 0")
        if not (self.half_base_x_m > 0.0 and self.half_base_y_m > 0.0):
            raise ValueError("half_base distances must be > 0")
        if len(self.encoder_sign) != 4 or any(s not in (1, -1) for s in self.encoder_sign):
            raise ValueError("encoder_sign must be four values in {+1, -1}")
        if not self.max_wheel_accel_rad_s2 > 0.0:
            raise ValueError("max_wheel_accel_rad_s2 must be > 0")

    @property
    def lever_arm_m(self) -> float:
        return self.half_base_x_m + self.half_base_y_m


def wheel_speeds_from_twist(twist: BodyTwist, chassis: ChassisGeometry) -> WheelSpeeds:
    """Inverse kinematics: body twist -> wheel angular rates.

    Row signs: w1 = (vx + vy - L*w)/r, w2 = (-vx + vy - L*w)/r,
    w3 = (vx - vy - L*w)/r, w4 = (-vx - vy - L*w)/r with L = lx + ly.
    """
    if not twist.is_finite():
        raise ValueError("twist must be finite")
    r = chassis.wheel_radius_m
    arm = chassis.lever_arm_m * twist.w_rad_s
    vx, vy = twist.vx_m_s, twist.vy_m_s
    return WheelSpeeds(
        (vx + vy - arm) / r,
        (-vx + vy - arm) / r,
        (vx - vy - arm) / r,
        (-vx - vy - arm) / r,
    )


def twist_from_wheel_speeds(wheels: WheelSpeeds, chassis: ChassisGeometry) -> BodyTwist:
    """Forward velocity map: the pseudo-inverse of wheel_speeds_from_twist.

    Expects wheel rates already in the kinematic convention (encoder_sign
    applied by the caller when the input comes from sensed encoder data).
    """
    if not wheels.is_finite():
        raise ValueError("wheel speeds must be finite")
    r = chassis.wheel_radius_m
    w1, w2, w3, w4 = wheels.as_tuple()
    return BodyTwist(
        (r / 4.0) * (w1 - w2 + w3 - w4),
        (r / 4.0) * (w1 + w2 - w3 - w4),
        -(r / (4.0 * chassis.lever_arm_m)) * (w1 + w2 + w3 + w4),
    )


def integrate_odometry(
    pose: Pose2D, sensed: WheelSpeeds, dt_s: float, chassis: ChassisGeometry
) -> Pose2D:
    """Advance a dead-reckoned pose by one step of sensed wheel speeds.

    Applies encoder_sign, recovers the body twist, rotates it into the
    world frame at the midpoint heading, and integrates over dt_s.
    """
    if not dt_s > 0.0:
        raise ValueError("dt_s must be > 0")
    s = chassis.encoder_sign
    kinematic = WheelSpeeds(
        s[0] * sensed.w1, s[1] * sensed.w2, s[2] * sensed.w3, s[3] * sensed.w4
    )
    twist = twist_from_wheel_speeds(kinematic, chassis)
    return advance_pose(pose, twist, dt_s)


def advance_pose(pose: Pose2D, twist: BodyTwist, dt_s: float) -> Pose2D:
    """Integrate a body twist over dt_s with the midpoint-heading rule."""
    h_mid = pose.heading_rad + 0.5 * twist.w_rad_s * dt_s
    c, s = math.cos(h_mid), math.sin(h_mid)
    return Pose2D(
        pose.x_m + (twist.vx_m_s * c - twist.vy_m_s * s) * dt_s,
        pose.y_m + (twist.vx_m_s * s + twist.vy_m_s * c) * dt_s,
        normalize_angle(pose.heading_rad + twist.w_rad_s * dt_s),
    )


def clamp_twist(twist: BodyTwist, chassis: ChassisGeometry) -> BodyTwist:
    """Componentwise saturation of a twist to the chassis bounds."""
    bound = chassis.max_twist

    def clamp(v: float, limit: float) -> float:
        return max(-limit, min(limit, v))

    return BodyTwist(
        clamp(twist.vx_m_s, bound.vx_m_s),
        clamp(twist.vy_m_s, bound.vy_m_s),
        clamp(twist.w_rad_s, bound.w_rad_s),
    )
