"""The 100 Hz controllers bridging operator commands to plant commands.

Locomotion shapes twists through the chassis bounds and a wheel-space
acceleration limit; the manipulator follows time-stamped joint knots
with a yield-under-torque compliance rule; the head controller tracks
predicted operator head motion under per-axis rate limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .locomotion import (
    BodyTwist,
    ChassisGeometry,
    WheelSpeeds,
    clamp_twist,
    twist_from_wheel_speeds,
    wheel_speeds_from_twist,
)
from .manipulator import (
    JointConfig,
    JointLimitError,
    ManipulatorGeometry,
    validate_joints,
)
from .ptru import (
    HeadSampleHistory,
    NoDataError,
    PTRUAngles,
    PTRUWorkspace,
    predict_head_pose,
    ptru_angles_from_quaternion,
)

__all__ = [
    "ControllerState",
    "load_trajectory",
    "locomotion_step",
    "manipulator_step",
    "ptru_step",
]

ARM_AXES = 6  # lift + five revolute joints; the gripper is not compliant


@dataclass
class ControllerState:
    """Mutable state shared by the three controllers."""

    last_wheels: WheelSpeeds = field(default_factory=WheelSpeeds)
    last_twist: BodyTwist = field(default_factory=BodyTwist)
    active_trajectory: list[tuple[float, JointConfig]] = field(default_factory=list)
    hold_joints: JointConfig = field(default_factory=JointConfig)
    stiffness_nm_rad: tuple[float, ...] = (50.0,) * ARM_AXES
    torque_threshold_nm: float = 1.0
    ptru_latency_estimate_s: float = 0.0
    ptru_rate_limit_rad_s: float = 3.0
    ptru_workspace: PTRUWorkspace = field(default_factory=PTRUWorkspace)
    last_ptru: PTRUAngles = field(default_factory=PTRUAngles)

    def __post_init__(self) -> None:
        if any(k <= 0.0 for k in self.stiffness_nm_rad):
            raise ValueError("stiffness must be > 0")


def locomotion_step(
    state: ControllerState,
    cmd: BodyTwist,
    dt_s: float,
    chassis: ChassisGeometry,
) -> WheelSpeeds:
    """Clamp the twist, limit wheel acceleration, convert to wheel rates."""
    if not dt_s > 0.0:
        raise ValueError("dt_s must be > 0")
    desired = wheel_speeds_from_twist(clamp_twist(cmd, chassis), chassis)
    cap = chassis.max_wheel_accel_rad_s2 * dt_s
    prev = state.last_wheels.as_tuple()
    limited = WheelSpeeds(
        *(p + max(-cap, min(cap, d - p)) for p, d in zip(prev, desired.as_tuple()))
    )
    state.last_wheels = limited
    state.last_twist = twist_from_wheel_speeds(limited, chassis)
    return limited


def load_trajectory(
    state: ControllerState,
    knots: list[tuple[float, JointConfig]],
    geom: ManipulatorGeometry,
) -> None:
    """Install a joint trajectory; rejected wholesale if any knot is invalid."""
    if not knots:
        raise ValueError("trajectory needs at least one knot")
    times = [t for t, _ in knots]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("knot times must be strictly increasing")
    for t, joints in knots:
        violations = validate_joints(joints, geom)
        if violations:
            raise JointLimitError(violations)
    state.active_trajectory = list(knots)


def _interpolate(knots: list[tuple[float, JointConfig]], now_s: float) -> JointConfig:
    if now_s <= knots[0][0]:
        return knots[0][1]
    if now_s >= knots[-1][0]:
        return knots[-1][1]
    for (t0, a), (t1, b) in zip(knots, knots[1:]):
        if t0 <= now_s <= t1:
            u = (now_s - t0) / (t1 - t0)
            av, bv = a.as_tuple(), b.as_tuple()
            vals = [x + u * (y - x) for x, y in zip(av, bv)]
            return JointConfig(lift_m=vals[0], theta_rad=tuple(vals[1:6]), gripper_m=vals[6])
    return knots[-1][1]


def manipulator_step(
    state: ControllerState,
    now_s: float,
    measured: JointConfig,
    external_torque_nm: tuple[float, ...] | None = None,
) -> JointConfig:
    """Interpolate the trajectory and yield under above-threshold torque.

    A loaded joint backs off from its target toward the measured position
    by torque/stiffness, never past the measured position itself.
    """
    target = (
        _interpolate(state.active_trajectory, now_s)
        if state.active_trajectory
        else state.hold_joints
    )
    if external_torque_nm is None:
        return target
    if len(external_torque_nm) != ARM_AXES:
        raise ValueError(f"expected {ARM_AXES} torque values")

    tvals = list(target.as_tuple())
    mvals = measured.as_tuple()
    for i, torque in enumerate(external_torque_nm):
        if abs(torque) <= state.torque_threshold_nm:
            continue
        give = abs(torque) / state.stiffness_nm_rad[i]
        if tvals[i] >= mvals[i]:
            tvals[i] = max(mvals[i], tvals[i] - give)
        else:
            tvals[i] = min(mvals[i], tvals[i] + give)
    return JointConfig(lift_m=tvals[0], theta_rad=tuple(tvals[1:6]), gripper_m=tvals[6])


def ptru_step(
    state: ControllerState,
    history: HeadSampleHistory,
    dt_s: float,
) -> PTRUAngles:
    """Predict the head pose over the latency estimate and rate-limit it."""
    if not dt_s > 0.0:
        raise ValueError("dt_s must be > 0")
    try:
        predicted = predict_head_pose(history, state.ptru_latency_estimate_s)
    except NoDataError:
        return state.last_ptru
    raw = ptru_angles_from_quaternion(predicted)
    cap = state.ptru_rate_limit_rad_s * dt_s
    prev = state.last_ptru.as_tuple()
    limited = PTRUAngles(
        *(p + max(-cap, min(cap, v - p)) for p, v in zip(prev, raw.as_tuple()))
    )
    out = state.ptru_workspace.clamp(limited)
    state.last_ptru = out
    return out
