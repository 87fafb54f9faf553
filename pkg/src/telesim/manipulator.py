"""Closed-form kinematics for the cylindrical manipulator.

The arm is a vertical prismatic lift carrying a 3-DoF planar revolute
chain, a 2-DoF wrist (pitch, roll) and a parallel gripper.  Both the
forward map and the inverse are algebraic; the inverse always returns the
elbow-positive branch (theta2 in [0, pi]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "EEPose",
    "JointConfig",
    "JointLimitError",
    "LimitViolation",
    "ManipulatorGeometry",
    "UnreachablePoseError",
    "forward_kinematics",
    "gripper_target",
    "solve_ik",
    "validate_joints",
]

# acos arguments this far outside [-1, 1] are treated as rounding dust
ACOS_DUST = 1e-12

JOINT_NAMES = ("lift", "theta1", "theta2", "theta3", "theta4", "theta5")


class UnreachablePoseError(ValueError):
    """Requested pose lies outside the arm workspace."""

    def __init__(self, quantity: str, value: float, lo: float, hi: float):
        self.quantity = quantity
        self.value = value
        self.bounds = (lo, hi)
        super().__init__(
            f"unreachable pose: {quantity}={value:.6g} outside [{lo:.6g}, {hi:.6g}]"
        )


@dataclass(frozen=True)
class LimitViolation:
    joint: str
    value: float
    lo: float
    hi: float


class JointLimitError(ValueError):
    """One or more joints violate their configured limits."""

    def __init__(self, violations: list[LimitViolation]):
        self.violations = violations
        names = ", ".join(f"{v.joint}={v.value:.6g}" for v in violations)
        super().__init__(f"joint limits violated: {names}")


@dataclass(frozen=True)
class ManipulatorGeometry:
    """Link lengths l0..l5, joint ranges and gripper/payload bounds."""

    link_lengths_m: tuple[float, float, float, float, float, float] = (
        0.10, 0.20, 0.20, 0.05, 0.10, 0.10,
    )
    lift_range_m: tuple[float, float] = (0.0, 0.8)
    joint_limits_rad: tuple[tuple[float, float], ...] = field(
        default_factory=lambda: (
            (-math.pi / 2, math.pi / 2),
            (0.0, math.pi),
            (-math.pi, math.pi),
            (-math.pi / 2, math.pi / 2),
            (-math.pi, math.pi),
        )
    )
    gripper_max_m: float = 0.08
    payload_limit_kg: float = 1.0
    z_offset_m: float = 0.0

    def __post_init__(self) -> None:
        if len(self.link_lengths_m) != 6 or any(l <= 0.0 for l in self.link_lengths_m):
            raise ValueError("link_lengths_m must be six positive lengths")
        if not self.lift_range_m[0] < self.lift_range_m[1]:
            raise ValueError("lift_range_m must be an increasing interval")
        if len(self.joint_limits_rad) != 5:
            raise ValueError("joint_limits_rad must cover theta1..theta5")
        for lo, hi in self.joint_limits_rad:
            if not lo < hi:
                raise ValueError("each joint limit must satisfy min < max")
        if not self.gripper_max_m > 0.0:
            raise ValueError("gripper_max_m must be > 0")


@dataclass(frozen=True)
class JointConfig:
    """Prismatic lift, five revolute angles, gripper opening width."""

    lift_m: float = 0.0
    theta_rad: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)
    gripper_m: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (self.lift_m, *self.theta_rad, self.gripper_m)


@dataclass(frozen=True)
class EEPose:
    """End-effector goal: position, wrist pitch, planar heading, wrist roll."""

    x_m: float = 0.0
    y_m: float = 0.0
    z_m: float = 0.0
    pitch_rad: float = 0.0
    planar_heading_rad: float = 0.0
    roll_rad: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.x_m, self.y_m, self.z_m,
            self.pitch_rad, self.planar_heading_rad, self.roll_rad,
        )

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


def forward_kinematics(joints: JointConfig, geom: ManipulatorGeometry) -> EEPose:
    """Map a joint configuration to the end-effector pose."""
    if not all(math.isfinite(v) for v in joints.as_tuple()):
        raise ValueError("joints must be finite")
    l0, l1, l2, l3, l4, l5 = geom.link_lengths_m
    t1, t2, t3, t4, t5 = joints.theta_rad
    phi = t1 + t2 + t3
    wrist = l3 + (l4 + l5) * math.cos(t4)
    return EEPose(
        x_m=l0 + l1 * math.cos(t1) + l2 * math.cos(t1 + t2) + wrist * math.cos(phi),
        y_m=l1 * math.sin(t1) + l2 * math.sin(t1 + t2) + wrist * math.sin(phi),
        z_m=geom.z_offset_m + joints.lift_m + (l4 + l5) * math.sin(t4),
        pitch_rad=t4,
        planar_heading_rad=phi,
        roll_rad=t5,
    )


def _checked_acos(arg: float, quantity: str) -> float:
    if arg > 1.0 + ACOS_DUST or arg < -1.0 - ACOS_DUST:
        raise UnreachablePoseError(quantity, arg, -1.0, 1.0)
    return math.acos(max(-1.0, min(1.0, arg)))


def solve_ik(pose: EEPose, geom: ManipulatorGeometry) -> JointConfig:
    """Solve the pose -> joints problem algebraically (elbow-positive branch).

    Raises UnreachablePoseError when the planar radius falls outside
    [|l1 - l2|, l1 + l2] or collapses to zero, and JointLimitError when the
    unique solution violates configured joint ranges.
    """
    if not pose.is_finite():
        raise ValueError("pose must be finite")
    l0, l1, l2, l3, l4, l5 = geom.link_lengths_m
    pitch, phi, roll = pose.pitch_rad, pose.planar_heading_rad, pose.roll_rad

    wrist = l3 + (l4 + l5) * math.cos(pitch)
    x = pose.x_m - l0 - wrist * math.cos(phi)
    y = pose.y_m - wrist * math.sin(phi)
    rho_sq = x * x + y * y
    rho = math.sqrt(rho_sq)
    if rho <= ACOS_DUST:  # degenerate: planar direction undefined
        raise UnreachablePoseError("planar_radius", rho, abs(l1 - l2), l1 + l2)

    t2 = math.pi - _checked_acos(
        (-rho_sq + l1 * l1 + l2 * l2) / (2.0 * l1 * l2), "elbow_cosine"
    )
    t1 = math.atan2(y, x) - _checked_acos(
        (rho_sq + l1 * l1 - l2 * l2) / (2.0 * l1 * rho), "shoulder_cosine"
    )
    t3 = phi - t1 - t2
    lift = pose.z_m - geom.z_offset_m - (l4 + l5) * math.sin(pitch)

    joints = JointConfig(lift_m=lift, theta_rad=(t1, t2, t3, pitch, roll))
    violations = validate_joints(joints, geom)
    if violations:
        raise JointLimitError(violations)
    return joints


def validate_joints(joints: JointConfig, geom: ManipulatorGeometry) -> list[LimitViolation]:
    """Report every limit violation in joint order; empty list means valid."""
    out: list[LimitViolation] = []
    lo, hi = geom.lift_range_m
    if not lo <= joints.lift_m <= hi:
        out.append(LimitViolation("lift", joints.lift_m, lo, hi))
    for name, value, (jlo, jhi) in zip(
        JOINT_NAMES[1:], joints.theta_rad, geom.joint_limits_rad
    ):
        if not jlo <= value <= jhi:
            out.append(LimitViolation(name, value, jlo, jhi))
    if not 0.0 <= joints.gripper_m <= geom.gripper_max_m:
        out.append(LimitViolation("gripper", joints.gripper_m, 0.0, geom.gripper_max_m))
    return out


def gripper_target(width_m: float, geom: ManipulatorGeometry) -> float:
    """Clamp a commanded gripper width to [0, gripper_max_m]."""
    if not math.isfinite(width_m):
        raise ValueError("width must be finite")
    return max(0.0, min(geom.gripper_max_m, width_m))


def clamp_joints(joints: JointConfig, geom: ManipulatorGeometry) -> JointConfig:
    """Clamp every joint into its configured range."""
    lo, hi = geom.lift_range_m
    theta = tuple(
        max(jlo, min(jhi, v))
        for v, (jlo, jhi) in zip(joints.theta_rad, geom.joint_limits_rad)
    )
    return replace(
        joints,
        lift_m=max(lo, min(hi, joints.lift_m)),
        theta_rad=theta,
        gripper_m=max(0.0, min(geom.gripper_max_m, joints.gripper_m)),
    )
