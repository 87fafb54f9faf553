"""Deterministic desk-scale teleoperation simulator.

Analytic kinematics for a Mecanum base, cylindrical manipulator and
pan-tilt-roll head; an emulated half-duplex device bus with a 100 Hz
manager; a 2D indoor world with sensor synthesis, occupancy mapping and
path planning; and a virtual-time teleop server with deterministic
record/replay.
"""

from .locomotion import (
    BodyTwist,
    ChassisGeometry,
    Pose2D,
    WheelSpeeds,
    clamp_twist,
    integrate_odometry,
    twist_from_wheel_speeds,
    wheel_speeds_from_twist,
)
from .manipulator import (
    EEPose,
    JointConfig,
    JointLimitError,
    ManipulatorGeometry,
    UnreachablePoseError,
    forward_kinematics,
    gripper_target,
    solve_ik,
    validate_joints,
)
from .ptru import (
    HeadSampleHistory,
    PTRUAngles,
    PTRUWorkspace,
    Quaternion,
    StereoRig,
    predict_head_pose,
    ptru_angles_from_quaternion,
    quaternion_from_ptru_angles,
)

__version__ = "0.1.0"
