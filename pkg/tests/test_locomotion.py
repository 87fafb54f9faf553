import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telesim.locomotion import (
    BodyTwist,
    ChassisGeometry,
    Pose2D,
    WheelSpeeds,
    clamp_twist,
    integrate_odometry,
    normalize_angle,
    twist_from_wheel_speeds,
    wheel_speeds_from_twist,
)

CHASSIS = ChassisGeometry(wheel_radius_m=0.05, half_base_x_m=0.15, half_base_y_m=0.15)

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


def kinematics_matrix(chassis: ChassisGeometry) -> np.ndarray:
    """Independent A/r matrix for the oracle path."""
    L = chassis.half_base_x_m + chassis.half_base_y_m
    A = np.array(
        [
            [1.0, 1.0, -L],
            [-1.0, 1.0, -L],
            [1.0, -1.0, -L],
            [-1.0, -1.0, -L],
        ]
    )
    return A / chassis.wheel_radius_m


class TestWheelSpeedsFromTwist:
    def test_zero_twist(self):
        assert wheel_speeds_from_twist(BodyTwist(), CHASSIS).as_tuple() == (0, 0, 0, 0)

    def test_pure_longitudinal(self):
        # oracle: hand product of the kinematics matrix with (0.2, 0, 0)
        ws = wheel_speeds_from_twist(BodyTwist(0.2, 0.0, 0.0), CHASSIS)
        assert ws.as_tuple() == pytest.approx((4.0, -4.0, 4.0, -4.0), abs=1e-12)

    def test_pure_rotation(self):
        ws = wheel_speeds_from_twist(BodyTwist(0.0, 0.0, 1.0), CHASSIS)
        assert ws.as_tuple() == pytest.approx((-6.0, -6.0, -6.0, -6.0), abs=1e-12)

    def test_matches_matrix_oracle(self):
        rng = random.Random(7)
        mat = kinematics_matrix(CHASSIS)
        for _ in range(200):
            v = np.array([rng.uniform(-2, 2) for _ in range(3)])
            got = wheel_speeds_from_twist(BodyTwist(*v), CHASSIS).as_tuple()
            assert got == pytest.approx(tuple(mat @ v), abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            wheel_speeds_from_twist(BodyTwist(math.nan, 0, 0), CHASSIS)


class TestTwistFromWheelSpeeds:
    def test_zero(self):
        assert twist_from_wheel_speeds(WheelSpeeds(), CHASSIS).as_tuple() == (0, 0, 0)

    def test_known_values(self):
        t = twist_from_wheel_speeds(WheelSpeeds(4, -4, 4, -4), CHASSIS)
        assert t.as_tuple() == pytest.approx((0.2, 0.0, 0.0), abs=1e-12)
        t = twist_from_wheel_speeds(WheelSpeeds(-6, -6, -6, -6), CHASSIS)
        assert t.as_tuple() == pytest.approx((0.0, 0.0, 1.0), abs=1e-12)

    def test_is_pseudo_inverse(self):
        # oracle: numpy Moore-Penrose pseudo-inverse of the same matrix
        pinv = np.linalg.pinv(kinematics_matrix(CHASSIS))
        rng = random.Random(11)
        for _ in range(200):
            w = [rng.uniform(-20, 20) for _ in range(4)]
            got = twist_from_wheel_speeds(WheelSpeeds(*w), CHASSIS).as_tuple()
            assert got == pytest.approx(tuple(pinv @ np.array(w)), abs=1e-10)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            twist_from_wheel_speeds(WheelSpeeds(math.inf, 0, 0, 0), CHASSIS)


@given(finite, finite, finite)
@settings(max_examples=300, deadline=None)
def test_round_trip_identity(vx, vy, w):
    v = BodyTwist(vx, vy, w)
    back = twist_from_wheel_speeds(wheel_speeds_from_twist(v, CHASSIS), CHASSIS)
    assert back.as_tuple() == pytest.approx(v.as_tuple(), abs=1e-12)


@given(finite, finite, finite, finite, finite, finite, finite, finite)
@settings(max_examples=200, deadline=None)
def test_linearity(a, b, x1, y1, w1, x2, y2, w2):
    lhs = wheel_speeds_from_twist(
        BodyTwist(a * x1 + b * x2, a * y1 + b * y2, a * w1 + b * w2), CHASSIS
    ).as_tuple()
    u = wheel_speeds_from_twist(BodyTwist(x1, y1, w1), CHASSIS).as_tuple()
    v = wheel_speeds_from_twist(BodyTwist(x2, y2, w2), CHASSIS).as_tuple()
    rhs = tuple(a * ui + b * vi for ui, vi in zip(u, v))
    assert lhs == pytest.approx(rhs, abs=1e-9)


@given(st.floats(min_value=-3, max_value=3, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_pure_rotation_equal_wheels(w):
    ws = wheel_speeds_from_twist(BodyTwist(0, 0, w), CHASSIS).as_tuple()
    assert ws[0] == ws[1] == ws[2] == ws[3]


def sensed_from_twist(twist: BodyTwist, chassis: ChassisGeometry) -> WheelSpeeds:
    """Encoder readings that integrate_odometry maps back to this twist."""
    k = wheel_speeds_from_twist(twist, chassis)
    s = chassis.encoder_sign
    return WheelSpeeds(s[0] * k.w1, s[1] * k.w2, s[2] * k.w3, s[3] * k.w4)


class TestIntegrateOdometry:
    def test_straight_line(self):
        sensed = sensed_from_twist(BodyTwist(0.2, 0, 0), CHASSIS)
        pose = integrate_odometry(Pose2D(0, 0, 0), sensed, 0.1, CHASSIS)
        assert (pose.x_m, pose.y_m, pose.heading_rad) == pytest.approx(
            (0.02, 0.0, 0.0), abs=1e-12
        )

    def test_rotated_frame(self):
        sensed = sensed_from_twist(BodyTwist(0.2, 0, 0), CHASSIS)
        pose = integrate_odometry(Pose2D(0, 0, math.pi / 2), sensed, 0.1, CHASSIS)
        assert (pose.x_m, pose.y_m, pose.heading_rad) == pytest.approx(
            (0.0, 0.02, math.pi / 2), abs=1e-12
        )

    def test_zero_speeds_no_motion(self):
        pose = integrate_odometry(Pose2D(1, 2, 0.5), WheelSpeeds(), 0.7, CHASSIS)
        assert (pose.x_m, pose.y_m, pose.heading_rad) == (1, 2, 0.5)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            integrate_odometry(Pose2D(), WheelSpeeds(), 0.0, CHASSIS)

    def test_heading_always_normalized(self):
        pose = Pose2D()
        sensed = sensed_from_twist(BodyTwist(0, 0, 3.0), CHASSIS)
        for _ in range(500):
            pose = integrate_odometry(pose, sensed, 0.05, CHASSIS)
            assert -math.pi < pose.heading_rad <= math.pi


def drive_square(dt: float = 0.01) -> Pose2D:
    """Four 1 m legs with four in-place 90 degree turns."""
    pose = Pose2D()
    leg = sensed_from_twist(BodyTwist(0.25, 0, 0), CHASSIS)
    turn = sensed_from_twist(BodyTwist(0, 0, math.pi / 2), CHASSIS)
    for _ in range(4):
        for _ in range(400):  # 4 s at 0.25 m/s = 1 m
            pose = integrate_odometry(pose, leg, dt, CHASSIS)
        for _ in range(100):  # 1 s at pi/2 rad/s = 90 degrees
            pose = integrate_odometry(pose, turn, dt, CHASSIS)
    return pose


def test_square_path_closure():
    pose = drive_square()
    assert math.hypot(pose.x_m, pose.y_m) < 1e-9
    assert abs(normalize_angle(pose.heading_rad)) < 1e-9


class TestClampTwist:
    def test_identity_inside_bounds(self):
        assert clamp_twist(BodyTwist(0, 0, 0), CHASSIS).as_tuple() == (0, 0, 0)

    def test_saturates(self):
        assert clamp_twist(BodyTwist(10, 0, 0), CHASSIS).vx_m_s == 1.0

    def test_preserves_sign(self):
        assert clamp_twist(BodyTwist(-10, 0, 0), CHASSIS).vx_m_s == -1.0


class TestNormalizeAngle:
    @pytest.mark.parametrize(
        "raw,expected",
        [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi),
         (2 * math.pi, 0.0), (-0.5, -0.5)],
    )
    def test_values(self, raw, expected):
        assert normalize_angle(raw) == pytest.approx(expected, abs=1e-12)

    @given(st.floats(min_value=-50, max_value=50, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_range(self, a):
        n = normalize_angle(a)
        assert -math.pi < n <= math.pi
        # same direction modulo full turns
        assert math.isclose(math.cos(n), math.cos(a), abs_tol=1e-9)
        assert math.isclose(math.sin(n), math.sin(a), abs_tol=1e-9)


class TestChassisValidation:
    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            ChassisGeometry(wheel_radius_m=0.0)

    def test_rejects_bad_sign(self):
        with pytest.raises(ValueError):
            ChassisGeometry(encoder_sign=(1, 2, 1, -1))
