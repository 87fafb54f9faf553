import math

import pytest

from telesim.locomotion import BodyTwist, Pose2D, WheelSpeeds, wheel_speeds_from_twist
from telesim.manipulator import JointConfig
from telesim.ptru import PTRUAngles, ptru_angles_from_quaternion
from telesim.world import (
    LidarParams,
    ScenarioError,
    SonarParams,
    World,
    load_scenario,
)

ROOM_4X4 = """
# four walls, centered at the origin
wall -2 -2  2 -2
wall  2 -2  2  2
wall  2  2 -2  2
wall -2  2 -2 -2
start 0 0 0
seed 42
"""


def make_room() -> World:
    return load_scenario(ROOM_4X4)


def wheels_for(world: World, twist: BodyTwist) -> WheelSpeeds:
    return wheel_speeds_from_twist(twist, world.chassis)


class TestLoadScenario:
    def test_room(self):
        w = make_room()
        assert len(w.segments) == 4
        assert w.seed == 42
        assert (w.pose.x_m, w.pose.y_m, w.pose.heading_rad) == (0, 0, 0)

    def test_open_world(self):
        w = load_scenario("start 1 2 0.5\n")
        assert w.segments == []

    def test_malformed_line_names_lineno(self):
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario("start 0 0 0\nwall 1 2 3\n")

    def test_non_finite_coordinate(self):
        with pytest.raises(ScenarioError):
            load_scenario("start 0 0 0\nwall 0 0 nan 1\n")

    def test_missing_start(self):
        with pytest.raises(ScenarioError, match="start"):
            load_scenario("wall 0 0 1 0\n")


class TestStep:
    def test_zero_commands_only_clock(self):
        w = make_room()
        w.step(0.1)
        assert w.clock_s == pytest.approx(0.1)
        assert (w.pose.x_m, w.pose.y_m) == (0, 0)

    def test_forward_drive_open_world(self):
        w = load_scenario("start 0 0 0\n")
        cmd = wheels_for(w, BodyTwist(0.2, 0, 0))
        for _ in range(100):
            w.step(0.01, wheel_cmd=cmd)
        assert w.pose.x_m == pytest.approx(0.2, abs=1e-9)
        assert w.pose.y_m == pytest.approx(0.0, abs=1e-12)

    def test_stops_at_wall_contact(self):
        # wall 0.5 m ahead; the disc stops with its rim on the wall
        w = load_scenario("start 0 0 0\nwall 0.5 -1 0.5 1\n")
        cmd = wheels_for(w, BodyTwist(0.5, 0, 0))
        for _ in range(300):
            w.step(0.01, wheel_cmd=cmd)
        assert w.pose.x_m == pytest.approx(0.5 - w.plant.robot_radius_m, abs=1e-9)
        assert w.distance_to_walls(w.pose.x_m, w.pose.y_m) >= w.plant.robot_radius_m - 1e-9

    def test_no_penetration_in_corner_push(self):
        w = make_room()
        cmd = wheels_for(w, BodyTwist(0.6, 0.45, 0.0))
        for _ in range(1200):
            w.step(0.01, wheel_cmd=cmd)
            assert (
                w.distance_to_walls(w.pose.x_m, w.pose.y_m)
                >= w.plant.robot_radius_m - 1e-9
            )

    def test_rotation_continues_at_wall(self):
        w = load_scenario("start 0 0 0\nwall 0.3 -1 0.3 1\n")
        cmd = wheels_for(w, BodyTwist(0.5, 0, 0.5))
        for _ in range(100):
            w.step(0.01, wheel_cmd=cmd)
        assert w.pose.heading_rad == pytest.approx(0.5, abs=1e-6)

    def test_joint_tracking_converges(self):
        w = make_room()
        target = JointConfig(lift_m=0.3, theta_rad=(0.4, 0.8, -0.2, 0.1, 0.0))
        for _ in range(600):
            w.step(0.01, joint_cmd=target)
        assert w.joints.lift_m == pytest.approx(0.3, abs=1e-3)
        assert w.joints.theta_rad == pytest.approx(target.theta_rad, abs=1e-3)

    def test_ptru_tracking_respects_rate_limit(self):
        w = make_room()
        target = PTRUAngles(1.0, 0, 0)
        w.step(0.01, ptru_cmd=target)
        assert abs(w.ptru.pan_rad) <= w.plant.ptru_rate_limit_rad_s * 0.01 + 1e-12

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            make_room().step(0.0)

    def test_determinism(self):
        def run():
            w = make_room()
            cmd = wheels_for(w, BodyTwist(0.3, 0.1, 0.2))
            out = []
            for _ in range(200):
                w.step(0.01, wheel_cmd=cmd, ptru_cmd=PTRUAngles(0.5, 0.2, 0.1))
                out.append((w.pose, w.ptru))
            return out

        assert run() == run()


class TestLidar:
    def test_room_axis_beam(self):
        w = make_room()
        scan = w.lidar_scan(LidarParams(beam_count=360))
        assert scan.ranges_m[0] == pytest.approx(2.0, abs=1e-9)
        assert scan.ranges_m[90] == pytest.approx(2.0, abs=1e-9)

    def test_room_diagonal_beam(self):
        w = make_room()
        scan = w.lidar_scan(LidarParams(beam_count=360))
        assert scan.ranges_m[45] == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)

    def test_quarter_turn_symmetry(self):
        w = make_room()
        scan = w.lidar_scan(LidarParams(beam_count=360))
        for i in range(90):
            assert scan.ranges_m[i] == pytest.approx(scan.ranges_m[i + 90], abs=1e-9)

    def test_open_world_sentinel(self):
        w = load_scenario("start 0 0 0\n")
        scan = w.lidar_scan(LidarParams(beam_count=8))
        assert all(r == scan.range_max_m for r in scan.ranges_m)

    def test_heading_rotates_beams(self):
        w = load_scenario(ROOM_4X4.replace("start 0 0 0", "start 0 0 1.5707963267948966"))
        scan = w.lidar_scan(LidarParams(beam_count=360))
        assert scan.ranges_m[0] == pytest.approx(2.0, abs=1e-9)

    def test_noise_is_seeded(self):
        def scan_once():
            w = make_room()
            return w.lidar_scan(LidarParams(beam_count=90, noise_sigma_m=0.01)).ranges_m

        assert scan_once() == scan_once()

    def test_below_min_range_is_sentinel(self):
        w = load_scenario("start 0 0 0\nwall 0.1 -1 0.1 1\n")
        params = LidarParams(beam_count=4, range_min_m=0.15)
        scan = w.lidar_scan(params)
        assert scan.ranges_m[0] == params.range_max_m


class TestSonar:
    def test_room_ring(self):
        w = make_room()
        ranges = w.sonar_ranges(SonarParams())
        assert ranges[0] == pytest.approx(2.0, abs=1e-9)
        assert ranges[3] == pytest.approx(2.0, abs=1e-9)  # 90 degrees
        assert ranges[1] == pytest.approx(2.0 / math.cos(math.pi / 6), abs=1e-9)

    def test_open_world_sentinels(self):
        w = load_scenario("start 0 0 0\n")
        assert all(r == 4.0 for r in w.sonar_ranges(SonarParams()))

    def test_wrong_placement_count(self):
        w = make_room()
        with pytest.raises(ValueError):
            w.sonar_ranges(SonarParams(placements=((0.0, 0.0, 0.0),) * 11))


class TestIMU:
    def test_at_rest(self):
        w = make_room()
        w.step(0.01)
        s = w.imu_sample("body")
        assert s.angular_velocity_rad_s == pytest.approx((0, 0, 0), abs=1e-12)
        assert s.linear_acceleration_m_s2 == pytest.approx((0, 0, 0), abs=1e-12)
        assert abs(s.orientation.norm() - 1.0) < 1e-12

    def test_constant_spin_gyro(self):
        w = load_scenario("start 0 0 0\n")
        cmd = wheels_for(w, BodyTwist(0, 0, 1.0))
        for _ in range(50):
            w.step(0.01, wheel_cmd=cmd)
        s = w.imu_sample("body")
        assert s.angular_velocity_rad_s[2] == pytest.approx(1.0, abs=1e-6)

    def test_head_composition(self):
        w = load_scenario("start 0 0 1.5707963267948966\n")
        w.ptru = PTRUAngles(math.pi / 2, 0, 0)
        s = w.imu_sample("head")
        angles = ptru_angles_from_quaternion(s.orientation)
        assert angles.pan_rad == pytest.approx(math.pi, abs=1e-9)

    def test_acceleration_on_speed_change(self):
        w = load_scenario("start 0 0 0\n")
        w.step(0.01, wheel_cmd=wheels_for(w, BodyTwist(0.1, 0, 0)))
        s = w.imu_sample("body")
        assert s.linear_acceleration_m_s2[0] == pytest.approx(10.0, abs=1e-6)
