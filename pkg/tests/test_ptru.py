import math
import random

import pytest
from scipy.spatial.transform import Rotation

from telesim.ptru import (
    HeadSampleHistory,
    NoDataError,
    PTRUAngles,
    PTRUWorkspace,
    Quaternion,
    StereoRig,
    canonical,
    predict_head_pose,
    ptru_angles_from_quaternion,
    quat_about_axis,
    quat_multiply,
    quaternion_from_ptru_angles,
)

S2 = math.sqrt(2.0) / 2.0


def scipy_quat(a: PTRUAngles) -> Quaternion:
    """Oracle: extrinsic z-y-x composition via scipy (x, y, z, w order)."""
    r = Rotation.from_euler("zyx", [a.pan_rad, a.tilt_rad, a.roll_rad])
    x, y, z, w = r.as_quat()
    return canonical(Quaternion(w, x, y, z))


def scipy_angles(q: Quaternion) -> PTRUAngles:
    r = Rotation.from_quat([q.x, q.y, q.z, q.w])
    pan, tilt, roll = r.as_euler("zyx")
    return PTRUAngles(pan, tilt, roll)


class TestAnglesFromQuaternion:
    def test_identity(self):
        assert ptru_angles_from_quaternion(Quaternion()).as_tuple() == (0, 0, 0)

    def test_yaw_90(self):
        a = ptru_angles_from_quaternion(Quaternion(S2, 0, 0, S2))
        assert a.as_tuple() == pytest.approx((math.pi / 2, 0, 0), abs=1e-12)

    def test_pitch_90_gimbal_lock_convention(self):
        a = ptru_angles_from_quaternion(Quaternion(S2, 0, S2, 0))
        assert a.as_tuple() == pytest.approx((0, math.pi / 2, 0), abs=1e-9)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            ptru_angles_from_quaternion(Quaternion(1.0, 1.0, 0, 0))

    def test_sign_invariance(self):
        rng = random.Random(2)
        for _ in range(300):
            a = PTRUAngles(rng.uniform(-3, 3), rng.uniform(-1.2, 1.2), rng.uniform(-3, 3))
            q = quaternion_from_ptru_angles(a)
            neg = Quaternion(-q.w, -q.x, -q.y, -q.z)
            assert (
                ptru_angles_from_quaternion(q).as_tuple()
                == ptru_angles_from_quaternion(neg).as_tuple()
            )

    def test_tilt_always_in_half_range(self):
        rng = random.Random(3)
        for _ in range(500):
            v = [rng.gauss(0, 1) for _ in range(4)]
            n = math.sqrt(sum(x * x for x in v))
            q = Quaternion(*(x / n for x in v))
            a = ptru_angles_from_quaternion(q)
            assert -math.pi / 2 <= a.tilt_rad <= math.pi / 2

    def test_matches_scipy_extraction(self):
        rng = random.Random(4)
        for _ in range(500):
            v = [rng.gauss(0, 1) for _ in range(4)]
            n = math.sqrt(sum(x * x for x in v))
            q = Quaternion(*(x / n for x in v))
            a = ptru_angles_from_quaternion(q)
            if abs(abs(a.tilt_rad) - math.pi / 2) < 1e-6:
                continue  # scipy picks a different gimbal-lock convention
            want = scipy_angles(q)
            assert a.as_tuple() == pytest.approx(want.as_tuple(), abs=1e-9)


class TestQuaternionFromAngles:
    def test_zero_is_identity(self):
        q = quaternion_from_ptru_angles(PTRUAngles())
        assert q.as_tuple() == pytest.approx((1, 0, 0, 0), abs=1e-15)

    def test_pan_90(self):
        q = quaternion_from_ptru_angles(PTRUAngles(math.pi / 2, 0, 0))
        assert q.as_tuple() == pytest.approx((S2, 0, 0, S2), abs=1e-12)

    def test_matches_scipy_composition(self):
        rng = random.Random(5)
        for _ in range(500):
            a = PTRUAngles(rng.uniform(-3, 3), rng.uniform(-1.3, 1.3), rng.uniform(-3, 3))
            got = quaternion_from_ptru_angles(a)
            want = scipy_quat(a)
            assert got.as_tuple() == pytest.approx(want.as_tuple(), abs=1e-12)

    def test_round_trip(self):
        rng = random.Random(6)
        lim = math.radians(85.0)
        for _ in range(1000):
            a = PTRUAngles(
                rng.uniform(-math.pi + 1e-9, math.pi),
                rng.uniform(-lim, lim),
                rng.uniform(-math.pi + 1e-9, math.pi),
            )
            back = ptru_angles_from_quaternion(quaternion_from_ptru_angles(a))
            assert back.as_tuple() == pytest.approx(a.as_tuple(), abs=1e-9)


class TestHeadHistory:
    def test_stamps_strictly_increasing(self):
        h = HeadSampleHistory()
        h.push(0.0, Quaternion())
        with pytest.raises(ValueError):
            h.push(0.0, Quaternion())

    def test_bounded_capacity(self):
        h = HeadSampleHistory(capacity=3)
        for i in range(10):
            h.push(float(i), Quaternion())
        assert len(h) == 3

    def test_empty_latest_raises(self):
        with pytest.raises(NoDataError):
            HeadSampleHistory().latest()


class TestPredictHeadPose:
    def test_constant_history_returns_latest(self):
        h = HeadSampleHistory()
        q = quat_about_axis("z", 0.3)
        h.push(0.0, q)
        h.push(0.1, q)
        out = predict_head_pose(h, 0.5)
        assert out.as_tuple() == pytest.approx(q.as_tuple(), abs=1e-12)

    def test_zero_horizon_returns_latest(self):
        h = HeadSampleHistory()
        h.push(0.0, quat_about_axis("z", 0.1))
        h.push(0.1, quat_about_axis("z", 0.5))
        out = predict_head_pose(h, 0.0)
        assert out.as_tuple() == quat_about_axis("z", 0.5).normalized().as_tuple()

    def test_single_sample_returns_it(self):
        h = HeadSampleHistory()
        h.push(0.0, quat_about_axis("z", 0.7))
        out = predict_head_pose(h, 1.0)
        assert out.as_tuple() == pytest.approx(
            quat_about_axis("z", 0.7).as_tuple(), abs=1e-12
        )

    def test_linear_yaw_extrapolation(self):
        # oracle: closed-form single-axis log/exp
        h = HeadSampleHistory()
        h.push(0.0, quat_about_axis("z", 0.2))
        h.push(0.1, quat_about_axis("z", 0.3))
        out = predict_head_pose(h, 0.1)
        want = quat_about_axis("z", 0.4).normalized()
        assert out.as_tuple() == pytest.approx(want.as_tuple(), abs=1e-9)

    def test_empty_history_raises(self):
        with pytest.raises(NoDataError):
            predict_head_pose(HeadSampleHistory(), 0.1)

    def test_output_always_unit(self):
        rng = random.Random(9)
        h = HeadSampleHistory()
        t = 0.0
        for _ in range(20):
            a = PTRUAngles(rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(-2, 2))
            h.push(t, quaternion_from_ptru_angles(a))
            t += 0.05
        for horizon in (0.0, 0.05, 0.5, 2.0):
            assert abs(predict_head_pose(h, horizon).norm() - 1.0) < 1e-12


class TestStereoRig:
    def test_nominal(self):
        assert StereoRig().set_baseline(60.0) == 60.0

    def test_clamps_high(self):
        assert StereoRig().set_baseline(80.0) == 70.0

    def test_clamps_low(self):
        assert StereoRig().set_baseline(40.0) == 50.0

    def test_monotone(self):
        rig = StereoRig()
        vals = [rig.set_baseline(v) for v in range(30, 100, 3)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestWorkspace:
    def test_clamp(self):
        ws = PTRUWorkspace()
        a = ws.clamp(PTRUAngles(10.0, -10.0, 0.1))
        assert a.pan_rad == ws.pan_limit_rad
        assert a.tilt_rad == -ws.tilt_limit_rad
        assert a.roll_rad == 0.1


def test_quat_multiply_matches_scipy():
    rng = random.Random(11)
    for _ in range(200):
        qs = []
        for _ in range(2):
            v = [rng.gauss(0, 1) for _ in range(4)]
            n = math.sqrt(sum(x * x for x in v))
            qs.append(Quaternion(*(x / n for x in v)))
        got = quat_multiply(qs[0], qs[1])
        ra = Rotation.from_quat([qs[0].x, qs[0].y, qs[0].z, qs[0].w])
        rb = Rotation.from_quat([qs[1].x, qs[1].y, qs[1].z, qs[1].w])
        x, y, z, w = (ra * rb).as_quat()
        want = canonical(Quaternion(w, x, y, z))
        assert canonical(got).as_tuple() == pytest.approx(want.as_tuple(), abs=1e-12)
