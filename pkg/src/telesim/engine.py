"""Virtual-time teleop station: the simulation loop behind the server.

One station owns the world plant, the three controllers, the device bus
manager and the occupancy map, and advances them on a 100 Hz tick.
Inbound command envelopes pass through a seeded latency model; outbound
telemetry is published on per-topic rate dividers.  Everything is a
deterministic function of (config, scenario, seed, inbound envelopes),
which is what makes record/replay byte-exact.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .config import RobotConfig, config_hash
from .control import (
    ControllerState,
    load_trajectory,
    locomotion_step,
    manipulator_step,
    ptru_step,
)
from .devicebus import DeviceCommunicationManager, bus_utilization
from .locomotion import BodyTwist, Pose2D, WheelSpeeds, integrate_odometry
from .manipulator import (
    JointConfig,
    JointLimitError,
    UnreachablePoseError,
    clamp_joints,
    gripper_target,
    solve_ik,
    EEPose,
)
from .mapping import (
    GridUpdateParams,
    NoPathError,
    OccupancyGrid,
    OccupiedEndpointError,
    OutsideGridError,
    plan_path,
    update_map,
)
from .protocol import (
    COMMAND_TOPICS,
    Envelope,
    SessionLog,
    canonicalize_envelope,
    scenario_hash,
    topic_hashes,
)
from .ptru import (
    HeadSampleHistory,
    PTRUAngles,
    Quaternion,
    StereoRig,
    quat_about_axis,
    quat_multiply,
    quaternion_from_ptru_angles,
)
from .world import Scan, World, load_scenario

__all__ = ["LatencyModel", "ReplayReport", "TeleopStation", "replay_session"]

TICK_HZ = 100
DT = 1.0 / TICK_HZ


class LatencyModel:
    """One-way command delay with optional seeded jitter.

    Delivery preserves per-topic ordering even when jitter would reorder.
    """

    def __init__(self, delay_s: float = 0.0, jitter_s: float = 0.0, seed: int = 0):
        if delay_s < 0.0 or jitter_s < 0.0:
            raise ValueError("delay and jitter must be >= 0")
        self.delay_s = delay_s
        self.jitter_s = jitter_s
        self._rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 97])
        self._last: dict[str, float] = {}

    def schedule(self, env: Envelope) -> float:
        t = env.stamp + self.delay_s
        if self.jitter_s > 0.0:
            t += float(self._rng.uniform(0.0, self.jitter_s))
        t = max(t, self._last.get(env.topic, -math.inf))
        self._last[env.topic] = t
        return t


@dataclass
class ReplayReport:
    ok: bool
    first_divergence: tuple[str, int] | None = None
    recorded_hashes: dict[str, str] = field(default_factory=dict)
    replayed_hashes: dict[str, str] = field(default_factory=dict)
    outbound_count: int = 0


def _due(interval_index: int, rate_hz: int) -> bool:
    return (interval_index + 1) * rate_hz // TICK_HZ > interval_index * rate_hz // TICK_HZ


def _f(x) -> float:
    return float(x)


class CommandError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class TeleopStation:
    """Deterministic robot-side station driven by tick()."""

    def __init__(
        self,
        config: RobotConfig,
        scenario_text: str,
        seed: int | None = None,
        latency: LatencyModel | None = None,
    ):
        self.config = config
        self.scenario_text = scenario_text
        self.world: World = load_scenario(
            scenario_text,
            seed_override=seed,
            chassis=config.chassis,
            arm_geometry=config.manipulator,
            ptru_workspace=config.ptru.workspace,
            plant=config.plant,
        )
        self.seed = self.world.seed
        self.latency = latency or LatencyModel(seed=self.seed)

        self.grid = self._build_grid()
        self.map_params = GridUpdateParams(
            log_odds_free=config.mapping.log_odds_free,
            log_odds_hit=config.mapping.log_odds_hit,
        )

        self.ctrl = ControllerState(
            ptru_latency_estimate_s=config.ptru.latency_estimate_s,
            ptru_rate_limit_rad_s=config.ptru.rate_limit_rad_s,
            ptru_workspace=config.ptru.workspace,
            hold_joints=self.world.joints,
        )
        self.head_history = HeadSampleHistory(capacity=256)
        self.rig = StereoRig(config.ptru.baseline_mm)
        self.target_twist = BodyTwist()
        self.gripper_cmd = 0.0
        self.external_torque: tuple[float, ...] = (0.0,) * 6
        self.dropped_head_samples = 0

        self.tick_index = 0
        self._seq: dict[str, int] = {}
        self._inbound: list[tuple[float, int, Envelope]] = []
        self._arrival_counter = 0
        self._subscribers: list[Callable[[Envelope], None]] = []

        self.log = SessionLog(
            config_hash=config_hash(config),
            scenario_hash=scenario_hash(scenario_text),
            seed=self.seed,
            latency_delay_s=self.latency.delay_s,
            latency_jitter_s=self.latency.jitter_s,
        )
        self.outbound: list[Envelope] = []

        self._wire_bus()
        self.odom_pose = self.world.pose  # dead reckoning starts at the known pose
        self._measured_joints = self.world.joints
        self._measured_ptru = self.world.ptru
        self._measured_wheels_enc = (0.0, 0.0, 0.0, 0.0)
        self._imu_payloads: dict[str, dict] = {}
        self._sonar_ranges: tuple[float, ...] = ()
        self._prev_plant = self.world.joints
        self._prev_ptru_plant = self.world.ptru
        self._last_scan: Scan | None = None
        self._last_report = None

    # -- construction ------------------------------------------------------

    def _build_grid(self) -> OccupancyGrid:
        m = self.config.mapping
        if m.origin_xy is not None and m.width_cells and m.height_cells:
            return OccupancyGrid(
                m.resolution_m,
                Pose2D(m.origin_xy[0], m.origin_xy[1], 0.0),
                m.width_cells,
                m.height_cells,
            )
        return OccupancyGrid.covering(self.world.bounding_box(), m.resolution_m)

    def _wire_bus(self) -> None:
        reg = self.config.registry
        wheels = reg.by_kind("wheel-actuator")
        arms = reg.by_kind("arm-joint")
        grippers = reg.by_kind("gripper")
        ptru = reg.by_kind("ptru-joint")
        imus = reg.by_kind("imu")
        sonars = reg.by_kind("sonar-array")
        if len(wheels) != 4 or len(arms) != 6 or len(ptru) != 3:
            raise ValueError("registry must provide 4 wheels, 6 arm joints, 3 head joints")
        if not grippers or len(imus) != 2 or len(sonars) != 1:
            raise ValueError("registry must provide a gripper, 2 IMUs, and a sonar array")
        self._wheel_ids = [d.device_id for d in wheels]
        self._arm_ids = [d.device_id for d in arms]
        self._gripper_id = grippers[0].device_id
        self._ptru_ids = [d.device_id for d in ptru]
        head_imu = next((d for d in imus if "head" in d.label), imus[-1])
        body_imu = next(d for d in imus if d.device_id != head_imu.device_id)
        self._imu_ids = {"body": body_imu.device_id, "head": head_imu.device_id}
        self._sonar_id = sonars[0].device_id

        self._wheel_vel = [0.0, 0.0, 0.0, 0.0]  # kinematic convention
        self._wheel_pos = [0.0, 0.0, 0.0, 0.0]
        self._arm_reg = list(self.world.joints.as_tuple()[:6])
        self._gripper_reg = 0.0
        self._ptru_reg = [0.0, 0.0, 0.0]

        dcm = DeviceCommunicationManager(reg)
        signs = self.config.chassis.encoder_sign

        for i, device_id in enumerate(self._wheel_ids):
            dcm.attach_device(
                device_id,
                reader=self._wheel_reader(i, signs[i]),
                writer=self._wheel_writer(i),
            )
        for j, device_id in enumerate(self._arm_ids):
            dcm.attach_device(
                device_id, reader=self._arm_reader(j), writer=self._arm_writer(j)
            )
        dcm.attach_device(
            self._gripper_id,
            reader=lambda: struct.pack("<f", self.world.joints.gripper_m),
            writer=self._gripper_writer,
        )
        for k, device_id in enumerate(self._ptru_ids):
            dcm.attach_device(
                device_id, reader=self._ptru_reader(k), writer=self._ptru_writer(k)
            )
        for mount, device_id in self._imu_ids.items():
            dcm.attach_device(device_id, reader=self._imu_reader(mount))
        dcm.attach_device(
            self._sonar_id,
            reader=lambda: struct.pack(
                "<12f", *self.world.sonar_ranges(self.config.sonar)
            ),
        )
        self.dcm = dcm

    # device emulators: little-endian float32 registers

    def _wheel_reader(self, i: int, sign: int):
        def read() -> bytes:
            return struct.pack("<ff", sign * self._wheel_vel[i], sign * self._wheel_pos[i])

        return read

    def _wheel_writer(self, i: int):
        def write(payload: bytes) -> None:
            self._wheel_vel[i] = struct.unpack("<f", payload)[0]

        return write

    def _arm_reader(self, j: int):
        def read() -> bytes:
            cur = self.world.joints.as_tuple()[j]
            prev = self._prev_plant.as_tuple()[j]
            return struct.pack("<ff", cur, (cur - prev) / DT)

        return read

    def _arm_writer(self, j: int):
        def write(payload: bytes) -> None:
            self._arm_reg[j] = struct.unpack("<f", payload)[0]

        return write

    def _gripper_writer(self, payload: bytes) -> None:
        # fixed point, 0.1 mm per count
        self._gripper_reg = struct.unpack("<H", payload)[0] / 10_000.0

    def _ptru_reader(self, k: int):
        def read() -> bytes:
            cur = self.world.ptru.as_tuple()[k]
            prev = self._prev_ptru_plant.as_tuple()[k]
            return struct.pack("<ff", cur, (cur - prev) / DT)

        return read

    def _ptru_writer(self, k: int):
        def write(payload: bytes) -> None:
            self._ptru_reg[k] = struct.unpack("<f", payload)[0]

        return write

    def _imu_reader(self, mount: str):
        def read() -> bytes:
            s = self.world.imu_sample(mount)
            return struct.pack(
                "<10f",
                s.orientation.w, s.orientation.x, s.orientation.y, s.orientation.z,
                *s.angular_velocity_rad_s,
                *s.linear_acceleration_m_s2,
            )

        return read

    # -- inbound -----------------------------------------------------------

    @property
    def now_s(self) -> float:
        return self.tick_index / TICK_HZ

    def subscribe(self, callback: Callable[[Envelope], None]) -> None:
        self._subscribers.append(callback)

    def submit(self, env: Envelope) -> None:
        """Accept one inbound command envelope (stamp in virtual time).

        The envelope is snapped to wire precision first, so in-process
        submissions behave exactly like commands that crossed the wire.
        """
        env = canonicalize_envelope(env)
        self.log.append("in", env)
        delivery = self.latency.schedule(env)
        heapq.heappush(self._inbound, (delivery, self._arrival_counter, env))
        self._arrival_counter += 1

    def _publish(self, topic: str, payload, stamp: float | None = None) -> None:
        seq = self._seq.get(topic, 0)
        self._seq[topic] = seq + 1
        env = Envelope(topic, self.now_s if stamp is None else stamp, seq, payload)
        self.outbound.append(env)
        self.log.append("out", env)
        for cb in self._subscribers:
            cb(env)

    def _publish_error(self, code: str, message: str, topic: str = "") -> None:
        self._publish("error", {"code": code, "message": message, "topic": topic})

    # -- command application -----------------------------------------------

    def _deliver_due(self, t: float) -> None:
        while self._inbound and self._inbound[0][0] <= t + 1e-12:
            _, _, env = heapq.heappop(self._inbound)
            try:
                self._apply_command(env)
            except CommandError as exc:
                self._publish_error(exc.code, str(exc), env.topic)

    def _require(self, payload, keys: tuple[str, ...], topic: str) -> dict:
        if not isinstance(payload, dict):
            raise CommandError("bad-command", f"{topic} payload must be an object")
        for k in keys:
            if k not in payload:
                raise CommandError("bad-command", f"{topic} payload missing {k!r}")
            v = payload[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise CommandError("bad-command", f"{topic}.{k} must be a number")
            if not math.isfinite(v):
                raise CommandError("bad-command", f"{topic}.{k} must be finite")
        return payload

    def _apply_command(self, env: Envelope) -> None:
        topic = env.topic
        if topic == "cmd_vel":
            p = self._require(env.payload, ("vx", "vy", "w"), topic)
            self.target_twist = BodyTwist(_f(p["vx"]), _f(p["vy"]), _f(p["w"]))
        elif topic == "cmd_head":
            p = self._require(env.payload, ("w", "x", "y", "z"), topic)
            q = Quaternion(_f(p["w"]), _f(p["x"]), _f(p["y"]), _f(p["z"]))
            if q.norm() < 1e-6:
                raise CommandError("bad-command", "cmd_head quaternion has zero norm")
            try:
                self.head_history.push(env.stamp, q.normalized())
            except ValueError:
                self.dropped_head_samples += 1
        elif topic == "cmd_ee_pose":
            self._apply_ee_pose(env)
        elif topic == "cmd_joint_traj":
            self._apply_joint_traj(env)
        elif topic == "cmd_gripper":
            p = self._require(env.payload, ("width_m",), topic)
            self.gripper_cmd = gripper_target(_f(p["width_m"]), self.config.manipulator)
        elif topic == "cmd_baseline":
            p = self._require(env.payload, ("mm",), topic)
            self.rig.set_baseline(_f(p["mm"]))
        elif topic == "cmd_goal":
            self._apply_goal(env)
        else:
            raise CommandError("bad-command", f"unknown command topic {topic!r}")

    def _apply_ee_pose(self, env: Envelope) -> None:
        p = self._require(
            env.payload, ("x", "y", "z", "pitch", "heading", "roll"), env.topic
        )
        pose = EEPose(
            _f(p["x"]), _f(p["y"]), _f(p["z"]),
            _f(p["pitch"]), _f(p["heading"]), _f(p["roll"]),
        )
        preview = bool(p.get("preview", False))
        try:
            solution = solve_ik(pose, self.config.manipulator)
        except (UnreachablePoseError, JointLimitError) as exc:
            if preview:
                self._publish(
                    "ik_preview",
                    {"pose": dict(p), "valid": False, "solution": None, "error": str(exc)},
                )
                return
            code = (
                "unreachable-pose"
                if isinstance(exc, UnreachablePoseError)
                else "joint-limit"
            )
            raise CommandError(code, str(exc)) from None
        solution = replace(solution, gripper_m=self.gripper_cmd)
        if preview:
            self._publish(
                "ik_preview",
                {
                    "pose": dict(p),
                    "valid": True,
                    "solution": _joints_payload(solution),
                    "error": None,
                },
            )
            return
        start = clamp_joints(self._measured_joints, self.config.manipulator)
        start = replace(start, gripper_m=self.gripper_cmd)
        duration = self._move_duration(start, solution, p.get("duration_s"))
        load_trajectory(
            self.ctrl,
            [(self.now_s, start), (self.now_s + duration, solution)],
            self.config.manipulator,
        )

    def _move_duration(self, a: JointConfig, b: JointConfig, requested) -> float:
        if requested is not None and not isinstance(requested, bool):
            if isinstance(requested, (int, float)) and math.isfinite(requested) and requested > 0:
                return float(requested)
            raise CommandError("bad-command", "duration_s must be a positive number")
        rates = self.config.plant.arm_rate_limits
        worst = max(
            abs(bv - av) / rates[i]
            for i, (av, bv) in enumerate(zip(a.as_tuple(), b.as_tuple()))
        )
        return max(self.config.server.ee_move_min_duration_s, worst)

    def _apply_joint_traj(self, env: Envelope) -> None:
        payload = env.payload
        if not isinstance(payload, dict) or "knots" not in payload:
            raise CommandError("bad-command", "cmd_joint_traj payload needs 'knots'")
        knots = []
        try:
            for t_rel, joints in payload["knots"]:
                theta = joints["theta"]
                knots.append(
                    (
                        self.now_s + float(t_rel),
                        JointConfig(
                            lift_m=float(joints["lift"]),
                            theta_rad=tuple(float(v) for v in theta),
                            gripper_m=float(joints.get("gripper", self.gripper_cmd)),
                        ),
                    )
                )
        except (TypeError, ValueError, KeyError, IndexError) as exc:
            raise CommandError("bad-command", f"malformed trajectory: {exc}") from None
        try:
            load_trajectory(self.ctrl, knots, self.config.manipulator)
        except (JointLimitError, ValueError) as exc:
            code = "joint-limit" if isinstance(exc, JointLimitError) else "bad-command"
            raise CommandError(code, str(exc)) from None

    def _apply_goal(self, env: Envelope) -> None:
        p = self._require(env.payload, ("x", "y"), env.topic)
        pose = self._mapping_pose()
        start = self.grid.world_to_cell(pose.x_m, pose.y_m)
        goal = self.grid.world_to_cell(_f(p["x"]), _f(p["y"]))
        if not self.grid.in_bounds(*goal):
            raise CommandError("outside-grid", f"goal {goal} outside the map")
        try:
            waypoints, cost = plan_path(
                self.grid, start, goal, self.config.mapping.occupied_threshold
            )
        except NoPathError as exc:
            raise CommandError("no-path", str(exc)) from None
        except OccupiedEndpointError as exc:
            raise CommandError("occupied-endpoint", str(exc)) from None
        self._publish(
            "plan",
            {
                "goal": [_f(p["x"]), _f(p["y"])],
                "waypoints": [[x, y] for x, y in waypoints],
                "cost": cost,
            },
        )

    # -- tick --------------------------------------------------------------

    def _mapping_pose(self) -> Pose2D:
        return self.odom_pose if self.config.mapping.use_odometry_pose else self.world.pose

    def tick(self) -> None:
        """Advance one 10 ms interval of virtual time."""
        interval = self.tick_index
        t_prev = interval / TICK_HZ
        self._deliver_due(t_prev)

        # controllers run on the snapshot read off the bus last cycle
        wheel_cmd = locomotion_step(self.ctrl, self.target_twist, DT, self.config.chassis)
        joint_cmd = manipulator_step(
            self.ctrl, t_prev, self._measured_joints, self.external_torque
        )
        joint_cmd = replace(joint_cmd, gripper_m=self.gripper_cmd)
        ptru_cmd = ptru_step(self.ctrl, self.head_history, DT)

        # command writes onto the bus, then one polling cycle
        for i, device_id in enumerate(self._wheel_ids):
            self.dcm.queue_write(device_id, struct.pack("<f", wheel_cmd.as_tuple()[i]))
        for j, device_id in enumerate(self._arm_ids):
            self.dcm.queue_write(device_id, struct.pack("<f", joint_cmd.as_tuple()[j]))
        self.dcm.queue_write(
            self._gripper_id,
            struct.pack("<H", max(0, min(0xFFFF, round(joint_cmd.gripper_m * 10_000)))),
        )
        for k, device_id in enumerate(self._ptru_ids):
            self.dcm.queue_write(device_id, struct.pack("<f", ptru_cmd.as_tuple()[k]))
        self._prev_plant = self.world.joints
        self._prev_ptru_plant = self.world.ptru
        report = self.dcm.run_cycle()
        self._last_report = report

        # plant: registers hold the float32 values that crossed the wire
        self.world.step(
            DT,
            wheel_cmd=WheelSpeeds(*self._wheel_vel),
            joint_cmd=JointConfig(
                lift_m=self._arm_reg[0],
                theta_rad=tuple(self._arm_reg[1:6]),
                gripper_m=self._gripper_reg,
            ),
            ptru_cmd=PTRUAngles(*self._ptru_reg),
        )
        for i in range(4):
            self._wheel_pos[i] += self._wheel_vel[i] * DT

        # dead reckoning from the encoder-convention wheel rates
        signs = self.config.chassis.encoder_sign
        sensed = WheelSpeeds(*(signs[i] * self._wheel_vel[i] for i in range(4)))
        self.odom_pose = integrate_odometry(self.odom_pose, sensed, DT, self.config.chassis)

        self._refresh_bus_snapshot()
        self.tick_index += 1
        self._publish_telemetry(interval, wheel_cmd, joint_cmd, ptru_cmd, report)

    def _refresh_bus_snapshot(self) -> None:
        vals = []
        for device_id in self._arm_ids:
            raw = self.dcm.last_read(device_id)
            vals.append(struct.unpack("<ff", raw)[0] if raw else 0.0)
        graw = self.dcm.last_read(self._gripper_id)
        gw = struct.unpack("<f", graw)[0] if graw else 0.0
        self._measured_joints = JointConfig(
            lift_m=vals[0], theta_rad=tuple(vals[1:6]), gripper_m=gw
        )
        pv = []
        for device_id in self._ptru_ids:
            raw = self.dcm.last_read(device_id)
            pv.append(struct.unpack("<ff", raw)[0] if raw else 0.0)
        self._measured_ptru = PTRUAngles(*pv)
        wv = []
        for device_id in self._wheel_ids:
            raw = self.dcm.last_read(device_id)
            wv.append(struct.unpack("<ff", raw)[0] if raw else 0.0)
        self._measured_wheels_enc = tuple(wv)
        for mount, device_id in self._imu_ids.items():
            raw = self.dcm.last_read(device_id)
            if raw:
                v = struct.unpack("<10f", raw)
                self._imu_payloads[mount] = {
                    "orientation": {"w": v[0], "x": v[1], "y": v[2], "z": v[3]},
                    "angular_velocity": list(v[4:7]),
                    "linear_acceleration": list(v[7:10]),
                }
        sraw = self.dcm.last_read(self._sonar_id)
        if sraw:
            self._sonar_ranges = struct.unpack("<12f", sraw)

    def _publish_telemetry(self, interval, wheel_cmd, joint_cmd, ptru_cmd, report):
        rates = self.config.rates
        self._publish(
            "pose2d",
            {
                "x": self.odom_pose.x_m,
                "y": self.odom_pose.y_m,
                "heading": self.odom_pose.heading_rad,
            },
        )
        self._publish(
            "wheel_states",
            {
                "sensed": list(self._measured_wheels_enc),
                "commanded": list(wheel_cmd.as_tuple()),
            },
        )
        self._publish(
            "joint_states",
            {
                "measured": _joints_payload(self._measured_joints),
                "command": _joints_payload(joint_cmd),
            },
        )
        self._publish(
            "ptru_state",
            {
                "command": _ptru_payload(ptru_cmd),
                "measured": _ptru_payload(self._measured_ptru),
                "baseline_mm": self.rig.baseline_mm,
            },
        )
        if _due(interval, rates.imu_hz):
            for mount in ("body", "head"):
                if mount in self._imu_payloads:
                    self._publish(f"imu_{mount}", self._imu_payloads[mount])
        if _due(interval, rates.sonar_hz) and self._sonar_ranges:
            self._publish(
                "sonar",
                {
                    "ranges": list(self._sonar_ranges),
                    "range_max": self.config.sonar.range_max_m,
                },
            )
        if _due(interval, rates.scan_hz):
            scan = self.world.lidar_scan(self.config.lidar)
            self._last_scan = scan
            self._publish(
                "scan",
                {
                    "angle_min": scan.angle_min_rad,
                    "angle_max": scan.angle_max_rad,
                    "angle_increment": scan.angle_increment_rad,
                    "range_min": scan.range_min_m,
                    "range_max": scan.range_max_m,
                    "ranges": list(scan.ranges_m),
                },
            )
        if _due(interval, rates.map_hz) and self._last_scan is not None:
            pose = self._mapping_pose()
            try:
                delta = update_map(self.grid, pose, self._last_scan, self.map_params)
            except OutsideGridError as exc:
                self._publish_error("outside-grid", str(exc), "map_delta")
            else:
                self._publish(
                    "map_delta",
                    {
                        "resolution": self.grid.resolution_m,
                        "origin": [self.grid.origin.x_m, self.grid.origin.y_m],
                        "width": self.grid.width_cells,
                        "height": self.grid.height_cells,
                        "cells": [[ix, iy, v] for ix, iy, v in delta],
                    },
                )
        if _due(interval, rates.camera_pose_hz):
            self._publish("camera_pose", self._camera_pose_payload())
        if _due(interval, rates.bus_report_hz):
            self._publish(
                "bus_cycle",
                {
                    "cycle": report.cycle_index,
                    "bytes": report.bytes_on_wire,
                    "bit_times": report.bit_times,
                    "budget": report.bit_time_budget,
                    "overrun": report.overrun,
                    "utilization": bus_utilization(self.config.registry),
                    "transactions": [
                        [t.device_id, t.instruction, t.status]
                        for t in report.transactions
                    ],
                },
            )

    def _camera_pose_payload(self) -> dict:
        body = quat_about_axis("z", self.world.pose.heading_rad)
        head = quat_multiply(body, quaternion_from_ptru_angles(self.world.ptru)).normalized()
        return {
            "position": [
                self.world.pose.x_m,
                self.world.pose.y_m,
                self.config.ptru.head_height_m,
            ],
            "orientation": {"w": head.w, "x": head.x, "y": head.y, "z": head.z},
            "baseline_mm": self.rig.baseline_mm,
        }

    # -- running -----------------------------------------------------------

    def run_ticks(self, n: int) -> None:
        for _ in range(n):
            self.tick()

    def run_seconds(self, seconds: float) -> None:
        self.run_ticks(int(round(seconds * TICK_HZ)))

    def finish_log(self) -> SessionLog:
        self.log.duration_ticks = self.tick_index
        return self.log


def _joints_payload(j: JointConfig) -> dict:
    return {"lift": j.lift_m, "theta": list(j.theta_rad), "gripper": j.gripper_m}


def _ptru_payload(a: PTRUAngles) -> dict:
    return {"pan": a.pan_rad, "tilt": a.tilt_rad, "roll": a.roll_rad}


def _new_station_for(log: SessionLog, config: RobotConfig, scenario_text: str) -> TeleopStation:
    if config_hash(config) != log.config_hash:
        raise ValueError("config hash does not match the session log")
    if scenario_hash(scenario_text) != log.scenario_hash:
        raise ValueError("scenario hash does not match the session log")
    latency = LatencyModel(log.latency_delay_s, log.latency_jitter_s, seed=log.seed)
    return TeleopStation(config, scenario_text, seed=log.seed, latency=latency)


def replay_session(
    log: SessionLog, config: RobotConfig, scenario_text: str
) -> ReplayReport:
    """Re-run a recorded session and verify outbound telemetry equality."""
    station = _new_station_for(log, config, scenario_text)
    for env in log.inbound():
        station.submit(env)
    station.run_ticks(log.duration_ticks)

    recorded = log.outbound()
    replayed = station.outbound
    rec_hashes = topic_hashes(recorded)
    rep_hashes = topic_hashes(replayed)
    if rec_hashes == rep_hashes:
        return ReplayReport(
            ok=True,
            recorded_hashes=rec_hashes,
            replayed_hashes=rep_hashes,
            outbound_count=len(replayed),
        )
    first = None
    for a, b in zip(recorded, replayed):
        if a != b:
            first = (a.topic, a.seq)
            break
    if first is None:
        longer = recorded if len(recorded) > len(replayed) else replayed
        extra = longer[min(len(recorded), len(replayed))]
        first = (extra.topic, extra.seq)
    return ReplayReport(
        ok=False,
        first_divergence=first,
        recorded_hashes=rec_hashes,
        replayed_hashes=rep_hashes,
        outbound_count=len(replayed),
    )
