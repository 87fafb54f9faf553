/** Per-topic payload validators, mirroring the server's decode checks.
 * Each returns null when valid or a human-readable reason when not,
 * so the UI can refuse to send bad commands and flag bad telemetry. */

type Validator = (payload: unknown) => string | null;

function isObj(p: unknown): p is Record<string, unknown> {
  return p !== null && typeof p === "object" && !Array.isArray(p);
}

function finiteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function needNumbers(p: Record<string, unknown>, keys: string[]): string | null {
  for (const k of keys) {
    if (!finiteNumber(p[k])) {
      return `field '${k}' must be a finite number`;
    }
  }
  return null;
}

function numberArray(v: unknown, length?: number): boolean {
  return (
    Array.isArray(v) &&
    (length === undefined || v.length === length) &&
    v.every(finiteNumber)
  );
}

function jointsObject(v: unknown): string | null {
  if (!isObj(v)) {
    return "joints must be an object";
  }
  if (!finiteNumber(v.lift)) {
    return "joints.lift must be a number";
  }
  if (!numberArray(v.theta, 5)) {
    return "joints.theta must be five numbers";
  }
  if (v.gripper !== undefined && !finiteNumber(v.gripper)) {
    return "joints.gripper must be a number";
  }
  return null;
}

function quaternionObject(v: unknown): string | null {
  if (!isObj(v)) {
    return "orientation must be an object";
  }
  return needNumbers(v, ["w", "x", "y", "z"]);
}

export const validators: Record<string, Validator> = {
  cmd_vel: (p) => (isObj(p) ? needNumbers(p, ["vx", "vy", "w"]) : "not an object"),
  cmd_head: (p) => (isObj(p) ? quaternionObject(p) : "not an object"),
  cmd_gripper: (p) => (isObj(p) ? needNumbers(p, ["width_m"]) : "not an object"),
  cmd_baseline: (p) => (isObj(p) ? needNumbers(p, ["mm"]) : "not an object"),
  cmd_goal: (p) => (isObj(p) ? needNumbers(p, ["x", "y"]) : "not an object"),
  cmd_ee_pose: (p) => {
    if (!isObj(p)) {
      return "not an object";
    }
    const err = needNumbers(p, ["x", "y", "z", "pitch", "heading", "roll"]);
    if (err) {
      return err;
    }
    if (p.preview !== undefined && typeof p.preview !== "boolean") {
      return "preview must be boolean";
    }
    return null;
  },
  cmd_joint_traj: (p) => {
    if (!isObj(p) || !Array.isArray(p.knots) || p.knots.length === 0) {
      return "knots must be a non-empty array";
    }
    for (const knot of p.knots) {
      if (!Array.isArray(knot) || knot.length !== 2 || !finiteNumber(knot[0])) {
        return "each knot is [time, joints]";
      }
      const err = jointsObject(knot[1]);
      if (err) {
        return err;
      }
    }
    return null;
  },

  pose2d: (p) => (isObj(p) ? needNumbers(p, ["x", "y", "heading"]) : "not an object"),
  wheel_states: (p) =>
    isObj(p) && numberArray(p.sensed, 4) && numberArray(p.commanded, 4)
      ? null
      : "needs sensed[4] and commanded[4]",
  joint_states: (p) => {
    if (!isObj(p)) {
      return "not an object";
    }
    return jointsObject(p.measured) ?? jointsObject(p.command);
  },
  ptru_state: (p) => {
    if (!isObj(p) || !finiteNumber(p.baseline_mm)) {
      return "needs baseline_mm";
    }
    for (const key of ["command", "measured"]) {
      const v = p[key];
      if (!isObj(v) || needNumbers(v, ["pan", "tilt", "roll"])) {
        return `${key} needs pan/tilt/roll`;
      }
    }
    return null;
  },
  imu_body: (p) => imuPayload(p),
  imu_head: (p) => imuPayload(p),
  scan: (p) => {
    if (!isObj(p)) {
      return "not an object";
    }
    const err = needNumbers(p, [
      "angle_min", "angle_max", "angle_increment", "range_min", "range_max",
    ]);
    if (err) {
      return err;
    }
    return numberArray(p.ranges) ? null : "ranges must be numbers";
  },
  sonar: (p) =>
    isObj(p) && numberArray(p.ranges, 12) && finiteNumber(p.range_max)
      ? null
      : "needs ranges[12] and range_max",
  map_delta: (p) => {
    if (!isObj(p)) {
      return "not an object";
    }
    const err = needNumbers(p, ["resolution", "width", "height"]);
    if (err) {
      return err;
    }
    if (!numberArray(p.origin, 2)) {
      return "origin must be [x, y]";
    }
    if (!Array.isArray(p.cells)) {
      return "cells must be an array";
    }
    for (const cell of p.cells) {
      if (!numberArray(cell, 3)) {
        return "each cell is [ix, iy, log_odds]";
      }
    }
    return null;
  },
  bus_cycle: (p) => {
    if (!isObj(p)) {
      return "not an object";
    }
    const err = needNumbers(p, ["cycle", "bytes", "bit_times", "budget", "utilization"]);
    if (err) {
      return err;
    }
    if (typeof p.overrun !== "boolean") {
      return "overrun must be boolean";
    }
    return Array.isArray(p.transactions) ? null : "transactions must be an array";
  },
  camera_pose: (p) => {
    if (!isObj(p) || !numberArray(p.position, 3) || !finiteNumber(p.baseline_mm)) {
      return "needs position[3] and baseline_mm";
    }
    return quaternionObject(p.orientation);
  },
  plan: (p) => {
    if (!isObj(p) || !numberArray(p.goal, 2) || !finiteNumber(p.cost)) {
      return "needs goal[2] and cost";
    }
    if (!Array.isArray(p.waypoints)) {
      return "waypoints must be an array";
    }
    for (const wp of p.waypoints) {
      if (!numberArray(wp, 2)) {
        return "each waypoint is [x, y]";
      }
    }
    return null;
  },
  ik_preview: (p) => {
    if (!isObj(p) || typeof p.valid !== "boolean") {
      return "needs valid flag";
    }
    if (p.valid) {
      return jointsObject(p.solution);
    }
    return typeof p.error === "string" ? null : "invalid preview needs error text";
  },
  error: (p) =>
    isObj(p) && typeof p.code === "string" && typeof p.message === "string"
      ? null
      : "needs code and message",
};

function imuPayload(p: unknown): string | null {
  if (!isObj(p)) {
    return "not an object";
  }
  if (!numberArray(p.angular_velocity, 3) || !numberArray(p.linear_acceleration, 3)) {
    return "needs angular_velocity[3] and linear_acceleration[3]";
  }
  return quaternionObject(p.orientation);
}

/** Null when the topic is unknown (forward compatibility), otherwise the
 * validator verdict. */
export function validatePayload(topic: string, payload: unknown): string | null {
  const validator = validators[topic];
  return validator ? validator(payload) : null;
}
