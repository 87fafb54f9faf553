/** Quaternion helpers matching the robot's head conventions:
 * q = Rx(roll) * Ry(tilt) * Rz(pan), w kept non-negative. */

export interface Quat {
  w: number;
  x: number;
  y: number;
  z: number;
}

export const IDENTITY: Quat = { w: 1, x: 0, y: 0, z: 0 };

export function multiply(a: Quat, b: Quat): Quat {
  return {
    w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
    x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
    y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
    z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
  };
}

export function aboutAxis(axis: "x" | "y" | "z", angle: number): Quat {
  const c = Math.cos(angle / 2);
  const s = Math.sin(angle / 2);
  if (axis === "x") return { w: c, x: s, y: 0, z: 0 };
  if (axis === "y") return { w: c, x: 0, y: s, z: 0 };
  return { w: c, x: 0, y: 0, z: s };
}

export function normalized(q: Quat): Quat {
  const n = Math.hypot(q.w, q.x, q.y, q.z);
  const sign = q.w < 0 ? -1 : 1;
  return { w: (sign * q.w) / n, x: (sign * q.x) / n, y: (sign * q.y) / n, z: (sign * q.z) / n };
}

export function fromPanTiltRoll(pan: number, tilt: number, roll: number): Quat {
  return normalized(
    multiply(aboutAxis("x", roll), multiply(aboutAxis("y", tilt), aboutAxis("z", pan)))
  );
}

/** ZYX-style extraction mirroring the head controller. */
export function toPanTiltRoll(q: Quat): { pan: number; tilt: number; roll: number } {
  const { w, x, y, z } = normalized(q);
  const sinTilt = Math.max(-1, Math.min(1, 2 * (x * z + w * y)));
  if (Math.abs(sinTilt) > 1 - 1e-9) {
    return {
      pan: 0,
      tilt: Math.sign(sinTilt) * (Math.PI / 2),
      roll: 2 * Math.atan2(x, w),
    };
  }
  return {
    pan: Math.atan2(-2 * (x * y - w * z), w * w + x * x - y * y - z * z),
    tilt: Math.asin(sinTilt),
    roll: Math.atan2(-2 * (y * z - w * x), w * w - x * x - y * y + z * z),
  };
}
