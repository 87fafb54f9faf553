/** Operator input state machines.
 *
 * Drive: WASD+QE (or joystick axes) map to a body twist, published at a
 * fixed 20 Hz while any axis is active; releasing everything publishes
 * exactly one zero twist (dead-man) and then goes quiet.
 *
 * Head: dragging the attitude ball accumulates pan/tilt (roll with the
 * modifier), publishing unit quaternions at 20 Hz; a double click
 * recenters to identity immediately.
 */

import { fromPanTiltRoll, IDENTITY, Quat } from "./quat.js";

export interface TwistCommand {
  vx: number;
  vy: number;
  w: number;
}

export interface DriveLimits {
  vx: number;
  vy: number;
  w: number;
}

export const COMMAND_PERIOD_MS = 50; // 20 Hz

const KEY_AXES: Record<string, Partial<TwistCommand>> = {
  KeyW: { vx: 1 },
  KeyS: { vx: -1 },
  KeyA: { vy: 1 },
  KeyD: { vy: -1 },
  KeyQ: { w: 1 },
  KeyE: { w: -1 },
};

export class DriveInput {
  private held = new Set<string>();
  private joystick: TwistCommand = { vx: 0, vy: 0, w: 0 };
  private lastSent = -Infinity;
  private wasActive = false;

  constructor(private limits: DriveLimits) {}

  keyDown(code: string): void {
    if (code in KEY_AXES) {
      this.held.add(code);
    }
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  setJoystick(vx: number, vy: number, w = 0): void {
    const clamp = (v: number) => Math.max(-1, Math.min(1, v));
    this.joystick = { vx: clamp(vx), vy: clamp(vy), w: clamp(w) };
  }

  releaseAll(): void {
    this.held.clear();
    this.joystick = { vx: 0, vy: 0, w: 0 };
  }

  current(): TwistCommand {
    let vx = this.joystick.vx;
    let vy = this.joystick.vy;
    let w = this.joystick.w;
    for (const code of this.held) {
      const axes = KEY_AXES[code];
      vx += axes.vx ?? 0;
      vy += axes.vy ?? 0;
      w += axes.w ?? 0;
    }
    const clamp = (v: number) => Math.max(-1, Math.min(1, v));
    return {
      vx: clamp(vx) * this.limits.vx,
      vy: clamp(vy) * this.limits.vy,
      w: clamp(w) * this.limits.w,
    };
  }

  /** Poll at UI rate; returns a twist to publish now, or null. */
  tick(nowMs: number): TwistCommand | null {
    const twist = this.current();
    const active = twist.vx !== 0 || twist.vy !== 0 || twist.w !== 0;
    if (active) {
      if (nowMs - this.lastSent >= COMMAND_PERIOD_MS) {
        this.lastSent = nowMs;
        this.wasActive = true;
        return twist;
      }
      this.wasActive = true;
      return null;
    }
    if (this.wasActive) {
      // dead-man: one zero command on release, then silence
      this.wasActive = false;
      this.lastSent = nowMs;
      return { vx: 0, vy: 0, w: 0 };
    }
    return null;
  }
}

export class HeadInput {
  private pan = 0;
  private tilt = 0;
  private roll = 0;
  private dragging = false;
  private dirty = false;
  private lastSent = -Infinity;

  constructor(
    private limits = { pan: (160 * Math.PI) / 180, tilt: (60 * Math.PI) / 180, roll: (45 * Math.PI) / 180 },
    private gain = 0.01
  ) {}

  startDrag(): void {
    this.dragging = true;
  }

  endDrag(): void {
    this.dragging = false;
  }

  drag(dxPx: number, dyPx: number, rollModifier = false): void {
    if (!this.dragging) {
      return;
    }
    const clamp = (v: number, lim: number) => Math.max(-lim, Math.min(lim, v));
    if (rollModifier) {
      this.roll = clamp(this.roll + dxPx * this.gain, this.limits.roll);
    } else {
      this.pan = clamp(this.pan - dxPx * this.gain, this.limits.pan);
      this.tilt = clamp(this.tilt - dyPx * this.gain, this.limits.tilt);
    }
    this.dirty = true;
  }

  recenter(): void {
    this.pan = 0;
    this.tilt = 0;
    this.roll = 0;
    this.dirty = true;
  }

  attitude(): { pan: number; tilt: number; roll: number } {
    return { pan: this.pan, tilt: this.tilt, roll: this.roll };
  }

  /** Poll at UI rate; returns the quaternion to publish now, or null. */
  tick(nowMs: number): Quat | null {
    if (!this.dirty && !this.dragging) {
      return null;
    }
    if (nowMs - this.lastSent < COMMAND_PERIOD_MS) {
      return null;
    }
    this.lastSent = nowMs;
    this.dirty = false;
    if (this.pan === 0 && this.tilt === 0 && this.roll === 0) {
      return IDENTITY;
    }
    return fromPanTiltRoll(this.pan, this.tilt, this.roll);
  }
}
