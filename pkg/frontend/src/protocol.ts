/** Envelope wire protocol: newline-delimited JSON, floats capped at nine
 * fraction digits, matching what the server encodes and decodes. */

export interface Envelope {
  topic: string;
  stamp: number;
  seq: number;
  payload: unknown;
}

export const COMMAND_TOPICS = [
  "cmd_vel",
  "cmd_ee_pose",
  "cmd_joint_traj",
  "cmd_head",
  "cmd_gripper",
  "cmd_baseline",
  "cmd_goal",
] as const;

export const TELEMETRY_TOPICS = [
  "pose2d",
  "wheel_states",
  "joint_states",
  "ptru_state",
  "imu_body",
  "imu_head",
  "scan",
  "sonar",
  "map_delta",
  "bus_cycle",
  "camera_pose",
  "plan",
  "ik_preview",
  "error",
] as const;

export type CommandTopic = (typeof COMMAND_TOPICS)[number];
export type TelemetryTopic = (typeof TELEMETRY_TOPICS)[number];

const WIRE_DIGITS = 9;

export function quantize(value: unknown): unknown {
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new Error("wire payloads cannot carry non-finite numbers");
    }
    if (Number.isInteger(value)) {
      return value;
    }
    const q = Number(value.toFixed(WIRE_DIGITS));
    return q === 0 ? 0 : q;
  }
  if (Array.isArray(value)) {
    return value.map(quantize);
  }
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>)) {
      out[key] = quantize((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

function sortedStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(sortedStringify).join(",") + "]";
  }
  const obj = value as Record<string, unknown>;
  const parts = Object.keys(obj)
    .sort()
    .map((k) => JSON.stringify(k) + ":" + sortedStringify(obj[k]));
  return "{" + parts.join(",") + "}";
}

/** One canonical line (with trailing newline) for one envelope. */
export function encodeEnvelope(env: Envelope): string {
  const record = {
    topic: env.topic,
    stamp: quantize(env.stamp),
    seq: Math.trunc(env.seq),
    payload: quantize(env.payload),
  };
  return sortedStringify(record) + "\n";
}

export class DecodeError extends Error {}

export function decodeEnvelope(line: string): Envelope {
  let record: unknown;
  try {
    record = JSON.parse(line);
  } catch (err) {
    throw new DecodeError(`invalid JSON: ${(err as Error).message}`);
  }
  if (record === null || typeof record !== "object" || Array.isArray(record)) {
    throw new DecodeError("envelope must be a JSON object");
  }
  const rec = record as Record<string, unknown>;
  for (const key of ["topic", "stamp", "seq", "payload"]) {
    if (!(key in rec)) {
      throw new DecodeError(`missing field '${key}'`);
    }
  }
  if (typeof rec.topic !== "string" || rec.topic.length === 0) {
    throw new DecodeError("topic must be a non-empty string");
  }
  if (typeof rec.stamp !== "number") {
    throw new DecodeError("stamp must be a number");
  }
  if (typeof rec.seq !== "number" || !Number.isInteger(rec.seq)) {
    throw new DecodeError("seq must be an integer");
  }
  return {
    topic: rec.topic,
    stamp: rec.stamp,
    seq: rec.seq,
    payload: rec.payload,
  };
}

/** Split a text chunk stream into envelopes, keeping partial lines. */
export class LineSplitter {
  private buffer = "";

  feed(chunk: string): Envelope[] {
    this.buffer += chunk;
    const out: Envelope[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) {
        break;
      }
      const line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.trim().length > 0) {
        out.push(decodeEnvelope(line));
      }
    }
    return out;
  }
}
