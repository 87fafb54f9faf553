/** Cockpit session state: connection status, per-topic snapshots with
 * staleness and seq-gap tracking, the folded map, and a local session
 * log for the record/replay panel. */

import { Envelope } from "./protocol.js";
import { validatePayload } from "./schemas.js";
import { MapDeltaPayload, MapModel } from "./mapview.js";

export type ConnectionStatus = "connecting" | "connected" | "retrying" | "closed";

export interface TopicSnapshot {
  envelope: Envelope;
  receivedAtMs: number;
}

export class CockpitSession {
  status: ConnectionStatus = "connecting";
  latest = new Map<string, TopicSnapshot>();
  map = new MapModel();
  seqGaps = 0;
  schemaErrors = 0;
  recording = false;
  log: { dir: "in" | "out"; env: Envelope }[] = [];
  private lastSeq = new Map<string, number>();

  /** Fold one telemetry envelope; returns false when the payload failed
   * schema validation (the snapshot is not applied). */
  applyTelemetry(env: Envelope, nowMs: number): boolean {
    const verdict = validatePayload(env.topic, env.payload);
    if (verdict !== null) {
      this.schemaErrors += 1;
      return false;
    }
    const prev = this.lastSeq.get(env.topic);
    if (prev !== undefined && env.seq !== prev + 1) {
      this.seqGaps += 1; // surfaced in the UI after server restarts
    }
    this.lastSeq.set(env.topic, env.seq);
    this.latest.set(env.topic, { envelope: env, receivedAtMs: nowMs });
    if (env.topic === "map_delta") {
      this.map.applyDelta(env.payload as unknown as MapDeltaPayload);
    }
    if (this.recording) {
      this.log.push({ dir: "in", env });
    }
    return true;
  }

  noteSent(env: Envelope): void {
    if (this.recording) {
      this.log.push({ dir: "out", env });
    }
  }

  payload<T>(topic: string): T | null {
    const snap = this.latest.get(topic);
    return snap ? (snap.envelope.payload as T) : null;
  }

  /** Topics silent for longer than the threshold, given their last arrival. */
  staleTopics(nowMs: number, thresholdMs: number): string[] {
    const stale: string[] = [];
    for (const [topic, snap] of this.latest) {
      if (nowMs - snap.receivedAtMs > thresholdMs) {
        stale.push(topic);
      }
    }
    return stale.sort();
  }

  startRecording(): void {
    this.log = [];
    this.recording = true;
  }

  stopRecording(): { dir: "in" | "out"; env: Envelope }[] {
    this.recording = false;
    return this.log;
  }
}
