/** WebSocket connection with exponential-backoff reconnection.
 *
 * The socket factory is injectable so tests can drive the state machine
 * without a network.  Outgoing envelopes are refused while disconnected
 * (the UI never queues commands for a robot it cannot see). */

import { Envelope, LineSplitter, encodeEnvelope } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionEvents {
  onStatus?: (status: "connecting" | "connected" | "retrying" | "closed") => void;
  onEnvelope?: (env: Envelope) => void;
  onDecodeError?: (message: string) => void;
}

const BACKOFF_INITIAL_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class CockpitConnection {
  private socket: SocketLike | null = null;
  private splitter = new LineSplitter();
  private backoffMs = BACKOFF_INITIAL_MS;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  connected = false;
  private seqByTopic = new Map<string, number>();

  constructor(
    private url: string,
    private events: ConnectionEvents = {},
    private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike
  ) {}

  open(): void {
    this.closed = false;
    this.connect();
  }

  private connect(): void {
    this.events.onStatus?.("connecting");
    this.splitter = new LineSplitter();
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.connected = true;
      this.backoffMs = BACKOFF_INITIAL_MS;
      this.events.onStatus?.("connected");
    };
    sock.onmessage = (event) => {
      try {
        for (const env of this.splitter.feed(String(event.data))) {
          this.events.onEnvelope?.(env);
        }
      } catch (err) {
        this.events.onDecodeError?.((err as Error).message);
      }
    };
    const retry = () => {
      if (this.connected) {
        this.connected = false;
      }
      if (this.closed) {
        this.events.onStatus?.("closed");
        return;
      }
      this.events.onStatus?.("retrying");
      this.retryTimer = setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    };
    sock.onclose = retry;
    sock.onerror = () => {
      /* the close handler performs the retry */
    };
  }

  /** Send one command envelope; seq is assigned per topic. Returns false
   * while disconnected. */
  send(topic: string, stamp: number, payload: unknown): Envelope | null {
    if (!this.connected || this.socket === null) {
      return null;
    }
    const seq = this.seqByTopic.get(topic) ?? 0;
    this.seqByTopic.set(topic, seq + 1);
    const env: Envelope = { topic, stamp, seq, payload };
    this.socket.send(encodeEnvelope(env));
    return env;
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
    }
    this.socket?.close();
    this.connected = false;
  }
}
