import {
  LineSplitter,
  ProtocolError,
  decodeServerMessage,
  encodeMessage,
  type ConfigRequest,
  type StrokePointMsg,
} from "./protocol.js";
import { applyServerMessage, initialOverlay, type OverlayState } from "./overlay.js";

/** Anything that can carry wire lines to the service: a websocket in the
 * browser, a TCP socket in tests. */
export interface Transport {
  send(line: string): void;
  close(): void;
}

export interface SessionClientOptions {
  onUpdate?: (state: OverlayState) => void;
  /** clock in milliseconds, injectable for tests */
  now?: () => number;
}

/** Client half of one drawing session. Owns the overlay state, encodes
 * outgoing messages, folds incoming ones, and tracks per-point latency from
 * send to acknowledgement (recon_point or skip).
 */
export class SessionClient {
  readonly state: OverlayState = initialOverlay();

  private transport: Transport;
  private onUpdate: (state: OverlayState) => void;
  private now: () => number;
  private splitter = new LineSplitter();
  private pending = new Map<number, number>(); // grid time -> sent at (ms)
  private latencyMs: number[] = [];

  constructor(transport: Transport, options: SessionClientOptions = {}) {
    this.transport = transport;
    this.onUpdate = options.onUpdate ?? (() => {});
    this.now = options.now ?? (() => performance.now());
  }

  configure(overrides: Omit<ConfigRequest, "type"> = {}): void {
    this.transport.send(encodeMessage({ type: "config", ...overrides }));
  }

  sendStrokePoint(point: StrokePointMsg | Omit<StrokePointMsg, "type">): void {
    const msg: StrokePointMsg = { type: "stroke_point", t: point.t, u: point.u, v: point.v };
    const line = encodeMessage(msg);
    this.state.sent += 1;
    this.pending.set(msg.t, this.now());
    this.transport.send(line);
  }

  finalize(): void {
    this.transport.send(encodeMessage({ type: "finalize" }));
  }

  /** Feed raw bytes or text received from the transport. */
  receive(chunk: string | Uint8Array): void {
    for (const line of this.splitter.push(chunk)) this.handleLine(line);
  }

  /** Fold one complete wire line into the overlay state. */
  handleLine(line: string): void {
    let msg;
    try {
      msg = decodeServerMessage(line);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.state.errors.push(`protocol: ${err.message}`);
        this.onUpdate(this.state);
        return;
      }
      throw err;
    }
    if (msg.type === "recon_point" || msg.type === "skip") {
      const sentAt = this.pending.get(msg.t);
      if (sentAt !== undefined) {
        this.latencyMs.push(this.now() - sentAt);
        this.pending.delete(msg.t);
      }
    }
    applyServerMessage(this.state, msg);
    this.onUpdate(this.state);
  }

  /** Milliseconds from send to acknowledgement, one entry per acked point. */
  latencies(): readonly number[] {
    return this.latencyMs;
  }

  close(): void {
    this.transport.close();
  }
}
