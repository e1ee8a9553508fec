/** Newline-delimited JSON wire protocol spoken by the drawing service.
 *
 * One JSON object per line, `type` field first; the byte layout of a line is
 * part of the contract (compact separators, insertion key order), so encoding
 * goes through JSON.stringify on objects built in field order and never
 * reorders keys.
 */

export interface ConfigRequest {
  type: "config";
  omega0?: number;
  c0?: number;
  noise?: number;
  seed?: number;
  dt?: number;
  resolution?: number;
  v_max?: number;
  order?: number;
  gap_factor?: number;
}

export interface ConfigEcho {
  type: "config";
  session: string;
  // the echo carries every session setting; the client treats them as opaque
  [key: string]: unknown;
}

export interface StrokePointMsg {
  type: "stroke_point";
  t: number;
  u: number;
  v: number;
}

export interface FinalizeMsg {
  type: "finalize";
}

export interface SkipMsg {
  type: "skip";
  t: number;
  reason: string;
}

export interface ReconPointMsg {
  type: "recon_point";
  t: number;
  x1: number;
  x2: number;
  x3: number;
  indicator: number;
}

export interface SegmentMsg {
  type: "segment";
  ranges: Array<[number, number]>;
}

export interface SmoothCoeffs {
  order: number;
  duration: number;
  t_offset: number;
  t_scale: number;
  a0: number[];
  a: number[][];
  b: number[][];
}

export interface SmoothMsg {
  type: "smooth";
  segment: number;
  coeffs: SmoothCoeffs;
}

export interface StatsMsg {
  type: "stats";
  n_points: number;
  n_skipped: number;
  latency_ms: { mean: number | null; max: number | null; p95: number | null };
}

export interface ErrorMsg {
  type: "error";
  phase: string;
  message: string;
}

export type ClientMessage = ConfigRequest | StrokePointMsg | FinalizeMsg;
export type ServerMessage =
  | ConfigEcho
  | SkipMsg
  | ReconPointMsg
  | SegmentMsg
  | SmoothMsg
  | StatsMsg
  | ErrorMsg;

export class ProtocolError extends Error {}

function checkEncodable(value: unknown, path: string): void {
  if (value === null) return;
  switch (typeof value) {
    case "number":
      if (!Number.isFinite(value)) {
        throw new ProtocolError(`non-finite number at ${path}`);
      }
      return;
    case "string":
    case "boolean":
      return;
    case "object":
      if (Array.isArray(value)) {
        value.forEach((item, i) => checkEncodable(item, `${path}[${i}]`));
        return;
      }
      for (const [key, item] of Object.entries(value as Record<string, unknown>)) {
        checkEncodable(item, `${path}.${key}`);
      }
      return;
    default:
      // undefined / function / symbol would be dropped silently by stringify
      throw new ProtocolError(`unencodable value (${typeof value}) at ${path}`);
  }
}

/** Serialize one message to its wire line (compact JSON plus newline). */
export function encodeMessage(msg: ClientMessage | ServerMessage | Record<string, unknown>): string {
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    throw new ProtocolError("message must be a JSON object");
  }
  if (typeof (msg as Record<string, unknown>)["type"] !== "string") {
    throw new ProtocolError("message must carry a string 'type' field");
  }
  checkEncodable(msg, "$");
  return JSON.stringify(msg) + "\n";
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireFinite(obj: Record<string, unknown>, key: string, kind: string): number {
  const value = obj[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`${kind} message needs finite number '${key}'`);
  }
  return value;
}

function requireString(obj: Record<string, unknown>, key: string, kind: string): string {
  const value = obj[key];
  if (typeof value !== "string") {
    throw new ProtocolError(`${kind} message needs string '${key}'`);
  }
  return value;
}

function requireVector(value: unknown, length: number, where: string): number[] {
  if (!Array.isArray(value) || value.length !== length) {
    throw new ProtocolError(`${where} must be a length-${length} array`);
  }
  for (const item of value) {
    if (typeof item !== "number" || !Number.isFinite(item)) {
      throw new ProtocolError(`${where} must contain finite numbers`);
    }
  }
  return value as number[];
}

function parseCoeffs(value: unknown): SmoothCoeffs {
  if (!isRecord(value)) throw new ProtocolError("smooth message needs a coeffs object");
  const order = requireFinite(value, "order", "smooth");
  if (!Number.isInteger(order) || order < 0) throw new ProtocolError("coeffs order must be a non-negative integer");
  const duration = requireFinite(value, "duration", "smooth");
  const tOffset = requireFinite(value, "t_offset", "smooth");
  const tScale = requireFinite(value, "t_scale", "smooth");
  if (duration <= 0 || tScale <= 0) throw new ProtocolError("coeffs duration and t_scale must be positive");
  const a0 = requireVector(value["a0"], 3, "coeffs a0");
  const readRows = (key: "a" | "b"): number[][] => {
    const rows = value[key];
    if (!Array.isArray(rows) || rows.length !== order) {
      throw new ProtocolError(`coeffs ${key} must have one row per harmonic`);
    }
    return rows.map((row, i) => requireVector(row, 3, `coeffs ${key}[${i}]`));
  };
  return { order, duration, t_offset: tOffset, t_scale: tScale, a0, a: readRows("a"), b: readRows("b") };
}

/** Parse and validate one server line. Throws ProtocolError on anything that
 * does not match the schema. */
export function decodeServerMessage(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new ProtocolError("line is not valid JSON");
  }
  if (!isRecord(raw)) throw new ProtocolError("message must be a JSON object");
  const type = raw["type"];
  if (typeof type !== "string") throw new ProtocolError("message must carry a string 'type' field");

  switch (type) {
    case "config":
      requireString(raw, "session", "config");
      return raw as ConfigEcho;
    case "skip":
      requireFinite(raw, "t", "skip");
      requireString(raw, "reason", "skip");
      return raw as unknown as SkipMsg;
    case "recon_point":
      for (const key of ["t", "x1", "x2", "x3", "indicator"]) requireFinite(raw, key, "recon_point");
      return raw as unknown as ReconPointMsg;
    case "segment": {
      const ranges = raw["ranges"];
      if (!Array.isArray(ranges)) throw new ProtocolError("segment message needs a ranges array");
      for (const pair of ranges) {
        const [lo, hi] = requireVector(pair, 2, "segment range");
        if (!Number.isInteger(lo) || !Number.isInteger(hi) || lo! > hi!) {
          throw new ProtocolError("segment ranges must be integer [lo, hi] pairs");
        }
      }
      return raw as unknown as SegmentMsg;
    }
    case "smooth": {
      const segment = requireFinite(raw, "segment", "smooth");
      if (!Number.isInteger(segment) || segment < 0) throw new ProtocolError("smooth segment index must be a non-negative integer");
      return { type: "smooth", segment, coeffs: parseCoeffs(raw["coeffs"]) };
    }
    case "stats": {
      const nPoints = requireFinite(raw, "n_points", "stats");
      const nSkipped = requireFinite(raw, "n_skipped", "stats");
      const latency = raw["latency_ms"];
      if (!Number.isInteger(nPoints) || !Number.isInteger(nSkipped) || !isRecord(latency)) {
        throw new ProtocolError("stats message needs integer counts and a latency_ms object");
      }
      for (const key of ["mean", "max", "p95"]) {
        const value = latency[key];
        if (value !== null && (typeof value !== "number" || !Number.isFinite(value))) {
          throw new ProtocolError(`stats latency_ms.${key} must be a finite number or null`);
        }
      }
      return raw as unknown as StatsMsg;
    }
    case "error":
      requireString(raw, "phase", "error");
      requireString(raw, "message", "error");
      return raw as unknown as ErrorMsg;
    default:
      throw new ProtocolError(`unknown message type '${type}'`);
  }
}

/** Reassemble newline-delimited messages from arbitrary byte or string chunks
 * (sockets fragment lines; websocket frames may batch several). */
export class LineSplitter {
  private buffer = "";
  private decoder = new TextDecoder("utf-8");

  push(chunk: string | Uint8Array): string[] {
    this.buffer += typeof chunk === "string" ? chunk : this.decoder.decode(chunk, { stream: true });
    const lines: string[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      let line = this.buffer.slice(0, idx);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      this.buffer = this.buffer.slice(idx + 1);
      if (line.length > 0) lines.push(line);
    }
    return lines;
  }

  /** Any trailing partial line still buffered (useful at EOF). */
  residue(): string {
    return this.buffer;
  }
}
