import { unmapPoint, type CanvasPoint, type Vec3 } from "./mapping.js";
import type {
  ReconPointMsg,
  ServerMessage,
  SmoothCoeffs,
  StatsMsg,
} from "./protocol.js";

export interface ReconRender extends CanvasPoint {
  t: number;
  indicator: number;
}

export interface OverlayState {
  session: string | null;
  /** raw pointer trail in canvas coordinates, client side only */
  drawn: CanvasPoint[];
  /** stroke points sent so far; reconstructed count never exceeds it */
  sent: number;
  /** recon_point payloads exactly as received */
  recon: ReconPointMsg[];
  /** the same payloads through the inverse plane mapping, render ready */
  points: ReconRender[];
  /** grid times the server skipped; rendered as dashed gaps */
  gaps: number[];
  segments: Array<[number, number]>;
  curves: SmoothCoeffs[];
  /** smoothed segments sampled into canvas coordinates */
  smoothPaths: CanvasPoint[][];
  errors: string[];
  stats: StatsMsg | null;
  finalized: boolean;
}

export function initialOverlay(): OverlayState {
  return {
    session: null,
    drawn: [],
    sent: 0,
    recon: [],
    points: [],
    gaps: [],
    segments: [],
    curves: [],
    smoothPaths: [],
    errors: [],
    stats: null,
    finalized: false,
  };
}

/** Truncated Fourier curve at global time t:
 * a0 + sum_n a[n-1] cos(n s) + b[n-1] sin(n s), s = (t - t_offset) * t_scale. */
export function evaluateCurve(coeffs: SmoothCoeffs, t: number): Vec3 {
  const s = (t - coeffs.t_offset) * coeffs.t_scale;
  const out: Vec3 = [coeffs.a0[0]!, coeffs.a0[1]!, coeffs.a0[2]!];
  for (let n = 1; n <= coeffs.order; n++) {
    const c = Math.cos(n * s);
    const w = Math.sin(n * s);
    const a = coeffs.a[n - 1]!;
    const b = coeffs.b[n - 1]!;
    for (let i = 0; i < 3; i++) out[i] = out[i]! + c * a[i]! + w * b[i]!;
  }
  return out;
}

/** Sample the curve densely over its local span s in (0, duration] and map
 * the drawing-plane components to canvas coordinates. */
export function curveCanvasPath(coeffs: SmoothCoeffs, nSamples = 128): CanvasPoint[] {
  const n = Math.max(2, nSamples);
  const path: CanvasPoint[] = [];
  for (let j = 1; j <= n; j++) {
    const t = coeffs.t_offset + (coeffs.duration * j) / (n * coeffs.t_scale);
    const [, x2, x3] = evaluateCurve(coeffs, t);
    path.push(unmapPoint(x2, x3));
  }
  return path;
}

/** Indicator color scale: 0 -> cold blue, 1 -> warm red. Input is clamped. */
export function indicatorColor(value: number): string {
  const x = Number.isFinite(value) ? Math.min(1, Math.max(0, value)) : 0;
  const hue = 220 * (1 - x); // 220 = blue, 0 = red
  return `hsl(${Math.round(hue)} 85% 50%)`;
}

/** Fold one server message into the overlay. Returns the same (mutated)
 * state object; rendering reads it once per frame. */
export function applyServerMessage(state: OverlayState, msg: ServerMessage): OverlayState {
  switch (msg.type) {
    case "config":
      state.session = msg.session;
      break;
    case "recon_point": {
      if (state.gaps.length + state.recon.length >= state.sent) {
        throw new Error("server acknowledged more points than were sent");
      }
      state.recon.push(msg);
      // rendered points are exactly the payload through the inverse plane
      // mapping; the client never smooths or filters them
      const { u, v } = unmapPoint(msg.x2, msg.x3);
      state.points.push({ u, v, t: msg.t, indicator: msg.indicator });
      break;
    }
    case "skip":
      if (state.gaps.length + state.recon.length >= state.sent) {
        throw new Error("server acknowledged more points than were sent");
      }
      state.gaps.push(msg.t);
      break;
    case "segment":
      state.segments = msg.ranges.map(([lo, hi]) => [lo, hi]);
      break;
    case "smooth":
      state.curves[msg.segment] = msg.coeffs;
      state.smoothPaths[msg.segment] = curveCanvasPath(msg.coeffs);
      break;
    case "stats":
      state.stats = msg;
      state.finalized = true;
      break;
    case "error":
      state.errors.push(`${msg.phase}: ${msg.message}`);
      break;
  }
  return state;
}
