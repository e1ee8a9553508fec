import { inCanvas } from "./mapping.js";
import type { StrokePointMsg } from "./protocol.js";

export interface RawSample {
  time: number;
  u: number;
  v: number;
}

/** Pointer samples collected at display rate, downsampled to the session
 * grid by taking the raw sample nearest to each grid time k*dt (k = 1, 2,
 * ...). Off-canvas and non-monotone samples never enter the capture.
 */
export class StrokeCapture {
  private samples: RawSample[] = [];
  private nextStep = 1;

  get size(): number {
    return this.samples.length;
  }

  get lastTime(): number | null {
    const last = this.samples[this.samples.length - 1];
    return last ? last.time : null;
  }

  /** Record one pointer sample; returns false when the sample is dropped. */
  add(time: number, u: number, v: number): boolean {
    if (!Number.isFinite(time) || time < 0) return false;
    if (!inCanvas(u, v)) return false;
    const last = this.lastTime;
    if (last !== null && time <= last) return false;
    this.samples.push({ time, u, v });
    return true;
  }

  /** Raw sample nearest to time t (ties resolved toward the earlier one). */
  nearest(t: number): RawSample | null {
    const n = this.samples.length;
    if (n === 0) return null;
    // binary search for the first sample at or after t
    let lo = 0;
    let hi = n;
    while (lo < hi) {
      const mid = (lo + hi) >> 1;
      if (this.samples[mid]!.time < t) lo = mid + 1;
      else hi = mid;
    }
    if (lo === 0) return this.samples[0]!;
    if (lo === n) return this.samples[n - 1]!;
    const before = this.samples[lo - 1]!;
    const after = this.samples[lo]!;
    return t - before.time <= after.time - t ? before : after;
  }

  private pointAt(step: number, dt: number): StrokePointMsg {
    const t = step * dt;
    const sample = this.nearest(t)!;
    return { type: "stroke_point", t, u: sample.u, v: sample.v };
  }

  private lastStep(dt: number): number {
    const last = this.lastTime;
    if (last === null) return 0;
    // a grid time just past the stroke end still has its nearest sample
    // within half a step
    return Math.floor((last + 0.5 * dt) / dt + 1e-9);
  }

  /** Full downsampling pass (pure; does not advance the streaming cursor). */
  downsample(dt: number): StrokePointMsg[] {
    if (dt <= 0 || !Number.isFinite(dt)) throw new RangeError("dt must be positive");
    const out: StrokePointMsg[] = [];
    for (let k = 1; k <= this.lastStep(dt); k++) out.push(this.pointAt(k, dt));
    return out;
  }

  /** Grid points whose nearest sample is already determined (both neighbors
   * seen), for live streaming while the stroke is still being drawn. */
  drainReady(dt: number): StrokePointMsg[] {
    if (dt <= 0 || !Number.isFinite(dt)) throw new RangeError("dt must be positive");
    const last = this.lastTime;
    const out: StrokePointMsg[] = [];
    if (last === null) return out;
    while (this.nextStep * dt <= last) out.push(this.pointAt(this.nextStep++, dt));
    return out;
  }

  /** Remaining grid points once the stroke has ended. */
  drainFinal(dt: number): StrokePointMsg[] {
    const out: StrokePointMsg[] = [];
    while (this.nextStep <= this.lastStep(dt)) out.push(this.pointAt(this.nextStep++, dt));
    return out;
  }

  reset(): void {
    this.samples = [];
    this.nextStep = 1;
  }
}
