/** Canvas plane mapping.
 *
 * The service pins the drawing plane to the x1 = 0 slice of its search cube
 * and maps the unit canvas onto a 16 m square regardless of the configured
 * mesh resolution; v grows downward on screens, x3 grows upward.
 */

export const CANVAS_SCALE = 16;

export type Vec3 = [number, number, number];

export interface CanvasPoint {
  u: number;
  v: number;
}

export function mapCanvas(u: number, v: number): Vec3 {
  return [0, CANVAS_SCALE * (u - 0.5), CANVAS_SCALE * (0.5 - v)];
}

/** Inverse of mapCanvas on the drawing plane; x1 is dropped. */
export function unmapPoint(x2: number, x3: number): CanvasPoint {
  return { u: 0.5 + x2 / CANVAS_SCALE, v: 0.5 - x3 / CANVAS_SCALE };
}

export function inCanvas(u: number, v: number): boolean {
  return Number.isFinite(u) && Number.isFinite(v) && u >= 0 && u <= 1 && v >= 0 && v <= 1;
}
