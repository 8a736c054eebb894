/**
 * Evaluation of server-provided color scales. The client never invents
 * its own mapping: it interpolates the exact anchors the server sent, with
 * the same rounding, so a cell painted here matches the server-rendered
 * PPM pixel bit for bit.
 */

import type { ScaleDoc } from "./api.js";

export type Rgb = [number, number, number];

/** Round half to even, matching the server's rounding of channel values. */
export function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

function lerp(a: number[], b: number[], f: number): Rgb {
  return [0, 1, 2].map((c) => roundHalfEven(a[c] + (b[c] - a[c]) * f)) as Rgb;
}

/** RGB for a normalized value in [0, 1] (out-of-range values clamp). */
export function evaluateScale(scale: ScaleDoc, t: number): Rgb {
  const clamped = Math.min(1, Math.max(0, t));
  if (scale.kind === "sequential") {
    return lerp(scale.colors[0], scale.colors[1], clamped);
  }
  if (clamped <= 0.5) {
    return lerp(scale.colors[0], scale.colors[1], 2 * clamped);
  }
  return lerp(scale.colors[1], scale.colors[2], 2 * clamped - 1);
}

export function cssColor(rgb: Rgb): string {
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}
