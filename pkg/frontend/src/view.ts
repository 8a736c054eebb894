/**
 * Raster painting of a pixel-matrix slice. The painter produces an RGBA
 * buffer mirroring the server's PPM layout — one cell block per matrix
 * value, 1-pixel white gutters between column groups — which the browser
 * shell blits into a canvas via ImageData.
 */

import { GROUP_ORDER, decodeArray, type SliceDocument } from "./api.js";
import { evaluateScale } from "./scales.js";

export interface Raster {
  width: number;
  height: number;
  /** RGBA, row-major. */
  pixels: Uint8ClampedArray<ArrayBuffer>;
}

export interface CellAddress {
  group: string;
  row: number;
  col: number;
}

export function paintSlice(slice: SliceDocument, cellW = 1, cellH = 1): Raster {
  if (cellW < 1 || cellH < 1) {
    throw new Error("cell size must be positive");
  }
  const blocks = GROUP_ORDER.map((name) => decodeArray(slice.groups[name]));
  const widths = blocks.map((b) => b.shape[1]);
  const rows = slice.count;
  const width = widths.reduce((a, w) => a + w * cellW, 0) + (GROUP_ORDER.length - 1);
  const height = rows * cellH;
  const pixels = new Uint8ClampedArray(width * height * 4).fill(255);

  let x0 = 0;
  GROUP_ORDER.forEach((name, g) => {
    const block = blocks[g];
    const w = widths[g];
    const scale = slice.scales[name];
    for (let row = 0; row < rows; row++) {
      for (let col = 0; col < w; col++) {
        const [r, gch, b] = evaluateScale(scale, block.values[row * w + col]);
        for (let dy = 0; dy < cellH; dy++) {
          const y = row * cellH + dy;
          for (let dx = 0; dx < cellW; dx++) {
            const p = (y * width + x0 + col * cellW + dx) * 4;
            pixels[p] = r;
            pixels[p + 1] = gch;
            pixels[p + 2] = b;
          }
        }
      }
    }
    x0 += w * cellW + 1; // white gutter column
  });
  return { width, height, pixels };
}

/** Map raster coordinates back to (group, row, column); null on gutters
 * and out-of-range points. */
export function cellAt(slice: SliceDocument, x: number, y: number, cellW = 1, cellH = 1): CellAddress | null {
  const row = Math.floor(y / cellH);
  if (x < 0 || y < 0 || row >= slice.count) return null;
  let x0 = 0;
  for (const name of GROUP_ORDER) {
    const w = decodeArray(slice.groups[name]).shape[1] * cellW;
    if (x < x0 + w) {
      return { group: name, row, col: Math.floor((x - x0) / cellW) };
    }
    if (x < x0 + w + 1) return null; // gutter
    x0 += w + 1;
  }
  return null;
}

/** Row index under a raster y coordinate, or null outside the matrix. */
export function rowAt(slice: SliceDocument, y: number, cellH = 1): number | null {
  const row = Math.floor(y / cellH);
  return y >= 0 && row < slice.count ? row : null;
}

export function drawToCanvas(canvas: HTMLCanvasElement, raster: Raster): void {
  canvas.width = raster.width;
  canvas.height = raster.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  ctx.putImageData(new ImageData(raster.pixels, raster.width, raster.height), 0, 0);
}
