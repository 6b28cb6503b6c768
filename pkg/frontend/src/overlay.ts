import type { GridPayload } from "./types";

export interface OverlayCell {
  bounds: [[number, number], [number, number]];
  value: number;
  color: string;
}

export interface OverlayModel {
  cells: OverlayCell[];
  /** Legend endpoints: this grid's own min and max. */
  min: number;
  max: number;
  timestamp: number;
  parameter: string;
}

// blue -> yellow -> red ramp for the raster (marker colors stay banded)
const RAMP = ["#2c7bb6", "#abd9e9", "#ffffbf", "#fdae61", "#d7191c"];

function lerpChannel(a: number, b: number, t: number): number {
  return Math.round(a + (b - a) * t);
}

function hexToRgb(hex: string): [number, number, number] {
  return [
    parseInt(hex.slice(1, 3), 16),
    parseInt(hex.slice(3, 5), 16),
    parseInt(hex.slice(5, 7), 16),
  ];
}

export function rampColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const scaled = clamped * (RAMP.length - 1);
  const i = Math.min(Math.floor(scaled), RAMP.length - 2);
  const frac = scaled - i;
  const [r1, g1, b1] = hexToRgb(RAMP[i]);
  const [r2, g2, b2] = hexToRgb(RAMP[i + 1]);
  const r = lerpChannel(r1, r2, frac);
  const g = lerpChannel(g1, g2, frac);
  const b = lerpChannel(b1, b2, frac);
  return `rgb(${r},${g},${b})`;
}

/** Turn a grid payload into map rectangles scaled to the grid's own range. */
export function buildOverlay(payload: GridPayload): OverlayModel {
  const { bbox, rows, cols, parameter, timestamp } = payload.meta;
  const [latMin, lonMin, latMax, lonMax] = bbox;
  const dlat = (latMax - latMin) / rows;
  const dlon = (lonMax - lonMin) / cols;
  const values = payload.cells.features.map((f) => f.properties.value);
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min;
  const cells = payload.cells.features.map((feature) => {
    const { row, col, value } = feature.properties;
    const north = latMax - row * dlat;
    const west = lonMin + col * dlon;
    const t = span > 0 ? (value - min) / span : 0.5;
    return {
      bounds: [
        [north - dlat, west],
        [north, west + dlon],
      ] as [[number, number], [number, number]],
      value,
      color: rampColor(t),
    };
  });
  return { cells, min, max, timestamp, parameter };
}

/** Grid cell whose value is the maximum (first hit wins on ties). */
export function hottestCell(model: OverlayModel): OverlayCell {
  let best = model.cells[0];
  for (const cell of model.cells) {
    if (cell.value > best.value) {
      best = cell;
    }
  }
  return best;
}
