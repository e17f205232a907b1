/**
 * Chart geometry: server series in, SVG path strings out.
 *
 * Everything here is coordinate scaling. The potential values, the
 * difference, and the turn markers are taken verbatim from the
 * service's series block; recomputing any of them client-side is a bug.
 */

import type { SeriesBlock } from "./api.js";

export interface ChartGeometry {
  width: number;
  height: number;
  padding: number;
}

export interface TurnMarker {
  unit: number;
  x: number;
  y: number;
}

export interface ChartModel {
  pathA: string;
  pathB: string;
  zeroY: number;
  markers: TurnMarker[];
  lo: number;
  hi: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 640, height: 260, padding: 18 };

/** Value range across both curves, padded so flat series stay visible. */
export function bounds(series: SeriesBlock): [number, number] {
  const values = [...series.p_a, ...series.p_b, 0];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function xScale(units: number[], geometry: ChartGeometry): (unit: number) => number {
  const first = units[0] ?? 1;
  const last = units[units.length - 1] ?? first;
  const span = Math.max(last - first, 1);
  const inner = geometry.width - 2 * geometry.padding;
  return (unit) => geometry.padding + ((unit - first) / span) * inner;
}

function yScale(lo: number, hi: number, geometry: ChartGeometry): (value: number) => number {
  const inner = geometry.height - 2 * geometry.padding;
  return (value) => geometry.padding + ((hi - value) / (hi - lo)) * inner;
}

function pathFor(
  units: number[],
  values: number[],
  toX: (u: number) => number,
  toY: (v: number) => number,
): string {
  return values
    .map((v, i) => `${i === 0 ? "M" : "L"}${toX(units[i]).toFixed(2)},${toY(v).toFixed(2)}`)
    .join(" ");
}

/**
 * Marker positions for the server-reported turning points: one marker
 * per unit whose label is 1, drawn on player A's curve.
 */
export function turnMarkers(
  series: SeriesBlock,
  toX: (u: number) => number,
  toY: (v: number) => number,
): TurnMarker[] {
  const markers: TurnMarker[] = [];
  series.labels.forEach((label, i) => {
    if (label === 1) {
      markers.push({
        unit: series.point_index[i],
        x: toX(series.point_index[i]),
        y: toY(series.p_a[i]),
      });
    }
  });
  return markers;
}

export function chartModel(
  series: SeriesBlock,
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): ChartModel {
  const [lo, hi] = bounds(series);
  const toX = xScale(series.point_index, geometry);
  const toY = yScale(lo, hi, geometry);
  return {
    pathA: pathFor(series.point_index, series.p_a, toX, toY),
    pathB: pathFor(series.point_index, series.p_b, toX, toY),
    zeroY: toY(0),
    markers: turnMarkers(series, toX, toY),
    lo,
    hi,
  };
}

/**
 * Stable fingerprint of a series for view comparisons (the undo button
 * checks the view returned to the digest it had before the last point).
 * JSON round-trips float64 exactly, so equal series digest equally.
 */
export function viewDigest(series: SeriesBlock): string {
  return JSON.stringify([
    series.point_index,
    series.p_a,
    series.p_b,
    series.diff,
    series.labels,
    series.risk,
  ]);
}
