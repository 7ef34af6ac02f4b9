// Flow-matrix view model: 45-degree rotated cell placement, per-stop label
// slots, and transfer badge data. Counts and intensities come straight from
// the API payload.

import type { FlowMatrixPayload } from "./types.js";

export interface PlacedCell {
  i: number;
  j: number;
  x: number;
  y: number;
  count: number;
  intensity: number;
}

/**
 * Place cell (i, j), i < j, on the rotated canvas: the stop axis runs
 * horizontally and each cell's diamond centre sits at the midpoint of its
 * row/column pair, so consecutive matrices chain linearly.
 */
export function placeCell(i: number, j: number, cellSize: number): { x: number; y: number } {
  return {
    x: ((i + j) / 2) * cellSize,
    y: ((j - i) / 2) * cellSize,
  };
}

export function placeCells(matrix: FlowMatrixPayload, cellSize: number): PlacedCell[] {
  return matrix.cells.map((cell) => {
    const { x, y } = placeCell(cell.i, cell.j, cellSize);
    return { i: cell.i, j: cell.j, x, y, count: cell.count, intensity: cell.intensity };
  });
}

/** Opacity for a transfer circle; a minimum keeps the count readable. */
export function badgeOpacity(count: number, peak: number, minimum = 0.25): number {
  if (peak <= 0) return minimum;
  return Math.max(minimum, Math.min(1, count / peak));
}

export interface TransferBadge {
  stop: string;
  routes: number; // how many distinct routes passengers transfer to/from
  count: number; // total transferred passengers at this stop
}

export function transferBadges(matrix: FlowMatrixPayload): TransferBadge[] {
  const badges: TransferBadge[] = [];
  for (const stop of matrix.stops) {
    const entry = matrix.transfers[stop];
    if (!entry) continue;
    const routes = new Set([...Object.keys(entry.in_routes), ...Object.keys(entry.out_routes)]);
    const count =
      Object.values(entry.in_routes).reduce((a, b) => a + b, 0) +
      Object.values(entry.out_routes).reduce((a, b) => a + b, 0);
    if (routes.size > 0 && count > 0) {
      badges.push({ stop, routes: routes.size, count });
    }
  }
  return badges;
}

/** Stops shared by two chained matrices (candidate link points). */
export function sharedStops(a: FlowMatrixPayload, b: FlowMatrixPayload): string[] {
  const set = new Set(a.stops);
  return b.stops.filter((s) => set.has(s));
}
