// Pure SVG geometry for the bespoke charts: zone glyph radars and bearing
// rings, three-band horizon charts, boxplots, header distributions, and the
// animated count plot. All functions are deterministic and DOM-free.

export interface Point {
  x: number;
  y: number;
}

function polar(cx: number, cy: number, radius: number, angleRad: number): Point {
  return { x: cx + radius * Math.sin(angleRad), y: cy - radius * Math.cos(angleRad) };
}

/** Closed radar polygon for values normalized to [0, 1], axis 0 at north. */
export function radarPath(values: number[], cx: number, cy: number, radius: number): string {
  if (values.length === 0) return "";
  const step = (2 * Math.PI) / values.length;
  const parts = values.map((v, i) => {
    const p = polar(cx, cy, Math.max(0, Math.min(1, v)) * radius, i * step);
    return `${i === 0 ? "M" : "L"}${p.x.toFixed(2)},${p.y.toFixed(2)}`;
  });
  return parts.join("") + "Z";
}

/**
 * Smooth closed area around a glyph for a 16-sector bearing histogram,
 * rendered between an inner and an outer radius. Sector counts are scaled
 * against `peak` (the histogram maximum unless a shared scale is given).
 */
export function bearingAreaPath(
  histogram: number[],
  cx: number,
  cy: number,
  innerR: number,
  outerR: number,
  peak?: number,
): string {
  const n = histogram.length;
  if (n === 0) return "";
  const top = peak ?? Math.max(...histogram, 1);
  const step = (2 * Math.PI) / n;
  const pts = histogram.map((count, i) => {
    const r = innerR + (outerR - innerR) * (top > 0 ? count / top : 0);
    return polar(cx, cy, r, i * step);
  });
  // Catmull-Rom style smoothing via quadratic midpoints keeps the ring closed
  let d = "";
  for (let i = 0; i < n; i++) {
    const a = pts[i];
    const b = pts[(i + 1) % n];
    const mx = (a.x + b.x) / 2;
    const my = (a.y + b.y) / 2;
    d += i === 0 ? `M${mx.toFixed(2)},${my.toFixed(2)}` : "";
    d += `Q${b.x.toFixed(2)},${b.y.toFixed(2)} `;
    const c = pts[(i + 2) % n];
    d += `${((b.x + c.x) / 2).toFixed(2)},${((b.y + c.y) / 2).toFixed(2)}`;
  }
  return d + "Z";
}

export interface HorizonSlice {
  index: number;
  band: number; // 0-based band the value tops out in
  fraction: number; // filled fraction of that band, (0, 1]
}

/**
 * Three-band horizon chart folding: each value maps to the band it falls in
 * and the filled fraction within that band. Bands share one scale: the
 * maximum value across the series (or `top` when given).
 */
export function horizonBands(values: number[], bands = 3, top?: number): HorizonSlice[] {
  const peak = top ?? Math.max(...values, 1);
  const bandHeight = peak / bands;
  return values.map((v, index) => {
    if (v <= 0) return { index, band: 0, fraction: 0 };
    const clamped = Math.min(v, peak);
    let band = Math.min(bands - 1, Math.floor(clamped / bandHeight - 1e-12));
    const within = clamped - band * bandHeight;
    return { index, band, fraction: within / bandHeight };
  });
}

export interface BoxplotGeometry {
  whiskerLow: number;
  boxLow: number;
  median: number;
  boxHigh: number;
  whiskerHigh: number;
}

/** Map a five-number summary onto [0, width] given a shared [lo, hi] scale. */
export function boxplotGeometry(
  fiveNum: [number, number, number, number, number],
  lo: number,
  hi: number,
  width: number,
): BoxplotGeometry {
  const span = hi > lo ? hi - lo : 1;
  const x = (v: number) => ((Math.min(Math.max(v, lo), hi) - lo) / span) * width;
  const [mn, q1, med, q3, mx] = fiveNum;
  return {
    whiskerLow: x(mn),
    boxLow: x(q1),
    median: x(med),
    boxHigh: x(q3),
    whiskerHigh: x(mx),
  };
}

/** Bar heights (0..1) for a header distribution histogram. */
export function histogramBars(counts: number[]): number[] {
  const peak = Math.max(...counts, 1);
  return counts.map((c) => c / peak);
}

/** Polyline points for the animated generated-route count plot. */
export function countPlotPoints(
  series: { iteration: number; count: number }[],
  width: number,
  height: number,
): string {
  if (series.length === 0) return "";
  const maxIter = Math.max(series[series.length - 1].iteration, 1);
  const maxCount = Math.max(...series.map((s) => s.count), 1);
  return series
    .map((s) => {
      const x = (s.iteration / maxIter) * width;
      const y = height - (s.count / maxCount) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

/** Position of a dashed reference line inside a [lo, hi] header scale. */
export function referenceLineX(value: number, lo: number, hi: number, width: number): number {
  if (hi <= lo) return width / 2;
  const clamped = Math.min(Math.max(value, lo), hi);
  return ((clamped - lo) / (hi - lo)) * width;
}
