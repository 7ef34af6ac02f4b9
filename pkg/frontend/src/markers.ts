// Conflict marker rendering contract: the DOM classes and glyphs mirror the
// engine's marker states one-to-one.

import type { MarkerStatus } from "./types.js";

export const MARKER_CLASS: Record<MarkerStatus, string> = {
  resolved: "marker-resolved",
  active: "marker-active",
  pending: "marker-pending",
};

export const MARKER_GLYPH: Record<MarkerStatus, string> = {
  resolved: "✓", // blue check mark
  active: "?", // orange question mark
  pending: "?", // gray question mark
};

export function markerClass(status: MarkerStatus): string {
  const cls = MARKER_CLASS[status];
  if (!cls) throw new Error(`unknown marker status ${status}`);
  return cls;
}

export function statusOfClass(className: string): MarkerStatus {
  for (const [status, cls] of Object.entries(MARKER_CLASS)) {
    if (className.split(/\s+/).includes(cls)) return status as MarkerStatus;
  }
  throw new Error(`no marker class in ${className}`);
}
