// Client view state: one store per app instance. Snapshot application is
// idempotent and only the newest snapshot is retained; the matrix chain
// keeps its pairwise transfer-stop links.

import type { FlowMatrixPayload, Snapshot } from "./types.js";

export type InterfaceName = "exploration" | "manipulation" | "evaluation";

export interface MatrixChainEntry {
  matrix: FlowMatrixPayload;
  /** transfer stop linking this matrix to its predecessor (null for the head) */
  linkStop: string | null;
}

export interface Viewport {
  centerLat: number;
  centerLon: number;
  zoom: number;
}

export interface RadarConfig {
  order: string[]; // keys of the six glyph axes
  visible: Record<string, boolean>;
}

export const DEFAULT_RADAR_ORDER = ["RL", "NS", "PV", "AL", "DR", "SC"];

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const RADAR_KEY = "busnet.radar";

export function loadRadarConfig(storage: StorageLike | null): RadarConfig {
  const fallback: RadarConfig = {
    order: [...DEFAULT_RADAR_ORDER],
    visible: Object.fromEntries(DEFAULT_RADAR_ORDER.map((k) => [k, true])),
  };
  if (!storage) return fallback;
  const raw = storage.getItem(RADAR_KEY);
  if (!raw) return fallback;
  try {
    const parsed = JSON.parse(raw) as RadarConfig;
    if (Array.isArray(parsed.order) && parsed.order.length > 0) return parsed;
  } catch {
    // fall through to the default on malformed persisted state
  }
  return fallback;
}

export function saveRadarConfig(storage: StorageLike | null, config: RadarConfig): void {
  storage?.setItem(RADAR_KEY, JSON.stringify(config));
}

export class ViewState {
  activeInterface: InterfaceName = "exploration";
  selectedZone: string | null = null;
  selectedRoute: string | null = null;
  searchSessionId: string | null = null;
  resolutionSessionId: string | null = null;
  viewport: Viewport = { centerLat: 0, centerLon: 0, zoom: 12 };
  rankingWeights = "passenger_flow=1";
  rankingFilters = "";
  radar: RadarConfig;

  /** latest snapshot of the active search stream (never more than one) */
  snapshot: Snapshot | null = null;
  /** iterations seen, for the animated count plot */
  countSeries: { iteration: number; count: number }[] = [];

  matrixChain: MatrixChainEntry[] = [];
  focusedMatrix = 0;

  private streamCloser: (() => void) | null = null;

  constructor(storage: StorageLike | null = null) {
    this.radar = loadRadarConfig(storage);
  }

  /**
   * Apply a streamed snapshot. Re-applying the same snapshot changes
   * nothing (idempotent); an older iteration than the current one is
   * ignored so reconnects cannot roll the view back.
   */
  applySnapshot(snap: Snapshot): boolean {
    const current = this.snapshot;
    if (current && snap.iteration < current.iteration) return false;
    if (
      current &&
      snap.iteration === current.iteration &&
      snap.status === current.status &&
      snap.pareto_count === current.pareto_count
    ) {
      return false;
    }
    this.snapshot = snap;
    const last = this.countSeries[this.countSeries.length - 1];
    if (!last || last.iteration !== snap.iteration || last.count !== snap.pareto_count) {
      this.countSeries.push({ iteration: snap.iteration, count: snap.pareto_count });
    }
    return true;
  }

  /** Register the closer of the active stream, ending any previous one. */
  attachStream(sessionId: string, close: () => void): void {
    this.streamCloser?.();
    this.streamCloser = close;
    this.searchSessionId = sessionId;
    this.snapshot = null;
    this.countSeries = [];
  }

  detachStream(): void {
    this.streamCloser?.();
    this.streamCloser = null;
  }

  /**
   * Append a matrix to the chain, linked by a transfer stop that must be
   * present on both the focused matrix and the new one.
   */
  appendMatrix(matrix: FlowMatrixPayload, linkStop: string | null): void {
    if (this.matrixChain.length === 0) {
      this.matrixChain.push({ matrix, linkStop: null });
    } else {
      if (linkStop === null) throw new Error("chained matrices need a link stop");
      const tail = this.matrixChain[this.matrixChain.length - 1].matrix;
      if (!tail.stops.includes(linkStop) || !matrix.stops.includes(linkStop)) {
        throw new Error(`link stop ${linkStop} is not shared by both routes`);
      }
      this.matrixChain.push({ matrix, linkStop });
    }
    this.focusedMatrix = this.matrixChain.length - 1;
  }

  resetMatrixChain(): void {
    this.matrixChain = [];
    this.focusedMatrix = 0;
  }
}
