// Wire types for the busnet HTTP service. Every rendered number comes from
// one of these fields; the UI never recomputes engine math.

export const CRITERIA = [
  "service_time",
  "passenger_flow",
  "directness",
  "construction_cost",
  "service_cost",
] as const;

export type CriterionName = (typeof CRITERIA)[number];

export type Criteria = Record<CriterionName, number>;

export interface RouteSummary {
  id: string;
  stops: string[];
  criteria: Criteria;
}

export interface Snapshot {
  iteration: number;
  status: "paused" | "running" | "exhausted" | "stopped";
  pareto_count: number;
  histograms: Record<CriterionName, number[]>;
  routes: RouteSummary[];
}

export interface ZoneStats {
  route_length_avg: number;
  stop_count_avg: number;
  passenger_volume: number;
  average_load: number;
  directness_avg: number;
  service_cost_avg: number;
  outflow_by_bearing: number[];
  inflow_by_bearing: number[];
}

export interface ZoneFeature {
  type: "Feature";
  geometry: { type: string; coordinates: unknown };
  properties: {
    zone_id: string;
    stop_ids: string[];
    centroid: [number, number]; // lon, lat
    stats?: ZoneStats;
  };
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: ZoneFeature[];
}

export interface RankedRoute {
  route_id: string;
  criteria: Criteria;
  score: number;
}

export interface MatrixCell {
  i: number;
  j: number;
  from: string;
  to: string;
  count: number;
  intensity: number;
}

export interface FlowMatrixPayload {
  route_id: string;
  stops: string[];
  bin: "hourly" | "weekday";
  threshold: number;
  cells: MatrixCell[];
  checkins: Record<string, number[]>;
  checkouts: Record<string, number[]>;
  boardings: Record<string, number>;
  alightings: Record<string, number>;
  transfers: Record<string, { in_routes: Record<string, number>; out_routes: Record<string, number> }>;
}

export interface TransferShares {
  stop: string;
  total: number;
  shares: { route: string; count: number; direction: "in" | "out"; share: number }[];
}

export type MarkerStatus = "resolved" | "active" | "pending";

export interface ClusterPayload {
  id: string;
  pattern: string[];
  pattern_text: string;
  core: string[];
  members: string[][];
  stats: Record<CriterionName, [number, number, number, number, number]>;
}

export interface ConflictPayload {
  position: [string, string];
  status: MarkerStatus | "active" | "pending";
  alternatives: { cluster: string; segment: string[] }[];
}

export interface ResolutionState {
  final: boolean;
  final_route: string[] | null;
  beta: number;
  candidate_count: number;
  candidates: string[][];
  clusters: ClusterPayload[];
  conflicts: ConflictPayload[];
  markers: Record<string, MarkerStatus>;
  history_depth: number;
}

export interface GraphPoint {
  stop_id: string;
  topo_index: number;
  anchor: boolean;
  lon: number;
  lat: number;
}

export interface GraphEdge {
  from: string;
  to: string;
  km: number;
}
