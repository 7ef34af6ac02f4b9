// Application shell: three tabs over one ApiClient and one ViewState. The
// exploration tab feeds route selections into the manipulation tab, whose
// exhausted sessions feed the evaluation tab.

import { ApiClient } from "./api.js";
import { renderEvaluation } from "./evaluate.js";
import { renderExploration } from "./explore.js";
import { renderManipulation } from "./manipulate.js";
import { ViewState, type InterfaceName } from "./state.js";
import type { Criteria, GraphEdge, GraphPoint, RankedRoute, ResolutionState } from "./types.js";
import { el, clear } from "./dom.js";

export interface AppConfig {
  baseUrl: string;
  /** slippy tile template, e.g. https://tile.example/{z}/{x}/{y}.png */
  tileUrl?: string;
  zoneCount?: number;
}

export class App {
  readonly api: ApiClient;
  readonly state: ViewState;
  private root: HTMLElement;
  private rankings: RankedRoute[] = [];
  private zones: Awaited<ReturnType<ApiClient["zones"]>> | null = null;
  private graphPoints: GraphPoint[] = [];
  private graphEdges: GraphEdge[] = [];
  private original: Criteria | null = null;
  private resolution: ResolutionState | null = null;
  private showHorizons = true;

  constructor(root: HTMLElement, private readonly config: AppConfig) {
    this.api = new ApiClient(config.baseUrl);
    this.state = new ViewState(typeof localStorage === "undefined" ? null : localStorage);
    this.root = root;
  }

  async start(): Promise<void> {
    const [zones, ranked] = await Promise.all([
      this.api.zones(this.config.zoneCount ?? 6),
      this.api.rankRoutes(this.state.rankingWeights),
    ]);
    this.zones = zones;
    this.rankings = ranked.routes;
    this.render();
  }

  show(name: InterfaceName): void {
    this.state.activeInterface = name;
    this.render();
  }

  render(): void {
    clear(this.root);
    const tabs = el("nav", { class: "tabs" });
    for (const name of ["exploration", "manipulation", "evaluation"] as const) {
      tabs.append(
        el(
          "button",
          {
            class: `tab${this.state.activeInterface === name ? " current" : ""}`,
            "data-tab": name,
            onclick: () => this.show(name),
          },
          [name],
        ),
      );
    }
    const body = el("main", { class: "view", "data-view": this.state.activeInterface });
    this.root.append(tabs, body);

    if (this.state.activeInterface === "exploration") {
      renderExploration(
        body,
        {
          zones: this.zones,
          rankings: this.rankings,
          chain: this.state.matrixChain,
          focusedMatrix: this.state.focusedMatrix,
          radar: this.state.radar,
          showHorizons: this.showHorizons,
        },
        {
          onSelectZone: (zoneId) => {
            this.state.selectedZone = zoneId;
          },
          onSelectRoute: (routeId) => {
            void this.openMatrix(routeId, null);
          },
          onExpandTransfers: (routeId, stopId) => this.api.transferShares(routeId, stopId),
          onChainRoute: (routeId, linkStop) => {
            void this.openMatrix(routeId, linkStop);
          },
          onRankingChange: (weights, filters) => {
            void this.reloadRanking(weights, filters);
          },
        },
      );
    } else if (this.state.activeInterface === "manipulation") {
      renderManipulation(
        body,
        {
          points: this.graphPoints,
          edges: this.graphEdges,
          snapshot: this.state.snapshot,
          countSeries: this.state.countSeries,
          original: this.original,
          anchored: [],
        },
        {
          onStart: () => void this.controlSession("resume"),
          onPause: () => void this.controlSession("pause"),
          onStop: () => void this.controlSession("stop"),
          onAnchorStop: () => undefined, // anchors apply to the next session
          onRemoveStop: (stopId) => void this.editStations([], [stopId]),
          onAddStop: (stopId) => void this.editStations([stopId], []),
        },
      );
    } else if (this.resolution) {
      renderEvaluation(body, this.resolution, {
        onResolve: (conflictIndex, clusterId) => void this.resolveConflict(conflictIndex, clusterId),
        onUndo: () => void this.undoResolve(),
        onActivate: (conflictIndex) => void this.activateConflict(conflictIndex),
        onPreviewCluster: () => undefined,
      });
    } else {
      body.append(el("p", { class: "placeholder" }, ["No resolution session yet"]));
    }
  }

  async reloadRanking(weights: string, filters: string): Promise<void> {
    this.state.rankingWeights = weights;
    this.state.rankingFilters = filters;
    const ranked = await this.api.rankRoutes(weights, filters || undefined);
    this.rankings = ranked.routes;
    this.render();
  }

  async openMatrix(routeId: string, linkStop: string | null): Promise<void> {
    const matrix = await this.api.matrix(routeId, "hourly");
    if (linkStop === null) this.state.resetMatrixChain();
    this.state.appendMatrix(matrix, linkStop);
    this.state.selectedRoute = routeId;
    this.render();
  }

  /** Start a replanning session for a route and subscribe to its stream. */
  async startReplanning(routeId: string, params: Record<string, unknown> = {}): Promise<string> {
    const original = this.rankings.find((r) => r.route_id === routeId);
    this.original = original ? original.criteria : null;
    const created = await this.api.createSearchSession({ route_id: routeId, params });
    const sessionId = created.session_id;
    const subscription = this.api.streamSnapshots(sessionId, (snap) => {
      if (this.state.applySnapshot(snap) && this.state.activeInterface === "manipulation") {
        this.render();
      }
    });
    this.state.attachStream(sessionId, subscription.close);
    this.state.applySnapshot(created.snapshot);
    const graph = await this.api.sessionGraph(sessionId);
    this.graphPoints = graph.features
      .filter((f) => f.geometry.type === "Point")
      .map((f) => {
        const coords = f.geometry.coordinates as [number, number];
        const props = f.properties as unknown as { stop_id: string; topo_index: number; anchor: boolean };
        return { ...props, lon: coords[0], lat: coords[1] };
      });
    this.graphEdges = graph.features
      .filter((f) => f.geometry.type === "LineString")
      .map((f) => f.properties as unknown as GraphEdge);
    this.show("manipulation");
    return sessionId;
  }

  async controlSession(action: "pause" | "resume" | "stop"): Promise<void> {
    if (this.state.searchSessionId) {
      await this.api.control(this.state.searchSessionId, action);
    }
  }

  async editStations(add: string[], remove: string[]): Promise<void> {
    if (this.state.searchSessionId) {
      await this.api.editStations(this.state.searchSessionId, add, remove);
    }
  }

  async openEvaluation(beta = 4): Promise<void> {
    if (!this.state.searchSessionId) throw new Error("no search session to evaluate");
    const created = await this.api.createResolutionSession({
      search_session_id: this.state.searchSessionId,
      beta,
    });
    this.state.resolutionSessionId = created.session_id;
    this.resolution = created.state;
    this.show("evaluation");
  }

  async resolveConflict(conflictIndex: number, clusterId: string): Promise<void> {
    if (!this.state.resolutionSessionId) return;
    this.resolution = await this.api.resolve(this.state.resolutionSessionId, conflictIndex, clusterId);
    this.render();
  }

  async undoResolve(): Promise<void> {
    if (!this.state.resolutionSessionId) return;
    this.resolution = await this.api.undo(this.state.resolutionSessionId);
    this.render();
  }

  async activateConflict(conflictIndex: number): Promise<void> {
    if (!this.state.resolutionSessionId) return;
    this.resolution = await this.api.activateConflict(this.state.resolutionSessionId, conflictIndex);
    this.render();
  }

  /** For tests: inject a resolution state without a live session. */
  setResolutionState(state: ResolutionState): void {
    this.resolution = state;
    this.render();
  }
}

export function mount(root: HTMLElement, config: AppConfig): App {
  const app = new App(root, config);
  void app.start();
  return app;
}
