// Evaluation interface: collapsible conflict groups with cluster rows
// (boxplots for multi-route clusters, plain bars for single routes), and the
// node-link topology whose conflict markers mirror the engine's marker map.

import { boxplotGeometry } from "./charts.js";
import { clear, el, fmt, svg } from "./dom.js";
import { markerClass, MARKER_GLYPH } from "./markers.js";
import type { ClusterPayload, ResolutionState } from "./types.js";
import { CRITERIA } from "./types.js";

export interface EvaluateCallbacks {
  onResolve(conflictIndex: number, clusterId: string): void;
  onUndo(): void;
  onActivate(conflictIndex: number): void;
  onPreviewCluster(cluster: ClusterPayload | null): void;
}

export function renderEvaluation(
  root: HTMLElement,
  state: ResolutionState,
  callbacks: EvaluateCallbacks,
): void {
  clear(root);
  const head = el("div", { class: "evaluation-head" }, [
    el("h2", {}, [state.final ? "Final route decided" : "Resolve the conflicts"]),
    el("span", { class: "candidate-count", "data-count": state.candidate_count }, [
      `${state.candidate_count} candidate${state.candidate_count === 1 ? "" : "s"}`,
    ]),
    el(
      "button",
      { class: "undo", onclick: () => callbacks.onUndo(), disabled: state.history_depth === 0 },
      ["undo"],
    ),
  ]);
  root.append(head);

  if (state.final && state.final_route) {
    root.append(
      el("p", { class: "final-route", "data-route": state.final_route.join("-") }, [
        state.final_route.join(" - "),
      ]),
    );
  }

  root.append(renderConflictGroups(state, callbacks), renderTopology(state));
}

function scaleFor(state: ResolutionState, name: (typeof CRITERIA)[number]): [number, number] {
  const los = state.clusters.map((c) => c.stats[name][0]);
  const his = state.clusters.map((c) => c.stats[name][4]);
  return [Math.min(...los), Math.max(...his)];
}

function renderConflictGroups(state: ResolutionState, callbacks: EvaluateCallbacks): HTMLElement {
  const wrap = el("section", { class: "conflicts", "data-panel": "conflicts" });
  if (state.conflicts.length === 0) {
    wrap.append(el("p", { class: "placeholder" }, ["No conflicts left"]));
    return wrap;
  }
  state.conflicts.forEach((conflict, index) => {
    const active = conflict.status === "active";
    const group = el("details", {
      class: `conflict-group${active ? " active" : ""}`,
      "data-conflict": index,
      ...(active ? { open: true } : {}),
    });
    const summary = el(
      "summary",
      { onclick: () => callbacks.onActivate(index) },
      [
        `between ${conflict.position[0]} and ${conflict.position[1]} `,
        el("em", {}, [conflict.status]),
      ],
    );
    group.append(summary);
    for (const alternative of conflict.alternatives) {
      const cluster = state.clusters.find((c) => c.id === alternative.cluster);
      if (!cluster) continue;
      group.append(renderClusterRow(state, index, cluster, alternative.segment, callbacks, active));
    }
    wrap.append(group);
  });
  return wrap;
}

function renderClusterRow(
  state: ResolutionState,
  conflictIndex: number,
  cluster: ClusterPayload,
  segment: string[],
  callbacks: EvaluateCallbacks,
  active: boolean,
): HTMLElement {
  const multi = cluster.members.length > 1;
  const row = el("div", {
    class: `cluster-row${multi ? " multi" : " single"}`,
    "data-cluster": cluster.id,
    onmouseenter: () => callbacks.onPreviewCluster(cluster),
    onmouseleave: () => callbacks.onPreviewCluster(null),
    onclick: () => {
      if (active) callbacks.onResolve(conflictIndex, cluster.id);
    },
  });
  row.append(
    el("span", { class: "cluster-pattern" }, [cluster.pattern_text]),
    el("span", { class: "cluster-size" }, [`${cluster.members.length} route${multi ? "s" : ""}`]),
    el("span", { class: "cluster-segment" }, [segment.join("-") || "(direct)"]),
  );

  const chart = svg("svg", { class: "cluster-stats", width: 340, height: 16 * CRITERIA.length });
  CRITERIA.forEach((name, k) => {
    const [lo, hi] = scaleFor(state, name);
    const y = k * 16 + 8;
    chart.append(
      svg("text", { x: 0, y: y + 3, class: "stat-label" }, [
        document.createTextNode(name.slice(0, 4)),
      ]),
    );
    if (multi) {
      const geo = boxplotGeometry(cluster.stats[name], lo, hi, 240);
      chart.append(
        svg("line", { x1: 80 + geo.whiskerLow, x2: 80 + geo.whiskerHigh, y1: y, y2: y, class: "whisker" }),
        svg("rect", {
          x: 80 + geo.boxLow,
          y: y - 5,
          width: Math.max(geo.boxHigh - geo.boxLow, 0.8),
          height: 10,
          class: "box",
        }),
        svg("line", { x1: 80 + geo.median, x2: 80 + geo.median, y1: y - 5, y2: y + 5, class: "median" }),
      );
    } else {
      // a single-member cluster shows plain value bars: the final choice
      const value = cluster.stats[name][2];
      const span = hi > lo ? hi - lo : 1;
      chart.append(
        svg("rect", {
          x: 80,
          y: y - 5,
          width: Math.max(((value - lo) / span) * 240, 0.8),
          height: 10,
          class: "bar",
        }),
        svg("text", { x: 324, y: y + 3, class: "stat-value", "text-anchor": "end" }, [
          document.createTextNode(fmt(value)),
        ]),
      );
    }
  });
  row.append(chart);
  return row;
}

function renderTopology(state: ResolutionState): HTMLElement {
  const section = el("section", { class: "topology", "data-panel": "topology" });
  section.append(el("h3", {}, ["Cluster topology"]));
  const stops = orderedTopologyStops(state);
  const width = Math.max(stops.length * 56 + 20, 200);
  const canvas = svg("svg", { width, height: 70, viewBox: `0 0 ${width} 70`, class: "topology-map" });
  stops.forEach((stop, index) => {
    const x = 28 + index * 56;
    if (index > 0) {
      canvas.append(svg("line", { x1: x - 56 + 9, x2: x - 9, y1: 34, y2: 34, class: "topo-link" }));
    }
    const status = state.markers[stop];
    const group = svg("g", { class: "topo-node", "data-stop": stop });
    group.append(
      svg("circle", { cx: x, cy: 34, r: 9, class: `marker ${status ? markerClass(status) : ""}`.trim() }),
      svg("text", { x, y: 38, class: "marker-glyph", "text-anchor": "middle" }, [
        document.createTextNode(status ? MARKER_GLYPH[status] : ""),
      ]),
      svg("text", { x, y: 58, class: "topo-label", "text-anchor": "middle" }, [
        document.createTextNode(stop),
      ]),
    );
    canvas.append(group);
  });
  section.append(canvas);
  return section;
}

/** Stops of the live cluster patterns in candidate-route order. */
export function orderedTopologyStops(state: ResolutionState): string[] {
  const seen = new Set<string>();
  const ordered: string[] = [];
  const reference = state.candidates[0] ?? [];
  for (const stop of reference) {
    if (stop in state.markers && !seen.has(stop)) {
      seen.add(stop);
      ordered.push(stop);
    }
  }
  for (const stop of Object.keys(state.markers).sort()) {
    if (!seen.has(stop)) {
      seen.add(stop);
      ordered.push(stop);
    }
  }
  return ordered;
}
