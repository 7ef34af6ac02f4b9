// Manipulation interface: feasible stops on the map, start/pause controls,
// the animated generated-route count plot, and the live result table whose
// header distributions double as range indicators. Every number shown comes
// from the latest streamed snapshot.

import { countPlotPoints, histogramBars, referenceLineX } from "./charts.js";
import { clear, el, fmt, svg } from "./dom.js";
import type { Criteria, GraphPoint, GraphEdge, Snapshot } from "./types.js";
import { CRITERIA } from "./types.js";

export interface ManipulateCallbacks {
  onStart(): void;
  onPause(): void;
  onStop(): void;
  onAnchorStop(stopId: string): void;
  onRemoveStop(stopId: string): void;
  onAddStop(stopId: string): void;
}

export interface ManipulateData {
  points: GraphPoint[];
  edges: GraphEdge[];
  snapshot: Snapshot | null;
  countSeries: { iteration: number; count: number }[];
  /** criteria of the route being replaced, for the dashed reference lines */
  original: Criteria | null;
  anchored: string[];
}

export function renderManipulation(
  root: HTMLElement,
  data: ManipulateData,
  callbacks: ManipulateCallbacks,
): void {
  clear(root);
  root.append(
    renderControls(data, callbacks),
    renderMap(data, callbacks),
    renderCountPlot(data),
    renderResultTable(data),
  );
}

function renderControls(data: ManipulateData, callbacks: ManipulateCallbacks): HTMLElement {
  const status = data.snapshot?.status ?? "paused";
  return el("div", { class: "toolbox" }, [
    el("button", { class: "start", onclick: () => callbacks.onStart(), disabled: status === "running" }, ["start"]),
    el("button", { class: "pause", onclick: () => callbacks.onPause(), disabled: status !== "running" }, ["pause"]),
    el("button", { class: "stop", onclick: () => callbacks.onStop() }, ["stop"]),
    el("span", { class: "status", "data-status": status }, [status]),
  ]);
}

function project(points: GraphPoint[], width: number, height: number) {
  const lats = points.map((p) => p.lat);
  const lons = points.map((p) => p.lon);
  const latSpan = Math.max(Math.max(...lats) - Math.min(...lats), 1e-6);
  const lonSpan = Math.max(Math.max(...lons) - Math.min(...lons), 1e-6);
  const lat0 = Math.min(...lats);
  const lon0 = Math.min(...lons);
  return (p: { lat: number; lon: number }) => ({
    x: 10 + ((p.lon - lon0) / lonSpan) * (width - 20),
    y: height - 10 - ((p.lat - lat0) / latSpan) * (height - 20),
  });
}

function renderMap(data: ManipulateData, callbacks: ManipulateCallbacks): HTMLElement {
  const width = 420;
  const height = 300;
  const holder = el("div", { class: "map" });
  if (data.points.length === 0) {
    holder.append(el("p", { class: "placeholder" }, ["No station graph yet"]));
    return holder;
  }
  const toXY = project(data.points, width, height);
  const canvas = svg("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "station-map" });

  const index = new Map(data.points.map((p) => [p.stop_id, p]));
  for (const edge of data.edges) {
    const a = index.get(edge.from);
    const b = index.get(edge.to);
    if (!a || !b) continue;
    const pa = toXY(a);
    const pb = toXY(b);
    canvas.append(
      svg("line", { x1: pa.x, y1: pa.y, x2: pb.x, y2: pb.y, class: "graph-edge" }),
    );
  }

  // discovered routes in blue with opacity, from the live snapshot
  if (data.snapshot) {
    for (const route of data.snapshot.routes) {
      const coords = route.stops
        .map((s) => index.get(s))
        .filter((p): p is GraphPoint => Boolean(p))
        .map((p) => toXY(p));
      canvas.append(
        svg("polyline", {
          class: "found-route",
          points: coords.map((c) => `${c.x.toFixed(1)},${c.y.toFixed(1)}`).join(" "),
        }),
      );
    }
  }

  for (const point of data.points) {
    const { x, y } = toXY(point);
    const anchored = point.anchor || data.anchored.includes(point.stop_id);
    canvas.append(
      svg("circle", {
        cx: x,
        cy: y,
        r: anchored ? 6 : 4,
        class: `feasible-stop${anchored ? " anchored" : ""}`,
        "data-stop": point.stop_id,
        onclick: () => callbacks.onAnchorStop(point.stop_id),
        oncontextmenu: (event: Event) => {
          event.preventDefault();
          callbacks.onRemoveStop(point.stop_id);
        },
      }),
    );
  }
  holder.append(canvas);
  return holder;
}

function renderCountPlot(data: ManipulateData): HTMLElement {
  const width = 220;
  const height = 60;
  const plot = svg("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "count-plot" });
  plot.append(
    svg("polyline", {
      class: "count-line",
      points: countPlotPoints(data.countSeries, width, height),
      "data-points": data.countSeries.length,
    }),
  );
  const latest = data.countSeries[data.countSeries.length - 1];
  return el("div", { class: "progress" }, [
    el("h3", {}, ["Generated routes"]),
    plot,
    el("span", { class: "count-now", "data-count": latest ? latest.count : 0 }, [
      String(latest ? latest.count : 0),
    ]),
  ]);
}

function renderResultTable(data: ManipulateData): HTMLElement {
  const section = el("section", { class: "results", "data-panel": "results" });
  const snap = data.snapshot;
  section.append(
    el("h3", {}, [
      "Alternatives ",
      el("span", { class: "pareto-count", "data-count": snap ? snap.pareto_count : 0 }, [
        String(snap ? snap.pareto_count : 0),
      ]),
    ]),
  );
  if (!snap) {
    section.append(el("p", { class: "placeholder" }, ["Waiting for the first snapshot"]));
    return section;
  }

  // header distributions from the snapshot histograms, with a dashed
  // reference line at the original route's value
  const headerRow = el("tr", {}, [el("th", {}, ["route"])]);
  for (const name of CRITERIA) {
    const hist = snap.histograms[name] ?? [];
    const bars = histogramBars(hist);
    const width = 64;
    const header = svg("svg", { width, height: 26, class: "header-dist", "data-criterion": name });
    bars.forEach((b, i) => {
      header.append(
        svg("rect", {
          x: (i * width) / bars.length,
          y: 24 - b * 22,
          width: width / bars.length - 0.4,
          height: b * 22,
          class: "dist-bar",
        }),
      );
    });
    if (data.original && snap.routes.length > 0) {
      const values = snap.routes.map((r) => r.criteria[name]);
      const x = referenceLineX(data.original[name], Math.min(...values), Math.max(...values), width);
      header.append(
        svg("line", {
          x1: x,
          x2: x,
          y1: 0,
          y2: 26,
          class: "reference-line",
          "stroke-dasharray": "3,2",
        }),
      );
    }
    headerRow.append(el("th", {}, [name.replace("_", " "), header]));
  }

  const table = el("table", { class: "result-table" });
  table.append(el("thead", {}, [headerRow]));
  const body = el("tbody");
  for (const route of snap.routes) {
    body.append(
      el("tr", { "data-route": route.id }, [
        el("td", {}, [route.id]),
        ...CRITERIA.map((name) => el("td", {}, [fmt(route.criteria[name])])),
      ]),
    );
  }
  table.append(body);
  section.append(table);
  return section;
}
