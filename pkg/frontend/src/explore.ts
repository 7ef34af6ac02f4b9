// Exploration interface: zone glyphs over the map, the multi-criteria
// ranking table, and the chained 45-degree flow matrices with transfer
// circles and share pies.

import { bearingAreaPath, radarPath } from "./charts.js";
import { clear, el, fmt, svg } from "./dom.js";
import { badgeOpacity, placeCells, transferBadges } from "./matrix.js";
import type { RadarConfig, MatrixChainEntry } from "./state.js";
import type {
  FeatureCollection,
  FlowMatrixPayload,
  RankedRoute,
  TransferShares,
  ZoneStats,
} from "./types.js";

const RADAR_FIELD: Record<string, keyof ZoneStats> = {
  RL: "route_length_avg",
  NS: "stop_count_avg",
  PV: "passenger_volume",
  AL: "average_load",
  DR: "directness_avg",
  SC: "service_cost_avg",
};

export interface ExploreCallbacks {
  onSelectZone(zoneId: string): void;
  onSelectRoute(routeId: string): void;
  onExpandTransfers(routeId: string, stopId: string): Promise<TransferShares>;
  onChainRoute(routeId: string, linkStop: string): void;
  onRankingChange(weights: string, filters: string): void;
}

export interface ExploreData {
  zones: FeatureCollection | null;
  rankings: RankedRoute[];
  chain: MatrixChainEntry[];
  focusedMatrix: number;
  radar: RadarConfig;
  showHorizons: boolean;
}

export function renderExploration(
  root: HTMLElement,
  data: ExploreData,
  callbacks: ExploreCallbacks,
): void {
  clear(root);
  root.append(
    renderZoneGlyphs(data, callbacks),
    renderRankingTable(data, callbacks),
    renderMatrixChain(data, callbacks),
  );
}

function zoneAxisValues(stats: ZoneStats, config: RadarConfig, peaks: Record<string, number>) {
  return config.order
    .filter((axis) => config.visible[axis] !== false)
    .map((axis) => {
      const value = stats[RADAR_FIELD[axis]] as number;
      const peak = peaks[axis] || 1;
      return peak > 0 ? value / peak : 0;
    });
}

function renderZoneGlyphs(data: ExploreData, callbacks: ExploreCallbacks): HTMLElement {
  const panel = el("section", { class: "panel zones", "data-panel": "zones" });
  panel.append(el("h2", {}, ["Transportation zones"]));
  if (!data.zones) {
    panel.append(el("p", { class: "placeholder" }, ["Zones not loaded"]));
    return panel;
  }
  const features = data.zones.features.filter((f) => f.properties.stats);
  const peaks: Record<string, number> = {};
  for (const axis of data.radar.order) {
    peaks[axis] = Math.max(
      ...features.map((f) => f.properties.stats![RADAR_FIELD[axis]] as number),
      1e-9,
    );
  }
  const flowPeak = Math.max(
    ...features.flatMap((f) => [
      ...f.properties.stats!.outflow_by_bearing,
      ...f.properties.stats!.inflow_by_bearing,
    ]),
    1,
  );
  const strip = el("div", { class: "glyph-strip" });
  for (const feature of features) {
    const stats = feature.properties.stats!;
    const size = 120;
    const c = size / 2;
    const glyph = svg("svg", {
      class: "zone-glyph",
      width: size,
      height: size,
      viewBox: `0 0 ${size} ${size}`,
      "data-zone": feature.properties.zone_id,
    });
    // diverging ring: passengers leaving (outer, green) and entering (inner, orange)
    glyph.append(
      svg("path", {
        d: bearingAreaPath(stats.outflow_by_bearing, c, c, 34, 56, flowPeak),
        class: "ring-outflow",
      }),
      svg("path", {
        d: bearingAreaPath(stats.inflow_by_bearing, c, c, 34, 48, flowPeak),
        class: "ring-inflow",
      }),
      svg("circle", { cx: c, cy: c, r: 32, class: "glyph-disc" }),
      svg("path", {
        d: radarPath(zoneAxisValues(stats, data.radar, peaks), c, c, 28),
        class: "glyph-radar",
      }),
    );
    const card = el(
      "figure",
      {
        class: "zone-card",
        onclick: () => callbacks.onSelectZone(feature.properties.zone_id),
      },
      [glyph, el("figcaption", {}, [feature.properties.zone_id])],
    );
    strip.append(card);
  }
  panel.append(strip);
  return panel;
}

function renderRankingTable(data: ExploreData, callbacks: ExploreCallbacks): HTMLElement {
  const panel = el("section", { class: "panel ranking", "data-panel": "ranking" });
  panel.append(el("h2", {}, ["Route ranking"]));

  const weights = el("input", { class: "weights", value: "passenger_flow=1", size: 34 });
  const filters = el("input", { class: "filters", placeholder: "passenger_flow=100..", size: 34 });
  const apply = el(
    "button",
    { onclick: () => callbacks.onRankingChange(weights.value, filters.value) },
    ["Apply"],
  );
  panel.append(el("div", { class: "ranking-controls" }, [weights, filters, apply]));

  const table = el("table", { class: "ranking-table" });
  const headers = ["route", "score", "time", "flow", "directness", "construction", "service"];
  table.append(el("thead", {}, [el("tr", {}, headers.map((h) => el("th", {}, [h])))]));
  const body = el("tbody");
  for (const row of data.rankings) {
    body.append(
      el(
        "tr",
        { "data-route": row.route_id, onclick: () => callbacks.onSelectRoute(row.route_id) },
        [
          el("td", {}, [row.route_id]),
          el("td", {}, [fmt(row.score)]),
          el("td", {}, [fmt(row.criteria.service_time)]),
          el("td", {}, [fmt(row.criteria.passenger_flow)]),
          el("td", {}, [fmt(row.criteria.directness)]),
          el("td", {}, [fmt(row.criteria.construction_cost)]),
          el("td", {}, [fmt(row.criteria.service_cost)]),
        ],
      ),
    );
  }
  table.append(body);
  panel.append(table);
  return panel;
}

function renderMatrixChain(data: ExploreData, callbacks: ExploreCallbacks): HTMLElement {
  const panel = el("section", { class: "panel matrices", "data-panel": "matrices" });
  panel.append(el("h2", {}, ["Flow matrices"]));
  if (data.chain.length === 0) {
    panel.append(el("p", { class: "placeholder" }, ["Select a route to open its matrix"]));
    return panel;
  }
  const wrap = el("div", { class: "matrix-chain" });
  for (const [index, entry] of data.chain.entries()) {
    wrap.append(renderMatrix(entry.matrix, index === data.focusedMatrix, data, callbacks));
  }
  panel.append(wrap, renderOverview(data));
  return panel;
}

function renderMatrix(
  matrix: FlowMatrixPayload,
  focused: boolean,
  data: ExploreData,
  callbacks: ExploreCallbacks,
): HTMLElement {
  const cellSize = 14;
  const n = matrix.stops.length;
  const width = n * cellSize + 40;
  const height = (n / 2) * cellSize + (data.showHorizons ? 70 : 40);
  const canvas = svg("svg", {
    class: `matrix${focused ? " focused" : ""}`,
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    "data-matrix": matrix.route_id,
  });

  for (const cell of placeCells(matrix, cellSize)) {
    canvas.append(
      svg("rect", {
        class: "cell",
        x: 20 + cell.x,
        y: 10 + cell.y,
        width: cellSize - 1,
        height: cellSize - 1,
        transform: `rotate(45 ${20 + cell.x} ${10 + cell.y})`,
        "fill-opacity": Math.max(cell.intensity, 0.04).toFixed(3),
        "data-count": cell.count,
        "data-intensity": cell.intensity.toFixed(3),
      }),
    );
  }

  if (data.showHorizons) {
    // three-band horizon strips along the stop axis (check-in series)
    const bandsY = height - 58;
    matrix.stops.forEach((stop, index) => {
      const series = matrix.checkins[stop] ?? [];
      const peak = Math.max(...series, 1);
      series.forEach((value, slot) => {
        if (value <= 0) return;
        const band = Math.min(2, Math.floor((value / peak) * 3 - 1e-9));
        canvas.append(
          svg("rect", {
            class: `horizon band-${band}`,
            x: 20 + index * cellSize + (slot / series.length) * cellSize,
            y: bandsY,
            width: Math.max(cellSize / series.length - 0.3, 0.4),
            height: 10,
            "fill-opacity": (0.33 * (band + 1)).toFixed(2),
          }),
        );
      });
    });
  }

  const badges = transferBadges(matrix);
  const peak = Math.max(...badges.map((b) => b.count), 1);
  for (const badge of badges) {
    const index = matrix.stops.indexOf(badge.stop);
    const group = svg("g", {
      class: "transfer-badge",
      "data-stop": badge.stop,
      onclick: () => {
        void callbacks.onExpandTransfers(matrix.route_id, badge.stop).then((shares) => {
          renderSharePie(group, shares, matrix.route_id, callbacks);
        });
      },
    });
    group.append(
      svg("circle", {
        cx: 20 + index * cellSize,
        cy: height - 20,
        r: 7,
        class: "badge-circle",
        "fill-opacity": badgeOpacity(badge.count, peak).toFixed(2),
      }),
      svg("text", {
        x: 20 + index * cellSize,
        y: height - 16,
        class: "badge-count",
        "text-anchor": "middle",
      }, [document.createTextNode(String(badge.routes))]),
    );
    canvas.append(group);
  }
  const holder = el("div", { class: "matrix-holder" });
  holder.append(canvas);
  return holder;
}

function renderSharePie(
  group: SVGElement,
  shares: TransferShares,
  currentRoute: string,
  callbacks: ExploreCallbacks,
): void {
  const existing = group.querySelector(".share-list");
  if (existing) existing.remove();
  const list = svg("g", { class: "share-list" });
  shares.shares.forEach((share, index) => {
    const item = svg("g", {
      class: "share-item",
      "data-route": share.route,
      "data-share": share.share.toFixed(3),
      onclick: (event: Event) => {
        event.stopPropagation();
        callbacks.onChainRoute(share.route, shares.stop);
      },
    });
    // pie wedge proportional to the transferred share, then the route label
    const start = shares.shares.slice(0, index).reduce((a, s) => a + s.share, 0) * 2 * Math.PI;
    const end = start + share.share * 2 * Math.PI;
    const cx = 0;
    const cy = 18 + index * 14;
    const large = end - start > Math.PI ? 1 : 0;
    item.append(
      svg("path", {
        class: `wedge ${share.direction}`,
        d:
          `M${cx},${cy} L${(cx + 6 * Math.sin(start)).toFixed(2)},${(cy - 6 * Math.cos(start)).toFixed(2)} ` +
          `A6,6 0 ${large} 1 ${(cx + 6 * Math.sin(end)).toFixed(2)},${(cy - 6 * Math.cos(end)).toFixed(2)} Z`,
      }),
      svg("text", { x: 10, y: cy + 3, class: "share-label" }, [
        document.createTextNode(`${share.route} (${Math.round(share.share * 100)}%)`),
      ]),
    );
    list.append(item);
  });
  group.append(list);
}

function renderOverview(data: ExploreData): HTMLElement {
  const box = el("div", { class: "matrix-overview" });
  data.chain.forEach((entry, index) => {
    box.append(
      el("span", {
        class: `overview-square${index === data.focusedMatrix ? " outlined" : ""}`,
        "data-route": entry.matrix.route_id,
        title: entry.matrix.route_id,
      }),
    );
  });
  return box;
}
