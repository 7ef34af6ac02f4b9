// DOM-level checks of the evaluation view against fixture states.

import { describe, expect, it } from "vitest";

import { renderEvaluation, orderedTopologyStops } from "../src/evaluate.js";
import { statusOfClass } from "../src/markers.js";
import type { ResolutionState } from "../src/types.js";

const STATS: ResolutionState["clusters"][0]["stats"] = {
  service_time: [1, 1.2, 1.4, 1.6, 2],
  passenger_flow: [10, 20, 30, 40, 50],
  directness: [3, 3, 3.5, 4, 4],
  construction_cost: [200, 200, 250, 300, 300],
  service_cost: [900, 950, 1000, 1100, 1200],
};

function fixtureState(): ResolutionState {
  return {
    final: false,
    final_route: null,
    beta: 2,
    candidate_count: 3,
    candidates: [
      ["1", "3", "4", "5"],
      ["1", "3", "6", "5"],
      ["1", "2", "7", "5"],
    ],
    clusters: [
      { id: "c0", pattern: ["1", "2", "7", "5"], pattern_text: "1-2-7-5", core: ["1", "2", "5", "7"], members: [["1", "2", "7", "5"]], stats: STATS },
      { id: "c1", pattern: ["1", "3", "*", "5"], pattern_text: "1-3-*-5", core: ["1", "3", "5"], members: [["1", "3", "4", "5"], ["1", "3", "6", "5"]], stats: STATS },
    ],
    conflicts: [
      {
        position: ["1", "5"],
        status: "active",
        alternatives: [
          { cluster: "c1", segment: ["3", "*"] },
          { cluster: "c0", segment: ["2", "7"] },
        ],
      },
    ],
    markers: { "1": "resolved", "5": "resolved", "3": "active", "2": "active", "7": "active" },
    history_depth: 0,
  };
}

function extractDomMarkers(root: HTMLElement): Record<string, string> {
  const out: Record<string, string> = {};
  for (const node of root.querySelectorAll(".topo-node")) {
    const stop = node.getAttribute("data-stop")!;
    const circle = node.querySelector("circle.marker")!;
    out[stop] = statusOfClass(circle.getAttribute("class") ?? "");
  }
  return out;
}

describe("evaluation view", () => {
  const noop = {
    onResolve: () => undefined,
    onUndo: () => undefined,
    onActivate: () => undefined,
    onPreviewCluster: () => undefined,
  };

  it("marker glyph classes equal the state's marker map", () => {
    const root = document.createElement("div");
    renderEvaluation(root, fixtureState(), noop);
    expect(extractDomMarkers(root)).toEqual(fixtureState().markers);
  });

  it("multi-route clusters draw boxplots, single ones draw bars", () => {
    const root = document.createElement("div");
    renderEvaluation(root, fixtureState(), noop);
    const multi = root.querySelector('.cluster-row[data-cluster="c1"]')!;
    const single = root.querySelector('.cluster-row[data-cluster="c0"]')!;
    expect(multi.querySelectorAll(".box").length).toBeGreaterThan(0);
    expect(multi.querySelectorAll(".bar").length).toBe(0);
    expect(single.querySelectorAll(".bar").length).toBeGreaterThan(0);
    expect(single.querySelectorAll(".box").length).toBe(0);
  });

  it("exactly the active conflict group is marked active and open", () => {
    const root = document.createElement("div");
    renderEvaluation(root, fixtureState(), noop);
    const groups = [...root.querySelectorAll(".conflict-group")];
    expect(groups.filter((g) => g.classList.contains("active"))).toHaveLength(1);
  });

  it("clicking a row of the active conflict resolves with its cluster", () => {
    const root = document.createElement("div");
    const calls: [number, string][] = [];
    renderEvaluation(root, fixtureState(), {
      ...noop,
      onResolve: (conflict, cluster) => calls.push([conflict, cluster]),
    });
    (root.querySelector('.cluster-row[data-cluster="c0"]') as HTMLElement).click();
    expect(calls).toEqual([[0, "c0"]]);
  });

  it("final states show the chosen route and disable undo at depth 0", () => {
    const root = document.createElement("div");
    const state = { ...fixtureState(), final: true, final_route: ["1", "2", "7", "5"], conflicts: [], candidate_count: 1 };
    renderEvaluation(root, state, noop);
    expect(root.querySelector(".final-route")?.getAttribute("data-route")).toBe("1-2-7-5");
    expect((root.querySelector("button.undo") as HTMLButtonElement).disabled).toBe(true);
  });

  it("topology order follows the first candidate route", () => {
    expect(orderedTopologyStops(fixtureState())).toEqual(["1", "3", "5", "2", "7"]);
  });
});
