/**
 * View state and its pure transitions. Every user gesture maps to a
 * ViewState -> ViewState function; fetches are driven by diffing states,
 * never performed inside a transition.
 */

import type { MetaDocument, OrderingResponse } from "./api.js";

export interface ViewState {
  dataset: string;
  stage: string;
  base: string;
  method: string;
  distance: string;
  linkage: string;
  offset: number;
  count: number;
  hoveredRow: number | null;
  orderingId: string | null;
  permutation: number[];
}

/** Clustering bases offered to the user; prediction probabilities are a
 * display group, not a clusterable one. */
export function baseOptions(meta: MetaDocument): string[] {
  return meta.cluster_bases.filter((b) => b !== "prediction");
}

/** The attribution-method dropdown only applies when clustering on
 * attributions. */
export function methodApplies(state: ViewState): boolean {
  return state.base === "attributions";
}

export function sampleCount(meta: MetaDocument, state: ViewState): number {
  return meta.datasets[state.dataset]?.sample_counts[state.stage] ?? 0;
}

export function initialState(meta: MetaDocument): ViewState {
  const datasets = Object.keys(meta.datasets).sort();
  if (datasets.length === 0) {
    throw new Error("no datasets registered");
  }
  const dataset = datasets[0];
  const stages = meta.datasets[dataset].stages;
  const stage = stages.includes("test") ? "test" : stages[0];
  const total = meta.datasets[dataset].sample_counts[stage];
  return {
    dataset,
    stage,
    base: baseOptions(meta)[0],
    method: meta.attribution_methods[0],
    distance: meta.distance_kinds[0],
    linkage: meta.linkages[0],
    offset: 0,
    count: Math.max(1, Math.min(meta.defaults.window, total)),
    hoveredRow: null,
    orderingId: null,
    permutation: [],
  };
}

/** Clamp a requested (offset, count) window into [0, total) with at least
 * one row. */
export function setWindow(state: ViewState, offset: number, count: number, total: number): ViewState {
  const safeCount = Math.max(1, Math.min(Math.floor(count), total));
  const safeOffset = Math.max(0, Math.min(Math.floor(offset), total - safeCount));
  return { ...state, offset: safeOffset, count: safeCount };
}

/** Map a brush selection in plot pixels to a clamped window. */
export function windowFromBrush(
  state: ViewState,
  pxStart: number,
  pxEnd: number,
  plotWidth: number,
  total: number,
): ViewState {
  const lo = Math.min(pxStart, pxEnd);
  const hi = Math.max(pxStart, pxEnd);
  const offset = Math.floor((lo / plotWidth) * total);
  const count = Math.ceil(((hi - lo) / plotWidth) * total);
  return setWindow(state, offset, count, total);
}

export function setParameter(
  state: ViewState,
  key: "dataset" | "stage" | "base" | "method" | "distance" | "linkage",
  value: string,
): ViewState {
  return { ...state, [key]: value };
}

export function hoverRow(state: ViewState, row: number | null): ViewState {
  if (row !== null && (row < 0 || row >= state.count)) {
    return { ...state, hoveredRow: null };
  }
  return { ...state, hoveredRow: row };
}

export function clearHover(state: ViewState): ViewState {
  return { ...state, hoveredRow: null };
}

/** Adopt a freshly computed ordering; the window and hover reset because
 * rows have moved. */
export function applyOrdering(state: ViewState, resp: OrderingResponse): ViewState {
  return {
    ...state,
    orderingId: resp.ordering_id,
    permutation: resp.permutation,
    offset: 0,
    hoveredRow: null,
  };
}

/** Tooltip text for a hovered window row: the stable sample index under
 * the current permutation. */
export function tooltipText(state: ViewState): string | null {
  if (state.hoveredRow === null) return null;
  const index = state.permutation[state.offset + state.hoveredRow];
  return index === undefined ? null : String(index);
}

/** True when a state change requires a new ordering from the server
 * (parameters changed) rather than just a different slice of it. */
export function needsReorder(prev: ViewState, next: ViewState): boolean {
  return (
    prev.dataset !== next.dataset ||
    prev.stage !== next.stage ||
    prev.base !== next.base ||
    prev.distance !== next.distance ||
    prev.linkage !== next.linkage ||
    (next.base === "attributions" && prev.method !== next.method)
  );
}
