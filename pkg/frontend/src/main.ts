/**
 * Browser shell: parameter panel, std-dev brush slider, dense-pixel
 * canvas with hover tooltip, and an explicit redraw button that asks the
 * server for a new ordering.
 */

import { ApiClient, type MetaDocument, type SliceDocument } from "./api.js";
import {
  applyOrdering,
  baseOptions,
  hoverRow,
  initialState,
  methodApplies,
  sampleCount,
  setParameter,
  tooltipText,
  windowFromBrush,
  type ViewState,
} from "./state.js";
import { drawToCanvas, paintSlice, rowAt } from "./view.js";

const CELL_H = 4;
const BRUSH_HEIGHT = 60;

interface App {
  state: ViewState;
  meta: MetaDocument;
  slice: SliceDocument | null;
  sliceEpoch: number;
}

export async function boot(root: HTMLElement, baseUrl = ""): Promise<void> {
  const api = new ApiClient(baseUrl);
  const meta = await api.meta();
  const app: App = { state: initialState(meta), meta, slice: null, sliceEpoch: 0 };

  const panel = document.createElement("div");
  const brushCanvas = document.createElement("canvas");
  brushCanvas.height = BRUSH_HEIGHT;
  brushCanvas.width = 800;
  const matrixCanvas = document.createElement("canvas");
  const tooltip = document.createElement("div");
  tooltip.style.position = "fixed";
  tooltip.style.pointerEvents = "none";
  tooltip.style.background = "#222";
  tooltip.style.color = "#fff";
  tooltip.style.padding = "2px 6px";
  tooltip.style.display = "none";
  root.append(panel, brushCanvas, matrixCanvas, tooltip);

  const selects: Record<string, HTMLSelectElement> = {};
  const addSelect = (key: keyof ViewState & string, options: string[]) => {
    const select = document.createElement("select");
    for (const option of options) {
      const el = document.createElement("option");
      el.value = el.textContent = option;
      select.append(el);
    }
    select.value = String(app.state[key]);
    select.onchange = () => {
      app.state = setParameter(app.state, key as never, select.value);
      selects.method.disabled = !methodApplies(app.state);
    };
    const label = document.createElement("label");
    label.textContent = ` ${key} `;
    label.append(select);
    panel.append(label);
    selects[key] = select;
  };

  addSelect("dataset", Object.keys(meta.datasets).sort());
  addSelect("stage", meta.datasets[app.state.dataset].stages);
  addSelect("base", baseOptions(meta));
  addSelect("method", meta.attribution_methods);
  addSelect("distance", meta.distance_kinds);
  addSelect("linkage", meta.linkages);
  selects.method.disabled = !methodApplies(app.state);

  const redraw = document.createElement("button");
  redraw.textContent = "Redraw";
  redraw.onclick = () => void recluster();
  panel.append(redraw);

  async function recluster(): Promise<void> {
    const s = app.state;
    const resp = await api.postOrdering({
      dataset: s.dataset,
      stage: s.stage,
      base: s.base,
      distance: s.distance,
      linkage: s.linkage,
      method: methodApplies(s) ? s.method : null,
    });
    app.state = applyOrdering(app.state, resp);
    await Promise.all([refreshSlice(), refreshBrush()]);
  }

  async function refreshSlice(): Promise<void> {
    if (!app.state.orderingId) return;
    const epoch = ++app.sliceEpoch;
    const slice = await api.slice(
      app.state.orderingId,
      app.state.offset,
      app.state.count,
      methodApplies(app.state) ? app.state.method : undefined,
    );
    if (epoch !== app.sliceEpoch) return; // superseded by a newer fetch
    app.slice = slice;
    const cellW = Math.max(1, Math.floor(root.clientWidth / 1200));
    drawToCanvas(matrixCanvas, paintSlice(slice, cellW, CELL_H));
  }

  async function refreshBrush(): Promise<void> {
    if (!app.state.orderingId) return;
    const doc = await api.stddev(
      app.state.orderingId,
      app.state.base,
      methodApplies(app.state) ? app.state.method : undefined,
    );
    const ctx = brushCanvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, brushCanvas.width, brushCanvas.height);
    const peak = Math.max(...doc.values, 1e-12);
    ctx.strokeStyle = "#333";
    ctx.beginPath();
    doc.values.forEach((v, i) => {
      const x = (i / (doc.values.length - 1 || 1)) * brushCanvas.width;
      const y = BRUSH_HEIGHT - (v / peak) * BRUSH_HEIGHT;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
    // shade the selected window
    const total = doc.values.length;
    ctx.fillStyle = "rgba(80, 120, 255, 0.25)";
    ctx.fillRect(
      (app.state.offset / total) * brushCanvas.width,
      0,
      (app.state.count / total) * brushCanvas.width,
      BRUSH_HEIGHT,
    );
  }

  let brushStart: number | null = null;
  brushCanvas.onmousedown = (e) => {
    brushStart = e.offsetX;
  };
  brushCanvas.onmouseup = (e) => {
    if (brushStart === null) return;
    const total = sampleCount(app.meta, app.state);
    app.state = windowFromBrush(app.state, brushStart, e.offsetX, brushCanvas.width, total);
    brushStart = null;
    void Promise.all([refreshSlice(), refreshBrush()]);
  };

  matrixCanvas.onmousemove = (e) => {
    if (!app.slice) return;
    const row = rowAt(app.slice, e.offsetY, CELL_H);
    app.state = hoverRow(app.state, row);
    const text = tooltipText({ ...app.state, permutation: app.slice.sample_indices, offset: 0 });
    if (text === null) {
      tooltip.style.display = "none";
      return;
    }
    tooltip.textContent = text;
    tooltip.style.left = `${e.clientX + 12}px`;
    tooltip.style.top = `${e.clientY - 20}px`;
    tooltip.style.display = "block";
  };
  matrixCanvas.onmouseleave = () => {
    app.state = hoverRow(app.state, null);
    tooltip.style.display = "none";
  };

  await recluster();
}
