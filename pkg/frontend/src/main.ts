/** DOM wiring for the interactive segmentation client. */

import { ApiClient } from "./api.js";
import { canvasToPixel, pixelToCanvas, type ViewGeometry } from "./coords.js";
import { compositeOverlay, grayFromRgba, markerColor } from "./overlay.js";
import {
  applyServerState,
  canMutate,
  clicksOnView,
  dismissError,
  initialState,
  setActiveView,
  togglePolarity,
  withBusy,
  withError,
  type UiSessionState,
} from "./state.js";

const api = new ApiClient("");
let state: UiSessionState = initialState();

const el = {
  scene: document.getElementById("scene") as HTMLSelectElement,
  checkpoint: document.getElementById("checkpoint") as HTMLSelectElement,
  start: document.getElementById("start") as HTMLButtonElement,
  view: document.getElementById("view") as HTMLSelectElement,
  polarity: document.getElementById("polarity") as HTMLButtonElement,
  opacity: document.getElementById("opacity") as HTMLInputElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  canvas: document.getElementById("canvas") as HTMLCanvasElement,
  error: document.getElementById("error") as HTMLDivElement,
  errorText: document.getElementById("error-text") as HTMLSpanElement,
  errorDismiss: document.getElementById("error-dismiss") as HTMLButtonElement,
  status: document.getElementById("status") as HTMLSpanElement,
};

const SCALE = 6; // displayed canvas pixels per image pixel

function setState(next: UiSessionState) {
  state = next;
  renderControls();
}

function renderControls() {
  el.error.style.display = state.error ? "flex" : "none";
  el.errorText.textContent = state.error ?? "";
  el.undo.disabled = !canMutate(state) || state.clicks.length === 0;
  el.polarity.textContent =
    state.polarity === "positive" ? "positive (blue)" : "negative (red)";
  el.polarity.className = state.polarity;
  el.status.textContent = state.sessionId
    ? `session ${state.sessionId.slice(0, 8)} · click ${state.step}` +
      (state.busy ? " · working…" : "")
    : "no session";
}

function geometry(): ViewGeometry | null {
  const info = state.views[state.activeView];
  if (!info) return null;
  return {
    width: info.width,
    height: info.height,
    canvasWidth: el.canvas.clientWidth,
    canvasHeight: el.canvas.clientHeight,
  };
}

async function loadImageData(url: string, w: number, h: number): Promise<Uint8ClampedArray> {
  const img = new Image();
  img.src = url;
  await img.decode();
  const off = document.createElement("canvas");
  off.width = w;
  off.height = h;
  const ctx = off.getContext("2d")!;
  ctx.drawImage(img, 0, 0, w, h);
  return ctx.getImageData(0, 0, w, h).data;
}

async function redraw() {
  const info = state.views[state.activeView];
  if (!info || !state.sessionId || !state.scene) return;
  const { width: w, height: h } = info;
  // base render and mask fetched concurrently
  const [baseData, maskData] = await Promise.all([
    loadImageData(api.sceneImageUrl(state.scene, state.activeView), w, h),
    loadImageData(api.maskUrl(state.sessionId, state.activeView, state.step), w, h),
  ]);
  const composed = compositeOverlay(
    baseData,
    grayFromRgba(maskData),
    Number(el.opacity.value),
  );
  el.canvas.width = w;
  el.canvas.height = h;
  const ctx = el.canvas.getContext("2d")!;
  ctx.putImageData(
    new ImageData(composed as Uint8ClampedArray<ArrayBuffer>, w, h), 0, 0,
  );

  const geomNative: ViewGeometry = {
    width: w,
    height: h,
    canvasWidth: w,
    canvasHeight: h,
  };
  for (const click of clicksOnView(state, state.activeView)) {
    const p = pixelToCanvas(click.u, click.v, geomNative);
    ctx.beginPath();
    ctx.arc(p.x, p.y, Math.max(1.5, w / 48), 0, 2 * Math.PI);
    ctx.fillStyle = markerColor(click.polarity === "positive");
    ctx.fill();
    ctx.lineWidth = 0.75;
    ctx.strokeStyle = "#ffffff";
    ctx.stroke();
  }
}

async function startSession() {
  try {
    setState(withBusy(state, true));
    const server = await api.createSession(el.scene.value, el.checkpoint.value);
    setState(withBusy(applyServerState(initialState(), server, el.scene.value), false));
    el.view.innerHTML = state.views
      .map((v) => `<option value="${v.index}">view ${v.index}</option>`)
      .join("");
    const info = state.views[0];
    el.canvas.style.width = `${info.width * SCALE}px`;
    el.canvas.style.height = `${info.height * SCALE}px`;
    await redraw();
  } catch (e) {
    setState(withError(state, `could not start session: ${(e as Error).message}`));
  }
}

async function onCanvasClick(event: MouseEvent) {
  if (!canMutate(state)) return; // a pending request swallows the click
  const geom = geometry();
  if (!geom || !state.sessionId) return;
  const rect = el.canvas.getBoundingClientRect();
  const pixel = canvasToPixel(event.clientX - rect.left, event.clientY - rect.top, geom);
  if (pixel === null) return;
  setState(withBusy(state, true));
  try {
    const server = await api.sendClick(
      state.sessionId, state.activeView, pixel.u, pixel.v, state.polarity,
    );
    setState(withBusy(applyServerState(state, server), false));
    await redraw();
  } catch (e) {
    setState(withError(state, `click failed: ${(e as Error).message}`));
  }
}

async function onUndo() {
  if (!canMutate(state) || !state.sessionId) return;
  setState(withBusy(state, true));
  try {
    const server = await api.undo(state.sessionId);
    setState(withBusy(applyServerState(state, server), false));
    await redraw();
  } catch (e) {
    setState(withError(state, `undo failed: ${(e as Error).message}`));
  }
}

async function boot() {
  try {
    const [scenes, ckpts] = await Promise.all([api.listScenes(), api.listCheckpoints()]);
    el.scene.innerHTML = scenes
      .map((s) => `<option value="${s.id}">${s.id} (${s.views} views)</option>`)
      .join("");
    el.checkpoint.innerHTML = ckpts
      .map((c) => `<option value="${c.id}">${c.id}</option>`)
      .join("");
  } catch (e) {
    setState(withError(state, `server unreachable: ${(e as Error).message}`));
  }
  renderControls();
}

el.start.addEventListener("click", () => void startSession());
el.canvas.addEventListener("click", (e) => void onCanvasClick(e));
el.undo.addEventListener("click", () => void onUndo());
el.polarity.addEventListener("click", () => setState(togglePolarity(state)));
el.opacity.addEventListener("input", () => void redraw());
el.view.addEventListener("change", () => {
  setState(setActiveView(state, Number(el.view.value)));
  void redraw();
});
el.errorDismiss.addEventListener("click", () => setState(dismissError(state)));

void boot();
