/** UI session state: a mirror of the server session plus view-local knobs. */

import type { ClickRecord, Polarity, SessionState, ViewInfo } from "./api.js";

export interface UiSessionState {
  sessionId: string | null;
  scene: string | null;
  activeView: number;
  views: ViewInfo[];
  clicks: ClickRecord[];
  step: number;
  overlayOpacity: number;
  polarity: Polarity;
  busy: boolean;
  error: string | null;
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    scene: null,
    activeView: 0,
    views: [],
    clicks: [],
    step: 0,
    overlayOpacity: 0.5,
    polarity: "positive",
    busy: false,
    error: null,
  };
}

/** Adopt the server's authoritative session state (click list included). */
export function applyServerState(
  state: UiSessionState,
  server: SessionState,
  scene?: string,
): UiSessionState {
  return {
    ...state,
    sessionId: server.id,
    scene: scene ?? state.scene,
    views: server.views,
    clicks: server.clicks.slice(),
    step: server.step,
    error: null,
  };
}

/** A mutation may start only when a session exists and none is in flight. */
export function canMutate(state: UiSessionState): boolean {
  return state.sessionId !== null && !state.busy;
}

export function withBusy(state: UiSessionState, busy: boolean): UiSessionState {
  return { ...state, busy };
}

export function withError(state: UiSessionState, message: string): UiSessionState {
  return { ...state, error: message, busy: false };
}

export function dismissError(state: UiSessionState): UiSessionState {
  return { ...state, error: null };
}

export function togglePolarity(state: UiSessionState): UiSessionState {
  return {
    ...state,
    polarity: state.polarity === "positive" ? "negative" : "positive",
  };
}

export function setActiveView(state: UiSessionState, view: number): UiSessionState {
  if (view < 0 || view >= state.views.length) return state;
  return { ...state, activeView: view };
}

/** Clicks drawn on the currently displayed view. */
export function clicksOnView(state: UiSessionState, view: number): ClickRecord[] {
  return state.clicks.filter((c) => c.view === view);
}
