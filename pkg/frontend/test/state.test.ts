import { describe, expect, it } from "vitest";

import type { SessionState } from "../src/api.js";
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
} from "../src/state.js";

function serverState(step: number, clicks: SessionState["clicks"]): SessionState {
  return {
    id: "abc123",
    scene: "demo",
    checkpoint: "net",
    step,
    clicks,
    views: [
      { index: 0, width: 64, height: 64 },
      { index: 1, width: 64, height: 64 },
    ],
  };
}

describe("session state", () => {
  it("starts without a session and cannot mutate", () => {
    const s = initialState();
    expect(s.sessionId).toBeNull();
    expect(canMutate(s)).toBe(false);
  });

  it("mirrors the server click list after every acknowledged request", () => {
    let s = applyServerState(initialState(), serverState(0, []), "demo");
    expect(canMutate(s)).toBe(true);
    const clicks = [
      { view: 0, u: 10, v: 12, polarity: "positive" as const, t: 1 },
      { view: 1, u: 3, v: 4, polarity: "negative" as const, t: 2 },
    ];
    s = applyServerState(s, serverState(2, clicks));
    expect(s.clicks).toEqual(clicks);
    expect(s.step).toBe(2);
    // undo acknowledged by the server shrinks the mirror
    s = applyServerState(s, serverState(1, clicks.slice(0, 1)));
    expect(s.clicks).toEqual(clicks.slice(0, 1));
  });

  it("blocks mutations while busy", () => {
    let s = applyServerState(initialState(), serverState(0, []));
    s = withBusy(s, true);
    expect(canMutate(s)).toBe(false);
    s = withBusy(s, false);
    expect(canMutate(s)).toBe(true);
  });

  it("errors are visible and dismissible and clear the busy flag", () => {
    let s = withBusy(applyServerState(initialState(), serverState(0, [])), true);
    s = withError(s, "click failed: 409: busy");
    expect(s.error).toContain("409");
    expect(s.busy).toBe(false);
    s = dismissError(s);
    expect(s.error).toBeNull();
  });

  it("toggles polarity between positive and negative", () => {
    let s = initialState();
    expect(s.polarity).toBe("positive");
    s = togglePolarity(s);
    expect(s.polarity).toBe("negative");
    s = togglePolarity(s);
    expect(s.polarity).toBe("positive");
  });

  it("clamps view switching to existing views", () => {
    let s = applyServerState(initialState(), serverState(0, []));
    s = setActiveView(s, 1);
    expect(s.activeView).toBe(1);
    expect(setActiveView(s, 7).activeView).toBe(1);
    expect(setActiveView(s, -1).activeView).toBe(1);
  });

  it("filters clicks per view for marker drawing", () => {
    const clicks = [
      { view: 0, u: 1, v: 1, polarity: "positive" as const, t: 1 },
      { view: 1, u: 2, v: 2, polarity: "negative" as const, t: 2 },
      { view: 0, u: 3, v: 3, polarity: "negative" as const, t: 3 },
    ];
    const s = applyServerState(initialState(), serverState(3, clicks));
    expect(clicksOnView(s, 0).map((c) => c.t)).toEqual([1, 3]);
    expect(clicksOnView(s, 1).map((c) => c.t)).toEqual([2]);
  });
});
