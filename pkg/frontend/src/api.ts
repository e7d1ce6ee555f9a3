/** Typed client for the segmentation session API. */

export type Polarity = "positive" | "negative";

export interface ClickRecord {
  view: number;
  u: number;
  v: number;
  polarity: Polarity;
  t: number;
}

export interface ViewInfo {
  index: number;
  width: number;
  height: number;
}

export interface SessionState {
  id: string;
  scene: string;
  checkpoint: string;
  step: number;
  clicks: ClickRecord[];
  views: ViewInfo[];
}

export interface SceneInfo {
  id: string;
  dims: number[];
  views: number;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(res: Response): Promise<never> {
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body: keep the status text */
  }
  throw new ApiError(`${res.status}: ${detail}`, res.status);
}

export class ApiClient {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) await parseError(res);
    return res.json() as Promise<T>;
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) await parseError(res);
    return res.json() as Promise<T>;
  }

  listScenes(): Promise<SceneInfo[]> {
    return this.get("/scenes");
  }

  listCheckpoints(): Promise<{ id: string }[]> {
    return this.get("/checkpoints");
  }

  createSession(scene: string, checkpoint: string): Promise<SessionState> {
    return this.post("/sessions", { scene, checkpoint });
  }

  sessionState(sessionId: string): Promise<SessionState> {
    return this.get(`/sessions/${sessionId}`);
  }

  sendClick(
    sessionId: string,
    view: number,
    u: number,
    v: number,
    polarity: Polarity,
  ): Promise<SessionState> {
    return this.post(`/sessions/${sessionId}/clicks`, { view, u, v, polarity });
  }

  undo(sessionId: string): Promise<SessionState> {
    return this.post(`/sessions/${sessionId}/undo`);
  }

  /** Session-independent reference image of a view. */
  sceneImageUrl(scene: string, view: number): string {
    return `${this.base}/scenes/${scene}/views/${view}/image.png`;
  }

  /** step is appended so stale cached overlays are never shown. */
  maskUrl(sessionId: string, view: number, step: number): string {
    return `${this.base}/sessions/${sessionId}/views/${view}/mask.png?step=${step}`;
  }

  renderUrl(sessionId: string, view: number, step: number): string {
    return `${this.base}/sessions/${sessionId}/views/${view}/render.png?step=${step}`;
  }
}
