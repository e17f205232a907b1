/**
 * Typed client for the live session service.
 *
 * Every number the console shows comes out of these responses; the
 * client performs no momentum arithmetic of its own. The fetch
 * implementation is injectable so tests can replay recorded responses.
 */

export type Player = "A" | "B";

export interface NetApproach {
  player: Player;
  won: boolean;
}

export interface PointEvent {
  set_no: number;
  game_no: number;
  point_index: number;
  server: Player;
  point_winner: Player;
  distance_run_a: number;
  distance_run_b: number;
  score_state: string;
  ace: Player | null;
  double_fault: Player | null;
  unforced_error: Player | null;
  winner_shot: Player | null;
  net_approach: NetApproach | null;
  break_point_won: Player | null;
}

export interface SessionMeta {
  session_id: string;
  player_a: string;
  player_b: string;
  model_id: string;
  weight_source: string;
  stage_boundary: number;
  length_hint: number;
  n_points: number;
}

export interface PointSnapshot {
  schema_version: number;
  unit: number;
  p_a: number | null;
  p_b: number | null;
  delta: number | null;
  turn_risk: number | null;
  turned: boolean;
}

export interface SeriesBlock {
  point_index: number[];
  p_a: number[];
  p_b: number[];
  diff: number[];
  labels: number[];
  risk: number[];
}

export interface SessionState {
  schema_version: number;
  session: SessionMeta;
  series: SeriesBlock;
}

export interface ModelInfo {
  model_id: string;
  description: string;
  kind: string;
  n_features: number;
}

export interface CreateSessionRequest {
  player_a: string;
  player_b: string;
  model_id?: string;
  weight_preset?: string | null;
  length_hint?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const doc = await resp.json();
    if (typeof doc?.detail === "string") {
      detail = doc.detail;
    } else if (doc?.detail !== undefined) {
      detail = JSON.stringify(doc.detail);
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly base = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { accept: "application/json" } };
    if (body !== undefined) {
      init.headers = { ...init.headers, "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(`${this.base}${path}`, init);
    if (!resp.ok) {
      await parseError(resp);
    }
    return (await resp.json()) as T;
  }

  async listModels(): Promise<ModelInfo[]> {
    const doc = await this.request<{ models: ModelInfo[] }>("GET", "/models");
    return doc.models;
  }

  async createSession(req: CreateSessionRequest): Promise<SessionMeta> {
    const doc = await this.request<{ session: SessionMeta }>("POST", "/sessions", req);
    return doc.session;
  }

  postPoint(sessionId: string, event: PointEvent): Promise<PointSnapshot> {
    return this.request("POST", `/sessions/${sessionId}/points`, event);
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}/state`);
  }

  undoLast(sessionId: string): Promise<PointSnapshot> {
    return this.request("DELETE", `/sessions/${sessionId}/points/last`);
  }

  getLog(sessionId: string): Promise<{ session_id: string; events: unknown[] }> {
    return this.request("GET", `/sessions/${sessionId}/log`);
  }
}
