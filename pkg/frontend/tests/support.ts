/**
 * Shared plumbing for the console tests: the golden replay fixture
 * (responses recorded from the live session service driving the
 * bundled ten-point match) and a scripted fetch stand-in.
 */

import { readFileSync } from "node:fs";

import type { FetchLike, ModelInfo, PointEvent, PointSnapshot, SessionState } from "../src/api.js";
import type { FormState } from "../src/form.js";

export interface GoldenReplay {
  comment: string;
  models: { schema_version: number; models: ModelInfo[] };
  created: { schema_version: number; session: SessionState["session"] };
  script: FormState[];
  events: PointEvent[];
  snapshots: PointSnapshot[];
  states: SessionState[];
  undo_snapshot: PointSnapshot;
  state_after_undo: SessionState;
  log: {
    schema_version: number;
    session_id: string;
    events: Array<Record<string, unknown>>;
  };
}

export function loadGolden(): GoldenReplay {
  const raw = readFileSync(new URL("./golden/replay.json", import.meta.url), "utf8");
  return JSON.parse(raw) as GoldenReplay;
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  body?: unknown;
}

/** Fetch stub that pops scripted responses and records every call. */
export function scriptedFetch(responses: Response[]): { calls: RecordedCall[]; fetch: FetchLike } {
  const calls: RecordedCall[] = [];
  const fetch: FetchLike = (input, init) => {
    calls.push({
      url: input,
      method: init?.method ?? "GET",
      body: init?.body === undefined ? undefined : JSON.parse(String(init.body)),
    });
    const next = responses.shift();
    if (next === undefined) {
      return Promise.reject(new Error(`no scripted response for ${input}`));
    }
    return Promise.resolve(next);
  };
  return { calls, fetch };
}
