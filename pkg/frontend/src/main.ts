/**
 * DOM wiring for the console page.
 *
 * This file is glue: it reads chips into a FormState, sends events
 * through the ApiClient, and paints whatever series the service
 * returns. All scoring logic lives server-side; all pure logic worth
 * testing lives in api.ts, form.ts, chart.ts, and poll.ts.
 */

import { ApiClient, ApiError } from "./api.js";
import type { Player, PointSnapshot, SessionState } from "./api.js";
import { buildEvent, chipConflicts, initialForm } from "./form.js";
import type { FormState } from "./form.js";
import { chartModel, DEFAULT_GEOMETRY, viewDigest } from "./chart.js";
import { Poller } from "./poll.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function must<T extends Element>(selector: string): T {
  const el = document.querySelector<T>(selector);
  if (el === null) {
    throw new Error(`console page is missing ${selector}`);
  }
  return el;
}

const statusLine = must<HTMLElement>("#status");
const setupPanel = must<HTMLElement>("#setup");
const livePanel = must<HTMLElement>("#live");
const modelSelect = must<HTMLSelectElement>("#model");
const playerAInput = must<HTMLInputElement>("#player-a");
const playerBInput = must<HTMLInputElement>("#player-b");
const lengthInput = must<HTMLInputElement>("#length-hint");
const startButton = must<HTMLButtonElement>("#start");
const sessionLine = must<HTMLElement>("#session-line");
const pathA = must<SVGPathElement>("#path-a");
const pathB = must<SVGPathElement>("#path-b");
const zeroLine = must<SVGLineElement>("#zero-line");
const markerGroup = must<SVGGElement>("#markers");
const setInput = must<HTMLInputElement>("#set-no");
const gameInput = must<HTMLInputElement>("#game-no");
const scoreInput = must<HTMLInputElement>("#score-state");
const distanceAInput = must<HTMLInputElement>("#distance-a");
const distanceBInput = must<HTMLInputElement>("#distance-b");
const conflictList = must<HTMLElement>("#conflicts");
const sendButton = must<HTMLButtonElement>("#send");
const undoButton = must<HTMLButtonElement>("#undo");
const readout = must<HTMLElement>("#readout");

const api = new ApiClient();
let sessionId: string | null = null;
let form: FormState = initialForm();
let unitsSeen = 0;
let lastDigest = "";
const digestByCount = new Map<number, string>([[0, viewDigest(emptySeries())]]);

function emptySeries() {
  return { point_index: [], p_a: [], p_b: [], diff: [], labels: [], risk: [] };
}

function setStatus(text: string, kind: "" | "err" = ""): void {
  statusLine.textContent = text;
  statusLine.className = kind;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.detail;
  }
  return err instanceof Error ? err.message : String(err);
}

/* ---------------------------------------------------------------- chips */

function chipValue(chip: HTMLElement): string {
  return chip.dataset.chip ?? "";
}

function applyChip(value: string): void {
  const [group, arg] = value.split(":");
  if (group === "server" || group === "winner") {
    form[group] = arg as Player;
  } else if (group === "flag") {
    const key = arg as "ace" | "doubleFault" | "unforcedError" | "winnerShot" | "breakPoint";
    form[key] = !form[key];
  } else if (group === "net") {
    form.netApproach = arg === "none" ? null : (arg as Player);
    if (form.netApproach === null) {
      form.netWon = false;
    }
  } else if (group === "netwon") {
    form.netWon = !form.netWon;
  }
}

function chipIsOn(value: string): boolean {
  const [group, arg] = value.split(":");
  if (group === "server" || group === "winner") {
    return form[group] === arg;
  }
  if (group === "flag") {
    return form[arg as "ace"];
  }
  if (group === "net") {
    return arg === "none" ? form.netApproach === null : form.netApproach === arg;
  }
  if (group === "netwon") {
    return form.netWon;
  }
  return false;
}

function paintChips(): void {
  for (const chip of document.querySelectorAll<HTMLElement>("[data-chip]")) {
    chip.classList.toggle("on", chipIsOn(chipValue(chip)));
  }
  form.distanceA = Number(distanceAInput.value || "0");
  form.distanceB = Number(distanceBInput.value || "0");
  const problems = chipConflicts(form);
  conflictList.textContent = problems.join("; ");
  sendButton.disabled = sessionId === null || problems.length > 0;
}

function resetPointChips(): void {
  const keep = form.server;
  form = initialForm();
  form.server = keep;
  form.winner = keep;
  distanceAInput.value = "0";
  distanceBInput.value = "0";
  scoreInput.value = "";
  paintChips();
}

/* ---------------------------------------------------------------- chart */

function render(state: SessionState): void {
  const digest = viewDigest(state.series);
  if (digest === lastDigest) {
    return;
  }
  lastDigest = digest;
  unitsSeen = state.series.point_index.length;
  digestByCount.set(unitsSeen, digest);

  const model = chartModel(state.series, DEFAULT_GEOMETRY);
  pathA.setAttribute("d", model.pathA);
  pathB.setAttribute("d", model.pathB);
  zeroLine.setAttribute("y1", model.zeroY.toFixed(2));
  zeroLine.setAttribute("y2", model.zeroY.toFixed(2));
  markerGroup.replaceChildren();
  for (const marker of model.markers) {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", marker.x.toFixed(2));
    dot.setAttribute("cy", marker.y.toFixed(2));
    dot.setAttribute("r", "5");
    dot.setAttribute("class", "turn-marker");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `turn at point ${marker.unit}`;
    dot.appendChild(title);
    markerGroup.appendChild(dot);
  }

  const meta = state.session;
  sessionLine.textContent =
    `${meta.player_a} vs ${meta.player_b} · ${meta.model_id} · ` +
    `${unitsSeen} point${unitsSeen === 1 ? "" : "s"}`;
  const last = unitsSeen - 1;
  if (last >= 0) {
    const s = state.series;
    readout.textContent =
      `point ${s.point_index[last]}: ` +
      `${meta.player_a} ${s.p_a[last].toFixed(4)}, ` +
      `${meta.player_b} ${s.p_b[last].toFixed(4)}, ` +
      `turn risk ${s.risk[last].toFixed(2)}` +
      (s.labels[last] === 1 ? " · turning point" : "");
  } else {
    readout.textContent = "no points yet";
  }
  undoButton.disabled = unitsSeen === 0;
}

/* -------------------------------------------------------------- actions */

async function refresh(): Promise<void> {
  if (sessionId === null) {
    return;
  }
  render(await api.getState(sessionId));
}

const poller = new Poller(refresh, 1000, (err) => {
  setStatus(`refresh failed: ${describe(err)}`, "err");
});

async function startSession(): Promise<void> {
  startButton.disabled = true;
  try {
    const session = await api.createSession({
      player_a: playerAInput.value.trim() || "Player A",
      player_b: playerBInput.value.trim() || "Player B",
      model_id: modelSelect.value,
      length_hint: Number(lengthInput.value || "100"),
    });
    sessionId = session.session_id;
    setupPanel.hidden = true;
    livePanel.hidden = false;
    setStatus(`session ${session.session_id} · weights ${session.weight_source}`);
    paintChips();
    await poller.runOnce();
    poller.start();
  } catch (err) {
    setStatus(`could not start session: ${describe(err)}`, "err");
    startButton.disabled = false;
  }
}

async function sendPoint(): Promise<void> {
  if (sessionId === null) {
    return;
  }
  const event = buildEvent(
    form,
    Number(setInput.value || "1"),
    Number(gameInput.value || "1"),
    unitsSeen + 1,
  );
  event.score_state = scoreInput.value.trim();
  sendButton.disabled = true;
  try {
    const snapshot: PointSnapshot = await api.postPoint(sessionId, event);
    setStatus(
      `recorded point ${snapshot.unit}` + (snapshot.turned ? " · situation turned" : ""),
    );
    resetPointChips();
    await refresh();
  } catch (err) {
    setStatus(`point rejected: ${describe(err)}`, "err");
    if (err instanceof ApiError && err.status === 409) {
      await refresh();
    }
  } finally {
    paintChips();
  }
}

async function undoPoint(): Promise<void> {
  if (sessionId === null) {
    return;
  }
  const expected = digestByCount.get(unitsSeen - 1);
  undoButton.disabled = true;
  try {
    await api.undoLast(sessionId);
    await refresh();
    if (expected !== undefined && lastDigest === expected) {
      setStatus("undid last point; view matches the earlier state");
    } else {
      setStatus("undid last point");
    }
  } catch (err) {
    setStatus(`undo failed: ${describe(err)}`, "err");
  } finally {
    undoButton.disabled = unitsSeen === 0;
  }
}

/* ----------------------------------------------------------------- boot */

async function boot(): Promise<void> {
  for (const chip of document.querySelectorAll<HTMLElement>("[data-chip]")) {
    chip.addEventListener("click", () => {
      applyChip(chipValue(chip));
      paintChips();
    });
  }
  for (const input of [distanceAInput, distanceBInput]) {
    input.addEventListener("input", paintChips);
  }
  startButton.addEventListener("click", () => void startSession());
  sendButton.addEventListener("click", () => void sendPoint());
  undoButton.addEventListener("click", () => void undoPoint());
  window.addEventListener("beforeunload", () => poller.stop());

  try {
    const models = await api.listModels();
    modelSelect.replaceChildren(
      ...models.map((m) => {
        const option = document.createElement("option");
        option.value = m.model_id;
        option.textContent = `${m.model_id} (${m.kind}, ${m.n_features} features)`;
        return option;
      }),
    );
    setStatus(`ready · ${models.length} model${models.length === 1 ? "" : "s"} available`);
  } catch (err) {
    setStatus(`could not list models: ${describe(err)}`, "err");
  }
  paintChips();
}

void boot();
