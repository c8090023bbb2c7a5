// Browser wiring: session form, rally entry, live dashboard.

import { ApiError, SetsenseClient } from "./api.js";
import {
  buildDashboardModel,
  renderDashboard,
} from "./dashboard.js";
import {
  advanceNewRally,
  advanceSameRally,
  initialRallyState,
  parseDetectionStream,
  roundKeyString,
  type RallyEntryState,
} from "./rally.js";
import { subscribe, type ConnectionState, type Subscription } from "./sse.js";
import type { RoundResult, SessionForm, SessionStats, TeamSide, WireRecord } from "./types.js";
import { sessionPayload, validateSessionForm } from "./validation.js";

interface AppState {
  client: SetsenseClient;
  sessionId: string | null;
  rally: RallyEntryState;
  stats: SessionStats | null;
  lastRound: RoundResult | null;
  connection: ConnectionState;
  subscription: Subscription | null;
  pendingRecords: WireRecord[] | null;
}

const state: AppState = {
  client: new SetsenseClient(window.location.origin),
  sessionId: null,
  rally: initialRallyState(),
  stats: null,
  lastRound: null,
  connection: "connecting",
  subscription: null,
  pendingRecords: null,
};

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const num = (id: string): number => Number(($(id) as unknown as HTMLInputElement).value);

function readSessionForm(): SessionForm {
  return {
    calibration: {
      lnx: num("cal-lnx"),
      rnx: num("cal-rnx"),
      uny: num("cal-uny"),
      lny: num("cal-lny"),
      frame_height: num("cal-h"),
    },
    initialPositions: [[num("pos-a"), num("pos-b")] as [number, number]],
    coefficients: {
      q: num("coef-q"),
      m: num("coef-m"),
      s: num("coef-s"),
      c: num("coef-c"),
    },
    filterMode: ($("filter-mode") as unknown as HTMLSelectElement).value as "baseline" | "plus",
  };
}

function showError(message: string, field?: string) {
  const box = $("error-box");
  box.textContent = message;
  box.classList.toggle("hidden", message === "");
  document.querySelectorAll(".invalid").forEach((el) => el.classList.remove("invalid"));
  if (field) {
    const el = document.querySelector(`[data-field="${field}"]`);
    el?.classList.add("invalid");
  }
}

function refreshDashboard() {
  renderDashboard(
    buildDashboardModel(state.stats, state.lastRound, state.connection),
    $("dashboard"),
  );
  $("rally-key").textContent = roundKeyString(state.rally);
}

async function refreshFromServer() {
  if (!state.sessionId) return;
  state.stats = await state.client.getStats(state.sessionId);
  const history = await state.client.getRounds(state.sessionId);
  state.lastRound = history.rounds[history.rounds.length - 1] ?? null;
  renderHistory(history.rounds);
  refreshDashboard();
}

function renderHistory(rounds: RoundResult[]) {
  const list = $("history");
  list.innerHTML = rounds
    .map((r) => `<li><code>${r.round_key}</code> ${r.label ?? "no-set"}</li>`)
    .join("");
}

async function createSession() {
  const form = readSessionForm();
  const errors = validateSessionForm(form);
  if (errors.length > 0) {
    const first = errors[0]!;
    showError(`${first.field}: ${first.message}`, first.field);
    return;
  }
  try {
    const created = await state.client.createSession(sessionPayload(form));
    state.sessionId = created.session_id;
    state.rally = initialRallyState(
      ($("first-team") as unknown as HTMLSelectElement).value as TeamSide,
    );
    showError("");
    $("session-id").textContent = created.session_id;
    $("setup-panel").classList.add("hidden");
    $("live-panel").classList.remove("hidden");
    state.subscription = subscribe(state.client.eventsUrl(created.session_id), {
      onEvent: (event) => {
        if (event.event !== "round_result") return;
        state.lastRound = JSON.parse(event.data) as RoundResult;
        // Pure client: re-pull the authoritative numbers rather than counting here.
        void refreshFromServer();
      },
      onStateChange: (connection) => {
        state.connection = connection;
        if (connection === "live") void refreshFromServer();
        refreshDashboard();
      },
    });
    refreshDashboard();
  } catch (error) {
    showError(error instanceof ApiError ? error.detail : String(error), "calibration.lnx");
  }
}

async function submitRally() {
  if (!state.sessionId) return;
  if (!state.pendingRecords) {
    showError("attach a detection-stream file for this round", "detections");
    return;
  }
  const key = { score: state.rally.score, round: state.rally.round, team: state.rally.team };
  try {
    await state.client.submitRound(state.sessionId, key, state.pendingRecords);
    showError("");
    state.pendingRecords = null;
    ($("detections-file") as unknown as HTMLInputElement).value = "";
    const newRally = ($("advance-mode") as unknown as HTMLSelectElement).value === "new-rally";
    const receiver = ($("next-team") as unknown as HTMLSelectElement).value as TeamSide;
    state.rally = newRally
      ? advanceNewRally(state.rally, receiver)
      : advanceSameRally(state.rally);
    refreshDashboard();
  } catch (error) {
    // Server rejections are shown verbatim; counters do not advance.
    if (error instanceof ApiError) {
      const field = error.detail.includes("detections") ? "detections" : "rally-counters";
      showError(error.detail, field);
    } else {
      showError(String(error));
    }
  }
}

function applyCounterOverride() {
  const score = num("override-score");
  const round = num("override-round");
  const team = ($("next-team") as unknown as HTMLSelectElement).value as TeamSide;
  if (Number.isInteger(score) && score >= 1 && Number.isInteger(round) && round >= 1) {
    state.rally = { score, round, team };
    showError("");
    refreshDashboard();
  } else {
    showError("override counters must be integers >= 1", "rally-counters");
  }
}

function wire() {
  $("create-session").addEventListener("click", () => void createSession());
  $("submit-round").addEventListener("click", () => void submitRally());
  $("apply-override").addEventListener("click", applyCounterOverride);
  ($("detections-file") as unknown as HTMLInputElement).addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const parsed = parseDetectionStream(await file.text());
    if (parsed.error) {
      showError(`attached stream: ${parsed.error}`, "detections");
      state.pendingRecords = null;
    } else {
      showError("");
      state.pendingRecords = parsed.records;
      $("detections-info").textContent = `${parsed.records.length} frame record(s) ready`;
    }
  });
  refreshDashboard();
}

if (typeof document !== "undefined") {
  wire();
}
