// Rally-entry bookkeeping: the score/round counters follow the
// `score_round_team` discipline (round resets to 1 on each new rally), so
// every key the console produces parses on the server side.

import type { TeamSide, WireRecord } from "./types.js";

export const ROUND_KEY_PATTERN = /^[1-9]\d*_[1-9]\d*_[ab]$/;

export interface RallyEntryState {
  score: number;
  round: number;
  team: TeamSide;
}

export function initialRallyState(team: TeamSide = "a"): RallyEntryState {
  return { score: 1, round: 1, team };
}

/** Another round in the same rally: only the round ordinal advances. */
export function advanceSameRally(state: RallyEntryState): RallyEntryState {
  return { ...state, round: state.round + 1 };
}

/** A new rally: score advances, round resets, receiver comes from the selector. */
export function advanceNewRally(state: RallyEntryState, receivingTeam: TeamSide): RallyEntryState {
  return { score: state.score + 1, round: 1, team: receivingTeam };
}

export function roundKeyString(state: RallyEntryState): string {
  return `${state.score}_${state.round}_${state.team}`;
}

export interface ParsedStream {
  records: WireRecord[];
  error?: string;
}

/** Parse an attached detection-stream file (NDJSON, one record per frame). */
export function parseDetectionStream(text: string): ParsedStream {
  const records: WireRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = (lines[i] ?? "").trim();
    if (!line) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch {
      return { records: [], error: `line ${i + 1}: not valid JSON` };
    }
    const record = obj as Partial<WireRecord>;
    if (typeof record.frame !== "number" || !Array.isArray(record.candidates)) {
      return { records: [], error: `line ${i + 1}: missing frame/candidates` };
    }
    records.push({ frame: record.frame, candidates: record.candidates });
  }
  return { records };
}
