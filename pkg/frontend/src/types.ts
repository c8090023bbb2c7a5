// Wire types mirroring the session service's JSON shapes.

export type TeamSide = "a" | "b";
export type FilterMode = "baseline" | "plus";

export const TACTIC_LABELS = [
  "quick",
  "thirty_one",
  "back_one",
  "short",
  "outside",
  "bic",
  "d_ball",
  "oppo",
  "unknown",
] as const;

export type TacticName = (typeof TACTIC_LABELS)[number];

export interface CalibrationEntry {
  lnx: number;
  rnx: number;
  uny: number; // image coordinates: net top edge (smaller y than lny)
  lny: number;
  frame_height: number;
}

export interface CoefficientEntry {
  q: number;
  m: number;
  s: number;
  c: number;
}

export interface SessionForm {
  calibration: CalibrationEntry;
  initialPositions: Array<[number, number]>; // [pos_a, pos_b] per set
  coefficients?: CoefficientEntry;
  filterMode: FilterMode;
  sessionId?: string;
}

export interface WireCandidate {
  x: number;
  y: number;
  area: number;
  circularity: number;
  score: number;
}

export interface WireRecord {
  frame: number;
  candidates: WireCandidate[];
}

export interface RoundFeatures {
  sp: number;
  hp: number;
  hya: number;
  xd: number;
  nw: number;
}

export interface RoundResult {
  round_key: string;
  label: string | null;
  features: RoundFeatures | null;
  back_row_a: boolean;
  back_row_b: boolean;
  processing_ms: number;
}

export interface TeamStats {
  rounds: number;
  no_set: number;
  counts: Record<string, number>;
  fractions: Record<string, number>;
}

export interface SessionStats {
  rounds_total: number;
  teams: Record<TeamSide, TeamStats>;
}
