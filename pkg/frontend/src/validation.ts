// Client-side session-form validation, mirroring the server's rules so the
// operator sees problems before a request is made.

import type { SessionForm } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

const FILTER_MODES = new Set(["baseline", "plus"]);

function finite(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

export function validateSessionForm(form: SessionForm): FieldError[] {
  const errors: FieldError[] = [];
  const cal = form.calibration;

  for (const key of ["lnx", "rnx", "uny", "lny", "frame_height"] as const) {
    if (!finite(cal[key]) || cal[key] < 0) {
      errors.push({ field: `calibration.${key}`, message: "must be a number >= 0" });
    }
  }
  if (finite(cal.lnx) && finite(cal.rnx) && cal.lnx >= cal.rnx) {
    errors.push({
      field: "calibration.lnx",
      message: "left net x must be less than right net x",
    });
  }
  if (finite(cal.uny) && finite(cal.lny) && cal.uny >= cal.lny) {
    // Image coordinates: the net's top edge must sit above its bottom edge.
    errors.push({
      field: "calibration.uny",
      message: "net top edge must be above the bottom edge (smaller image y)",
    });
  }
  if (finite(cal.frame_height)) {
    if (cal.frame_height <= 0) {
      errors.push({ field: "calibration.frame_height", message: "must be positive" });
    }
    for (const key of ["uny", "lny"] as const) {
      if (finite(cal[key]) && cal[key] > cal.frame_height) {
        errors.push({ field: `calibration.${key}`, message: "outside the frame" });
      }
    }
  }

  if (!form.initialPositions.length) {
    errors.push({
      field: "initialPositions",
      message: "at least one set of opposite positions is required",
    });
  }
  form.initialPositions.forEach((pair, i) => {
    const valid =
      pair.length === 2 &&
      pair.every((p) => Number.isInteger(p) && p >= 1 && p <= 6);
    if (!valid) {
      errors.push({
        field: `initialPositions.${i}`,
        message: "positions must be integers in 1..6",
      });
    }
  });

  if (form.coefficients) {
    for (const key of ["q", "m", "s", "c"] as const) {
      const v = form.coefficients[key];
      if (!finite(v) || v <= 0) {
        errors.push({ field: `coefficients.${key}`, message: "must be a positive number" });
      }
    }
  }

  if (!FILTER_MODES.has(form.filterMode)) {
    errors.push({ field: "filterMode", message: "must be 'baseline' or 'plus'" });
  }

  return errors;
}

/** Request body for POST /sessions, in the server's expected shape. */
export function sessionPayload(form: SessionForm): Record<string, unknown> {
  const payload: Record<string, unknown> = {
    calibration: form.calibration,
    initial_positions: form.initialPositions,
    filter_mode: form.filterMode,
  };
  if (form.coefficients) payload.coefficients = form.coefficients;
  if (form.sessionId) payload.session_id = form.sessionId;
  return payload;
}
