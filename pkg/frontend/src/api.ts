// Thin typed client for the session service. Every number the console shows
// comes from these GET endpoints; the client does no statistics of its own.

import type { RoundResult, SessionStats, TeamSide, WireRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `status ${response.status}`;
  }
}

export class SetsenseClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  createSession(payload: Record<string, unknown>): Promise<{ session_id: string }> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(payload) });
  }

  submitRound(
    sessionId: string,
    key: { score: number; round: number; team: TeamSide },
    detections: WireRecord[],
  ): Promise<RoundResult> {
    return this.request(`/sessions/${sessionId}/rounds`, {
      method: "POST",
      body: JSON.stringify({ ...key, detections }),
    });
  }

  getStats(sessionId: string): Promise<SessionStats> {
    return this.request(`/sessions/${sessionId}/stats`);
  }

  getRounds(sessionId: string): Promise<{ rounds: RoundResult[] }> {
    return this.request(`/sessions/${sessionId}/rounds`);
  }

  eventsUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/events`;
  }
}
