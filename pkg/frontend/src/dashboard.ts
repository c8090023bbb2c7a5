// Dashboard view-model: a plain-data projection of the latest server stats
// and round result. No statistics are computed here beyond formatting; the
// displayed numbers are exactly what GET /stats returned.

import type { RoundResult, SessionStats, TeamSide } from "./types.js";
import { TACTIC_LABELS } from "./types.js";
import type { ConnectionState } from "./sse.js";

export interface TacticRow {
  label: string;
  count: number;
  fraction: string;
}

export interface TeamPanel {
  rounds: number;
  noSet: number;
  rows: TacticRow[];
  oppositeBackRow: boolean | null;
}

export interface LastRoundView {
  key: string;
  label: string;
  features: string;
}

export interface DashboardModel {
  connection: ConnectionState;
  roundsTotal: number;
  teams: Record<TeamSide, TeamPanel>;
  lastRound: LastRoundView | null;
}

export function formatFraction(fraction: number): string {
  return `${(fraction * 100).toFixed(1)}%`;
}

const LABEL_TEXT: Record<string, string> = {
  quick: "Quick",
  thirty_one: "Thirty-One",
  back_one: "Back-One",
  short: "Short",
  outside: "Outside",
  bic: "Bic",
  d_ball: "D-Ball",
  oppo: "Oppo",
  unknown: "Unknown",
};

export function labelText(label: string | null): string {
  if (label === null) return "no set detected";
  return LABEL_TEXT[label] ?? label;
}

function teamPanel(stats: SessionStats | null, side: TeamSide, last: RoundResult | null): TeamPanel {
  const team = stats?.teams[side];
  const rows: TacticRow[] = TACTIC_LABELS.map((label) => ({
    label: labelText(label),
    count: team?.counts[label] ?? 0,
    fraction: formatFraction(team?.fractions[label] ?? 0),
  }));
  let oppositeBackRow: boolean | null = null;
  if (last) {
    oppositeBackRow = side === "a" ? last.back_row_a : last.back_row_b;
  }
  return {
    rounds: team?.rounds ?? 0,
    noSet: team?.no_set ?? 0,
    rows,
    oppositeBackRow,
  };
}

export function buildDashboardModel(
  stats: SessionStats | null,
  lastRound: RoundResult | null,
  connection: ConnectionState,
): DashboardModel {
  let lastView: LastRoundView | null = null;
  if (lastRound) {
    const f = lastRound.features;
    lastView = {
      key: lastRound.round_key,
      label: labelText(lastRound.label),
      features: f
        ? `setter x ${f.sp.toFixed(0)}, hitter x ${f.hp.toFixed(0)}, apex ${f.hya.toFixed(0)} (${(f.hya / f.nw).toFixed(2)} nw)`
        : "-",
    };
  }
  return {
    connection,
    roundsTotal: stats?.rounds_total ?? 0,
    teams: {
      a: teamPanel(stats, "a", lastRound),
      b: teamPanel(stats, "b", lastRound),
    },
    lastRound: lastView,
  };
}

/** Render the model into a container element. Purely presentational. */
export function renderDashboard(model: DashboardModel, root: HTMLElement): void {
  const staleBanner =
    model.connection === "live"
      ? ""
      : `<div class="banner banner-stale">live feed ${model.connection} - data may be stale</div>`;
  const teamHtml = (side: TeamSide) => {
    const panel = model.teams[side];
    const rowIndicator =
      panel.oppositeBackRow === null
        ? "-"
        : panel.oppositeBackRow
          ? "BACK ROW"
          : "front row";
    const rows = panel.rows
      .map(
        (row) =>
          `<tr><td>${row.label}</td><td>${row.count}</td><td>${row.fraction}</td></tr>`,
      )
      .join("");
    return `
      <section class="team-panel" data-team="${side}">
        <h3>Team ${side.toUpperCase()}</h3>
        <p>rounds: <span class="team-rounds">${panel.rounds}</span>,
           no-set: <span class="team-noset">${panel.noSet}</span>,
           opposite: <span class="team-row">${rowIndicator}</span></p>
        <table><thead><tr><th>tactic</th><th>count</th><th>share</th></tr></thead>
        <tbody>${rows}</tbody></table>
      </section>`;
  };
  const last = model.lastRound
    ? `<p class="last-round">last round <b>${model.lastRound.key}</b>: ` +
      `<b>${model.lastRound.label}</b> (${model.lastRound.features})</p>`
    : `<p class="last-round">no rounds yet</p>`;
  root.innerHTML = `
    ${staleBanner}
    <p>rounds total: <span id="rounds-total">${model.roundsTotal}</span></p>
    ${last}
    <div class="team-grid">${teamHtml("a")}${teamHtml("b")}</div>`;
}
