"""Match sessions: round-by-round orchestration, persistence and live statistics.

A session owns one match's calibration, coefficients and rotation state.
Rounds are submitted in key order; each submission runs the rotation update,
tracking, set extraction and classification, appends the result to an
append-only NDJSON log, and updates the running tactic distribution. Killing
and restarting the process replays the log and reproduces identical stats.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from queue import SimpleQueue
from typing import Any, Callable, Iterable, Sequence

from .classify import (
    NoSettingTrajectoryError,
    SetContext,
    TacticLabel,
    TrajectoryFeatures,
    classify,
    compute_features,
)
from .config import ConfigError, EngineConfig, engine_config_from_dict
from .detect import DetectionRecord, DetectionStreamError, ingest_detections
from .geometry import calculate_areas
from .rotation import OppositeRowTracker, RoundKey, parse_round_key
from .track import FilterMode, extract_setting_trajectory, track_round

CONFIG_FILE = "config.json"
EVENTS_FILE = "events.ndjson"


class UnknownSessionError(KeyError):
    """No session with the given id."""


class DuplicateSessionError(ValueError):
    """A session with the given id already exists."""


class RoundOrderError(ValueError):
    """A round key is a duplicate of, or earlier than, the last accepted key."""


@dataclass(frozen=True)
class RoundResult:
    """Outcome of one submitted round; label None means no set was detected."""

    round_key: RoundKey
    label: TacticLabel | None
    features: TrajectoryFeatures | None
    back_row_a: bool
    back_row_b: bool
    processing_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "round_key": str(self.round_key),
            "label": self.label.value if self.label is not None else None,
            "features": {
                "sp": self.features.sp,
                "hp": self.features.hp,
                "hya": self.features.hya,
                "xd": self.features.xd,
                "nw": self.features.nw,
            }
            if self.features is not None
            else None,
            "back_row_a": self.back_row_a,
            "back_row_b": self.back_row_b,
            "processing_ms": self.processing_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RoundResult":
        features = None
        if data.get("features") is not None:
            features = TrajectoryFeatures(**data["features"])
        label = TacticLabel(data["label"]) if data.get("label") is not None else None
        return cls(
            round_key=parse_round_key(data["round_key"]),
            label=label,
            features=features,
            back_row_a=bool(data["back_row_a"]),
            back_row_b=bool(data["back_row_b"]),
            processing_ms=float(data["processing_ms"]),
        )


@dataclass(frozen=True)
class TeamDistribution:
    rounds: int
    no_set: int
    counts: dict[str, int]
    fractions: dict[str, float]


@dataclass(frozen=True)
class TacticDistribution:
    """Running per-team tactic counts and fractions over labeled rounds."""

    rounds_total: int
    teams: dict[str, TeamDistribution]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rounds_total": self.rounds_total,
            "teams": {
                team: {
                    "rounds": dist.rounds,
                    "no_set": dist.no_set,
                    "counts": dist.counts,
                    "fractions": dist.fractions,
                }
                for team, dist in self.teams.items()
            },
        }


def distribution_from_results(results: Sequence[RoundResult]) -> TacticDistribution:
    labels = [label.value for label in TacticLabel]
    teams: dict[str, TeamDistribution] = {}
    for team in ("a", "b"):
        team_results = [r for r in results if r.round_key.team.value == team]
        counts = {label: 0 for label in labels}
        no_set = 0
        for r in team_results:
            if r.label is None:
                no_set += 1
            else:
                counts[r.label.value] += 1
        labeled = sum(counts.values())
        fractions = {
            label: (counts[label] / labeled if labeled else 0.0) for label in labels
        }
        teams[team] = TeamDistribution(
            rounds=len(team_results), no_set=no_set, counts=counts, fractions=fractions
        )
    return TacticDistribution(rounds_total=len(results), teams=teams)


@dataclass
class MatchSession:
    """One live match: config, accepted results and incremental rotation state."""

    session_id: str
    config: EngineConfig
    results: list[RoundResult] = field(default_factory=list)
    rotation: OppositeRowTracker | None = None
    set_index: int = 0
    last_key: RoundKey | None = None

    def __post_init__(self) -> None:
        if self.rotation is None:
            pos_a, pos_b = self.config.initial_positions[0]
            self.rotation = OppositeRowTracker(pos_a, pos_b)


class SessionStore:
    """Per-session config snapshot plus an append-only result log on disk."""

    def __init__(self, data_dir: str | Path) -> None:
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def write_config(self, session_id: str, config: EngineConfig) -> None:
        sdir = self.session_dir(session_id)
        sdir.mkdir(parents=True, exist_ok=True)
        (sdir / CONFIG_FILE).write_text(
            json.dumps(config.to_dict(), indent=2), encoding="utf-8"
        )

    def append_result(self, session_id: str, result: RoundResult) -> None:
        path = self.session_dir(session_id) / EVENTS_FILE
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(result.to_dict()) + "\n")

    def load_all(self) -> dict[str, tuple[EngineConfig, list[RoundResult]]]:
        sessions: dict[str, tuple[EngineConfig, list[RoundResult]]] = {}
        for sdir in sorted(self.root.iterdir()):
            config_path = sdir / CONFIG_FILE
            if not sdir.is_dir() or not config_path.exists():
                continue
            config = engine_config_from_dict(
                json.loads(config_path.read_text(encoding="utf-8"))
            )
            results: list[RoundResult] = []
            events_path = sdir / EVENTS_FILE
            if events_path.exists():
                with open(events_path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            results.append(RoundResult.from_dict(json.loads(line)))
            sessions[sdir.name] = (config, results)
        return sessions


class SessionManager:
    """Owns all live sessions; serializes submissions per session.

    Submissions within one session run strictly in arrival order under the
    session lock; distinct sessions proceed in parallel. Stats reads take the
    same lock, so they always see a consistent snapshot.
    """

    def __init__(self, data_dir: str | Path | None = None) -> None:
        self._store = SessionStore(data_dir) if data_dir is not None else None
        self._sessions: dict[str, MatchSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._subscribers: dict[str, list[SimpleQueue]] = {}
        self._global_lock = threading.Lock()
        if self._store is not None:
            for session_id, (config, results) in self._store.load_all().items():
                session = MatchSession(session_id=session_id, config=config)
                for result in results:
                    self._replay(session, result)
                self._register(session)

    @staticmethod
    def _replay(session: MatchSession, result: RoundResult) -> None:
        SessionManager._advance_rotation(session, result.round_key)
        session.results.append(result)
        session.last_key = result.round_key

    @staticmethod
    def _advance_rotation(session: MatchSession, key: RoundKey) -> tuple[bool, bool]:
        """Handle set boundaries, then step the rotation tracker."""
        if session.last_key is not None and key.score < session.last_key.score:
            next_set = session.set_index + 1
            positions = session.config.initial_positions
            if next_set >= len(positions):
                raise RoundOrderError(
                    f"score reset to {key.score} starts set {next_set + 1}, "
                    f"but only {len(positions)} set(s) of initial positions are configured"
                )
            pos_a, pos_b = positions[next_set]
            session.set_index = next_set
            session.rotation = OppositeRowTracker(pos_a, pos_b)
            session.last_key = None
        assert session.rotation is not None
        return session.rotation.step(key)

    def _register(self, session: MatchSession) -> None:
        self._sessions[session.session_id] = session
        self._locks[session.session_id] = threading.Lock()
        self._subscribers[session.session_id] = []

    def create_session(
        self, config: EngineConfig, session_id: str | None = None
    ) -> MatchSession:
        session_id = session_id or uuid.uuid4().hex[:12]
        with self._global_lock:
            if session_id in self._sessions:
                raise DuplicateSessionError(f"session {session_id!r} already exists")
            session = MatchSession(session_id=session_id, config=config)
            if self._store is not None:
                self._store.write_config(session_id, config)
            self._register(session)
        return session

    def _get(self, session_id: str) -> tuple[MatchSession, threading.Lock]:
        try:
            return self._sessions[session_id], self._locks[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def session_ids(self) -> list[str]:
        with self._global_lock:
            return sorted(self._sessions)

    def submit_round(
        self,
        session_id: str,
        key: RoundKey,
        detections: Iterable[DetectionRecord],
        mode: FilterMode | None = None,
    ) -> RoundResult:
        """Process one round and append its result to the session log."""
        session, lock = self._get(session_id)
        with lock:
            if session.last_key is not None and key.score >= session.last_key.score:
                if (key.score, key.round) <= (session.last_key.score, session.last_key.round):
                    raise RoundOrderError(
                        f"round key {key} is not after the last accepted key "
                        f"{session.last_key}"
                    )
            started = time.perf_counter()
            config = session.config
            # Track first: malformed detections must fail before any state change.
            trajectories = track_round(
                detections,
                still_threshold=config.tracker.still_threshold,
                association_radius=config.tracker.association_radius,
                max_coast_frames=config.tracker.max_coast_frames,
                filter_mode=mode or config.filter_mode,
                spawn_score_floor=config.tracker.spawn_score_floor,
            )
            setting = extract_setting_trajectory(trajectories)
            back_row_a, back_row_b = self._advance_rotation(session, key)
            label: TacticLabel | None = None
            features: TrajectoryFeatures | None = None
            if setting.valid:
                try:
                    features = compute_features(setting, config.calibration)
                except NoSettingTrajectoryError:
                    features = None
                if features is not None:
                    ctx = SetContext(tr=key.team, bra=back_row_a, brb=back_row_b)
                    label = classify(
                        features,
                        calculate_areas(config.calibration),
                        config.coefficients,
                        ctx,
                        config.calibration,
                    )
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            result = RoundResult(
                round_key=key,
                label=label,
                features=features,
                back_row_a=back_row_a,
                back_row_b=back_row_b,
                processing_ms=elapsed_ms,
            )
            if self._store is not None:
                self._store.append_result(session_id, result)
            session.results.append(result)
            session.last_key = key
            queues = list(self._subscribers[session_id])
        for queue in queues:
            queue.put(result)
        return result

    def get_stats(self, session_id: str) -> TacticDistribution:
        session, lock = self._get(session_id)
        with lock:
            return distribution_from_results(list(session.results))

    def get_rounds(self, session_id: str) -> list[RoundResult]:
        session, lock = self._get(session_id)
        with lock:
            return list(session.results)

    def get_config(self, session_id: str) -> EngineConfig:
        session, _ = self._get(session_id)
        return session.config

    def subscribe(self, session_id: str) -> SimpleQueue:
        session, lock = self._get(session_id)
        with lock:
            queue: SimpleQueue = SimpleQueue()
            self._subscribers[session_id].append(queue)
            return queue

    def unsubscribe(self, session_id: str, queue: SimpleQueue) -> None:
        try:
            _, lock = self._get(session_id)
        except UnknownSessionError:
            return
        with lock:
            subs = self._subscribers.get(session_id, [])
            if queue in subs:
                subs.remove(queue)


def process_batch(
    input_dir: str | Path,
    config: EngineConfig,
    mode: FilterMode | None = None,
    out_path: str | Path | None = None,
    warn: Callable[[str], None] | None = None,
) -> dict[str, Any]:
    """Process a directory of detection-stream files named `score_round_team.*`.

    Files are processed in sorted key order. Unparseable filenames and broken
    streams are skipped with a warning recorded in the report; everything else
    is processed. Returns (and optionally writes) the batch report.
    """
    root = Path(input_dir)
    warnings: list[str] = []

    def emit(message: str) -> None:
        warnings.append(message)
        if warn is not None:
            warn(message)

    keyed_files: list[tuple[RoundKey, Path]] = []
    for path in sorted(root.glob("*.ndjson")) + sorted(root.glob("*.jsonl")):
        try:
            keyed_files.append((parse_round_key(path.stem), path))
        except Exception as exc:
            emit(f"skipping {path.name}: {exc}")
    keyed_files.sort(key=lambda item: (item[0].score, item[0].round))

    manager = SessionManager()
    session = manager.create_session(config, session_id="batch")
    results: list[RoundResult] = []
    for key, path in keyed_files:
        try:
            records = ingest_detections(path, config.calibration.frame_height)
            results.append(
                manager.submit_round(session.session_id, key, records, mode=mode)
            )
        except (DetectionStreamError, RoundOrderError, ConfigError) as exc:
            emit(f"skipping {path.name}: {exc}")

    report = {
        "input_dir": str(root),
        "mode": (mode or config.filter_mode).value,
        "rounds": [r.to_dict() for r in results],
        "distribution": distribution_from_results(results).to_dict(),
        "warnings": warnings,
    }
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
    return report
