"""Synthetic rally generation and the evaluation harness.

Rounds are built from two parabolic segments in court view (a pass into the
setter, a dead-time gap at the contact, then the set itself), with optional
Gaussian jitter, detection dropout, uniform clutter and adversarial trailing
false positives that reverse the x-direction. Positions are quantized to
1/1024 px so detection-stream serialization round-trips exactly.

The evaluation harness replays labeled rounds through the full chain
(tracking, harvest, set extraction, featurization, classification) and
scores per-tactic and total accuracy against ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classify import SetContext, TacticLabel, classify, compute_features
from .config import EngineConfig, SimulatorConfig
from .detect import (
    DetectionRecord,
    Frame,
    ingest_detections,
    make_candidate,
    write_detections,
)
from .geometry import NetCalibration, Point2, calculate_areas
from .rotation import OppositeRowTracker, RoundKey, Team, parse_round_key
from .track import FilterMode, extract_setting_trajectory, track_round

_QUANT = 1024.0  # dyadic position grid keeps image<->court y conversion exact

MANIFEST_NAME = "manifest.json"


class SimulationError(ValueError):
    """A template is geometrically infeasible for the given calibration."""


@dataclass(frozen=True)
class TacticTemplate:
    """Nominal geometry for one tactic, parameterized on the side-b half.

    x ranges are absolute court-view pixels inside the net span; apex heights
    are multiples of the net width; durations are frame counts.
    """

    label: TacticLabel
    start_x_range: tuple[float, float]
    end_x_range: tuple[float, float]
    apex_height_range: tuple[float, float]
    duration_range: tuple[int, int]


@dataclass(frozen=True)
class NoiseConfig:
    """Detection-noise model for one generated round."""

    jitter_sigma: float = 0.0
    dropout_rate: float = 0.0
    clutter_rate: float = 0.0
    tail_fp_count: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1], got {self.dropout_rate}")
        if self.jitter_sigma < 0 or self.clutter_rate < 0 or self.tail_fp_count < 0:
            raise ValueError("noise rates must be >= 0")


@dataclass(frozen=True)
class LabeledRound:
    """A generated round: detection records plus ground truth."""

    records: tuple[DetectionRecord, ...]
    truth: TacticLabel
    round_key: RoundKey
    truth_back_row: bool


# Template geometry as fractions of the net span (x) so defaults adapt to any
# calibration. Values are tuned jointly with DEFAULT_COEFFICIENTS: each
# template's feature ranges satisfy its own rule and fail every earlier rule,
# with margins that survive the tracker's three-point start/end averaging and
# trailing false positives. Launch speeds stay inside the default association
# radius so a clean set tracks as a single blob.
_TEMPLATE_FRACTIONS: dict[TacticLabel, tuple[tuple[float, float], tuple[float, float], tuple[float, float], tuple[int, int]]] = {
    TacticLabel.QUICK: ((0.425, 0.475), (0.525, 0.600), (1.25, 1.32), (22, 28)),
    TacticLabel.THIRTY_ONE: ((0.0125, 0.0625), (0.650, 0.775), (1.55, 1.65), (30, 38)),
    TacticLabel.BACK_ONE: ((0.450, 0.550), (0.2625, 0.3625), (1.25, 1.32), (22, 28)),
    TacticLabel.SHORT: ((0.275, 0.394), (0.650, 0.781), (1.15, 1.35), (22, 30)),
    TacticLabel.OUTSIDE: ((0.2375, 0.400), (0.8375, 0.9625), (1.70, 1.85), (34, 46)),
    TacticLabel.BIC: ((0.375, 0.500), (0.350, 0.650), (0.65, 0.85), (14, 22)),
    TacticLabel.OPPO: ((0.475, 0.575), (0.075, 0.175), (0.95, 1.15), (20, 30)),
    TacticLabel.D_BALL: ((0.475, 0.575), (0.075, 0.175), (0.95, 1.15), (20, 30)),
}


def default_templates(cal: NetCalibration) -> dict[TacticLabel, TacticTemplate]:
    """The eight built-in templates, one per tactic, scaled to a calibration."""
    lnx, w = cal.lnx, cal.court_width
    out: dict[TacticLabel, TacticTemplate] = {}
    for label, (start_f, end_f, apex, duration) in _TEMPLATE_FRACTIONS.items():
        out[label] = TacticTemplate(
            label=label,
            start_x_range=(lnx + start_f[0] * w, lnx + start_f[1] * w),
            end_x_range=(lnx + end_f[0] * w, lnx + end_f[1] * w),
            apex_height_range=apex,
            duration_range=duration,
        )
    return out


def _quantize(v: float) -> float:
    return round(v * _QUANT) / _QUANT


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


def _parabola(
    x0: float, y0: float, x1: float, y1: float, apex: float, n: int
) -> list[tuple[float, float]]:
    """Sample n points of a parabola from (x0, y0) to (x1, y1) peaking at apex."""
    d = float(n - 1)
    s = (y1 - y0) / d
    a_rel = apex - y0
    root = math.sqrt(max(a_rel * (apex - y1), 0.0))
    u = (2.0 * a_rel - s * d + 2.0 * root) / (d * d)
    b = s + u * d
    pts = []
    for t in range(n):
        x = x0 + (x1 - x0) * t / d
        y = y0 + b * t - u * t * t
        pts.append((x, y))
    return pts


def _ballistic(
    x0: float, y0: float, x1: float, y1: float, g: float, n: int
) -> list[tuple[float, float]]:
    """Sample n points of a gravity-g arc between two endpoints."""
    d = float(n - 1)
    v0 = ((y1 - y0) + 0.5 * g * d * d) / d
    pts = []
    for t in range(n):
        x = x0 + (x1 - x0) * t / d
        y = y0 + v0 * t - 0.5 * g * t * t
        pts.append((x, y))
    return pts


def _lsq_next(pts: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """One-step line extrapolation over the last three points (tracker's rule)."""
    (x0, y0), (x1, y1), (x2, y2) = pts[-3:]
    return (
        (x0 + x1 + x2) / 3.0 + (x2 - x0),
        (y0 + y1 + y2) / 3.0 + (y2 - y0),
    )


def generate_round(
    template: TacticTemplate,
    noise: NoiseConfig,
    cal: NetCalibration,
    key: RoundKey,
    sim: SimulatorConfig | None = None,
    truth_back_row: bool | None = None,
) -> LabeledRound:
    """Generate one labeled round of detection records.

    Deterministic for a given noise seed: geometry, jitter, dropout, clutter
    and tail false positives each draw from an independent seeded stream, so
    changing one noise knob never perturbs the sampled geometry.

    Raises SimulationError when the template does not fit the calibration.
    """
    sim = sim or SimulatorConfig()
    nw = cal.net_width
    fw, fh = sim.frame_width, cal.frame_height

    for name, (lo, hi) in (
        ("start_x", template.start_x_range),
        ("end_x", template.end_x_range),
    ):
        if lo > hi:
            raise SimulationError(f"{name} range is inverted: ({lo}, {hi})")
        if lo < cal.lnx or hi > cal.rnx:
            raise SimulationError(
                f"{name} range ({lo}, {hi}) falls outside the court span "
                f"[{cal.lnx}, {cal.rnx}]"
            )
    if template.duration_range[0] < 5:
        raise SimulationError("set duration must be at least 5 frames")
    if template.apex_height_range[1] * nw > 0.97 * fh:
        raise SimulationError("apex range exceeds the frame height")

    seq = np.random.SeedSequence(noise.seed)
    geom_rng, jitter_rng, dropout_rng, clutter_rng, tail_rng = (
        np.random.default_rng(child) for child in seq.spawn(5)
    )

    # Set segment.
    set_x0 = _uniform(geom_rng, *template.start_x_range)
    set_x1 = _uniform(geom_rng, *template.end_x_range)
    set_n = int(geom_rng.integers(template.duration_range[0], template.duration_range[1] + 1))
    apex = _uniform(geom_rng, *template.apex_height_range) * nw
    y_lo, y_hi = sim.contact_height[0] * nw, sim.contact_height[1] * nw
    set_y0 = _uniform(geom_rng, y_lo, y_hi)
    set_y1 = _uniform(geom_rng, y_lo, y_hi)
    if apex <= max(set_y0, set_y1):
        raise SimulationError("apex must exceed both contact heights")

    # Short pass segment feeding the setter, using the configured gravity; it
    # stays under the setting-length threshold so the set is the round's only
    # substantial trajectory.
    pass_n = int(geom_rng.integers(sim.pass_duration[0], sim.pass_duration[1] + 1))
    offset = _uniform(geom_rng, 0.15 * cal.court_width, 0.35 * cal.court_width)
    pass_x0 = set_x0 + offset if set_x0 + offset <= cal.rnx else set_x0 - offset
    pass_y0 = _uniform(geom_rng, y_lo, y_hi)
    g = sim.gravity_per_frame(nw)

    pass_pts = _ballistic(pass_x0, pass_y0, set_x0, set_y0, g, pass_n)
    set_pts = _parabola(set_x0, set_y0, set_x1, set_y1, apex, set_n)

    set_start_frame = pass_n + sim.contact_gap_frames
    timeline: list[tuple[int, float, float]] = [
        (i, x, y) for i, (x, y) in enumerate(pass_pts)
    ] + [(set_start_frame + i, x, y) for i, (x, y) in enumerate(set_pts)]

    if key.team is Team.A:
        timeline = [(i, cal.mirror_axis - x, y) for i, x, y in timeline]

    if noise.jitter_sigma > 0:
        noisy = []
        for i, x, y in timeline:
            dx, dy = jitter_rng.normal(0.0, noise.jitter_sigma, size=2)
            noisy.append((i, x + float(dx), y + float(dy)))
        timeline = noisy

    timeline = [
        (i, _quantize(min(max(x, 0.0), fw)), _quantize(min(max(y, 0.0), fh)))
        for i, x, y in timeline
    ]

    if noise.dropout_rate > 0:
        keep = dropout_rng.random(len(timeline)) >= noise.dropout_rate
        kept_timeline = [t for t, k in zip(timeline, keep) if k]
    else:
        kept_timeline = list(timeline)

    # Trailing false positives: anchored near the true terminal point, first
    # step reversing the set's x-direction and alternating after that, placed
    # close to the tracker's predicted next point so the set blob absorbs them.
    set_timeline = timeline[pass_n:]
    fp_points: list[tuple[int, float, float]] = []
    if noise.tail_fp_count > 0 and len(set_timeline) >= 3:
        x_sign = 1.0 if set_timeline[-1][1] >= set_timeline[0][1] else -1.0
        recent = [(x, y) for _, x, y in set_timeline[-3:]]
        last_frame = set_timeline[-1][0]
        anchor_x = set_timeline[-1][1]
        for k in range(1, noise.tail_fp_count + 1):
            _, pred_y = _lsq_next(recent)
            step = _uniform(tail_rng, 10.0, 16.0)
            direction = -x_sign if k % 2 == 1 else x_sign
            anchor_x = anchor_x + direction * step
            fy = min(max(pred_y, 2.0), fh) + _uniform(tail_rng, -4.0, 4.0)
            fx = _quantize(min(max(anchor_x, 0.0), fw))
            fy = _quantize(min(max(fy, 0.0), fh))
            fp_points.append((last_frame + k, fx, fy))
            recent.append((fx, fy))
    total_frames = pass_n + sim.contact_gap_frames + set_n + noise.tail_fp_count

    by_frame: dict[int, list[tuple[float, float, float, float, float]]] = {
        i: [] for i in range(total_frames)
    }

    def ball_attrs(rng: np.random.Generator) -> tuple[float, float, float]:
        return (
            _uniform(rng, 250.0, 450.0),
            _uniform(rng, 0.75, 0.95),
            _uniform(rng, 0.85, 0.97),
        )

    for i, x, y in kept_timeline:
        area, circ, score = ball_attrs(geom_rng)
        by_frame[i].append((x, y, area, circ, score))
    for i, x, y in fp_points:
        area = _uniform(tail_rng, 250.0, 450.0)
        circ = _uniform(tail_rng, 0.70, 0.90)
        score = _uniform(tail_rng, 0.50, 0.80)
        by_frame[i].append((x, y, area, circ, score))

    if noise.clutter_rate > 0:
        for i in range(total_frames):
            for _ in range(int(clutter_rng.poisson(noise.clutter_rate))):
                x = _quantize(_uniform(clutter_rng, 0.0, fw))
                y = _quantize(_uniform(clutter_rng, 0.0, fh))
                area = _uniform(clutter_rng, 30.0, 2000.0)
                circ = _uniform(clutter_rng, 0.05, 0.95)
                score = _uniform(clutter_rng, 0.10, 0.90)
                by_frame[i].append((x, y, area, circ, score))

    records = tuple(
        DetectionRecord(
            frame_index=i,
            candidates=tuple(make_candidate(*vals) for vals in by_frame[i]),
        )
        for i in range(total_frames)
    )

    if truth_back_row is None:
        truth_back_row = template.label is TacticLabel.D_BALL
    return LabeledRound(
        records=records, truth=template.label, round_key=key, truth_back_row=truth_back_row
    )


def run_pipeline(
    round: LabeledRound, mode: FilterMode, config: EngineConfig
) -> TacticLabel | None:
    """Run one round through tracking, extraction and classification.

    Returns the predicted tactic, or None when no valid setting trajectory
    was found (the no-set outcome).
    """
    trajectories = track_round(
        round.records,
        still_threshold=config.tracker.still_threshold,
        association_radius=config.tracker.association_radius,
        max_coast_frames=config.tracker.max_coast_frames,
        filter_mode=mode,
        spawn_score_floor=config.tracker.spawn_score_floor,
    )
    setting = extract_setting_trajectory(trajectories)
    if not setting.valid:
        return None
    features = compute_features(setting, config.calibration)
    sections = calculate_areas(config.calibration)
    ctx = SetContext(tr=round.round_key.team, bra=round.truth_back_row, brb=round.truth_back_row)
    return classify(features, sections, config.coefficients, ctx, config.calibration)


@dataclass(frozen=True)
class TacticTally:
    total: int = 0
    correct: int = 0
    no_set: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass(frozen=True)
class AccuracyReport:
    """Per-tactic and overall accuracy, with no-set outcomes counted separately."""

    per_tactic: Mapping[TacticLabel, TacticTally]
    total: int
    correct: int
    no_set: int
    predictions: tuple[tuple[str, str, str | None], ...] = ()

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "no_set": self.no_set,
            "accuracy": self.accuracy,
            "per_tactic": {
                label.value: {
                    "total": tally.total,
                    "correct": tally.correct,
                    "no_set": tally.no_set,
                    "accuracy": tally.accuracy,
                }
                for label, tally in self.per_tactic.items()
            },
            "predictions": [
                {"key": key, "truth": truth, "predicted": predicted}
                for key, truth, predicted in self.predictions
            ],
        }


def evaluate(
    dataset: Sequence[LabeledRound], mode: FilterMode, config: EngineConfig
) -> AccuracyReport:
    """Score a labeled dataset; accuracy = correct detections / total detections."""
    if not dataset:
        raise ValueError("cannot evaluate an empty dataset")
    totals: dict[TacticLabel, list[int]] = {}
    predictions: list[tuple[str, str, str | None]] = []
    correct = 0
    no_set = 0
    for round_ in dataset:
        predicted = run_pipeline(round_, mode, config)
        tally = totals.setdefault(round_.truth, [0, 0, 0])
        tally[0] += 1
        if predicted is None:
            tally[2] += 1
            no_set += 1
        elif predicted is round_.truth:
            tally[1] += 1
            correct += 1
        predictions.append(
            (
                str(round_.round_key),
                round_.truth.value,
                predicted.value if predicted is not None else None,
            )
        )
    return AccuracyReport(
        per_tactic={
            label: TacticTally(total=t, correct=c, no_set=n)
            for label, (t, c, n) in totals.items()
        },
        total=len(dataset),
        correct=correct,
        no_set=no_set,
        predictions=tuple(predictions),
    )


def generate_dataset(
    count: int,
    seed: int,
    config: EngineConfig,
    noise: NoiseConfig | None = None,
    templates: Mapping[TacticLabel, TacticTemplate] | None = None,
) -> list[LabeledRound]:
    """Generate a rotation-coherent match script of labeled rounds.

    Tactics are balanced (count // 8 rounds each, remainder spread over the
    first labels). Receiving teams alternate every rally so rotations advance
    deterministically; side-dependent truths (back-row vs front-row right-side
    attacks) are scheduled onto rallies whose receiver flag matches, which
    keeps each round's ground truth consistent with the rotation state a
    batch run would derive from the same keys.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    noise = noise or NoiseConfig()
    templates = dict(templates or default_templates(config.calibration))
    labels = list(TacticLabel)
    labels.remove(TacticLabel.UNKNOWN)
    missing = [label.value for label in labels if label not in templates]
    if missing:
        raise ValueError(f"templates missing for: {', '.join(missing)}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    per_label = {label: count // len(labels) for label in labels}
    for label in labels[: count % len(labels)]:
        per_label[label] += 1

    pos_a, pos_b = config.initial_positions[0]
    tracker = OppositeRowTracker(pos_a, pos_b)
    keys = [
        RoundKey(score=i, round=1, team=Team.A if i % 2 == 1 else Team.B)
        for i in range(1, count + 1)
    ]
    receiver_flags: list[bool] = []
    for key in keys:
        flag_a, flag_b = tracker.step(key)
        receiver_flags.append(flag_a if key.team is Team.A else flag_b)

    back_row_slots = [i for i, f in enumerate(receiver_flags) if f]
    front_row_slots = [i for i, f in enumerate(receiver_flags) if not f]
    if per_label[TacticLabel.D_BALL] > len(back_row_slots):
        raise ValueError("not enough back-row rallies to schedule d_ball rounds")
    if per_label[TacticLabel.OPPO] > len(front_row_slots):
        raise ValueError("not enough front-row rallies to schedule oppo rounds")

    assignment: dict[int, TacticLabel] = {}
    chosen_back = rng.choice(
        len(back_row_slots), size=per_label[TacticLabel.D_BALL], replace=False
    )
    for idx in chosen_back:
        assignment[back_row_slots[int(idx)]] = TacticLabel.D_BALL
    chosen_front = rng.choice(
        len(front_row_slots), size=per_label[TacticLabel.OPPO], replace=False
    )
    for idx in chosen_front:
        assignment[front_row_slots[int(idx)]] = TacticLabel.OPPO

    remaining = [
        label
        for label in labels
        if label not in (TacticLabel.D_BALL, TacticLabel.OPPO)
        for _ in range(per_label[label])
    ]
    rng.shuffle(remaining)
    free_slots = [i for i in range(count) if i not in assignment]
    for slot, label in zip(free_slots, remaining):
        assignment[slot] = label

    round_seeds = np.random.SeedSequence([seed, 0xD1CE]).generate_state(count)
    rounds: list[LabeledRound] = []
    for i, key in enumerate(keys):
        label = assignment[i]
        rounds.append(
            generate_round(
                templates[label],
                replace(noise, seed=int(round_seeds[i])),
                config.calibration,
                key,
                sim=config.simulator,
                truth_back_row=receiver_flags[i],
            )
        )
    return rounds


def write_dataset(
    rounds: Sequence[LabeledRound],
    config: EngineConfig,
    out_dir: str | Path,
    noise: NoiseConfig | None = None,
    seed: int | None = None,
) -> Path:
    """Write round files plus a manifest into a directory; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fh = config.calibration.frame_height
    entries = []
    for round_ in rounds:
        filename = f"{round_.round_key}.ndjson"
        write_detections(round_.records, out / filename, fh)
        entries.append(
            {
                "file": filename,
                "key": str(round_.round_key),
                "truth": round_.truth.value,
                "truth_back_row": round_.truth_back_row,
            }
        )
    manifest = {
        "calibration": config.to_dict()["calibration"],
        "initial_positions": [list(p) for p in config.initial_positions],
        "rounds": entries,
    }
    if noise is not None:
        manifest["noise"] = {
            "jitter_sigma": noise.jitter_sigma,
            "dropout_rate": noise.dropout_rate,
            "clutter_rate": noise.clutter_rate,
            "tail_fp_count": noise.tail_fp_count,
        }
    if seed is not None:
        manifest["seed"] = seed
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest_path


def load_dataset(dataset_dir: str | Path) -> tuple[list[LabeledRound], dict]:
    """Read a dataset directory written by write_dataset."""
    root = Path(dataset_dir)
    manifest = json.loads((root / MANIFEST_NAME).read_text(encoding="utf-8"))
    frame_height = float(manifest["calibration"]["frame_height"])
    rounds = []
    for entry in manifest["rounds"]:
        records = ingest_detections(root / entry["file"], frame_height)
        rounds.append(
            LabeledRound(
                records=tuple(records),
                truth=TacticLabel(entry["truth"]),
                round_key=parse_round_key(entry["key"]),
                truth_back_row=bool(entry["truth_back_row"]),
            )
        )
    return rounds, manifest


def render_round_frames(
    round_: LabeledRound,
    cal: NetCalibration,
    sim: SimulatorConfig | None = None,
    noise_sigma: float = 3.0,
    seed: int = 0,
) -> list[Frame]:
    """Rasterize a round as synthetic grayscale frames (bright balls, static scene).

    Meant for exercising the classical detection chain; the static background
    is a smooth gradient plus seeded sensor noise below the subtractor
    threshold.
    """
    sim = sim or SimulatorConfig()
    width, height = int(sim.frame_width), int(cal.frame_height)
    yy, xx = np.indices((height, width), dtype=np.float64)
    background = 90.0 + 25.0 * xx / width + 15.0 * yy / height
    rng = np.random.default_rng(seed)
    frames = []
    for record in round_.records:
        pixels = background + rng.normal(0.0, noise_sigma, size=background.shape)
        for cand in record.candidates:
            cx = cand.centroid.x
            cy = height - cand.centroid.y  # back to image rows
            radius = max(3.0, math.sqrt(cand.area / math.pi))
            x0, x1 = int(max(0, cx - radius - 1)), int(min(width, cx + radius + 2))
            y0, y1 = int(max(0, cy - radius - 1)), int(min(height, cy + radius + 2))
            if x0 >= x1 or y0 >= y1:
                continue
            patch_y, patch_x = np.ogrid[y0:y1, x0:x1]
            disk = (patch_x - cx) ** 2 + (patch_y - cy) ** 2 <= radius * radius
            pixels[y0:y1, x0:x1][disk] = 235.0
        pixels = np.clip(pixels, 0.0, 255.0)
        frames.append(
            Frame(
                width=width,
                height=height,
                pixels=pixels,
                index=record.frame_index,
                timestamp=record.frame_index / sim.fps,
            )
        )
    return frames
