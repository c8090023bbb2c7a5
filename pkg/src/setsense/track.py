"""Ball blob tracking: identity, movement status, trajectory filters, set extraction.

A Blob is one moving-object hypothesis: an id, an append-only position
history ("pts") and a movement status. The baseline status rule looks only at
the last three positions; the majority-trend filter judges the whole path by
the sign of most consecutive x-differences, which keeps trajectories valid
when a few trailing false detections flip the local direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .detect import DetectionRecord
from .geometry import Point2, distance

# Trajectories shorter than this are treated as noise, never as a set.
MIN_SETTING_POINTS = 9

SENTINEL_BLOB_ID = -1


class BlobStatus(Enum):
    STILL = "still"
    DIRECTED_MOVING = "directed_moving"


class FilterMode(str, Enum):
    """Which trajectory-validity rule the harvest applies."""

    BASELINE = "baseline"
    PLUS = "plus"


class TrackOrderError(ValueError):
    """Detection records were fed to the tracker out of frame order."""


@dataclass
class Blob:
    """One tracked object: identity, ordered court-view positions and status."""

    id: int
    pts: list[Point2]
    status: BlobStatus
    last_update_frame: int
    created_frame: int
    missed: int = 0


@dataclass(frozen=True)
class Trajectory:
    """An ordered ball path harvested from one blob.

    The sentinel trajectory (``valid=False``, single point at the origin)
    stands in when a round contains no usable setting path, so downstream
    code can never silently classify a non-set.
    """

    points: tuple[Point2, ...]
    source_blob_id: int
    valid: bool = True

    def __len__(self) -> int:
        return len(self.points)


def sentinel_trajectory() -> Trajectory:
    return Trajectory(points=(Point2(0.0, 0.0),), source_blob_id=SENTINEL_BLOB_ID, valid=False)


@dataclass
class TrackerState:
    """Mutable per-round tracker state. Single-owner; advance it one record at a time."""

    still_threshold: float = 5.0
    association_radius: float = 60.0
    max_coast_frames: int = 3
    filter_mode: FilterMode = FilterMode.PLUS
    spawn_score_floor: float = 0.3
    blobs: list[Blob] = field(default_factory=list)
    finalized: list[Blob] = field(default_factory=list)
    next_id: int = 0
    last_frame: int | None = None

    def __post_init__(self) -> None:
        if self.still_threshold <= 0:
            raise ValueError(f"still_threshold must be positive, got {self.still_threshold}")
        if self.association_radius <= 0:
            raise ValueError(f"association_radius must be positive, got {self.association_radius}")
        if self.max_coast_frames < 0:
            raise ValueError(f"max_coast_frames must be >= 0, got {self.max_coast_frames}")


def predict_next(blob: Blob) -> Point2:
    """Constant-velocity one-step extrapolation from the most recent positions.

    Fits a least-squares line in t -> (x, y) over the last min(3, len) points
    and evaluates it one step ahead; with exactly two points this reduces to
    plain linear extrapolation. Requires at least two points.
    """
    pts = blob.pts
    if len(pts) < 2:
        raise ValueError(f"blob {blob.id} has {len(pts)} point(s); prediction needs >= 2")
    window = pts[-3:]
    if len(window) == 2:
        p0, p1 = window
        nx, ny = 2 * p1.x - p0.x, 2 * p1.y - p0.y
    else:
        p0, p1, p2 = window
        # Least squares over t = 0, 1, 2: slope = (p2 - p0) / 2, mean at t = 1,
        # evaluated at t = 3 gives mean + 2 * slope.
        nx = (p0.x + p1.x + p2.x) / 3.0 + (p2.x - p0.x)
        ny = (p0.y + p1.y + p2.y) / 3.0 + (p2.y - p0.y)
    return Point2(max(nx, 0.0), ny)


def _predicted_position(blob: Blob) -> Point2:
    return predict_next(blob) if len(blob.pts) >= 2 else blob.pts[-1]


def update_status_baseline(blob: Blob, still_threshold: float) -> BlobStatus:
    """Movement status from the last three positions.

    Still while fewer than three points exist. Otherwise: still if the newest
    step is shorter than the threshold; directed-moving only when the last two
    steps agree in direction on both axes.
    """
    pts = blob.pts
    if len(pts) < 3:
        return BlobStatus.STILL
    p, p1, p2 = pts[-1], pts[-2], pts[-3]
    if distance(p, p1) < still_threshold:
        return BlobStatus.STILL
    dx1, dx2 = p.x - p1.x, p1.x - p2.x
    dy1, dy2 = p.y - p1.y, p1.y - p2.y
    if dx1 * dx2 > 0 and dy1 * dy2 > 0:
        return BlobStatus.DIRECTED_MOVING
    return BlobStatus.STILL


def evaluate_x_decrease(pts: Sequence[Point2]) -> bool:
    """True iff strictly more than half of consecutive x-differences are negative."""
    if len(pts) < 2:
        return False
    neg = sum(1 for a, b in zip(pts, pts[1:]) if b.x - a.x < 0)
    return neg * 2 > len(pts) - 1


def evaluate_x_increase(pts: Sequence[Point2]) -> bool:
    """True iff strictly more than half of consecutive x-differences are positive."""
    if len(pts) < 2:
        return False
    pos = sum(1 for a, b in zip(pts, pts[1:]) if b.x - a.x > 0)
    return pos * 2 > len(pts) - 1


def plus_filter_valid(pts: Sequence[Point2]) -> bool:
    """Majority-trend validity: most x-steps decrease, or most increase."""
    return evaluate_x_decrease(pts) or evaluate_x_increase(pts)


def associate(state: TrackerState, record: DetectionRecord) -> TrackerState:
    """Advance the tracker by one detection record.

    Greedy nearest-neighbor matching between blob predictions and candidate
    centroids, closest pairs first, each side used at most once; matches
    beyond the association radius are rejected. Matched blobs append the
    candidate centroid and re-evaluate status; unmatched candidates above the
    spawn score floor start new blobs; blobs unmatched for more than
    max_coast_frames are finalized and kept for harvesting.
    """
    if state.last_frame is not None and record.frame_index <= state.last_frame:
        raise TrackOrderError(
            f"record for frame {record.frame_index} arrived after frame {state.last_frame}"
        )
    state.last_frame = record.frame_index

    candidates = list(record.candidates)
    pairs: list[tuple[float, int, int]] = []
    for bi, blob in enumerate(state.blobs):
        pred = _predicted_position(blob)
        for ci, cand in enumerate(candidates):
            d = distance(pred, cand.centroid)
            if d <= state.association_radius:
                pairs.append((d, bi, ci))
    pairs.sort()

    matched_blobs: set[int] = set()
    matched_cands: set[int] = set()
    for d, bi, ci in pairs:
        if bi in matched_blobs or ci in matched_cands:
            continue
        matched_blobs.add(bi)
        matched_cands.add(ci)
        blob = state.blobs[bi]
        blob.pts.append(candidates[ci].centroid)
        blob.last_update_frame = record.frame_index
        blob.missed = 0
        blob.status = update_status_baseline(blob, state.still_threshold)

    survivors: list[Blob] = []
    for bi, blob in enumerate(state.blobs):
        if bi in matched_blobs:
            survivors.append(blob)
            continue
        blob.missed += 1
        if blob.missed > state.max_coast_frames:
            state.finalized.append(blob)
        else:
            survivors.append(blob)
    state.blobs = survivors

    for ci, cand in enumerate(candidates):
        if ci in matched_cands or cand.score < state.spawn_score_floor:
            continue
        state.blobs.append(
            Blob(
                id=state.next_id,
                pts=[cand.centroid],
                status=BlobStatus.STILL,
                last_update_frame=record.frame_index,
                created_frame=record.frame_index,
            )
        )
        state.next_id += 1

    return state


def harvest_trajectories(state: TrackerState) -> list[Trajectory]:
    """Collect valid trajectories once a round clip is fully consumed.

    Baseline mode keeps blobs whose final status is directed-moving; plus mode
    keeps blobs whose whole path passes the majority-trend filter. Ordered by
    blob creation time.
    """
    blobs = sorted(state.finalized + state.blobs, key=lambda b: b.id)
    out: list[Trajectory] = []
    for blob in blobs:
        if state.filter_mode is FilterMode.BASELINE:
            keep = blob.status is BlobStatus.DIRECTED_MOVING
        else:
            keep = plus_filter_valid(blob.pts)
        if keep:
            out.append(Trajectory(points=tuple(blob.pts), source_blob_id=blob.id))
    return out


def extract_setting_trajectory(trajectories: Sequence[Trajectory]) -> Trajectory:
    """Pick the setting trajectory: the last one with at least 9 points.

    Scans in reverse chronological order because the set is the final
    substantial path in a round; shorter trailing paths are noise. Returns
    the sentinel when nothing qualifies.
    """
    for traj in reversed(trajectories):
        if len(traj) >= MIN_SETTING_POINTS:
            return traj
    return sentinel_trajectory()


def track_round(
    records: Iterable[DetectionRecord],
    *,
    still_threshold: float = 5.0,
    association_radius: float = 60.0,
    max_coast_frames: int = 3,
    filter_mode: FilterMode = FilterMode.PLUS,
    spawn_score_floor: float = 0.3,
) -> list[Trajectory]:
    """Run the tracker over a full round of records and harvest trajectories."""
    state = TrackerState(
        still_threshold=still_threshold,
        association_radius=association_radius,
        max_coast_frames=max_coast_frames,
        filter_mode=filter_mode,
        spawn_score_floor=spawn_score_floor,
    )
    for record in records:
        associate(state, record)
    return harvest_trajectories(state)
