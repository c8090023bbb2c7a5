"""Classical ball-candidate detection and the detection-stream file format.

The frame chain is blur -> background subtraction -> morphological cleanup ->
contour extraction -> candidate scoring. The learned candidate classifier is
deliberately out of scope; scoring is a pluggable callable so an external
model can replace the geometric default without touching the tracker.

Detection-stream files are newline-delimited JSON, one record per frame, with
candidate coordinates in *image* pixels (y down). In-memory DetectionRecords
are always court-view (y up); conversion happens on read/write.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Any, Callable, Iterable, Sequence

import cv2
import numpy as np
from scipy import ndimage

from .geometry import Point2

# Reference frame size the default parameters were tuned at.
_REF_WIDTH = 1280.0
_REF_HEIGHT = 720.0

DEFAULT_BLUR_SIGMA = 2.0           # px at 1280-wide frames, scales with width
DEFAULT_LEARNING_RATE = 0.05
DEFAULT_BG_THRESHOLD = 25.0        # intensity units
DEFAULT_OPEN_RADIUS = 1
DEFAULT_CLOSE_RADIUS = 1
DEFAULT_MIN_AREA = 40.0            # px^2 at 1280x720, scales with frame area
DEFAULT_MAX_AREA = 1200.0
DEFAULT_MAX_CANDIDATES = 12


class DetectionStreamError(ValueError):
    """A detection-stream file is malformed."""


@dataclass(frozen=True)
class Frame:
    """One decoded grayscale frame; pixels are float intensities in [0, 255]."""

    width: int
    height: int
    pixels: np.ndarray
    index: int = 0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel grid shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}"
            )


def frame_from_array(arr: np.ndarray, index: int = 0, timestamp: float = 0.0) -> Frame:
    """Wrap a 2D uint8/float array as a Frame, converting to float64."""
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D grayscale array, got shape {arr.shape}")
    pixels = np.asarray(arr, dtype=np.float64)
    h, w = pixels.shape
    return Frame(width=w, height=h, pixels=pixels, index=index, timestamp=timestamp)


@dataclass(frozen=True)
class BackgroundModel:
    """Running-average background with a per-pixel absolute-difference threshold."""

    mean: np.ndarray
    learning_rate: float = DEFAULT_LEARNING_RATE
    threshold: float = DEFAULT_BG_THRESHOLD

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")


@dataclass(frozen=True)
class CandidateRegion:
    """A connected foreground region proposed as a ball candidate."""

    centroid: Point2
    bbox: tuple[float, float, float, float]  # (min x, min y, width, height)
    area: float
    circularity: float
    score: float = 0.0

    def __post_init__(self) -> None:
        if self.area <= 0:
            raise ValueError(f"area must be positive, got {self.area}")
        x, y, w, h = self.bbox
        if not (x <= self.centroid.x <= x + w and y <= self.centroid.y <= y + h):
            raise ValueError(f"bbox {self.bbox} does not contain centroid {self.centroid}")


@dataclass(frozen=True)
class DetectionRecord:
    """All ball candidates for one frame, in court-view coordinates."""

    frame_index: int
    candidates: tuple[CandidateRegion, ...]


CandidateScorer = Callable[[CandidateRegion, Frame], float]


def gaussian_blur(f: Frame, sigma: float) -> Frame:
    """Convolve with a sampled 2D Gaussian, truncated at radius ceil(3*sigma).

    The truncated kernel is renormalized to sum 1 and applied separably with
    symmetric boundary reflection, which conserves total intensity exactly.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    blurred = ndimage.convolve1d(f.pixels, kernel, axis=0, mode="reflect")
    blurred = ndimage.convolve1d(blurred, kernel, axis=1, mode="reflect")
    return replace(f, pixels=blurred)


def background_subtract(f: Frame, model: BackgroundModel) -> tuple[np.ndarray, BackgroundModel]:
    """Threshold against the running mean; return (foreground mask, updated model)."""
    if model.mean.shape != f.pixels.shape:
        raise ValueError(
            f"model shape {model.mean.shape} does not match frame {f.pixels.shape}"
        )
    mask = np.abs(f.pixels - model.mean) > model.threshold
    lam = model.learning_rate
    updated = replace(model, mean=(1.0 - lam) * model.mean + lam * f.pixels)
    return mask, updated


def _square(radius: int) -> np.ndarray:
    side = 2 * radius + 1
    return np.ones((side, side), dtype=bool)


def morph_clean(mask: np.ndarray, open_radius: int, close_radius: int) -> np.ndarray:
    """Opening then closing with square structuring elements.

    Opening (erode, then dilate) removes specks smaller than the element and
    never adds foreground; closing (dilate, then erode with the outside
    treated as foreground) bridges small gaps and never removes foreground.
    """
    if open_radius < 0 or close_radius < 0:
        raise ValueError("structuring-element radii must be >= 0")
    out = np.asarray(mask, dtype=bool)
    if open_radius > 0:
        se = _square(open_radius)
        out = ndimage.binary_erosion(out, structure=se, border_value=0)
        out = ndimage.binary_dilation(out, structure=se, border_value=0)
    if close_radius > 0:
        se = _square(close_radius)
        out = ndimage.binary_dilation(out, structure=se, border_value=0)
        out = ndimage.binary_erosion(out, structure=se, border_value=1)
    return out


def find_contours(mask: np.ndarray) -> list[CandidateRegion]:
    """One candidate per 8-connected foreground component.

    Area is the exact pixel count, the centroid the pixel mean, and
    circularity 4*pi*area/perimeter^2 clamped to [0, 1] with the perimeter
    measured along the traced outer contour. Scores are left at 0 for the
    scorer to fill.
    """
    mask_u8 = np.asarray(mask, dtype=bool).astype(np.uint8)
    n_labels, labels, stats, centroids = cv2.connectedComponentsWithStats(mask_u8, connectivity=8)
    regions: list[CandidateRegion] = []
    for label in range(1, n_labels):
        x, y, w, h, area = (int(stats[label, k]) for k in range(5))
        component = (labels[y : y + h, x : x + w] == label).astype(np.uint8)
        contours, _ = cv2.findContours(component, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
        perimeter = max((cv2.arcLength(c, True) for c in contours), default=0.0)
        if perimeter > 0:
            circularity = min(1.0, 4.0 * math.pi * area / (perimeter * perimeter))
        else:
            circularity = 1.0  # single pixel: clamp of an infinite ratio
        cx, cy = float(centroids[label][0]), float(centroids[label][1])
        regions.append(
            CandidateRegion(
                centroid=Point2(cx, cy),
                bbox=(float(x), float(y), float(w), float(h)),
                area=float(area),
                circularity=circularity,
            )
        )
    return regions


def score_candidate(
    region: CandidateRegion,
    f: Frame | None = None,
    *,
    min_area: float = DEFAULT_MIN_AREA,
    max_area: float = DEFAULT_MAX_AREA,
) -> float:
    """Geometric default score: circularity times an area-band factor.

    The band factor is 1 inside [min_area, max_area] and decays linearly to 0
    at half the lower edge and twice the upper edge. The frame argument is
    unused here but part of the scorer interface, so a learned model can
    inspect pixels.
    """
    area = region.area
    if area < min_area:
        band = (area - 0.5 * min_area) / (0.5 * min_area)
    elif area > max_area:
        band = (2.0 * max_area - area) / max_area
    else:
        band = 1.0
    band = min(1.0, max(0.0, band))
    return min(1.0, max(0.0, region.circularity)) * band


@dataclass(frozen=True)
class GeometricScorer:
    """Default scorer bound to an area band; drop-in CandidateScorer."""

    min_area: float = DEFAULT_MIN_AREA
    max_area: float = DEFAULT_MAX_AREA

    def __call__(self, region: CandidateRegion, f: Frame | None = None) -> float:
        return score_candidate(region, f, min_area=self.min_area, max_area=self.max_area)


class Detector:
    """Stateful per-round detection chain over a sequence of frames.

    Blur sigma and the scorer's area band default to values tuned at 1280x720
    and are rescaled to the incoming frame size on first use. The background
    model seeds from the first frame, so that frame yields no candidates.
    Deterministic: identical frames and config give identical records.
    """

    def __init__(
        self,
        *,
        blur_sigma: float | None = None,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        bg_threshold: float = DEFAULT_BG_THRESHOLD,
        open_radius: int = DEFAULT_OPEN_RADIUS,
        close_radius: int = DEFAULT_CLOSE_RADIUS,
        min_area: float | None = None,
        max_area: float | None = None,
        max_candidates: int = DEFAULT_MAX_CANDIDATES,
        scorer: CandidateScorer | None = None,
    ) -> None:
        self._blur_sigma = blur_sigma
        self._learning_rate = learning_rate
        self._bg_threshold = bg_threshold
        self._open_radius = open_radius
        self._close_radius = close_radius
        self._min_area = min_area
        self._max_area = max_area
        self._max_candidates = max_candidates
        self._scorer = scorer
        self._model: BackgroundModel | None = None
        self._sigma: float = DEFAULT_BLUR_SIGMA

    def reset(self) -> None:
        self._model = None

    def _configure(self, frame: Frame) -> None:
        self._sigma = self._blur_sigma or DEFAULT_BLUR_SIGMA * frame.width / _REF_WIDTH
        if self._scorer is None:
            area_scale = (frame.width * frame.height) / (_REF_WIDTH * _REF_HEIGHT)
            self._scorer = GeometricScorer(
                min_area=self._min_area or DEFAULT_MIN_AREA * area_scale,
                max_area=self._max_area or DEFAULT_MAX_AREA * area_scale,
            )

    def process(self, frame: Frame) -> DetectionRecord:
        """Detect ball candidates in one frame; returns a court-view record."""
        if self._model is None:
            self._configure(frame)
            blurred = gaussian_blur(frame, self._sigma)
            self._model = BackgroundModel(
                mean=blurred.pixels,
                learning_rate=self._learning_rate,
                threshold=self._bg_threshold,
            )
            return DetectionRecord(frame_index=frame.index, candidates=())
        blurred = gaussian_blur(frame, self._sigma)
        mask, self._model = background_subtract(blurred, self._model)
        mask = morph_clean(mask, self._open_radius, self._close_radius)
        regions = find_contours(mask)
        assert self._scorer is not None
        scored = [replace(r, score=self._scorer(r, frame)) for r in regions]
        scored.sort(key=lambda r: r.score, reverse=True)
        kept = scored[: self._max_candidates]
        return DetectionRecord(
            frame_index=frame.index,
            candidates=tuple(_region_to_court_view(r, frame.height) for r in kept),
        )


def make_candidate(
    x: float, y: float, area: float, circularity: float, score: float
) -> CandidateRegion:
    """Build a court-view candidate with a synthesized square bbox around the centroid.

    Used for candidates that arrive as bare (x, y, area, circularity, score)
    tuples, i.e. ingested streams and simulator output, so both construct
    structurally identical records.
    """
    side = math.sqrt(max(area, 1.0))
    return CandidateRegion(
        centroid=Point2(x, y),
        bbox=(x - side / 2, y - side / 2, side, side),
        area=area,
        circularity=circularity,
        score=score,
    )


def _region_to_court_view(region: CandidateRegion, frame_height: float) -> CandidateRegion:
    x, y, w, h = region.bbox
    return replace(
        region,
        centroid=Point2(region.centroid.x, frame_height - region.centroid.y),
        bbox=(x, frame_height - (y + h), w, h),
    )


def ingest_detections(
    source: str | Path | IO[str] | Iterable[str], frame_height: float
) -> list[DetectionRecord]:
    """Read a detection-stream file into court-view records.

    Records must appear in strictly increasing frame order. Any malformed
    line raises DetectionStreamError naming the 1-based line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return ingest_detections(fh, frame_height)

    records: list[DetectionRecord] = []
    last_frame: int | None = None
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DetectionStreamError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        record = record_from_obj(obj, frame_height, context=f"line {lineno}")
        if last_frame is not None and record.frame_index <= last_frame:
            raise DetectionStreamError(
                f"line {lineno}: frame {record.frame_index} not after frame {last_frame}"
            )
        last_frame = record.frame_index
        records.append(record)
    return records


def record_from_obj(obj: Any, frame_height: float, context: str = "record") -> DetectionRecord:
    """Convert one wire-format record object (image coordinates) to court view."""
    try:
        frame_index = int(obj["frame"])
        raw_candidates = obj["candidates"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DetectionStreamError(f"{context}: missing frame/candidates fields") from exc
    if not isinstance(raw_candidates, (list, tuple)):
        raise DetectionStreamError(f"{context}: candidates must be an array")
    candidates = []
    for ci, cand in enumerate(raw_candidates):
        try:
            x = float(cand["x"])
            y = float(cand["y"])
            area = float(cand["area"])
            circularity = float(cand["circularity"])
            score = float(cand["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectionStreamError(f"{context}: candidate {ci} is malformed") from exc
        if not 0 <= y <= frame_height:
            raise DetectionStreamError(
                f"{context}: candidate {ci} y={y} outside [0, {frame_height}]"
            )
        candidates.append(make_candidate(x, frame_height - y, area, circularity, score))
    return DetectionRecord(frame_index=frame_index, candidates=tuple(candidates))


def detection_stream_lines(
    records: Sequence[DetectionRecord], frame_height: float
) -> Iterable[str]:
    """Serialize court-view records to detection-stream lines (image coordinates)."""
    for record in records:
        obj = {
            "frame": record.frame_index,
            "candidates": [
                {
                    "x": c.centroid.x,
                    "y": frame_height - c.centroid.y,
                    "area": c.area,
                    "circularity": c.circularity,
                    "score": c.score,
                }
                for c in record.candidates
            ],
        }
        yield json.dumps(obj)


def write_detections(
    records: Sequence[DetectionRecord], path: str | Path, frame_height: float
) -> None:
    """Write court-view records to a detection-stream file."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in detection_stream_lines(records, frame_height):
            fh.write(line + "\n")
