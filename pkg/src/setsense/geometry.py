"""Court-frame geometry: net calibration, coordinate convention, section boundaries.

Everything downstream of raw detection works in court-view coordinates:
x grows rightward, y grows *upward*, with y = 0 at the bottom edge of the
frame. Image coordinates (y down) are converted exactly once, at ingestion,
so that "higher on screen" always means "larger y" and every height
comparison reads naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class CalibrationError(ValueError):
    """Net calibration values are inconsistent or out of range."""


@dataclass(frozen=True)
class Point2:
    """A 2D pixel position. Court-view convention unless a module says otherwise."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")
        if self.x < 0:
            raise ValueError(f"point x must be >= 0, got {self.x}")


def distance(a: Point2, b: Point2) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class NetCalibration:
    """Net extremes in court-view pixels, plus the source frame height.

    lnx/rnx are the x-coordinates of the left and right ends of the net.
    uny/lny are the y-coordinates of the net's upper and lower edges; under
    the court-view convention the upper edge has the larger y. The vertical
    span uny - lny is the scale unit for all height heuristics (conventionally
    called the net width, even though it is measured vertically).
    """

    lnx: float
    rnx: float
    uny: float
    lny: float
    frame_height: float

    def __post_init__(self) -> None:
        values = (self.lnx, self.rnx, self.uny, self.lny, self.frame_height)
        if not all(math.isfinite(v) for v in values):
            raise CalibrationError(f"non-finite calibration values: {values}")
        if self.frame_height <= 0:
            raise CalibrationError(f"frame_height must be positive, got {self.frame_height}")
        if self.lnx >= self.rnx:
            raise CalibrationError(
                f"left net x must be less than right net x, got lnx={self.lnx}, rnx={self.rnx}"
            )
        if self.uny <= self.lny:
            raise CalibrationError(
                f"net top must be above net bottom in court view, got uny={self.uny}, lny={self.lny}"
            )
        if self.lnx < 0:
            raise CalibrationError(f"lnx must be >= 0, got {self.lnx}")
        for name in ("uny", "lny"):
            v = getattr(self, name)
            if not 0 <= v <= self.frame_height:
                raise CalibrationError(f"{name}={v} outside [0, {self.frame_height}]")

    @property
    def net_width(self) -> float:
        """Vertical net span uny - lny; strictly positive."""
        return self.uny - self.lny

    @property
    def court_width(self) -> float:
        """Horizontal net span rnx - lnx; strictly positive."""
        return self.rnx - self.lnx

    @property
    def mirror_axis(self) -> float:
        """x -> mirror_axis - x reflects a coordinate about the net midline."""
        return self.lnx + self.rnx

    @classmethod
    def from_image_coords(
        cls, lnx: float, rnx: float, uny: float, lny: float, frame_height: float
    ) -> NetCalibration:
        """Build a calibration from operator-entered image coordinates (y down).

        In image coordinates the net top has the *smaller* y; the constructor
        flips both y values into court view.
        """
        return cls(
            lnx=float(lnx),
            rnx=float(rnx),
            uny=float(frame_height) - float(uny),
            lny=float(frame_height) - float(lny),
            frame_height=float(frame_height),
        )


@dataclass(frozen=True)
class CourtSections:
    """The four interior x-boundaries splitting the net span into five equal parts."""

    p1: float
    p2: float
    p3: float
    p4: float

    def __post_init__(self) -> None:
        if not self.p1 < self.p2 < self.p3 < self.p4:
            raise CalibrationError(
                f"section boundaries must increase: {self.p1}, {self.p2}, {self.p3}, {self.p4}"
            )


@dataclass(frozen=True)
class TacticCoefficients:
    """Height-gate multipliers on the net width, one per gated tactic family.

    q gates the quick-tempo sets, m the mid-gap set, s the inside set, and c
    caps the low back-row set. All are independent, strictly positive knobs;
    they live in session config and are tuned per deployment.
    """

    q: float
    m: float
    s: float
    c: float

    def __post_init__(self) -> None:
        for name in ("q", "m", "s", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"coefficient {name} must be a positive real, got {v}")


def calculate_areas(calibration: NetCalibration) -> CourtSections:
    """Compute the five-section partition boundaries from the net x-extremes.

    pk = lnx + k * (rnx - lnx) / 5 for k in 1..4.
    """
    lnx, rnx = calibration.lnx, calibration.rnx
    if lnx >= rnx:  # unreachable for a validated calibration, kept as a guard
        raise CalibrationError(f"invalid net span: lnx={lnx}, rnx={rnx}")
    step = (rnx - lnx) / 5.0
    return CourtSections(
        p1=lnx + step,
        p2=lnx + 2.0 * step,
        p3=lnx + 3.0 * step,
        p4=lnx + 4.0 * step,
    )


def to_court_view(p: Point2, frame_height: float) -> Point2:
    """Flip an image-coordinate point (y down) into court view (y up).

    Involutive: applying it twice returns the input. x is unchanged.
    """
    return Point2(p.x, frame_height - p.y)
