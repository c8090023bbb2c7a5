"""Session configuration: calibration, coefficients and pipeline knobs.

Config files are TOML with tables [calibration], [coefficients], [tracker],
[detector], [rotation], [session] and [simulator]; the same shape (as nested
dicts) is accepted over the HTTP API. Calibration in files and payloads is
entered in image-pixel coordinates and converted to court view on load.

All default values are defined here, not in the algorithm modules.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import NetCalibration, TacticCoefficients
from .track import FilterMode

# Height-gate multipliers tuned so each simulator template lands in its own band.
DEFAULT_COEFFICIENTS = TacticCoefficients(q=1.2, m=1.5, s=1.0, c=0.9)

# Operator calibration used by the synthetic benchmark and as a test default
# (image coordinates at 1280x720: net spans x 240..1040, top edge at y=180,
# bottom edge at y=480).
DEFAULT_CALIBRATION_IMAGE: dict[str, float] = {
    "lnx": 240,
    "rnx": 1040,
    "uny": 180,
    "lny": 480,
    "frame_height": 720,
}

DEFAULT_INITIAL_POSITIONS: tuple[tuple[int, int], ...] = ((4, 2),)


class ConfigError(ValueError):
    """Session configuration failed validation."""


def default_calibration() -> NetCalibration:
    return NetCalibration.from_image_coords(**DEFAULT_CALIBRATION_IMAGE)


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker thresholds; radius and coast defaults tuned for 1280-wide footage."""

    still_threshold: float = 5.0
    association_radius: float = 60.0
    max_coast_frames: int = 3
    spawn_score_floor: float = 0.3


@dataclass(frozen=True)
class DetectorConfig:
    """Classical-detector knobs. None means auto-scale with the frame size."""

    blur_sigma: float | None = None
    learning_rate: float = 0.05
    bg_threshold: float = 25.0
    open_radius: int = 1
    close_radius: int = 1
    min_area: float | None = None
    max_area: float | None = None
    max_candidates: int = 12


@dataclass(frozen=True)
class SimulatorConfig:
    """Synthetic-rally constants.

    Gravity defaults to the value that drops a ball two net-widths in 0.9 s
    (g = 4 * nw / 0.81 px/s^2), converted to per-frame units at ``fps``.
    """

    fps: float = 24.0
    frame_width: float = 1280.0
    contact_gap_frames: int = 4
    # Kept below the 9-point setting threshold so a round's only substantial
    # trajectory is the set itself.
    pass_duration: tuple[int, int] = (6, 8)
    contact_height: tuple[float, float] = (0.42, 0.50)  # net-width multiples
    gravity_px_s2: float | None = None

    def gravity_per_frame(self, net_width: float) -> float:
        g = self.gravity_px_s2 if self.gravity_px_s2 is not None else 4.0 * net_width / 0.81
        return g / (self.fps * self.fps)


@dataclass(frozen=True)
class EngineConfig:
    """Everything one match session needs to process rounds."""

    calibration: NetCalibration
    coefficients: TacticCoefficients = DEFAULT_COEFFICIENTS
    tracker: TrackerConfig = TrackerConfig()
    detector: DetectorConfig = DetectorConfig()
    simulator: SimulatorConfig = SimulatorConfig()
    initial_positions: tuple[tuple[int, int], ...] = DEFAULT_INITIAL_POSITIONS
    filter_mode: FilterMode = FilterMode.PLUS

    def __post_init__(self) -> None:
        if not self.initial_positions:
            raise ConfigError("at least one set of initial rotation positions is required")
        for pair in self.initial_positions:
            if len(pair) != 2 or not all(1 <= p <= 6 for p in pair):
                raise ConfigError(f"initial positions must be pairs in 1..6, got {pair}")

    @classmethod
    def default(cls) -> "EngineConfig":
        return cls(calibration=default_calibration())

    def with_mode(self, mode: FilterMode) -> "EngineConfig":
        return EngineConfig(
            calibration=self.calibration,
            coefficients=self.coefficients,
            tracker=self.tracker,
            detector=self.detector,
            simulator=self.simulator,
            initial_positions=self.initial_positions,
            filter_mode=mode,
        )

    def to_dict(self) -> dict[str, Any]:
        """JSON-able snapshot; calibration serialized back to image coordinates."""
        cal = self.calibration
        return {
            "calibration": {
                "lnx": cal.lnx,
                "rnx": cal.rnx,
                "uny": cal.frame_height - cal.uny,
                "lny": cal.frame_height - cal.lny,
                "frame_height": cal.frame_height,
            },
            "coefficients": asdict(self.coefficients),
            "tracker": asdict(self.tracker),
            "detector": asdict(self.detector),
            "simulator": {
                **asdict(self.simulator),
                "pass_duration": list(self.simulator.pass_duration),
                "contact_height": list(self.simulator.contact_height),
            },
            "rotation": {"initial_positions": [list(p) for p in self.initial_positions]},
            "session": {"filter_mode": self.filter_mode.value},
        }


def _section(data: Mapping[str, Any], name: str) -> dict[str, Any]:
    value = data.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"config section {name!r} must be a table/object")
    return dict(value)


def engine_config_from_dict(data: Mapping[str, Any]) -> EngineConfig:
    """Build an EngineConfig from parsed TOML / JSON data.

    ``initial_positions`` and ``filter_mode`` are accepted both at the top
    level (API payload shape) and under [rotation] / [session] (file shape).
    """
    cal_data = _section(data, "calibration")
    if not cal_data:
        raise ConfigError("config is missing the [calibration] section")
    try:
        calibration = NetCalibration.from_image_coords(
            lnx=cal_data["lnx"],
            rnx=cal_data["rnx"],
            uny=cal_data["uny"],
            lny=cal_data["lny"],
            frame_height=cal_data["frame_height"],
        )
    except KeyError as exc:
        raise ConfigError(f"calibration is missing key {exc.args[0]!r}") from exc

    coef_data = _section(data, "coefficients")
    coefficients = (
        TacticCoefficients(**coef_data) if coef_data else DEFAULT_COEFFICIENTS
    )

    tracker = TrackerConfig(**_section(data, "tracker"))
    detector = DetectorConfig(**_section(data, "detector"))

    sim_data = _section(data, "simulator")
    for key in ("pass_duration", "contact_height"):
        if key in sim_data:
            sim_data[key] = tuple(sim_data[key])
    simulator = SimulatorConfig(**sim_data)

    rotation_data = _section(data, "rotation")
    raw_positions = data.get("initial_positions", rotation_data.get("initial_positions"))
    if raw_positions is None:
        positions = DEFAULT_INITIAL_POSITIONS
    else:
        positions = tuple(tuple(int(v) for v in pair) for pair in raw_positions)

    session_data = _section(data, "session")
    raw_mode = data.get("filter_mode", session_data.get("filter_mode", FilterMode.PLUS.value))
    try:
        filter_mode = FilterMode(raw_mode)
    except ValueError as exc:
        raise ConfigError(f"unknown filter_mode {raw_mode!r} (use 'baseline' or 'plus')") from exc

    try:
        return EngineConfig(
            calibration=calibration,
            coefficients=coefficients,
            tracker=tracker,
            detector=detector,
            simulator=simulator,
            initial_positions=positions,
            filter_mode=filter_mode,
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> EngineConfig:
    """Load an EngineConfig from a TOML file."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return engine_config_from_dict(data)
