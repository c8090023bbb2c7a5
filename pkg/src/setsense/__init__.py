"""setsense: single-camera volleyball set-tactic detection and live match stats."""

from .classify import (
    NoSettingTrajectoryError,
    SetContext,
    TacticLabel,
    TrajectoryFeatures,
    classify,
    compute_features,
    contact_heights,
    mirror_features,
)
from .config import (
    DEFAULT_COEFFICIENTS,
    ConfigError,
    DetectorConfig,
    EngineConfig,
    SimulatorConfig,
    TrackerConfig,
    default_calibration,
    load_config,
)
from .detect import (
    BackgroundModel,
    CandidateRegion,
    DetectionRecord,
    DetectionStreamError,
    Detector,
    Frame,
    GeometricScorer,
    background_subtract,
    find_contours,
    frame_from_array,
    gaussian_blur,
    ingest_detections,
    morph_clean,
    score_candidate,
    write_detections,
)
from .geometry import (
    CalibrationError,
    CourtSections,
    NetCalibration,
    Point2,
    TacticCoefficients,
    calculate_areas,
    to_court_view,
)
from .rotation import (
    BackRowFlags,
    OppositeRowTracker,
    RotationState,
    RoundKey,
    RoundKeyError,
    Team,
    is_back_row,
    parse_round_key,
    rotate_back,
    rotation_check,
)
from .session import (
    MatchSession,
    RoundOrderError,
    RoundResult,
    SessionManager,
    TacticDistribution,
    UnknownSessionError,
    distribution_from_results,
    process_batch,
)
from .simulate import (
    AccuracyReport,
    LabeledRound,
    NoiseConfig,
    SimulationError,
    TacticTemplate,
    default_templates,
    evaluate,
    generate_dataset,
    generate_round,
    load_dataset,
    run_pipeline,
    write_dataset,
)
from .track import (
    Blob,
    BlobStatus,
    FilterMode,
    Trajectory,
    TrackerState,
    associate,
    evaluate_x_decrease,
    evaluate_x_increase,
    extract_setting_trajectory,
    harvest_trajectories,
    plus_filter_valid,
    predict_next,
    sentinel_trajectory,
    track_round,
    update_status_baseline,
)

__version__ = "0.1.0"
