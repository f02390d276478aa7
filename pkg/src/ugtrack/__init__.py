"""Uncertainty-guided 3D multi-object tracking."""

from .association import Assignment, CostMatrix, build_cost_matrix, greedy_match
from .costs import (
    CostConfig,
    CostKind,
    HeadingMode,
    guided_cost,
    heading_penalty,
    mahalanobis_cost,
    mean_covariance,
    modified_divergence,
    project_track,
    wrap_heading_residual,
)
from .gaussian import GaussianNd, js_divergence, js_divergence_mc, kl_divergence
from .kalman import (
    ClassNoise,
    Detection,
    NoiseConfig,
    TrackState,
    calibrate,
    init_track,
    predict,
    update,
)
from .lifecycle import LifecycleConfig, TrackRecord, TrackStatus, step_lifecycle
from .pipeline import (
    FrameData,
    OutputRecord,
    TrackerConfig,
    TrackerState,
    process_frame,
    run_sequence,
    transform_to_world,
)

__version__ = "0.1.0"
