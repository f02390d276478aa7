"""Association costs between detections and predicted tracks.

The proposed cost chain: project the 10-dim track into observation
space, take the Jensen-Shannon divergence against the detection, scale
it by a heading penalty, then by the track's mean covariance so that
heavily-predicted (high-uncertainty) tracks do not monopolize
detections.  A Mahalanobis baseline is kept for ablations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .gaussian import GaussianNd, js_divergence
from .kalman import H, Detection, NoiseConfig, TrackState, wrap_angle


class HeadingMode(str, enum.Enum):
    """How the heading residual is wrapped before the penalty.

    FLIP treats box orientation as pi-symmetric: residuals beyond pi/2
    are flipped back, so the penalty stays within [1, 2].  FULL keeps
    the plain (-pi, pi] wrap, giving a penalty range of [1, 3].
    """

    FLIP = "flip"
    FULL = "full"


class CostKind(str, enum.Enum):
    GUIDED = "guided"
    MODIFIED = "modified"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class CostConfig:
    heading_penalty_mode: HeadingMode = HeadingMode.FLIP
    gate_threshold: float = 1.0
    cost_kind: CostKind = CostKind.GUIDED

    def __post_init__(self):
        if not self.gate_threshold > 0:
            raise ConfigError(
                f"gate threshold must be positive, got {self.gate_threshold}"
            )


def project_track(t: TrackState) -> GaussianNd:
    """Observation-space Gaussian of a track: first seven states."""
    return GaussianNd(H @ t.mean, H @ t.cov @ H.T)


def wrap_heading_residual(
    theta_det: float, theta_track: float, mode: HeadingMode
) -> float:
    delta = float(wrap_angle(theta_det - theta_track))
    if mode is HeadingMode.FLIP and abs(delta) > math.pi / 2.0:
        delta -= math.copysign(math.pi, delta)
    return delta


def heading_penalty(
    theta_det: float, theta_track: float, mode: HeadingMode
) -> float:
    """Multiplicative penalty 2 - cos(residual); 1 means perfect agreement."""
    return 2.0 - math.cos(wrap_heading_residual(theta_det, theta_track, mode))


def mean_covariance(t: TrackState) -> float:
    """Average of the position and dimension variances; heading excluded."""
    diag = np.diag(t.cov)
    return float((diag[0] + diag[1] + diag[2] + diag[4] + diag[5] + diag[6]) / 6.0)


def modified_divergence(
    d: Detection, t: TrackState, mode: HeadingMode
) -> float:
    """Heading-penalized JS divergence between detection and track.

    The projected track heading is moved to the representative nearest
    the detection heading under the chosen wrap, so the divergence never
    sees a spurious 2*pi (or pi, in flip mode) offset; the heading
    disagreement itself is charged through the penalty factor.
    """
    proj = project_track(t)
    residual = wrap_heading_residual(d.heading, t.heading, mode)
    mean = proj.mean.copy()
    mean[3] = d.heading - residual
    track_gaussian = GaussianNd(mean, proj.cov)
    det_gaussian = GaussianNd(d.state, d.cov)
    alpha = 2.0 - math.cos(residual)
    return js_divergence(det_gaussian, track_gaussian) * alpha


def guided_cost(d: Detection, t: TrackState, cfg: CostConfig) -> float:
    """Modified divergence scaled by the track's mean covariance."""
    return modified_divergence(d, t, cfg.heading_penalty_mode) * mean_covariance(t)


def mahalanobis_cost(d: Detection, t: TrackState, noise: NoiseConfig) -> float:
    """Baseline: Mahalanobis distance in the innovation covariance."""
    cn = noise.for_class(d.class_label)
    s = H @ t.cov @ H.T + np.diag(cn.r_var)
    residual = d.state - H @ t.mean
    residual[3] = wrap_angle(residual[3])
    try:
        sol = np.linalg.solve(s, residual)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular innovation covariance in gating") from exc
    value = float(residual @ sol)
    if value < 0:  # numerically impossible for PD s, guard anyway
        value = 0.0
    return math.sqrt(value)


def pair_cost(
    d: Detection, t: TrackState, cfg: CostConfig, noise: NoiseConfig
) -> float:
    """Cost of one detection/track pair under the configured kind."""
    if cfg.cost_kind is CostKind.GUIDED:
        return guided_cost(d, t, cfg)
    if cfg.cost_kind is CostKind.MODIFIED:
        return modified_divergence(d, t, cfg.heading_penalty_mode)
    return mahalanobis_cost(d, t, noise)
