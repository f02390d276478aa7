"""Constant-velocity Kalman filtering for 3D box tracks.

State layout (10): x, y, z, theta, l, w, h, vx, vy, vz.
Observation layout (7): x, y, z, theta, l, w, h.
Headings live in (-pi, pi]; innovations are wrapped before the gain is
applied.  Noise statistics are either loaded from config or estimated
from labeled data by :func:`calibrate`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import CalibrationError, ConfigError, InputError, NumericError

STATE_DIM = 10
OBS_DIM = 7
MIN_EXTENT = 0.05  # meters; floor for l, w, h after an update

# Observation matrix: selects the first seven state components.
H = np.hstack([np.eye(OBS_DIM), np.zeros((OBS_DIM, 3))])


def wrap_angle(theta):
    """Wrap angle(s) into (-pi, pi]."""
    wrapped = np.mod(-np.asarray(theta) + np.pi, 2.0 * np.pi)
    return -(wrapped - np.pi)


@dataclass(frozen=True)
class Detection:
    """A single-frame 3D box observation in some fixed coordinate frame."""

    frame: int
    class_label: str
    state: np.ndarray  # (7,) x y z theta l w h
    cov: np.ndarray  # (7, 7)
    score: float

    def __post_init__(self):
        state = np.asarray(self.state, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if state.shape != (OBS_DIM,):
            raise InputError(f"detection state must have 7 entries, got {state.shape}")
        if cov.shape != (OBS_DIM, OBS_DIM):
            raise InputError(f"detection covariance must be 7x7, got {cov.shape}")
        if not np.isfinite(state).all() or not np.isfinite(cov).all():
            raise InputError("detection state/covariance must be finite")
        if np.any(state[4:7] <= 0):
            raise InputError(f"box dimensions must be positive, got {state[4:7]}")
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"score must lie in [0, 1], got {self.score}")
        state = state.copy()
        state[3] = wrap_angle(state[3])
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "cov", cov)

    @property
    def heading(self) -> float:
        return float(self.state[3])


@dataclass(frozen=True)
class TrackState:
    """Kalman mean/covariance of one track."""

    mean: np.ndarray  # (10,)
    cov: np.ndarray  # (10, 10)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (STATE_DIM,):
            raise InputError(f"track mean must have 10 entries, got {mean.shape}")
        if cov.shape != (STATE_DIM, STATE_DIM):
            raise InputError(f"track covariance must be 10x10, got {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def heading(self) -> float:
        return float(self.mean[3])


@dataclass(frozen=True)
class ClassNoise:
    """Per-class noise statistics (all diagonals, variances)."""

    det_var: np.ndarray  # (7,) initial detection covariance diagonal
    kin_var: np.ndarray  # (3,) initial velocity variance
    q_var: np.ndarray  # (10,) process noise diagonal
    r_var: np.ndarray  # (7,) measurement noise diagonal

    def __post_init__(self):
        for name, arr, n in (
            ("det_var", self.det_var, 7),
            ("kin_var", self.kin_var, 3),
            ("q_var", self.q_var, 10),
            ("r_var", self.r_var, 7),
        ):
            arr = np.asarray(arr, dtype=float).reshape(-1)
            if arr.shape != (n,):
                raise ConfigError(f"{name} must have {n} entries, got {arr.shape}")
            if np.any(arr <= 0) or not np.isfinite(arr).all():
                raise ConfigError(f"{name} entries must be positive and finite")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class NoiseConfig:
    """Frame period plus per-class noise statistics."""

    dt: float
    classes: Mapping[str, ClassNoise]

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"frame period must be positive, got {self.dt}")
        object.__setattr__(self, "classes", dict(self.classes))

    def for_class(self, class_label: str) -> ClassNoise:
        try:
            return self.classes[class_label]
        except KeyError:
            raise ConfigError(
                f"no noise statistics configured for class '{class_label}'"
            ) from None


def transition_matrix(dt: float) -> np.ndarray:
    """10x10 constant-velocity transition: position += velocity * dt."""
    a = np.eye(STATE_DIM)
    a[0, 7] = a[1, 8] = a[2, 9] = dt
    return a


def init_track(d: Detection, noise: NoiseConfig) -> TrackState:
    """New track from an unmatched detection; velocities start at zero."""
    cn = noise.for_class(d.class_label)
    mean = np.concatenate([d.state, np.zeros(3)])
    cov = np.zeros((STATE_DIM, STATE_DIM))
    cov[:OBS_DIM, :OBS_DIM] = d.cov
    cov[OBS_DIM:, OBS_DIM:] = np.diag(cn.kin_var)
    return TrackState(mean, cov)


def predict(t: TrackState, noise: NoiseConfig, class_label: str) -> TrackState:
    """One constant-velocity prediction step with additive process noise."""
    cn = noise.for_class(class_label)
    a = transition_matrix(noise.dt)
    mean = a @ t.mean
    mean[3] = wrap_angle(mean[3])
    cov = a @ t.cov @ a.T + np.diag(cn.q_var)
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean, cov)


def update(t: TrackState, d: Detection, noise: NoiseConfig) -> TrackState:
    """Kalman measurement update with wrapped heading innovation."""
    cn = noise.for_class(d.class_label)
    r = np.diag(cn.r_var)
    s = H @ t.cov @ H.T + r
    try:
        s_inv_ht = np.linalg.solve(s, H @ t.cov).T  # gain K = cov H^T S^{-1}
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular innovation covariance in Kalman update") from exc
    innovation = d.state - H @ t.mean
    innovation[3] = wrap_angle(innovation[3])
    mean = t.mean + s_inv_ht @ innovation
    mean[3] = wrap_angle(mean[3])
    mean[4:7] = np.maximum(mean[4:7], MIN_EXTENT)
    cov = (np.eye(STATE_DIM) - s_inv_ht @ H) @ t.cov
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean, cov)


# --- calibration from labeled statistics ---------------------------------

#: Matched pair of (detection 7-state, ground-truth 7-state) at one frame.
MatchedPair = tuple[np.ndarray, np.ndarray]

MIN_PAIRS = 30
MIN_TRANSITIONS = 30


@dataclass(frozen=True)
class LabeledClassData:
    """Calibration input for one class.

    truth_tracks: per ground-truth object, the 7-state at consecutive
    frames (each an (n_i, 7) array, n_i >= 2 to contribute transitions).
    matched_pairs: (detection, truth) 7-state pairs from the same frames.
    """

    truth_tracks: Sequence[np.ndarray]
    matched_pairs: Sequence[MatchedPair]


def _wrapped_residual_var(residuals: np.ndarray) -> np.ndarray:
    res = residuals.copy()
    res[:, 3] = wrap_angle(res[:, 3])
    return np.var(res, axis=0)


def calibrate(
    labeled: Mapping[str, LabeledClassData], dt: float
) -> NoiseConfig:
    """Estimate per-class noise diagonals from labeled sequences.

    R and the initial detection covariance come from detection-vs-truth
    residual variances; Q from one-step constant-velocity prediction
    residuals on the truth; the velocity prior from finite-difference
    velocity variances.
    """
    if not dt > 0:
        raise ConfigError(f"frame period must be positive, got {dt}")
    classes: dict[str, ClassNoise] = {}
    for label, data in labeled.items():
        pairs = list(data.matched_pairs)
        if len(pairs) < MIN_PAIRS:
            raise CalibrationError(
                f"class '{label}': {len(pairs)} matched pairs, need {MIN_PAIRS}"
            )
        det = np.asarray([p[0] for p in pairs], dtype=float)
        tru = np.asarray([p[1] for p in pairs], dtype=float)
        r_var = _wrapped_residual_var(det - tru)

        vels = []
        cv_residuals = []
        for track in data.truth_tracks:
            track = np.asarray(track, dtype=float)
            if track.ndim != 2 or track.shape[1] != OBS_DIM:
                raise InputError("truth tracks must be (n, 7) arrays")
            if track.shape[0] < 2:
                continue
            v = (track[1:, :3] - track[:-1, :3]) / dt
            vels.append(v)
            # full-state CV residual: positions advance by the previous
            # finite-difference velocity, everything else holds constant
            if track.shape[0] >= 3:
                predicted_pos = track[1:-1, :3] + v[:-1] * dt
                res7 = track[2:] - track[1:-1]
                res7[:, 3] = wrap_angle(res7[:, 3])
                res_pos = track[2:, :3] - predicted_pos
                res_vel = (v[1:] - v[:-1])
                cv_residuals.append(
                    np.hstack([res_pos, res7[:, 3:7], res_vel])
                )
        if not vels:
            raise CalibrationError(f"class '{label}': no truth transitions")
        vels = np.vstack(vels)
        cv_res = np.vstack(cv_residuals) if cv_residuals else np.zeros((0, 10))
        if cv_res.shape[0] < MIN_TRANSITIONS:
            raise CalibrationError(
                f"class '{label}': {cv_res.shape[0]} truth transitions, "
                f"need {MIN_TRANSITIONS}"
            )
        # reorder into state layout x y z theta l w h vx vy vz
        q_var = np.empty(STATE_DIM)
        q_var[:3] = np.var(cv_res[:, :3], axis=0)
        q_var[3:7] = np.var(cv_res[:, 3:7], axis=0)
        q_var[7:] = np.var(cv_res[:, 7:], axis=0)
        kin_var = np.var(vels, axis=0)

        floor = 1e-12  # keep strictly positive for PD covariances
        classes[label] = ClassNoise(
            det_var=np.maximum(r_var, floor),
            kin_var=np.maximum(kin_var, floor),
            q_var=np.maximum(q_var, floor),
            r_var=np.maximum(r_var, floor),
        )
    return NoiseConfig(dt=dt, classes=classes)
