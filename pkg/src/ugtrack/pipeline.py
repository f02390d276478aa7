"""Per-frame orchestration: world transform, predict, match, lifecycle."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .association import build_cost_matrix, greedy_match
from .costs import CostConfig
from .errors import InputError, SequencingError
from .kalman import Detection, NoiseConfig, predict, wrap_angle
from .lifecycle import LifecycleConfig, TrackRecord, TrackStatus, step_lifecycle

_ROT_TOL = 1e-6


@dataclass(frozen=True)
class TrackerConfig:
    """Everything one sequence run needs."""

    noise: NoiseConfig
    cost: CostConfig
    lifecycle: LifecycleConfig


@dataclass(frozen=True)
class FrameData:
    """Detections of one frame, in the sensor frame, plus the ego pose."""

    frame: int
    ego_pose: np.ndarray  # (4, 4) sensor -> world
    detections: tuple[Detection, ...]

    def __post_init__(self):
        pose = np.asarray(self.ego_pose, dtype=float)
        if pose.shape != (4, 4):
            raise InputError(f"ego pose must be 4x4, got {pose.shape}")
        if not np.isfinite(pose).all():
            raise InputError("ego pose must be finite")
        _check_rotation(pose[:3, :3])
        object.__setattr__(self, "ego_pose", pose)
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class OutputRecord:
    """One emitted track at one frame, in world coordinates."""

    frame: int
    track_id: int
    class_label: str
    state: np.ndarray  # (7,) x y z theta l w h
    score: float
    status: str
    mean_cov: float | None = None  # filled by the pipeline, not serialized


def _check_rotation(r: np.ndarray) -> None:
    if np.abs(r @ r.T - np.eye(3)).max() > _ROT_TOL:
        raise InputError("pose rotation block is not orthonormal")


def transform_to_world(d: Detection, pose: np.ndarray) -> Detection:
    """Rigidly move a detection from the sensor frame to the world frame.

    Heading picks up the pose yaw; box dimensions are untouched; the
    position covariance block is rotated, the rest left as-is.
    """
    pose = np.asarray(pose, dtype=float)
    r = pose[:3, :3]
    _check_rotation(r)
    state = d.state.copy()
    state[:3] = r @ state[:3] + pose[:3, 3]
    yaw = float(np.arctan2(r[1, 0], r[0, 0]))
    state[3] = wrap_angle(state[3] + yaw)
    cov = d.cov.copy()
    cov[:3, :3] = r @ cov[:3, :3] @ r.T
    return replace(d, state=state, cov=cov)


@dataclass
class TrackerState:
    tracks: list[TrackRecord] = field(default_factory=list)
    next_id: int = 0
    last_frame: int | None = None
    frames_processed: int = 0
    births: int = 0
    deaths: int = 0
    unknown_class_detections: int = 0


def process_frame(
    state: TrackerState, frame: FrameData, cfg: TrackerConfig
) -> list[OutputRecord]:
    """Advance the tracker by one frame and return the emitted tracks.

    Frame indices must strictly increase; index gaps cost one extra
    prediction per skipped frame so covariances keep growing through
    dropouts.
    """
    if state.last_frame is not None and frame.frame <= state.last_frame:
        raise SequencingError(
            f"frame {frame.frame} arrived after frame {state.last_frame}"
        )
    n_predicts = (
        1 if state.last_frame is None else frame.frame - state.last_frame
    )

    detections = []
    for det in frame.detections:
        if det.class_label not in cfg.noise.classes:
            state.unknown_class_detections += 1
            continue
        if det.score < cfg.lifecycle.score_floor:
            continue
        detections.append(transform_to_world(det, frame.ego_pose))

    for track in state.tracks:
        for _ in range(n_predicts):
            track.state = predict(track.state, cfg.noise, track.class_label)

    matrix = build_cost_matrix(state.tracks, detections, cfg.cost, cfg.noise)
    assignment = greedy_match(matrix)
    before = len(state.tracks)
    survivors, emitted, state.next_id = step_lifecycle(
        state.tracks,
        assignment,
        detections,
        cfg.lifecycle,
        cfg.noise,
        state.next_id,
    )
    births = len(assignment.unmatched_detections)
    state.births += births
    state.deaths += before + births - len(survivors)
    state.tracks = survivors
    state.last_frame = frame.frame
    state.frames_processed += 1

    records = [
        OutputRecord(
            frame=frame.frame,
            track_id=t.id,
            class_label=t.class_label,
            state=_world_box(t),
            score=t.last_score,
            status=t.status.value,
            mean_cov=_mean_cov(t),
        )
        for t in sorted(emitted, key=lambda t: t.id)
    ]
    return records


def _mean_cov(t: TrackRecord) -> float:
    from .costs import mean_covariance

    return mean_covariance(t.state)


def _world_box(t: TrackRecord) -> np.ndarray:
    box = t.state.mean[:7].copy()
    box[3] = wrap_angle(box[3])
    return box


def run_sequence(frames, cfg: TrackerConfig) -> list[OutputRecord]:
    """Fold :func:`process_frame` over an ordered frame stream."""
    state = TrackerState()
    out: list[OutputRecord] = []
    for frame in frames:
        out.extend(process_frame(state, frame, cfg))
    return out
