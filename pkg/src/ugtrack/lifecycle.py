"""Track birth/death management with tentative/confirmed/disappeared states."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .association import Assignment
from .errors import ConfigError
from .kalman import Detection, NoiseConfig, TrackState, init_track, update


class TrackStatus(str, enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DISAPPEARED = "disappeared"


@dataclass
class TrackRecord:
    """One track hypothesis: filter state plus lifecycle counters."""

    id: int
    class_label: str
    state: TrackState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    misses: int = 0
    age: int = 0
    last_score: float = 0.0


@dataclass(frozen=True)
class LifecycleConfig:
    min_hits: int = 3
    max_age: int = 2
    score_floor: float = 0.0

    def __post_init__(self):
        if self.min_hits < 1:
            raise ConfigError(f"min_hits must be >= 1, got {self.min_hits}")
        if self.max_age < 1:
            raise ConfigError(f"max_age must be >= 1, got {self.max_age}")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ConfigError(
                f"score_floor must lie in [0, 1], got {self.score_floor}"
            )


def step_lifecycle(
    tracks: list[TrackRecord],
    assignment: Assignment,
    detections: list[Detection],
    cfg: LifecycleConfig,
    noise: NoiseConfig,
    next_id: int,
) -> tuple[list[TrackRecord], list[TrackRecord], int]:
    """Apply one frame's assignment outcome to the track set.

    Matched tracks get a Kalman update and a hit; unmatched tracks take a
    miss and die past ``max_age``; unmatched detections are born as
    tentative tracks.  Returns (surviving tracks, emitted confirmed
    tracks, next fresh id).  Emission includes confirmed tracks coasting
    on predictions, so occluded objects keep reporting until death.
    """
    matched_tracks = {j for j, _, _ in assignment.matches}
    survivors: list[TrackRecord] = []

    for j, i, _cost in assignment.matches:
        track = tracks[j]
        det = detections[i]
        track.state = update(track.state, det, noise)
        track.hits += 1
        track.misses = 0
        track.last_score = det.score
        if track.status is TrackStatus.TENTATIVE and track.hits >= cfg.min_hits:
            track.status = TrackStatus.CONFIRMED

    for j, track in enumerate(tracks):
        track.age += 1
        if j not in matched_tracks:
            track.misses += 1
            track.hits = 0
            if track.misses > cfg.max_age:
                track.status = TrackStatus.DISAPPEARED
                continue  # dropped from the set
        survivors.append(track)

    for i in assignment.unmatched_detections:
        det = detections[i]
        survivors.append(
            TrackRecord(
                id=next_id,
                class_label=det.class_label,
                state=init_track(det, noise),
                status=(
                    TrackStatus.CONFIRMED
                    if cfg.min_hits <= 1
                    else TrackStatus.TENTATIVE
                ),
                hits=1,
                misses=0,
                age=0,
                last_score=det.score,
            )
        )
        next_id += 1

    emitted = [t for t in survivors if t.status is TrackStatus.CONFIRMED]
    return survivors, emitted, next_id
