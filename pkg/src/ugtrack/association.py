"""Greedy one-to-one matching of detections to predicted tracks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostConfig, pair_cost
from .errors import NumericError
from .kalman import Detection, NoiseConfig

GATED = np.inf


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise costs, tracks along rows; gated pairs hold +inf."""

    costs: np.ndarray  # (n_tracks, n_detections)

    @property
    def n_tracks(self) -> int:
        return self.costs.shape[0]

    @property
    def n_detections(self) -> int:
        return self.costs.shape[1]


@dataclass(frozen=True)
class Assignment:
    matches: tuple[tuple[int, int, float], ...]  # (track, detection, cost)
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]


def build_cost_matrix(
    tracks,  # sequence of TrackRecord (predicted to the current frame)
    detections: list[Detection],
    cfg: CostConfig,
    noise: NoiseConfig,
) -> CostMatrix:
    """Evaluate the configured cost for every same-class pair under the gate."""
    costs = np.full((len(tracks), len(detections)), GATED)
    for j, track in enumerate(tracks):
        for i, det in enumerate(detections):
            if det.class_label != track.class_label:
                continue
            try:
                value = pair_cost(det, track.state, cfg, noise)
            except NumericError as exc:
                raise NumericError(
                    f"cost failed for track {track.id} vs detection {i}: {exc}"
                ) from exc
            if value < cfg.gate_threshold:
                costs[j, i] = value
    return CostMatrix(costs)


def greedy_match(m: CostMatrix) -> Assignment:
    """Commit pairs in ascending cost order, ties by (track, detection)."""
    costs = m.costs
    finite = np.argwhere(np.isfinite(costs))
    order = sorted(
        (float(costs[j, i]), int(j), int(i)) for j, i in finite
    )
    track_used = np.zeros(m.n_tracks, dtype=bool)
    det_used = np.zeros(m.n_detections, dtype=bool)
    matches = []
    for cost, j, i in order:
        if track_used[j] or det_used[i]:
            continue
        track_used[j] = True
        det_used[i] = True
        matches.append((j, i, cost))
    return Assignment(
        matches=tuple(matches),
        unmatched_tracks=tuple(int(j) for j in np.flatnonzero(~track_used)),
        unmatched_detections=tuple(int(i) for i in np.flatnonzero(~det_used)),
    )
