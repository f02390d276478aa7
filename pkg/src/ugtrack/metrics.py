"""CLEAR metrics (MOTA/MOTP/FP/FN/IDSW) and AMOTA over a recall sweep.

Matching is greedy nearest-center in the horizontal plane within a fixed
radius, the convention behind center-distance tracking benchmarks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .pipeline import OutputRecord

DEFAULT_RADIUS = 2.0
AMOTA_RECALL_POINTS = 40


@dataclass(frozen=True)
class FrameMatch:
    """Correspondence for one frame: pairs of (truth id, predicted id)."""

    frame: int
    pairs: tuple[tuple[int, int, float], ...]  # (gt id, pred id, distance)
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


@dataclass(frozen=True)
class ClearResult:
    mota: float
    motp: float
    fp: int
    fn: int
    idsw: int
    gt_total: int
    recall: float


@dataclass(frozen=True)
class AmotaResult:
    amota: float
    recall_targets: tuple[float, ...]
    motar: tuple[float, ...]


def _group_by_frame(records: list[OutputRecord]) -> dict[int, list[OutputRecord]]:
    grouped: dict[int, list[OutputRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.frame, []).append(rec)
    return grouped


def match_frame(
    gt: list[OutputRecord],
    pred: list[OutputRecord],
    radius: float = DEFAULT_RADIUS,
    carry: dict[int, int] | None = None,
) -> FrameMatch:
    """One-to-one nearest-center matching in the x-y plane.

    Following the CLEAR-MOT convention, correspondences from the
    previous frame (`carry`: truth id -> predicted id) are kept first
    while both parties are present and still within the radius; only
    the remainder is matched greedily by distance.  Ties break by
    distance, then by (truth id, predicted id).
    """
    frame = gt[0].frame if gt else (pred[0].frame if pred else 0)
    gt_used: set[int] = set()
    pred_used: set[int] = set()
    pairs = []
    if carry:
        gt_by_id = {g.track_id: g for g in gt}
        pred_by_id = {p.track_id: p for p in pred}
        for gid in sorted(carry):
            pid = carry[gid]
            g = gt_by_id.get(gid)
            p = pred_by_id.get(pid)
            if g is None or p is None or pid in pred_used:
                continue
            dist = math.hypot(
                g.state[0] - p.state[0], g.state[1] - p.state[1]
            )
            if dist <= radius:
                gt_used.add(gid)
                pred_used.add(pid)
                pairs.append((gid, pid, dist))
    candidates = []
    for g in gt:
        if g.track_id in gt_used:
            continue
        for p in pred:
            if p.track_id in pred_used:
                continue
            dist = math.hypot(
                g.state[0] - p.state[0], g.state[1] - p.state[1]
            )
            if dist <= radius:
                candidates.append((dist, g.track_id, p.track_id))
    candidates.sort()
    for dist, gid, pid in candidates:
        if gid in gt_used or pid in pred_used:
            continue
        gt_used.add(gid)
        pred_used.add(pid)
        pairs.append((gid, pid, dist))
    pairs.sort()
    return FrameMatch(
        frame=frame,
        pairs=tuple(pairs),
        unmatched_gt=tuple(sorted(g.track_id for g in gt if g.track_id not in gt_used)),
        unmatched_pred=tuple(
            sorted(p.track_id for p in pred if p.track_id not in pred_used)
        ),
    )


def match_sequences(
    truth: list[OutputRecord],
    pred: list[OutputRecord],
    radius: float = DEFAULT_RADIUS,
) -> list[FrameMatch]:
    gt_frames = _group_by_frame(truth)
    pred_frames = _group_by_frame(pred)
    frames = sorted(set(gt_frames) | set(pred_frames))
    matches = []
    carry: dict[int, int] = {}
    for f in frames:
        fm = match_frame(gt_frames.get(f, []), pred_frames.get(f, []), radius, carry)
        carry.update({gid: pid for gid, pid, _ in fm.pairs})
        matches.append(fm)
    return matches


def clear_metrics(matches: list[FrameMatch]) -> ClearResult:
    """CLEAR aggregation over per-frame correspondences.

    An identity switch is counted when a truth identity's matched
    predicted id differs from the one at its previous matched frame.
    """
    fp = fn = idsw = gt_total = 0
    distances: list[float] = []
    last_pred_for_gt: dict[int, int] = {}
    for fm in sorted(matches, key=lambda m: m.frame):
        gt_total += len(fm.pairs) + len(fm.unmatched_gt)
        fn += len(fm.unmatched_gt)
        fp += len(fm.unmatched_pred)
        for gid, pid, dist in fm.pairs:
            distances.append(dist)
            if gid in last_pred_for_gt and last_pred_for_gt[gid] != pid:
                idsw += 1
            last_pred_for_gt[gid] = pid
    if gt_total == 0:
        raise InputError("MOTA undefined: no ground-truth boxes")
    mota = 1.0 - (fn + fp + idsw) / gt_total
    motp = float(np.mean(distances)) if distances else 0.0
    recall = 1.0 - fn / gt_total
    return ClearResult(
        mota=mota, motp=motp, fp=fp, fn=fn, idsw=idsw,
        gt_total=gt_total, recall=recall,
    )


def evaluate(
    truth: list[OutputRecord],
    pred: list[OutputRecord],
    radius: float = DEFAULT_RADIUS,
) -> ClearResult:
    return clear_metrics(match_sequences(truth, pred, radius))


def amota(
    truth: list[OutputRecord],
    pred: list[OutputRecord],
    radius: float = DEFAULT_RADIUS,
) -> AmotaResult:
    """Average MOTAR over 40 evenly spaced recall targets in (0, 1].

    For each target the smallest achievable recall at or above it is
    used; unreachable targets contribute zero.  MOTAR at an operating
    point with achieved recall r is
    max(0, 1 - (IDSW + FP + FN - (1 - r) * GT) / (r * GT)).
    """
    if any(not 0.0 <= p.score <= 1.0 for p in pred):
        raise InputError("predictions carry scores outside [0, 1]")
    thresholds = sorted({p.score for p in pred}, reverse=True)
    operating_points: list[tuple[float, float]] = []  # (recall, motar)
    for thr in thresholds:
        kept = [p for p in pred if p.score >= thr]
        result = clear_metrics(match_sequences(truth, kept, radius))
        r = result.recall
        if r <= 0.0:
            continue
        motar = max(
            0.0,
            1.0
            - (result.idsw + result.fp + result.fn - (1.0 - r) * result.gt_total)
            / (r * result.gt_total),
        )
        operating_points.append((r, motar))
    operating_points.sort()

    targets = [(i + 1) / AMOTA_RECALL_POINTS for i in range(AMOTA_RECALL_POINTS)]
    motars = []
    for target in targets:
        achieved = [(r, m) for r, m in operating_points if r >= target]
        if not achieved:
            motars.append(0.0)
        else:
            # closest achievable recall; best MOTAR among ties
            closest = min(r for r, _ in achieved)
            motars.append(max(m for r, m in achieved if r == closest))
    return AmotaResult(
        amota=float(np.mean(motars)),
        recall_targets=tuple(targets),
        motar=tuple(motars),
    )
