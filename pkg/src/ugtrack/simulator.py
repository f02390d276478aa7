"""Seeded synthetic scenes: CV ground truth, occlusions, noise, clutter.

Scenario files are JSON; a file either describes a single scene or a
`benchmark` block that deterministically expands into many scenes with
crossing trajectories and random occlusion windows.  Randomness is split
into independent sub-streams (noise / misses / clutter / scores) so
toggling one effect never perturbs the draws of another.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .io_formats import DetectionRow
from .kalman import wrap_angle
from .pipeline import OutputRecord

_STREAM_NOISE = 0
_STREAM_MISS = 1
_STREAM_CLUTTER = 2
_STREAM_SCORE = 3


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    class_label: str
    init: np.ndarray  # (7,) x y z theta l w h
    velocity: np.ndarray  # (3,)
    velocity_changes: tuple[tuple[int, np.ndarray], ...] = ()
    occlusions: tuple[tuple[int, int], ...] = ()  # inclusive frame intervals


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    n_frames: int
    dt: float
    objects: tuple[ObjectSpec, ...]
    noise: dict[str, np.ndarray]  # per-class 7-dim detection noise variances
    workspace: np.ndarray  # (3, 2) axis-aligned box for clutter
    miss_rate: float = 0.0
    clutter_rate: float = 0.0
    clutter_class: str = "car"

    def __post_init__(self):
        if self.n_frames < 0 or self.dt <= 0:
            raise ConfigError("n_frames must be >= 0 and dt > 0")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ConfigError(f"miss_rate {self.miss_rate} outside [0, 1]")
        if self.clutter_rate < 0:
            raise ConfigError("clutter_rate must be >= 0")
        ws = np.asarray(self.workspace, dtype=float)
        if ws.shape != (3, 2) or np.any(ws[:, 1] <= ws[:, 0]):
            raise ConfigError("workspace must be a nonempty (3, 2) box")
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ConfigError("object ids must be unique")
        object.__setattr__(self, "workspace", ws)


def _stream(cfg: ScenarioConfig, purpose: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, purpose])


def _occluded(spec: ObjectSpec, frame: int) -> bool:
    return any(f0 <= frame <= f1 for f0, f1 in spec.occlusions)


def generate_truth(cfg: ScenarioConfig) -> list[OutputRecord]:
    """Exact piecewise-CV states per object per frame."""
    records: list[OutputRecord] = []
    for spec in sorted(cfg.objects, key=lambda o: o.id):
        state = spec.init.copy()
        velocity = spec.velocity.copy()
        changes = dict(
            (frame, np.asarray(v, dtype=float)) for frame, v in spec.velocity_changes
        )
        for frame in range(cfg.n_frames):
            if frame in changes:
                velocity = changes[frame].copy()
            records.append(
                OutputRecord(
                    frame=frame,
                    track_id=spec.id,
                    class_label=spec.class_label,
                    state=state.copy(),
                    score=1.0,
                    status="confirmed",
                )
            )
            state = state.copy()
            state[:3] += velocity * cfg.dt
    records.sort(key=lambda r: (r.frame, r.track_id))
    return records


def render_detections(
    cfg: ScenarioConfig, truth: list[OutputRecord]
) -> list[DetectionRow]:
    """Noisy detections of visible truth plus uniform clutter."""
    rng_noise = _stream(cfg, _STREAM_NOISE)
    rng_miss = _stream(cfg, _STREAM_MISS)
    rng_clutter = _stream(cfg, _STREAM_CLUTTER)
    rng_score = _stream(cfg, _STREAM_SCORE)
    specs = {o.id: o for o in cfg.objects}

    by_frame: dict[int, list[OutputRecord]] = {}
    for rec in truth:
        by_frame.setdefault(rec.frame, []).append(rec)

    rows: list[DetectionRow] = []
    ws = cfg.workspace
    for frame in range(cfg.n_frames):
        for rec in sorted(by_frame.get(frame, []), key=lambda r: r.track_id):
            spec = specs[rec.track_id]
            if _occluded(spec, frame):
                continue
            if rec.class_label not in cfg.noise:
                raise ConfigError(
                    f"no detection noise configured for class '{rec.class_label}'"
                )
            sigma = np.sqrt(cfg.noise[rec.class_label])
            noisy = rec.state + rng_noise.standard_normal(7) * sigma
            if rng_miss.random() < cfg.miss_rate:
                continue
            noisy[3] = wrap_angle(noisy[3])
            noisy[4:7] = np.maximum(noisy[4:7], 0.05)
            score = rng_score.uniform(0.7, 1.0)
            rows.append(DetectionRow(frame, rec.class_label, noisy, score))
        n_clutter = rng_clutter.poisson(cfg.clutter_rate)
        for _ in range(n_clutter):
            pos = rng_clutter.uniform(ws[:, 0], ws[:, 1])
            theta = rng_clutter.uniform(-math.pi, math.pi)
            dims = rng_clutter.uniform([3.5, 1.5, 1.3], [5.0, 2.0, 1.8])
            state = np.concatenate([pos, [theta], dims])
            score = rng_clutter.uniform(0.1, 0.5)  # own stream: toggling
            # clutter must not perturb the score draws of real detections
            rows.append(DetectionRow(frame, cfg.clutter_class, state, score))
    return rows


def identity_poses(cfg: ScenarioConfig) -> dict[int, np.ndarray]:
    return {frame: np.eye(4) for frame in range(cfg.n_frames)}


# --- scenario files -------------------------------------------------------


def _object_from_json(obj: dict) -> ObjectSpec:
    try:
        return ObjectSpec(
            id=int(obj["id"]),
            class_label=str(obj["class"]),
            init=np.asarray(obj["init"], dtype=float),
            velocity=np.asarray(obj["velocity"], dtype=float),
            velocity_changes=tuple(
                (int(f), np.asarray(v, dtype=float))
                for f, v in obj.get("velocity_changes", [])
            ),
            occlusions=tuple(
                (int(a), int(b)) for a, b in obj.get("occlusions", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad object spec: {exc}") from exc


def _scene_from_json(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig(
            seed=int(data["seed"]),
            n_frames=int(data["n_frames"]),
            dt=float(data["dt"]),
            objects=tuple(_object_from_json(o) for o in data.get("objects", [])),
            noise={
                k: np.asarray(v, dtype=float) for k, v in data["noise"].items()
            },
            workspace=np.asarray(data["workspace"], dtype=float),
            miss_rate=float(data.get("miss_rate", 0.0)),
            clutter_rate=float(data.get("clutter_rate", 0.0)),
            clutter_class=str(data.get("clutter_class", "car")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario: {exc}") from exc


def load_scenarios(path: str) -> list[ScenarioConfig]:
    """Load a scenario file: one scene or an expanded benchmark."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed scenario JSON {path}: {exc}") from exc
    if "benchmark" in data:
        return benchmark_scenes(**data["benchmark"])
    return [_scene_from_json(data)]


def benchmark_scenes(
    seed: int = 7,
    n_scenes: int = 20,
    n_objects: int = 10,
    n_frames: int = 80,
    dt: float = 0.1,
    class_label: str = "car",
    noise_var: list[float] | None = None,
    miss_rate: float = 0.0,
    clutter_rate: float = 0.5,
    radius: float = 20.0,
) -> list[ScenarioConfig]:
    """The canonical occlusion workload: conjunction events under occlusion.

    Objects drive in pairs of near-identical twins that meet in one of
    two canonical hard cases for data association:

    - head-on conjunctions: both members are routed through a shared
      waypoint which they reach at almost the same frame;
    - overtakes: both members drive the same direction in adjacent
      lanes a few decimeters apart, the rear one slightly faster, so
      they stay within ambiguity range of each other for several
      frames while one of them is occluded.

    Detection gaps come from three deterministic sources:

    - line-of-sight occlusion: whenever two objects pass within a small
      horizontal distance of each other, the one farther from the sensor
      origin is hidden for those frames;
    - one random occlusion window of 3-8 frames per object, placed away
      from its conjunction so the track dies and must be re-established;
    - a permanent dropout for roughly a third of the objects, whose
      tracks keep coasting with no detections left to claim.
    """
    if noise_var is None:
        noise_var = [0.01, 0.01, 0.01, 0.01, 0.0025, 0.0025, 0.0025]
    noise_arr = np.asarray(noise_var, dtype=float)
    occlusion_distance = 0.6
    scenes = []
    for scene_idx in range(n_scenes):
        rng = np.random.default_rng([seed, 100 + scene_idx])
        starts = []
        vels = []
        pair_dims = []
        n_pairs = n_objects // 2
        for k in range(n_objects):
            pair = k // 2
            overtake = pair % 2 == 1
            if k % 2 == 0 or k >= 2 * n_pairs:
                if k >= 2 * n_pairs:  # odd leftover: lone crossing object
                    angle = rng.uniform(0.0, 2.0 * math.pi)
                    overtake = False
                else:
                    base = 2.0 * math.pi * pair / max(n_pairs, 1)
                    angle = base + rng.uniform(-0.2, 0.2)
                # waypoint and arrival frame for this pair; waypoints sit
                # on a ring well apart from each other so every
                # conjunction involves exactly one pair of twins
                ring = base + math.pi / max(n_pairs, 1)
                cross_point = 8.0 * np.array(
                    [math.cos(ring), math.sin(ring)]
                ) + rng.uniform(-1.0, 1.0, size=2)
                cross_frame = rng.uniform(0.5 * n_frames, 0.75 * n_frames)
                # both members share one box size: same-class objects
                # are near-identical, so geometry cannot disambiguate
                dims = np.array([4.2, 1.8, 1.5]) + rng.uniform(
                    -0.15, 0.15, size=3
                )
                start = np.array(
                    [radius * math.cos(angle), radius * math.sin(angle), 0.0]
                )
                # a small arrival dither sets how close a head-on
                # conjunction gets
                arrival = (cross_frame + rng.uniform(-0.1, 0.1)) * dt
                vel = np.array(
                    [
                        (cross_point[0] - start[0]) / arrival,
                        (cross_point[1] - start[1]) / arrival,
                        0.0,
                    ]
                )
            elif not overtake:
                # partner comes from roughly the opposite side, so the
                # conjunction is near-head-on
                angle = base + math.pi + rng.uniform(-0.05, 0.05)
                start = np.array(
                    [radius * math.cos(angle), radius * math.sin(angle), 0.0]
                )
                arrival = (cross_frame + rng.uniform(-0.1, 0.1)) * dt
                vel = np.array(
                    [
                        (cross_point[0] - start[0]) / arrival,
                        (cross_point[1] - start[1]) / arrival,
                        0.0,
                    ]
                )
            else:
                # overtake partner: same heading in an adjacent lane a
                # few decimeters away, slightly faster, drawing level
                # with the leader right at the pair's crossing frame
                lead_start = starts[-1]
                lead_vel = vels[-1]
                speed_lead = math.hypot(lead_vel[0], lead_vel[1])
                d_hat = lead_vel[:2] / speed_lead
                n_hat = np.array([-d_hat[1], d_hat[0]])
                lateral = rng.uniform(0.1, 0.35) * rng.choice([-1.0, 1.0])
                closing = rng.uniform(1.0, 2.0)
                t_pass = cross_frame * dt
                start = lead_start.copy()
                start[:2] += n_hat * lateral - d_hat * (closing * t_pass)
                vel = lead_vel.copy()
                vel[:2] += d_hat * closing
            starts.append(start)
            vels.append(vel)
            pair_dims.append(dims)

        # exact CV positions for every frame: (n_frames, n_objects, 2)
        t = np.arange(n_frames)[:, None, None] * dt
        pos = np.asarray(starts)[None, :, :2] + t * np.asarray(vels)[None, :, :2]
        hidden: dict[int, set[int]] = {k: set() for k in range(n_objects)}
        delta_all = pos[:, :, None, :] - pos[:, None, :, :]
        dist_all = np.hypot(delta_all[..., 0], delta_all[..., 1])
        episode_loser: dict[tuple[int, int], int] = {}
        for frame in range(n_frames - 1):
            p = pos[frame]
            rng_from_origin = np.hypot(p[:, 0], p[:, 1])
            dist = dist_all[frame]
            for a in range(n_objects):
                for b in range(a + 1, n_objects):
                    if dist[a, b] >= occlusion_distance:
                        episode_loser.pop((a, b), None)
                        continue
                    # shadowing happens on the approach; once the pair
                    # separates again both boxes are visible
                    if dist_all[frame + 1, a, b] > dist[a, b]:
                        continue
                    # the shadowed box is fixed for the whole close pass:
                    # whoever is farther from the sensor when the pair
                    # first closes stays behind until they separate
                    if (a, b) not in episode_loser:
                        episode_loser[(a, b)] = (
                            a if rng_from_origin[a] > rng_from_origin[b] else b
                        )
                    loser = episode_loser[(a, b)]
                    # grazing line-of-sight clears quickly: a box only
                    # shadows its twin for a couple of frames, so cap
                    # each hidden run at two consecutive frames
                    if {frame - 1, frame - 2} <= hidden[loser]:
                        continue
                    hidden[loser].add(frame)

        # frames where an object has a neighbor within ambiguity range;
        # random occlusion windows keep clear of these so the track dies
        # and is re-established in isolation, away from any conjunction
        min_dist = np.min(
            np.where(np.eye(n_objects, dtype=bool)[None], np.inf, dist_all),
            axis=2,
        )

        objects = []
        windows: list[tuple[int, int, int]] = []  # (object, first, last)
        for k in range(n_objects):
            theta = math.atan2(vels[k][1], vels[k][0])
            init = np.concatenate([starts[k], [theta], pair_dims[k]])
            occs = [(f, f) for f in sorted(hidden[k])]
            length = int(rng.integers(3, 9))
            for clearance in (4.0, 2.0, 1.0, 0.0):
                placed = False
                for _attempt in range(200):
                    f0 = int(rng.integers(10, n_frames - length - 10))
                    lo = max(f0 - 4, 0)
                    hi = min(f0 + length + 8, n_frames)
                    if not (min_dist[lo:hi, k] > clearance).all():
                        continue
                    # keep windows of nearby objects apart in time as
                    # well: when one box reappears, no neighbor within
                    # grabbing range of a stale track may vanish at the
                    # same moment
                    clash = False
                    for j, g0, g1 in windows:
                        if lo > g1 + 8 or hi < g0 - 8:
                            continue
                        a = max(min(lo, g0 - 8), 0)
                        b = min(max(hi, g1 + 8), n_frames)
                        if dist_all[a:b, k, j].min() < 10.0:
                            clash = True
                            break
                    if clash:
                        continue
                    placed = True
                    break
                if placed:
                    break
            occs.append((f0, f0 + length - 1))
            windows.append((k, f0, f0 + length - 1))
            if rng.random() < 0.3:
                # permanent dropout: the object is never seen again, but
                # its track keeps coasting; placed after the conjunction
                # window so every engineered crossing actually happens
                f0 = int(rng.integers((3 * n_frames) // 4, n_frames - 5))
                occs.append((f0, n_frames - 1))
            objects.append(
                ObjectSpec(
                    id=k,
                    class_label=class_label,
                    init=init,
                    velocity=vels[k],
                    occlusions=tuple(occs),
                )
            )
        extent = radius + 10.0
        scenes.append(
            ScenarioConfig(
                seed=seed * 1000 + scene_idx,
                n_frames=n_frames,
                dt=dt,
                objects=tuple(objects),
                noise={class_label: noise_arr},
                workspace=np.array(
                    [[-extent, extent], [-extent, extent], [-1.0, 3.0]]
                ),
                miss_rate=miss_rate,
                clutter_rate=clutter_rate,
            )
        )
    return scenes
