"""Plain-text file formats: detections, poses, config, track output.

All formats are line-oriented with '.' decimals and fixed 6-decimal
output precision.  Parsers reject rather than coerce: NaN/Inf, missing
fields, and out-of-range values all raise :class:`ParseError` with the
offending line number.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .costs import CostConfig, CostKind, HeadingMode
from .errors import ConfigError, ParseError
from .kalman import ClassNoise, Detection, NoiseConfig
from .lifecycle import LifecycleConfig
from .pipeline import FrameData, OutputRecord, TrackerConfig

_FLOAT_FMT = "{:.6f}"


@dataclass(frozen=True)
class DetectionRow:
    """One line of a detection file, before covariance assembly."""

    frame: int
    class_label: str
    state: np.ndarray  # (7,)
    score: float


def _parse_float(token: str, path: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad {what} '{token}'") from None
    if not math.isfinite(value):
        raise ParseError(f"{path}:{lineno}: non-finite {what} '{token}'")
    return value


def _content_lines(path: str):
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def parse_detections(path: str) -> list[DetectionRow]:
    """Read `frame class x y z theta l w h score` lines, frame-sorted."""
    rows: list[DetectionRow] = []
    last_frame = -1
    for lineno, fields in _content_lines(path):
        if len(fields) != 10:
            raise ParseError(
                f"{path}:{lineno}: expected 10 fields, got {len(fields)}"
            )
        try:
            frame = int(fields[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad frame '{fields[0]}'") from None
        if frame < 0:
            raise ParseError(f"{path}:{lineno}: negative frame {frame}")
        if frame < last_frame:
            raise ParseError(
                f"{path}:{lineno}: frame {frame} out of order (after {last_frame})"
            )
        last_frame = frame
        state = np.array(
            [_parse_float(t, path, lineno, "state value") for t in fields[2:9]]
        )
        if np.any(state[4:7] <= 0):
            raise ParseError(f"{path}:{lineno}: box dimensions must be positive")
        score = _parse_float(fields[9], path, lineno, "score")
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"{path}:{lineno}: score {score} outside [0, 1]")
        rows.append(DetectionRow(frame, fields[1], state, score))
    return rows


def parse_poses(path: str) -> dict[int, np.ndarray]:
    """Read `frame r00 r01 r02 tx r10 ... tz` lines into 4x4 transforms."""
    poses: dict[int, np.ndarray] = {}
    for lineno, fields in _content_lines(path):
        if len(fields) != 13:
            raise ParseError(
                f"{path}:{lineno}: expected 13 fields, got {len(fields)}"
            )
        try:
            frame = int(fields[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad frame '{fields[0]}'") from None
        if frame in poses:
            raise ParseError(f"{path}:{lineno}: duplicate pose for frame {frame}")
        vals = [_parse_float(t, path, lineno, "pose value") for t in fields[1:]]
        pose = np.eye(4)
        pose[:3, :] = np.array(vals).reshape(3, 4)
        r = pose[:3, :3]
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise ParseError(
                f"{path}:{lineno}: rotation block is not orthonormal"
            )
        poses[frame] = pose
    return poses


def assemble_frames(
    rows: list[DetectionRow],
    poses: dict[int, np.ndarray],
    noise: NoiseConfig,
) -> list[FrameData]:
    """Join detections and poses into per-frame bundles, pose frames ruling.

    Detections of classes missing from the noise config get a unit
    placeholder covariance; the pipeline skips (and counts) them.
    """
    by_frame: dict[int, list[DetectionRow]] = {}
    for row in rows:
        by_frame.setdefault(row.frame, []).append(row)
    missing = set(by_frame) - set(poses)
    if missing:
        raise ParseError(
            f"no ego pose for detection frames {sorted(missing)[:5]}"
        )
    frames = []
    for frame in sorted(poses):
        dets = []
        for row in by_frame.get(frame, []):
            if row.class_label in noise.classes:
                cov = np.diag(noise.for_class(row.class_label).det_var)
            else:
                cov = np.eye(7)
            dets.append(
                Detection(
                    frame=row.frame,
                    class_label=row.class_label,
                    state=row.state,
                    cov=cov,
                    score=row.score,
                )
            )
        frames.append(FrameData(frame=frame, ego_pose=poses[frame], detections=tuple(dets)))
    return frames


def write_poses(path: str, poses: dict[int, np.ndarray]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for frame in sorted(poses):
            vals = poses[frame][:3, :].reshape(-1)
            fh.write(
                f"{frame} " + " ".join(_FLOAT_FMT.format(v) for v in vals) + "\n"
            )


def write_detections(path: str, rows: list[DetectionRow]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in rows:
            state = " ".join(_FLOAT_FMT.format(v) for v in row.state)
            fh.write(
                f"{row.frame} {row.class_label} {state} "
                + _FLOAT_FMT.format(row.score)
                + "\n"
            )


# --- KITTI-style track files ---------------------------------------------

_KITTI_SENTINELS = "-1 -1 -10 -1 -1 -1 -1"


def write_tracks(stream, records: list[OutputRecord]) -> None:
    """KITTI-tracking-style lines, ids ascending within each frame.

    Layout: `frame id class -1 -1 -10 -1 -1 -1 -1 h w l x y z theta score`
    with the 2D-image fields held at their conventional sentinels and the
    location documented as world-frame.
    """
    for rec in sorted(records, key=lambda r: (r.frame, r.track_id)):
        x, y, z, theta, length, width, height = rec.state
        fields = [height, width, length, x, y, z, theta, rec.score]
        fh_line = (
            f"{rec.frame} {rec.track_id} {rec.class_label} {_KITTI_SENTINELS} "
            + " ".join(_FLOAT_FMT.format(v) for v in fields)
        )
        stream.write(fh_line + "\n")


def write_tracks_file(path: str, records: list[OutputRecord]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        write_tracks(fh, records)


def parse_tracks(path: str) -> list[OutputRecord]:
    """Inverse of :func:`write_tracks` on the retained fields."""
    records: list[OutputRecord] = []
    for lineno, fields in _content_lines(path):
        if len(fields) != 18:
            raise ParseError(
                f"{path}:{lineno}: expected 18 fields, got {len(fields)}"
            )
        try:
            frame = int(fields[0])
            track_id = int(fields[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad frame/id") from None
        if track_id < 0:
            raise ParseError(f"{path}:{lineno}: negative track id {track_id}")
        vals = [
            _parse_float(t, path, lineno, "track value") for t in fields[10:]
        ]
        height, width, length, x, y, z, theta, score = vals
        records.append(
            OutputRecord(
                frame=frame,
                track_id=track_id,
                class_label=fields[2],
                state=np.array([x, y, z, theta, length, width, height]),
                score=score,
                status="confirmed",
            )
        )
    return records


# --- configuration file ---------------------------------------------------

_TRACKER_KEYS = {
    "dt",
    "heading_penalty_mode",
    "cost_kind",
    "gate_threshold",
    "min_hits",
    "max_age",
    "score_floor",
}
_CLASS_KEYS = {"det_var", "kin_var", "q_var", "r_var"}


def _vector(raw: str, n: int, key: str) -> np.ndarray:
    parts = raw.split()
    if len(parts) != n:
        raise ConfigError(f"key '{key}' needs {n} values, got {len(parts)}")
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError:
        raise ConfigError(f"key '{key}' has a non-numeric value") from None
    if not np.isfinite(vals).all():
        raise ConfigError(f"key '{key}' has a non-finite value")
    return vals


def load_config(path: str) -> TrackerConfig:
    """Load and fully validate a tracker configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        strict=True, interpolation=None, inline_comment_prefixes=("#",)
    )
    parser.optionxform = str  # keys are case-sensitive
    try:
        with open(path, "r", encoding="ascii") as fh:
            parser.read_file(fh)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key '{exc.option}' in {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None

    if "tracker" not in parser:
        raise ConfigError(f"{path}: missing [tracker] section")
    tracker = parser["tracker"]
    unknown = set(tracker) - _TRACKER_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)} in [tracker]")
    missing = _TRACKER_KEYS - set(tracker)
    if missing:
        raise ConfigError(f"{path}: missing key(s) {sorted(missing)} in [tracker]")

    def num(key: str) -> float:
        return float(_vector(tracker[key], 1, key)[0])

    classes: dict[str, ClassNoise] = {}
    for section in parser.sections():
        if section == "tracker":
            continue
        if not section.startswith("class."):
            raise ConfigError(f"{path}: unknown section [{section}]")
        label = section[len("class.") :]
        body = parser[section]
        unknown = set(body) - _CLASS_KEYS
        if unknown:
            raise ConfigError(
                f"{path}: unknown key(s) {sorted(unknown)} in [{section}]"
            )
        missing = _CLASS_KEYS - set(body)
        if missing:
            raise ConfigError(
                f"{path}: missing key(s) {sorted(missing)} in [{section}]"
            )
        classes[label] = ClassNoise(
            det_var=_vector(body["det_var"], 7, "det_var"),
            kin_var=_vector(body["kin_var"], 3, "kin_var"),
            q_var=_vector(body["q_var"], 10, "q_var"),
            r_var=_vector(body["r_var"], 7, "r_var"),
        )
    if not classes:
        raise ConfigError(f"{path}: no [class.*] sections")

    try:
        mode = HeadingMode(tracker["heading_penalty_mode"])
    except ValueError:
        raise ConfigError(
            f"{path}: heading_penalty_mode must be one of "
            f"{[m.value for m in HeadingMode]}"
        ) from None
    try:
        kind = CostKind(tracker["cost_kind"])
    except ValueError:
        raise ConfigError(
            f"{path}: cost_kind must be one of {[k.value for k in CostKind]}"
        ) from None

    min_hits = num("min_hits")
    max_age = num("max_age")
    if min_hits != int(min_hits) or max_age != int(max_age):
        raise ConfigError(f"{path}: min_hits/max_age must be integers")

    return TrackerConfig(
        noise=NoiseConfig(dt=num("dt"), classes=classes),
        cost=CostConfig(
            heading_penalty_mode=mode,
            gate_threshold=num("gate_threshold"),
            cost_kind=kind,
        ),
        lifecycle=LifecycleConfig(
            min_hits=int(min_hits),
            max_age=int(max_age),
            score_floor=num("score_floor"),
        ),
    )


def dump_config(cfg: TrackerConfig) -> str:
    """Canonical text form; load_config on it round-trips to 1e-9."""
    out = io.StringIO()
    out.write("[tracker]\n")
    out.write(f"dt = {cfg.noise.dt!r}\n")
    out.write(f"heading_penalty_mode = {cfg.cost.heading_penalty_mode.value}\n")
    out.write(f"cost_kind = {cfg.cost.cost_kind.value}\n")
    out.write(f"gate_threshold = {cfg.cost.gate_threshold!r}\n")
    out.write(f"min_hits = {cfg.lifecycle.min_hits}\n")
    out.write(f"max_age = {cfg.lifecycle.max_age}\n")
    out.write(f"score_floor = {cfg.lifecycle.score_floor!r}\n")
    for label in sorted(cfg.noise.classes):
        cn = cfg.noise.for_class(label)
        out.write(f"\n[class.{label}]\n")
        for key, arr in (
            ("det_var", cn.det_var),
            ("kin_var", cn.kin_var),
            ("q_var", cn.q_var),
            ("r_var", cn.r_var),
        ):
            out.write(f"{key} = " + " ".join(repr(float(v)) for v in arr) + "\n")
    return out.getvalue()


def write_config(path: str, cfg: TrackerConfig) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dump_config(cfg))


def config_hash(cfg: TrackerConfig) -> str:
    """Stable digest of the canonical config text."""
    return hashlib.sha256(dump_config(cfg).encode("ascii")).hexdigest()[:16]


def default_config_path() -> str:
    return os.path.join(os.path.dirname(__file__), "data", "default.cfg")
