"""Command-line interface: track, simulate, evaluate, calibrate, plot-data.

Exit codes: 0 success, 2 input/validation failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import io_formats, metrics, simulator
from .errors import NumericError, UgtrackError
from .kalman import LabeledClassData, calibrate, wrap_angle
from .pipeline import run_sequence

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _cmd_track(args) -> int:
    start = time.monotonic()
    cfg = io_formats.load_config(args.config)
    rows = io_formats.parse_detections(args.detections)
    poses = io_formats.parse_poses(args.poses)
    frames = io_formats.assemble_frames(rows, poses, cfg.noise)
    records = run_sequence(frames, cfg)
    io_formats.write_tracks_file(args.out, records)

    born = len({r.track_id for r in records})
    print(f"detections: {args.detections}")
    print(f"poses: {args.poses}")
    print(f"config: {args.config} (hash {io_formats.config_hash(cfg)})")
    print(f"frames processed: {len(frames)}")
    print(f"tracks emitted: {born}")
    print(f"output records: {len(records)}")
    print(f"wall time: {time.monotonic() - start:.3f}s")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenes = simulator.load_scenarios(args.scenario)
    os.makedirs(args.out_dir, exist_ok=True)
    multi = len(scenes) > 1
    for idx, scene in enumerate(scenes):
        scene_dir = (
            os.path.join(args.out_dir, f"scene_{idx:02d}") if multi else args.out_dir
        )
        os.makedirs(scene_dir, exist_ok=True)
        truth = simulator.generate_truth(scene)
        rows = simulator.render_detections(scene, truth)
        io_formats.write_detections(os.path.join(scene_dir, "detections.txt"), rows)
        io_formats.write_poses(
            os.path.join(scene_dir, "poses.txt"), simulator.identity_poses(scene)
        )
        io_formats.write_tracks_file(os.path.join(scene_dir, "truth.txt"), truth)
    print(f"wrote {len(scenes)} scene(s) under {args.out_dir}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    pred = io_formats.parse_tracks(args.tracks)
    truth = io_formats.parse_tracks(args.truth)
    if not truth:
        print("error: ground truth is empty", file=sys.stderr)
        return EXIT_INPUT
    truth_frames = {r.frame for r in truth}
    pred_frames = {r.frame for r in pred}
    if pred_frames and not pred_frames <= truth_frames:
        print(
            f"error: prediction frames {min(pred_frames)}..{max(pred_frames)} "
            f"outside truth frames {min(truth_frames)}..{max(truth_frames)}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    result = metrics.evaluate(truth, pred, args.radius)
    lines = [
        f"GT {result.gt_total}",
        f"MOTA {result.mota:.6f}",
        f"MOTP {result.motp:.6f}",
        f"FP {result.fp}",
        f"FN {result.fn}",
        f"IDSW {result.idsw}",
        f"recall {result.recall:.6f}",
    ]
    if args.amota:
        sweep = metrics.amota(truth, pred, args.radius)
        lines.append(f"AMOTA {sweep.amota:.6f}")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(report)
    return EXIT_OK


def _match_detections_to_truth(det_rows, truth, radius=2.0):
    """Per frame, greedily pair detections with same-class truth boxes."""
    by_frame_truth = {}
    for rec in truth:
        by_frame_truth.setdefault(rec.frame, []).append(rec)
    pairs = []  # (class, det_state, truth_state)
    for frame in sorted({r.frame for r in det_rows}):
        dets = [r for r in det_rows if r.frame == frame]
        gts = list(by_frame_truth.get(frame, []))
        cands = []
        for i, d in enumerate(dets):
            for j, g in enumerate(gts):
                if d.class_label != g.class_label:
                    continue
                dist = math.hypot(
                    d.state[0] - g.state[0], d.state[1] - g.state[1]
                )
                if dist <= radius:
                    cands.append((dist, i, j))
        cands.sort()
        used_d, used_g = set(), set()
        for _, i, j in cands:
            if i in used_d or j in used_g:
                continue
            used_d.add(i)
            used_g.add(j)
            pairs.append((dets[i].class_label, dets[i].state, gts[j].state))
    return pairs


def _cmd_calibrate(args) -> int:
    det_rows = io_formats.parse_detections(args.detections)
    truth = io_formats.parse_tracks(args.truth)
    pairs = _match_detections_to_truth(det_rows, truth)

    tracks_by_obj: dict[tuple[str, int], list] = {}
    for rec in sorted(truth, key=lambda r: (r.track_id, r.frame)):
        tracks_by_obj.setdefault((rec.class_label, rec.track_id), []).append(
            rec.state
        )
    labeled: dict[str, dict] = {}
    for (label, _oid), states in tracks_by_obj.items():
        entry = labeled.setdefault(label, {"tracks": [], "pairs": []})
        entry["tracks"].append(np.asarray(states))
    for label, det_state, truth_state in pairs:
        if label in labeled:
            labeled[label]["pairs"].append((det_state, truth_state))

    data = {
        label: LabeledClassData(
            truth_tracks=entry["tracks"], matched_pairs=entry["pairs"]
        )
        for label, entry in labeled.items()
    }
    noise = calibrate(data, args.dt)

    # wrap the noise model into a complete, loadable tracker config
    from .costs import CostConfig
    from .lifecycle import LifecycleConfig
    from .pipeline import TrackerConfig

    cfg = TrackerConfig(
        noise=noise, cost=CostConfig(), lifecycle=LifecycleConfig()
    )
    io_formats.write_config(args.out, cfg)
    print(f"calibrated {len(noise.classes)} class(es) -> {args.out}")
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    cfg = io_formats.load_config(args.config)
    det_rows = io_formats.parse_detections(args.detections)
    poses = io_formats.parse_poses(args.poses)
    frames = io_formats.assemble_frames(det_rows, poses, cfg.noise)
    records = run_sequence(frames, cfg)
    truth = io_formats.parse_tracks(args.truth) if args.truth else []

    truth_obj = [r for r in truth if r.track_id == args.object]
    if args.truth and not truth_obj:
        print(f"error: truth object {args.object} not found", file=sys.stderr)
        return EXIT_INPUT

    if truth_obj:
        # find the predicted track that covers this truth object best
        match_votes: dict[int, int] = {}
        for fm in metrics.match_sequences(truth_obj, records, radius=3.0):
            for gid, pid, _ in fm.pairs:
                match_votes[pid] = match_votes.get(pid, 0) + 1
        if not match_votes:
            print(
                f"error: no track covers truth object {args.object}",
                file=sys.stderr,
            )
            return EXIT_INPUT
        track_id = max(match_votes, key=lambda k: (match_votes[k], -k))
    else:
        track_id = args.object
        if track_id not in {r.track_id for r in records}:
            print(f"error: track id {track_id} not found", file=sys.stderr)
            return EXIT_INPUT

    track_recs = {r.frame: r for r in records if r.track_id == track_id}
    truth_by_frame = {r.frame: r for r in truth_obj}
    det_by_frame: dict[int, np.ndarray] = {}
    for frame, tr in truth_by_frame.items():
        best = None
        for row in det_rows:
            if row.frame != frame or row.class_label != tr.class_label:
                continue
            dist = math.hypot(
                row.state[0] - tr.state[0], row.state[1] - tr.state[1]
            )
            if dist <= 3.0 and (best is None or dist < best[0]):
                best = (dist, row.state)
        if best is not None:
            det_by_frame[frame] = best[1]

    all_frames = sorted(set(track_recs) | set(truth_by_frame))
    lines = [
        "# frame truth_x truth_y truth_z det_x det_y det_z "
        "track_x track_y track_z mean_cov"
    ]
    for frame in all_frames:
        cols = [str(frame)]
        for source in (
            truth_by_frame.get(frame),
            det_by_frame.get(frame),
        ):
            if source is None:
                cols += ["nan", "nan", "nan"]
            else:
                state = source.state if hasattr(source, "state") else source
                cols += [f"{v:.6f}" for v in np.asarray(state)[:3]]
        rec = track_recs.get(frame)
        if rec is None:
            cols += ["nan", "nan", "nan", "nan"]
        else:
            cols += [f"{v:.6f}" for v in rec.state[:3]]
            cols.append(f"{rec.mean_cov:.6f}")
        lines.append(" ".join(cols))
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(all_frames)} rows for track {track_id} -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ugtrack",
        description="Uncertainty-guided 3D multi-object tracking toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over a detection file")
    p.add_argument("--detections", required=True, help="detection file")
    p.add_argument("--poses", required=True, help="ego pose file")
    p.add_argument("--config", required=True, help="tracker config file")
    p.add_argument("--out", required=True, help="output track file")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("simulate", help="generate synthetic scenes")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score tracks against ground truth")
    p.add_argument("--tracks", required=True, help="predicted track file")
    p.add_argument("--truth", required=True, help="ground-truth track file")
    p.add_argument("--radius", type=float, default=metrics.DEFAULT_RADIUS)
    p.add_argument("--amota", action="store_true", help="also sweep AMOTA")
    p.add_argument("--out", help="optional report file")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("calibrate", help="estimate noise from labeled data")
    p.add_argument("--truth", required=True, help="ground-truth track file")
    p.add_argument("--detections", required=True, help="detection file")
    p.add_argument("--out", required=True, help="output config file")
    p.add_argument("--dt", type=float, default=0.1, help="frame period [s]")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser(
        "plot-data", help="per-frame trajectory and uncertainty table"
    )
    p.add_argument("--detections", required=True, help="detection file")
    p.add_argument("--poses", required=True, help="ego pose file")
    p.add_argument("--config", required=True, help="tracker config file")
    p.add_argument("--truth", help="ground-truth track file")
    p.add_argument("--object", type=int, required=True, help="object id")
    p.add_argument("--out", required=True, help="output table file")
    p.set_defaults(func=_cmd_plot_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UgtrackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
