"""Command-line workflows: train, detect, eval, simulate, calibrate-h, serve, replay-journal."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .continual import Journal, UpdatePolicy
from .detector import DetectorConfig, calibrate_threshold
from .engine import Engine, detect_stream
from .errors import VigilError
from .features import FeatureWeights
from .ingest import (
    load_ground_truth,
    parse_stream,
    read_alarms,
    read_trace,
    save_ground_truth,
    write_alarms,
    write_stream,
    write_trace,
)
from .metrics import evaluate
from .nominal import NominalModel, TrainConfig, train
from . import simgen


def _weights(args) -> FeatureWeights:
    return FeatureWeights(w1=args.w1, w2=args.w2, w3=args.w3)


def _add_weight_flags(p: argparse.ArgumentParser):
    p.add_argument("--w1", type=float, default=1.0, help="motion block weight")
    p.add_argument("--w2", type=float, default=1.0, help="location block weight")
    p.add_argument("--w3", type=float, default=1.0, help="appearance block weight")


def _add_detector_flags(p: argparse.ArgumentParser):
    p.add_argument("--h", type=float, default=10.0, help="alarm threshold on the running statistic")
    p.add_argument("--n-consec", type=int, default=5, help="consecutive decreases that close an alarm")
    p.add_argument("--evidence-cap", type=float, default=1e6, help="clamp on |delta| per frame")
    p.add_argument("--exponent", type=int, default=None, help="evidence exponent (default: model dimensionality)")
    p.add_argument("--delta-floor", type=float, default=None, help="evidence for object-free frames (default: -d_alpha^m)")
    p.add_argument("--single-shot-threshold", type=float, default=0.0)


def _detector_cfg(args) -> DetectorConfig:
    return DetectorConfig(
        h=args.h,
        n_consec=args.n_consec,
        evidence_cap=args.evidence_cap,
        m=args.exponent,
        delta_floor=args.delta_floor,
        single_shot_threshold=args.single_shot_threshold,
    )


def cmd_train(args) -> int:
    cfg = TrainConfig(
        k=args.knn,
        alpha=args.alpha,
        split_fraction=args.split_fraction,
        rng_seed=args.seed,
        max_reference_size=args.max_reference_size,
        normalize=args.normalize,
    )
    frames = parse_stream(args.input, weights=_weights(args))
    vectors = [f.objects for f in frames if f.n_objects > 0]
    if not vectors:
        print("error: no object vectors in input stream", file=sys.stderr)
        return 2
    X = np.vstack(vectors)
    model = train(X, cfg)
    model.save_path(args.output)
    s = model.summary()
    print(
        f"trained: M={X.shape[0]} M1={s['calibration_size']} M2={s['reference_size']} "
        f"m={s['m']} k={s['k']} alpha={s['alpha']} d_alpha={s['d_alpha']:.6g}"
    )
    print(f"model written to {args.output}")
    return 0


def cmd_detect(args) -> int:
    model = NominalModel.load_path(args.model)
    cfg = _detector_cfg(args)
    policy = None
    if args.auto_insert:
        policy = UpdatePolicy(auto_insert_on_zero=True, auto_insert_stride=args.auto_insert_stride)
    frames = parse_stream(args.input, weights=_weights(args))
    run = detect_stream(model, frames, cfg, policy=policy)
    write_trace(run.trace, args.trace)
    write_alarms(run.alarms, args.output)
    closed = sum(1 for a in run.alarms if a.status != "open")
    print(f"processed {len(run.trace)} frames: {len(run.alarms)} alarms ({closed} closed)")
    print(f"alarms -> {args.output}, trace -> {args.trace}")
    return 0


def cmd_eval(args) -> int:
    trace = read_trace(args.trace)
    alarms = [a for a in read_alarms(args.alarms)] if args.alarms else []
    gt = load_ground_truth(args.gt)
    col = 2 if args.score == "s" else 1
    scores = [row[col] for row in trace]
    report = evaluate(scores, alarms, gt, score_mode=args.score)
    print(report.format_text())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
        print(f"report -> {args.output}")
    if args.roc:
        with open(args.roc, "w", encoding="utf-8") as f:
            f.write(report.roc_table() + "\n")
        print(f"roc table -> {args.roc}")
    return 0


def cmd_simulate(args) -> int:
    if args.preset == "nominal":
        scenario = simgen.nominal_scenario(seed=args.seed, frames=args.frames, object_rate=args.object_rate)
    elif args.preset == "anomaly":
        seg_start = args.frames * 3 // 5
        scenario = simgen.anomaly_scenario(
            seed=args.seed,
            frames=args.frames,
            segment=(seg_start, seg_start + args.segment_length - 1),
            separation=args.separation,
            object_rate=args.object_rate,
        )
    else:  # recurring
        scenario = simgen.recurring_scenario(
            seed=args.seed,
            occurrences=args.occurrences,
            occ_len=args.occ_len,
            gap=args.gap,
            separation=args.separation,
        )
    frames, gt = simgen.generate(scenario)
    write_stream(frames, args.output, n_classes=scenario.n_classes)
    if args.gt_out:
        save_ground_truth(gt, args.gt_out)
    total_objects = sum(f.n_objects for f in frames)
    print(f"generated {len(frames)} frames, {total_objects} objects -> {args.output}")
    if args.gt_out:
        print(f"ground truth ({len(gt.intervals)} intervals) -> {args.gt_out}")
    return 0


def cmd_calibrate_h(args) -> int:
    model = NominalModel.load_path(args.model)
    cfg = _detector_cfg(args)
    frames = parse_stream(args.input, weights=_weights(args))
    run = detect_stream(model, frames, cfg)
    deltas = [row[1] for row in run.trace]
    h = calibrate_threshold(deltas, cfg, target_alarms=args.target_alarms)
    print(f"calibrated h = {h!r} (target <= {args.target_alarms} alarms over {len(deltas)} nominal frames)")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(repr(h) + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = NominalModel.load_path(args.model)
    cfg = _detector_cfg(args)
    journal = Journal(args.journal) if args.journal else None
    policy = UpdatePolicy(
        auto_insert_on_zero=args.auto_insert,
        auto_insert_stride=args.auto_insert_stride,
        feedback_sample_fraction=args.sample_fraction,
    )
    engine = Engine(model, cfg, policy=policy, journal=journal, weights=_weights(args))
    app = create_app(engine, auth_token=args.auth_token)
    print(f"serving model {args.model} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay_journal(args) -> int:
    model = NominalModel.load_path(args.model)
    before = model.reference_size
    Journal.replay(args.journal, model)
    model.save_path(args.output)
    print(
        f"replayed journal {args.journal}: reference {before} -> {model.reference_size}, "
        f"digest {model.state_digest()[:16]}..."
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vigil", description="streaming kNN/CUSUM anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a nominal model from a feature stream")
    p.add_argument("-i", "--input", required=True, help="feature-frame stream file")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--knn", type=int, default=3, help="k for the kNN distance")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for d_alpha")
    p.add_argument("--split-fraction", type=float, default=0.2, help="fraction held out for calibration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-reference-size", type=int, default=None)
    p.add_argument("--normalize", action="store_true", help="fit per-dimension min-max scaling")
    _add_weight_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run the sequential detector over a stream")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-o", "--output", required=True, help="alarms file to write")
    p.add_argument("--trace", required=True, help="per-frame (t, delta, s) trace file to write")
    p.add_argument("--auto-insert", action="store_true", help="insert zero-statistic vectors while detecting")
    p.add_argument("--auto-insert-stride", type=int, default=30)
    _add_detector_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score a detection run against ground truth")
    p.add_argument("--trace", required=True)
    p.add_argument("--alarms", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--score", choices=("s", "delta"), default="s", help="which trace column feeds the AUC")
    p.add_argument("-o", "--output", default=None, help="write the report as JSON")
    p.add_argument("--roc", default=None, help="write the ROC curve as a TSV table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="generate a synthetic stream plus ground truth")
    p.add_argument("--preset", choices=("nominal", "anomaly", "recurring"), default="anomaly")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--gt-out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=1500)
    p.add_argument("--object-rate", type=float, default=1.5)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--segment-length", type=int, default=80)
    p.add_argument("--occurrences", type=int, default=5)
    p.add_argument("--occ-len", type=int, default=40)
    p.add_argument("--gap", type=int, default=160)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate-h", help="pick the smallest h meeting a false-alarm target")
    p.add_argument("-i", "--input", required=True, help="held-out nominal stream")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--target-alarms", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="also write the bare threshold to this file")
    _add_detector_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_calibrate_h)

    p = sub.add_parser("serve", help="run the labeling/ingestion service")
    p.add_argument("-m", "--model", default=os.environ.get("VIGIL_MODEL"), required="VIGIL_MODEL" not in os.environ)
    p.add_argument("--host", default=os.environ.get("VIGIL_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("VIGIL_PORT", "8321")))
    p.add_argument("--journal", default=os.environ.get("VIGIL_JOURNAL"))
    p.add_argument("--auth-token", default=os.environ.get("VIGIL_AUTH_TOKEN"))
    p.add_argument("--auto-insert", action="store_true")
    p.add_argument("--auto-insert-stride", type=int, default=30)
    p.add_argument("--sample-fraction", type=float, default=0.2)
    _add_detector_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay-journal", help="rebuild a model from its initial state plus a journal")
    p.add_argument("-m", "--model", required=True, help="initial model file")
    p.add_argument("-j", "--journal", required=True)
    p.add_argument("-o", "--output", required=True, help="reconstructed model file")
    p.set_defaults(func=cmd_replay_journal)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VigilError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
