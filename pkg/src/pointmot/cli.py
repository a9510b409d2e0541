"""Command-line entry point: simulate, track, eval.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .assoc import CENTROID, MUTUAL_NN, CostConfig
from .errors import ConfigError, PointmotError
from .geometry import AlignConfig
from .interchange import load_sequence
from .metrics import DIST3D, IOU, EvalConfig, evaluate
from .motfile import read_track_file, write_track_file
from .simulator import ObjectSpec, SceneConfig, generate, make_scene_config, save_scene
from .tracker import CLOSED_FORM, ITERATIVE, TrackerConfig, WindowSpec, track_sequence

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _scene_config_from_json(obj: dict, seed: int | None) -> SceneConfig:
    window = WindowSpec(**obj.get("window", {"window": 10, "overlap": 5}))
    objects = [
        ObjectSpec(
            position=tuple(o["position"]),
            radius=float(o["radius"]),
            label=str(o.get("label", f"object-{k}")),
            visible=[tuple(iv) for iv in o["visible"]] if o.get("visible") else None,
        )
        for k, o in enumerate(obj.get("objects", []))
    ]
    return SceneConfig(
        name=str(obj.get("name", "scene")),
        frame_count=int(obj.get("frame_count", 20)),
        image_dims=tuple(obj.get("image_dims", (96, 128))),
        objects=objects,
        camera=obj.get("camera", {"kind": "orbit"}),
        noise_sigma=float(obj.get("noise_sigma", 0.0)),
        drift_rotation_deg=float(obj.get("drift_rotation_deg", 10.0)),
        drift_translation=float(obj.get("drift_translation", 0.2)),
        window=window,
        seed=int(seed if seed is not None else obj.get("seed", 0)),
    )


def cmd_simulate(args) -> int:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            print(f"config not found: {path}", file=sys.stderr)
            return DATA_ERROR
        try:
            config = _scene_config_from_json(json.loads(path.read_text()), args.seed)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            print(f"invalid scene config: {e}", file=sys.stderr)
            return DATA_ERROR
    else:
        config = make_scene_config(
            n_objects=args.objects, n_frames=args.frames, seed=args.seed or 0
        )
    seq, gt, _ = generate(config)
    out = Path(args.out)
    save_scene(seq, gt, out)
    n_dets = sum(len(seq.detections(f)) for f in seq.frame_ids())
    print(
        f"wrote {out}: {config.frame_count} frames, {len(config.objects)} objects, "
        f"{n_dets} detections, {len(seq.manifest.window_groups)} window groups"
    )
    return 0


def cmd_track(args) -> int:
    spec = WindowSpec(window=args.window_size, overlap=args.overlap)
    try:
        spec.validate()
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return USAGE_ERROR
    if args.memory_frames < 0 or args.gate <= 0:
        print("usage error: --memory-frames must be >= 0 and --gate > 0", file=sys.stderr)
        return USAGE_ERROR
    config = TrackerConfig(
        window=spec,
        memory_frames=args.memory_frames,
        gate=args.gate,
        cost=CostConfig(mode=args.cost_mode),
        align=AlignConfig(seed=args.seed),
        align_estimator=args.align_mode,
    )
    seq = load_sequence(args.sequence)
    table, diag = track_sequence(seq, config)
    write_track_file(table, args.out)
    diag_path = args.diagnostics or (str(args.out) + ".diag.json")
    Path(diag_path).write_text(json.dumps(diag.to_json(), indent=1) + "\n")
    print(
        f"tracked {seq.manifest.frame_count} frames -> {args.out}: "
        f"{len(table.track_ids())} tracks, {len(table)} rows, "
        f"{diag.fallback_count} alignment fallbacks, "
        f"{diag.dropped_detections} dropped detections"
    )
    return 0


def cmd_eval(args) -> int:
    if not (1 <= args.alpha_steps <= 19):
        print("usage error: --alpha-steps must be in 1..19", file=sys.stderr)
        return USAGE_ERROR
    alphas = tuple(round(a * 0.05, 2) for a in range(1, args.alpha_steps + 1))
    config = EvalConfig(similarity=args.similarity, alphas=alphas)
    gt = read_track_file(args.gt)
    pred = read_track_file(args.pred)
    report = evaluate(gt, pred, config)
    for key, value in (
        ("HOTA", report.hota),
        ("DetA", report.deta),
        ("AssA", report.assa),
        ("IDF1", report.idf1),
    ):
        print(f"{key} {value:.6f}")
    print(f"MT {report.mt}")
    print(f"ML {report.ml}")
    print(f"Frag {report.frag}")
    if report.vacuous:
        print("note: both tables empty; ratios are vacuously 1.0")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=1) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointmot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic sequence plus gt.txt")
    p.add_argument("--config", help="scene config JSON (defaults to a 20-frame, 3-object scene)")
    p.add_argument("--out", required=True, help="output sequence directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--frames", type=int, default=20)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the tracker over a sequence directory")
    p.add_argument("sequence")
    p.add_argument("--out", required=True, help="prediction file to write")
    p.add_argument("--diagnostics", help="diagnostics JSON path (default <out>.diag.json)")
    p.add_argument("--window-size", type=int, default=10)
    p.add_argument("--overlap", type=int, default=5)
    p.add_argument("--memory-frames", type=int, default=30)
    p.add_argument("--gate", type=float, default=0.5)
    p.add_argument("--align-mode", choices=[CLOSED_FORM, ITERATIVE], default=CLOSED_FORM)
    p.add_argument("--cost-mode", choices=[CENTROID, MUTUAL_NN], default=CENTROID)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a prediction file against ground truth")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--similarity", choices=[IOU, DIST3D], default=IOU)
    p.add_argument("--alpha-steps", type=int, default=19)
    p.add_argument("--report", help="write a JSON report here")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PointmotError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
