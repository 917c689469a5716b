"""Command-line interface: ``planereg detect|register|toy-bench|eval``."""

import argparse
import json
import os
import sys

from .detection import PlaneDetector
from .exceptions import NoMotion, Underconstrained
from .io import (
    read_correspondences,
    read_manifest,
    read_ply,
    read_transform,
    resolve_up,
    write_benchmark_csv,
    write_matches,
    write_planes,
    write_transform,
)
from .metrics import VALID_THRESHOLD, PairResult, aggregate, correspondence_error
from .registration import PlaneRegistration

EXIT_ERROR = 1
EXIT_NO_MOTION = 2


class _Fail(Exception):
    def __init__(self, code, payload):
        self.code = code
        self.payload = payload


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    return cfg


def _detector(cfg, seed):
    params = dict(cfg.get("detect", cfg))
    params = {k: v for k, v in params.items() if k in PlaneDetector().get_params()}
    if seed is not None:
        params["random_state"] = seed
    return PlaneDetector(**params)


def cmd_detect(args):
    cfg = _load_config(args.config)
    points, colors = read_ply(args.cloud)
    det = _detector(cfg, args.seed).fit(points, colors=colors)
    write_planes(args.out, det.planes_)
    return 0


def cmd_register(args):
    cfg = _load_config(args.config)
    detector = _detector(cfg, args.seed)
    reg_params = {k: v for k, v in cfg.get("register", {}).items()
                  if k in PlaneRegistration().get_params()}
    reg = PlaneRegistration(detector=detector, random_state=args.seed, **reg_params)
    points_a, colors_a = read_ply(args.a)
    points_b, colors_b = read_ply(args.b)
    prior = read_transform(args.prior) if args.prior else None
    try:
        reg.fit(points_a, points_b, up_a=args.up_a, up_b=args.up_b, prior=prior,
                colors_a=colors_a, colors_b=colors_b)
    except NoMotion as exc:
        raise _Fail(EXIT_NO_MOTION, {"error": "NoMotion", "reason": exc.reason,
                                     "missing": list(exc.missing)}) from None
    except Underconstrained as exc:
        raise _Fail(EXIT_NO_MOTION, {"error": "Underconstrained", "reason": "insufficient constraints",
                                     "missing": list(exc.missing)}) from None
    write_transform(args.out, reg.motion_)
    if args.matches:
        write_matches(args.matches, reg.matches_)
    return 0


def cmd_toy_bench(args):
    from .toy import run_benchmark

    levels = [float(v) for v in args.levels.split(",") if v.strip()]
    levels = [int(v) if v.is_integer() else v for v in levels]
    rows = run_benchmark(levels, args.trials, seed=args.seed, n_jobs=args.threads)
    write_benchmark_csv(rows, args.out if args.out else sys.stdout)
    return 0


def _eval_one(transform_path, corr_path, elapsed_ms=0.0):
    corr = read_correspondences(corr_path)
    if transform_path is None or not os.path.exists(transform_path):
        return PairResult(False, None, elapsed_ms)
    return PairResult(True, correspondence_error(read_transform(transform_path), corr), elapsed_ms)


def cmd_eval(args):
    if args.manifest:
        results = [_eval_one(e["transform"], e["correspondences"], e["elapsed_ms"])
                   for e in read_manifest(args.manifest)]
        report = aggregate(results, args.threshold)
        json.dump(report.as_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    if len(args.files) != 2:
        raise ValueError("eval needs <T_est.json> <corr.json> or --manifest")
    corr = read_correspondences(args.files[1])
    err = correspondence_error(read_transform(args.files[0]), corr)
    json.dump({"corr_error": err, "valid": err < args.threshold}, sys.stdout)
    sys.stdout.write("\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="planereg", description="Plane-based registration of two views.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect planes in a PLY cloud")
    d.add_argument("cloud")
    d.add_argument("--config", help="JSON object of detector parameters")
    d.add_argument("--out", default="-", help="planes JSON (default: stdout)")
    d.add_argument("--seed", type=int, default=None)
    d.set_defaults(func=cmd_detect)

    r = sub.add_parser("register", help="estimate the motion mapping view a into view b")
    r.add_argument("a")
    r.add_argument("b")
    r.add_argument("--up-a", default="from-planes", help="'from-planes', 'x,y,z' or 'file:<path>'")
    r.add_argument("--up-b", default="from-planes")
    r.add_argument("--prior", help="transform JSON used as the tracking prior")
    r.add_argument("--out", default="-", help="transform JSON (default: stdout)")
    r.add_argument("--matches", help="write the match set as JSON")
    r.add_argument("--config", help="JSON with optional 'detect' and 'register' parameter objects")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_register)

    t = sub.add_parser("toy-bench", help="noise sweep on the synthetic room")
    t.add_argument("--levels", default="0,5,10,20,30,50,80,100")
    t.add_argument("--trials", type=int, default=10000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", help="CSV path (default: stdout)")
    t.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    t.set_defaults(func=cmd_toy_bench)

    e = sub.add_parser("eval", help="correspondence error of estimated transforms")
    e.add_argument("files", nargs="*", metavar="FILE", help="<T_est.json> <corr.json>")
    e.add_argument("--manifest", help="batch mode: JSON list of transform/correspondence entries")
    e.add_argument("--threshold", type=float, default=VALID_THRESHOLD)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        json.dump(exc.payload, sys.stderr)
        sys.stderr.write("\n")
        return exc.code
    except Exception as exc:  # noqa: BLE001 - reported as JSON and a nonzero exit
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "offset", None) is not None:
            payload["offset"] = exc.offset
        json.dump(payload, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
