"""Command-line surface: synth, infer, eval, check, targets.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import EngineError
from .graph import build_schedule, default_hand_tree, graph_from_json
from .grids import read_tensor, write_tensor
from .inference import InferOptions, infer, run_bp
from .metrics import DEFAULT_SIGMAS, curve_report, pck
from .oracle import EnumerationBudget, exact_marginals_bruteforce, random_potentials
from .potentials import KeypointSet, load_keypoints, make_kernel_targets, make_unary_targets
from .synth import CorruptionConfig, generate_dataset


def _load_graph(path):
    if path is None:
        return default_hand_tree()
    with open(path) as f:
        return graph_from_json(json.load(f))


def cmd_synth(args) -> int:
    if args.n < 0:
        print("error: --n must be >= 0", file=sys.stderr)
        return 2
    cfg = CorruptionConfig(
        occluded_fraction=args.occlusion,
        distractor_peaks=args.distractors,
        noise_amplitude=args.noise,
        peak_sigma=args.peak_sigma,
        seed=args.seed,
    )
    generate_dataset(args.n, cfg, args.out)
    print(f"{args.out}/manifest.json")
    return 0


def cmd_infer(args) -> int:
    if not args.unary_only and args.kernels is None:
        print("error: --kernels is required unless --unary-only is set", file=sys.stderr)
        return 2
    unary = read_tensor(args.unary)
    graph = _load_graph(args.graph)
    opts = InferOptions(
        unary_only=args.unary_only,
        shared_kernels=args.shared_kernels,
        conv_path=args.conv,
    )
    kernels = None if args.unary_only else read_tensor(args.kernels)
    result = infer(unary, kernels, graph, opts)
    write_tensor(result.marginals, args.out_marginals)
    preds = {
        "cells": [[p.row, p.col] for p in result.predictions],
        "points": [[p.col, p.row] for p in result.predictions],
        "values": list(result.max_values),
    }
    with open(args.out_predictions, "w") as f:
        json.dump(preds, f, indent=2)
        f.write("\n")
    print(f"wrote {args.out_marginals} and {args.out_predictions}")
    return 0


def cmd_eval(args) -> int:
    if len(args.pred) != len(args.gt):
        print(
            f"error: got {len(args.pred)} --pred but {len(args.gt)} --gt", file=sys.stderr
        )
        return 2
    preds, gts, norms = [], [], []
    for pred_path, gt_path in zip(args.pred, args.gt):
        with open(pred_path) as f:
            pd = json.load(f)
        if "points" not in pd:
            raise EngineError(f"{pred_path}: predictions JSON has no points")
        preds.append(KeypointSet(np.asarray(pd["points"], dtype=np.float64)))
        kp, side = load_keypoints(gt_path)
        gts.append(kp)
        norms.append(side if side is not None else args.norm_len)
    sigmas = tuple(args.sigmas) if args.sigmas else DEFAULT_SIGMAS
    curve = pck(preds, gts, norms, sigmas)
    report = curve_report(curve)
    with open(args.out, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("sigma," + ",".join(f"{s:g}" for s in curve.sigmas) + "\n")
            f.write("pck," + ",".join(f"{v:.6f}" for v in curve.values) + "\n")
    for s, v in zip(curve.sigmas, curve.values):
        print(f"pck@{s:g} = {v:.4f}")
    return 0


def cmd_check(args) -> int:
    budget = EnumerationBudget(args.budget)
    worst = 0.0
    for trial in range(args.trials):
        seed = args.seed + trial
        ps = random_potentials(seed, args.nodes, args.grid, args.kernel)
        reference = exact_marginals_bruteforce(ps, budget)
        result = run_bp(ps)
        denom = np.maximum(np.abs(reference.data), 1e-300)
        dev = float(np.max(np.abs(result.marginals.data - reference.data) / denom))
        worst = max(worst, dev)
        if dev > args.tol:
            print(f"FAIL seed {seed}: max relative deviation {dev:.3e} > {args.tol:g}")
            return 1
    print(f"OK: {args.trials} trials, max relative deviation {worst:.3e}")
    return 0


def cmd_targets(args) -> int:
    kp, _ = load_keypoints(args.keypoints)
    graph = _load_graph(args.graph)
    if len(kp) != graph.num_nodes:
        raise EngineError(f"expected {graph.num_nodes} keypoints, found {len(kp)}")
    schedule = build_schedule(graph)
    unary = make_unary_targets(kp, args.rows, args.cols, args.sigma)
    kernels = make_kernel_targets(kp, schedule, args.ksize, args.sigma)
    write_tensor(unary, args.out_unary)
    write_tensor(kernels, args.out_kernels)
    print(f"wrote {args.out_unary} and {args.out_kernels}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agmn")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--occlusion", type=float, default=0.0)
    s.add_argument("--distractors", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--peak-sigma", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("infer", help="run inference on score maps + kernels")
    s.add_argument("--unary", required=True)
    s.add_argument("--kernels")
    s.add_argument("--graph")
    s.add_argument("--out-marginals", required=True)
    s.add_argument("--out-predictions", required=True)
    s.add_argument("--unary-only", action="store_true")
    s.add_argument("--shared-kernels", action="store_true")
    s.add_argument("--conv", choices=("direct", "fft"), default="direct")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="PCK evaluation of prediction files")
    s.add_argument("--pred", action="append", required=True)
    s.add_argument("--gt", action="append", required=True)
    s.add_argument("--norm-len", type=float, default=46.0)
    s.add_argument("--sigmas", type=float, nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("check", help="engine vs brute-force equivalence trials")
    s.add_argument("--nodes", type=int, default=3)
    s.add_argument("--grid", type=int, default=5)
    s.add_argument("--kernel", type=int, default=3)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--budget", type=int, default=EnumerationBudget().max_configs)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("targets", help="build unary and kernel target stacks")
    s.add_argument("--keypoints", required=True)
    s.add_argument("--graph")
    s.add_argument("--rows", type=int, default=46)
    s.add_argument("--cols", type=int, default=46)
    s.add_argument("--ksize", type=int, default=45)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--out-unary", required=True)
    s.add_argument("--out-kernels", required=True)
    s.set_defaults(func=cmd_targets)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (EngineError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
