"""Command-line experiment runner.

    distcover --algo wvc --gen wvc --gen-args n=256 edge_prob=0.05 --seeds 0..49 --out runs/
    distcover --algo seq-cover --instance example.json
    distcover --algo wvc --sizes 64,256,1024 --seeds 0..29

Exit status is 0 only when every run is feasible and within its ratio.
"""

from __future__ import annotations

import argparse
import ast
import sys

from .experiment import (
    ALGORITHMS,
    GENERATORS,
    ExperimentSpec,
    IncompatibleAlgorithmError,
    run_experiment,
    scaling_table,
)
from .instances import InstanceFormatError, InvalidInstanceError


def parse_seeds(text):
    """``"A..B"`` (inclusive) or a comma-separated list."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def parse_kv(items):
    """``K=V`` pairs; values are read as Python literals when possible."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"expected K=V, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            value = raw
        out[key.strip()] = value
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="distcover", description="Run covering/packing algorithms over seeds.")
    p.add_argument("--algo", required=True, choices=sorted(ALGORITHMS))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", metavar="FILE", help="instance JSON file")
    src.add_argument("--gen", choices=sorted(GENERATORS), help="instance generator")
    p.add_argument("--gen-args", nargs="*", default=[], metavar="K=V", help="generator keyword arguments")
    p.add_argument("--param", nargs="*", default=[], metavar="K=V", help="algorithm keyword arguments (e.g. k=2)")
    p.add_argument("--seeds", type=parse_seeds, default=(0,), help="A..B inclusive, or a comma list")
    p.add_argument("--max-rounds", type=int, default=None, help="round budget (default grows with ln^2 m)")
    p.add_argument("--out", metavar="DIR", help="write runs.<format> and traces/ here")
    p.add_argument("--format", dest="fmt", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.add_argument("--sizes", help="comma-separated sizes: print a round-scaling table instead")
    return p


def _scaling(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    table = scaling_table(args.algo, sizes, len(args.seeds), params=parse_kv(args.param), max_rounds=args.max_rounds)
    print("n,median_rounds,max_rounds,median_over_ln,median_over_ln2,timeouts")
    for r in table:
        print(f"{r.n},{r.median_rounds},{r.max_rounds},{r.median_over_ln:.4f},{r.median_over_ln2:.4f},{r.timeouts}")
    return 0 if all(r.timeouts == 0 for r in table) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.sizes:
            return _scaling(args)
        if args.instance is None and args.gen is None:
            raise ValueError("one of --instance or --gen is required")
        spec = ExperimentSpec(
            algo=args.algo,
            instance=args.instance,
            generator=args.gen,
            gen_args=parse_kv(args.gen_args),
            seeds=args.seeds,
            max_rounds=args.max_rounds,
            out=args.out,
            fmt=args.fmt,
            timing=args.timing,
            params=parse_kv(args.param),
        )
        report = run_experiment(spec)
    except (IncompatibleAlgorithmError, InvalidInstanceError, InstanceFormatError, ValueError, TypeError) as exc:
        print(f"distcover: error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(report.summary)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
