"""Command-line harness: invariant suites, timing sweeps, figure CSVs.

Exit codes: 0 success, 1 invariant failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .bench import MIN_REPS, MIN_WARMUP, BenchResult, run_cells
from .config import MODES, TnoConfig, read_kv_config
from .figures import FIGURE_KINDS, emit
from .verify import SUITES, run_suite, validate_kernel_file

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="toepkit",
        description="Fast Toeplitz sequence operators: verification, benchmarks, figures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the invariant suites")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", help="also write the report to this file")
    p_verify.add_argument(
        "--kernel-csv", help="additionally validate a serialized kernel file"
    )

    p_bench = sub.add_parser("bench", help="time the operator modes")
    p_bench.add_argument("--mode", default="baseline",
                         help=f"comma list from {','.join(MODES)}")
    p_bench.add_argument("--n", default="2048", help="comma list of sequence lengths")
    p_bench.add_argument("--d", type=int, default=64)
    p_bench.add_argument("--r", type=int, default=64)
    p_bench.add_argument("--m", type=int, default=32)
    p_bench.add_argument("--lambda", dest="lam", type=float, default=0.99)
    p_bench.add_argument("--degree", type=int, default=1)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--reps", type=int, default=MIN_REPS)
    p_bench.add_argument("--warmup", type=int, default=MIN_WARMUP)
    p_bench.add_argument("--threads", type=int, default=1,
                         help="parallelism across (mode, n) cells; timed regions stay single-threaded")
    p_bench.add_argument("--out", help="directory for the results CSV")
    p_bench.add_argument("--config", help="flat key=value config file (flags override it)")

    p_fig = sub.add_parser("figures", help="emit figure CSVs")
    p_fig.add_argument("which", choices=list(FIGURE_KINDS))
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.add_argument("--out", default="figures-out")

    return parser


def _cmd_verify(args):
    extra = []
    ok_file = True
    if args.kernel_csv:
        ok_file, extra = validate_kernel_file(args.kernel_csv)
    ok, lines = run_suite(args.suite, seed=args.seed)
    lines = extra + lines
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK if (ok and ok_file) else EXIT_INVARIANT


def _cmd_bench(args):
    modes = [m.strip() for m in args.mode.split(",") if m.strip()]
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}; choose from {MODES}")
    n_list = [int(tok) for tok in args.n.split(",") if tok.strip()]
    if not n_list:
        raise ValueError("empty --n list")

    base = {}
    if args.config:
        base = read_kv_config(args.config)
        if "lambda" in base:
            base["lam"] = base.pop("lambda")
        base.pop("mode", None)
        base.pop("n", None)
    cfg = TnoConfig(
        n=max(n_list),
        d=int(base.get("d", args.d)),
        r=int(base.get("r", args.r)),
        m=int(base.get("m", args.m)),
        lam=float(base.get("lam", args.lam)),
        degree=int(base.get("degree", args.degree)),
    )
    results, slopes = run_cells(
        modes, n_list, cfg, seed=args.seed, reps=args.reps,
        warmup=args.warmup, threads=args.threads,
    )
    lines = ["# " + BenchResult.CSV_FIELDS]
    lines += [res.to_csv_row() for res in results]
    for mode, slope in slopes.items():
        lines.append(f"# loglog-slope {mode}: {slope:.4f}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.csv"), "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_figures(args):
    paths = emit(args.which, args.out, seed=args.seed)
    for p in paths:
        sys.stdout.write(p + "\n")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_figures(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
