"""Timing harness for the token-mixing paths.

Methodology: monotonic clock, warmup runs discarded, median of >= 20
repetitions reported (never the mean), BLAS/OpenMP pools pinned to one
thread inside every timed region.  Speed *ratios* are the deliverable;
absolute numbers are hardware-specific.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .config import MODES, TnoConfig
from .rpe import MlpRpe
from .ski import (
    SparseFilter,
    WarpedRpe,
    interpolation_weights,
    make_inducing_grid,
    ski_causal_scan,
    ski_tno,
)
from .freqdom import fd_tno_bidirectional, fd_tno_causal
from .toeplitz import DecayBias, FftWorkspace, tno_baseline

__all__ = ["BenchResult", "bench_mode", "run_cells", "loglog_slope", "MIN_REPS", "MIN_WARMUP"]

MIN_REPS = 20
MIN_WARMUP = 5
_TIMER_FLOOR_NS = 1000  # medians below 1 microsecond trigger more repetitions


@dataclass
class BenchResult:
    op: str
    n: int
    d: int
    r: int
    m: int
    reps: int
    median_ns: float
    throughput: float  # processed elements per second
    config: dict = field(default_factory=dict)

    CSV_FIELDS = "op,n,d,r,m,reps,median_ns,throughput"

    def to_csv_row(self):
        return (
            f"{self.op},{self.n},{self.d},{self.r},{self.m},{self.reps},"
            f"{self.median_ns:.1f},{self.throughput:.6g}"
        )


def _build_op(mode, cfg, seed):
    """Construct inputs and return a zero-argument callable for one forward."""
    n, d = cfg.n, cfg.d
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))

    if mode == "baseline":
        net = MlpRpe(d, seed=seed)
        ws = FftWorkspace(n)
        bias = DecayBias(cfg.lam)
        return lambda: tno_baseline(X, net, bias, ws)

    if mode == "fd-causal":
        net = MlpRpe(d, seed=seed)
        return lambda: fd_tno_causal(X, net)

    if mode == "fd-bidir":
        net = MlpRpe(2 * d, seed=seed)
        return lambda: fd_tno_bidirectional(X, net)

    if mode in ("ski", "ski-dense"):
        run_cfg = cfg.with_overrides(mode=mode)
        rpe = WarpedRpe.initialize(d, cfg.r, cfg.lam, seed=seed)
        filters = [
            SparseFilter(rng.normal(0.0, 0.02, size=cfg.m)) for _ in range(d)
        ]
        return lambda: ski_tno(X, run_cfg, rpe, filters)

    if mode == "causal-scan":
        rpe = WarpedRpe.initialize(d, cfg.r, cfg.lam, seed=seed)
        grid = make_inducing_grid(n, cfg.r)
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), cfg.degree)
        r = grid.r
        offsets = np.arange(-(r - 1), r, dtype=np.float64) * grid.spacing
        didx = (np.arange(r)[:, None] - np.arange(r)[None, :]) + r - 1

        def op():
            avals = rpe(offsets)  # per-forward kernel values, as in training
            out = np.empty_like(X)
            for l in range(d):
                out[:, l] = ski_causal_scan(W, avals[didx, l], X[:, l])
            return out

        return op

    raise ValueError(f"unknown benchmark mode {mode!r}")


def _time_once(fn):
    t0 = time.perf_counter_ns()
    fn()
    return time.perf_counter_ns() - t0


def bench_mode(mode, cfg, seed=0, reps=MIN_REPS, warmup=MIN_WARMUP):
    """Median wall time of one forward pass of ``mode`` at ``cfg``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    reps = max(int(reps), MIN_REPS)
    warmup = max(int(warmup), MIN_WARMUP)
    fn = _build_op(mode, cfg, seed)
    with threadpool_limits(limits=1):
        for _ in range(warmup):
            fn()
        while True:
            samples = [_time_once(fn) for _ in range(reps)]
            median = float(np.median(samples))
            if median >= _TIMER_FLOOR_NS or reps >= 20_000:
                break
            reps *= 4  # timer resolution insufficient, take more samples
    elements = cfg.n * cfg.d
    return BenchResult(
        op=mode,
        n=cfg.n,
        d=cfg.d,
        r=cfg.r,
        m=cfg.m,
        reps=reps,
        median_ns=median,
        throughput=elements / (median * 1e-9),
        config={"lam": cfg.lam, "degree": cfg.degree, "seed": seed},
    )


def loglog_slope(ns, medians):
    """Least-squares slope of log(time) against log(n)."""
    ns = np.asarray(ns, dtype=np.float64)
    medians = np.asarray(medians, dtype=np.float64)
    if ns.shape[0] < 2:
        raise ValueError("need at least two sizes for a slope")
    return float(np.polyfit(np.log(ns), np.log(medians), 1)[0])


def run_cells(modes, n_list, base_cfg, seed=0, reps=MIN_REPS, warmup=MIN_WARMUP, threads=1):
    """Time every (mode, n) cell; cells may run in parallel, timed regions
    never do.  Returns (results, {mode: slope})."""
    cells = [(mode, n) for mode in modes for n in n_list]

    def run(cell):
        mode, n = cell
        cfg = base_cfg.with_overrides(n=n, r=min(base_cfg.r, n), mode=None)
        return bench_mode(mode, cfg, seed=seed, reps=reps, warmup=warmup)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    slopes = {}
    for mode in modes:
        rows = [res for res in results if res.op == mode]
        if len(rows) >= 2:
            slopes[mode] = loglog_slope([r.n for r in rows], [r.median_ns for r in rows])
    return results, slopes
