"""CSV emitters for decay, response, and error-bound figures.

No plotting here: the files are plain CSV for any external plotter, and are
byte-identical across runs with the same seed.
"""

from __future__ import annotations

import os

import numpy as np

from .analysis import bound_suite_kernels, decay_diagnostics, ski_bound_evaluate
from .freqdom import FreqResponse, REAL_EVEN, frequency_bins, impulse_response, sample_spectrum
from .io import write_impulse_csv, write_response_csv
from .rpe import MlpRpe
from .ski import make_inducing_grid

__all__ = ["emit_decay", "emit_response", "emit_bound", "FIGURE_KINDS", "DEFAULT_FIGURE_N"]

FIGURE_KINDS = ("decay", "response", "bound")
DEFAULT_FIGURE_N = 512
_ACTIVATIONS = ("gelu", "silu", "relu")


def _spectrum(activation, seed, n):
    net = MlpRpe(1, activation=activation, seed=seed)
    return sample_spectrum(net, n)[:, 0]


def emit_decay(out_dir, seed=0, n=DEFAULT_FIGURE_N):
    """One impulse-response CSV (2n rows) per activation, plus a decay report."""
    paths = []
    report_lines = []
    for act in _ACTIVATIONS:
        kh = _spectrum(act, seed, n)
        impulse = impulse_response(FreqResponse(n, kh, REAL_EVEN))
        path = os.path.join(out_dir, f"decay_{act}.csv")
        write_impulse_csv(path, impulse)
        paths.append(path)
        rep = decay_diagnostics(impulse, act)
        report_lines.append(
            f"{act}: passed={int(rep.passed)} slope={rep.slope:.17g} {rep.detail}"
        )
    report_path = os.path.join(out_dir, "decay_report.txt")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(report_lines) + "\n")
    paths.append(report_path)
    return paths


def emit_response(out_dir, seed=0, n=DEFAULT_FIGURE_N):
    """(omega, Re, Im) sample CSVs per activation."""
    omega = frequency_bins(n)
    paths = []
    for act in _ACTIVATIONS:
        kh = _spectrum(act, seed, n)
        path = os.path.join(out_dir, f"response_{act}.csv")
        write_response_csv(path, omega, kh)
        paths.append(path)
    return paths


def emit_bound(out_dir, seed=0):
    """The full error-bound table, one row per (kernel, n, r, degree) cell."""
    from .analysis import ErrorBoundReport

    path = os.path.join(out_dir, "bound_report.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + ErrorBoundReport.CSV_FIELDS + "\n")
        for kernel in bound_suite_kernels():
            for n in (64, 128):
                for r in (8, 16, 32):
                    for degree in (1, 3):
                        report = ski_bound_evaluate(kernel, make_inducing_grid(n, r), degree, n)
                        fh.write(report.to_csv_row() + "\n")
    return [path]


def emit(which, out_dir, seed=0):
    os.makedirs(out_dir, exist_ok=True)
    if which == "decay":
        return emit_decay(out_dir, seed=seed)
    if which == "response":
        return emit_response(out_dir, seed=seed)
    if which == "bound":
        return emit_bound(out_dir, seed=seed)
    raise ValueError(f"unknown figure kind {which!r}; choose from {FIGURE_KINDS}")
