"""CSV and flat-text serialization for sequences, kernels and reports.

Dialect: comma separated, '.' decimal, '#'-prefixed header lines, one value
(or tuple) per line, floats printed with %.17g so round-trips are exact and
output bytes are deterministic.
"""

from __future__ import annotations

import numpy as np

from .ski import InducingGrid, SparseFilter
from .toeplitz import ToeplitzKernel

__all__ = [
    "write_kernel_csv",
    "read_kernel_csv",
    "write_sequence_csv",
    "read_sequence_csv",
    "write_grid_csv",
    "read_grid_csv",
    "write_filter_csv",
    "read_filter_csv",
    "write_response_csv",
    "write_impulse_csv",
    "format_float",
]


def format_float(v):
    return f"{float(v):.17g}"


def _parse_header(line, expected_keys):
    if not line.startswith("#"):
        raise ValueError("missing '#' header line")
    items = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise ValueError(f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        items[k] = v
    missing = set(expected_keys) - set(items)
    if missing:
        raise ValueError(f"header missing keys: {sorted(missing)}")
    return items


def _read_values(lines):
    vals = []
    for raw in lines:
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        vals.append(float(s))
    return np.asarray(vals, dtype=np.float64)


def write_sequence_csv(path, values, n=None, causal=False):
    values = np.asarray(values, dtype=np.float64).ravel()
    n = values.shape[0] if n is None else int(n)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# n={n} causal={int(bool(causal))}\n")
        for v in values:
            fh.write(format_float(v) + "\n")


def read_sequence_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = _parse_header(lines[0], ("n", "causal"))
    values = _read_values(lines[1:])
    return values, int(header["n"]), bool(int(header["causal"]))


def write_kernel_csv(path, kernel):
    write_sequence_csv(path, kernel.values, n=kernel.n, causal=kernel.causal)


def read_kernel_csv(path):
    """Load and validate a kernel; raises naming the violated invariant."""
    values, n, causal = read_sequence_csv(path)
    if values.shape[0] != 2 * n - 1:
        raise ValueError(
            f"kernel-length invariant violated: header says n={n} "
            f"(needs {2 * n - 1} values), file has {values.shape[0]}"
        )
    return ToeplitzKernel(n, values, causal=causal)


def write_grid_csv(path, grid):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# r={grid.r}\n")
        for p in grid.points:
            fh.write(format_float(p) + "\n")


def read_grid_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header = _parse_header(lines[0], ("r",))
    points = _read_values(lines[1:])
    if points.shape[0] != int(header["r"]):
        raise ValueError("grid point count does not match header")
    return InducingGrid(points)


def write_filter_csv(path, filt):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# m={filt.m} causal={int(filt.causal)}\n")
        for t in filt.taps:
            fh.write(format_float(t) + "\n")


def read_filter_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header = _parse_header(lines[0], ("m", "causal"))
    taps = _read_values(lines[1:])
    if taps.shape[0] != int(header["m"]):
        raise ValueError("filter tap count does not match header")
    return SparseFilter(taps, causal=bool(int(header["causal"])))


def write_response_csv(path, omega, samples):
    """(omega, Re, Im) triples of one frequency response."""
    samples = np.asarray(samples)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# omega,re,im\n")
        for w, s in zip(omega, samples):
            re = s.real if np.iscomplexobj(samples) else float(s)
            im = s.imag if np.iscomplexobj(samples) else 0.0
            fh.write(f"{format_float(w)},{format_float(re)},{format_float(im)}\n")


def write_impulse_csv(path, impulse):
    """(index, value) pairs of a time-domain kernel."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# index,value\n")
        for i, v in enumerate(np.asarray(impulse, dtype=np.float64)):
            fh.write(f"{i},{format_float(v)}\n")
