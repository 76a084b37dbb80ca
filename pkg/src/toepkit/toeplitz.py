"""Exact Toeplitz sequence operators.

A Toeplitz matrix ``T`` with entries ``T[i, j] = t[i - j]`` is fully described
by the 2n-1 kernel values ``t[delta]`` for offsets ``delta = -(n-1) .. n-1``.
Matrix-vector products are computed in O(n log n) by embedding ``T`` in a
circulant matrix of power-of-two order and using real FFTs; a dense O(n^2)
construction is kept as a brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import OracleSizeError, check_finite, check_sequence, check_sequence_matrix

__all__ = [
    "ToeplitzKernel",
    "DecayBias",
    "FftWorkspace",
    "toeplitz_matvec",
    "toeplitz_dense",
    "apply_decay_bias",
    "tno_baseline",
    "DENSE_ORACLE_MAX_N",
]

DENSE_ORACLE_MAX_N = 4096  # caps the dense oracle at ~128 MB


class ToeplitzKernel:
    """Kernel values defining one Toeplitz operator.

    ``values`` has length ``2n - 1`` and is indexed by offset: the entry for
    offset ``delta = i - j`` lives at ``values[delta + n - 1]``.  A causal
    kernel has exact zeros at all negative offsets, so the operator is lower
    triangular and outputs depend only on past and present inputs.
    """

    __slots__ = ("n", "values", "causal")

    def __init__(self, n, values, causal=False):
        n = int(n)
        if n < 1:
            raise ValueError(f"sequence length must be positive, got {n}")
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (2 * n - 1,):
            raise ValueError(
                f"kernel for n={n} needs {2 * n - 1} offset values, got shape {values.shape}"
            )
        check_finite(values, "kernel values")
        if causal and np.any(values[: n - 1] != 0.0):
            raise ValueError("causal kernel has nonzero values at negative offsets")
        self.n = n
        self.values = values
        self.causal = bool(causal)

    def value_at(self, delta):
        """Kernel value at offset ``delta = i - j``."""
        return self.values[delta + self.n - 1]

    @classmethod
    def identity(cls, n):
        values = np.zeros(2 * n - 1)
        values[n - 1] = 1.0
        return cls(n, values, causal=True)

    @classmethod
    def from_offset_function(cls, n, fn, causal=False):
        """Build from a vectorized ``fn(offsets) -> values`` over all 2n-1 offsets."""
        offsets = np.arange(-(n - 1), n, dtype=np.float64)
        values = np.asarray(fn(offsets), dtype=np.float64)
        if causal:
            values = values.copy()
            values[: n - 1] = 0.0
        return cls(n, values, causal=causal)

    @classmethod
    def causal_from_taps(cls, n, taps):
        """Causal kernel from taps at offsets 0..len(taps)-1."""
        taps = check_sequence(taps, name="taps")
        if taps.shape[0] > n:
            raise ValueError("more taps than sequence length")
        values = np.zeros(2 * n - 1)
        values[n - 1 : n - 1 + taps.shape[0]] = taps
        return cls(n, values, causal=True)


@dataclass(frozen=True)
class DecayBias:
    """Exponential decay factor ``lam ** |i - j|`` with ``lam`` in (0, 1]."""

    lam: float

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"decay must lie in (0, 1], got {self.lam}")


class FftWorkspace:
    """Transform scratch for one execution thread.

    Holds the padded circulant length (next power of two >= 2n, so the
    embedding realizes linear rather than circular convolution) and reusable
    padding buffers.  Not safe to share across concurrent calls.
    """

    __slots__ = ("n", "fft_len", "_ckern", "_csig")

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise ValueError("workspace length must be positive")
        self.n = n
        self.fft_len = 1 << (2 * n - 1).bit_length()
        if self.fft_len < 2 * n:  # 2n already a power of two
            self.fft_len = 2 * n
        self._ckern = np.zeros(self.fft_len)
        self._csig = np.zeros(self.fft_len)

    def embed_kernel(self, values):
        """Lay out 2n-1 offset values in circulant order (positive offsets
        first, negative offsets wrapped to the tail)."""
        n = self.n
        c = self._ckern
        c[:] = 0.0
        c[:n] = values[n - 1 :]
        if n > 1:
            c[self.fft_len - (n - 1) :] = values[: n - 1]
        return c

    def pad_signal(self, x):
        s = self._csig
        s[:] = 0.0
        s[: self.n] = x
        return s


def _circulant_apply(values, X, fft_len):
    """Batched circulant product for column-stacked inputs.

    ``values`` is (2n-1,) or (d, 2n-1) for per-channel kernels, ``X`` is
    (n, d).  Returns (n, d).
    """
    n = X.shape[0]
    if values.ndim == 1:
        values = values[None, :]
    d = values.shape[0]
    c = np.zeros((d, fft_len))
    c[:, :n] = values[:, n - 1 :]
    if n > 1:
        c[:, fft_len - (n - 1) :] = values[:, : n - 1]
    xp = np.zeros((d, fft_len))
    xp[:, :n] = X.T
    out = np.fft.irfft(np.fft.rfft(c) * np.fft.rfft(xp), fft_len)
    return out[:, :n].T


def toeplitz_matvec(kernel, x, ws=None):
    """O(n log n) product ``y[i] = sum_j t[i-j] x[j]`` via circulant embedding.

    ``ws`` may be reused across calls with the same ``n``; one workspace per
    thread.
    """
    x = check_sequence(x, kernel.n, name="x")
    if ws is None:
        ws = FftWorkspace(kernel.n)
    elif ws.n != kernel.n:
        raise ValueError(f"workspace built for n={ws.n}, kernel has n={kernel.n}")
    c = ws.embed_kernel(kernel.values)
    s = ws.pad_signal(x)
    y = np.fft.irfft(np.fft.rfft(c) * np.fft.rfft(s), ws.fft_len)
    return y[: kernel.n].copy()


def toeplitz_dense(kernel):
    """Dense oracle realization ``M[i, j] = t[i - j]``; guarded at n <= 4096."""
    n = kernel.n
    if n > DENSE_ORACLE_MAX_N:
        raise OracleSizeError(
            f"dense oracle limited to n <= {DENSE_ORACLE_MAX_N}, got n={n}"
        )
    idx = np.arange(n)
    return kernel.values[(idx[:, None] - idx[None, :]) + n - 1]


def apply_decay_bias(kernel, bias):
    """Scale each offset value by ``lam ** |delta|``; preserves causality."""
    if not isinstance(bias, DecayBias):
        bias = DecayBias(float(bias))
    n = kernel.n
    offsets = np.abs(np.arange(-(n - 1), n))
    scaled = kernel.values * np.power(bias.lam, offsets)
    return ToeplitzKernel(n, scaled, causal=kernel.causal)


def tno_baseline(X, rpe, bias, ws=None):
    """Reference token mixer: one decay-biased Toeplitz matvec per channel.

    For each channel ``l`` the kernel is ``lam**|delta| * rpe(delta)[l]``,
    evaluated at all 2n-1 offsets and applied with the FFT matvec.  This is
    the baseline the sparse+low-rank and frequency-domain paths are measured
    against.
    """
    X = check_sequence_matrix(X)
    n, d = X.shape
    if ws is None:
        ws = FftWorkspace(n)
    offsets = np.arange(-(n - 1), n, dtype=np.float64)
    vals = np.asarray(rpe(offsets), dtype=np.float64)
    if vals.ndim != 2 or vals.shape != (2 * n - 1, d):
        raise ValueError(
            f"rpe produced shape {vals.shape}, expected ({2 * n - 1}, {d}) for {d}-channel input"
        )
    decay = np.power(bias.lam, np.abs(offsets)) if isinstance(bias, DecayBias) else np.power(
        DecayBias(float(bias)).lam, np.abs(offsets)
    )
    return _circulant_apply((vals * decay[:, None]).T, X, ws.fft_len)
