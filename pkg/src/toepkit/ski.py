"""Sparse-plus-low-rank token mixing via structured kernel interpolation.

The smooth part of a Toeplitz operator is approximated as ``W A W^T`` where
``A`` is a small Gram matrix over ``r`` evenly spaced inducing points and
``W`` holds sparse polynomial interpolation weights (2 nonzeros per row for
linear, 4 for cubic), so one matvec costs O(n + r log r).  The spiky
near-diagonal part is applied as a short 1-D convolution.  An inverse time
warp ``x(t) = sign(t) * lam**|t|`` squashes every offset into [-1, 1] so the
piecewise-linear positional kernel never extrapolates.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .toeplitz import FftWorkspace, ToeplitzKernel, toeplitz_matvec, _circulant_apply
from .validation import check_finite, check_sequence, check_sequence_matrix

__all__ = [
    "InducingGrid",
    "make_inducing_grid",
    "inverse_time_warp",
    "WarpedRpe",
    "InterpOperator",
    "interpolation_weights",
    "SparseFilter",
    "sparse_conv_matvec",
    "ski_lowrank_matvec",
    "ski_tno",
    "ski_causal_scan",
    "MAX_FILTER_WIDTH",
]

MAX_FILTER_WIDTH = 128


class InducingGrid:
    """Strictly increasing, evenly spaced inducing points."""

    __slots__ = ("points", "spacing")

    def __init__(self, points):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 1 or points.shape[0] < 2:
            raise ValueError("an inducing grid needs at least two points")
        check_finite(points, "inducing points")
        diffs = np.diff(points)
        if np.any(diffs <= 0):
            raise ValueError("inducing points must be strictly increasing")
        h = (points[-1] - points[0]) / (points.shape[0] - 1)
        if np.any(np.abs(diffs - h) > 1e-12 * max(abs(points[-1]), abs(points[0]), 1.0)):
            raise ValueError("inducing points must be evenly spaced")
        self.points = points
        self.spacing = h

    @property
    def r(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"InducingGrid(r={self.r}, span=[{self.points[0]}, {self.points[-1]}])"


def make_inducing_grid(n, r):
    """Canonical grid of ``r`` points evenly spaced on [0, n], endpoints included.

    Including both endpoints guarantees every observation position is interior
    to the grid, so interpolation never extrapolates.  ``r = n + 1`` gives the
    unit-spaced grid covering every integer position exactly.
    """
    if not 2 <= r <= n + 1:
        raise ValueError(f"need 2 <= r <= n + 1, got r={r}, n={n}")
    return InducingGrid(np.linspace(0.0, float(n), int(r)))


def inverse_time_warp(t, lam):
    """Map offsets through ``sign(t) * lam**|t|`` onto [-1, 1].

    Odd and exactly zero at zero; |x(t)| shrinks as |t| grows, so far offsets
    land near the origin and unit offsets near +-lam.  Extrapolation beyond
    the training span thereby becomes interpolation near zero.
    """
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise ValueError(f"warp decay must lie in (0, 1), got {lam}")
    t = np.asarray(t, dtype=np.float64)
    return np.sign(t) * np.power(lam, np.abs(t))


def _interp_1d(knots, values, queries):
    """Vectorized multi-channel linear interpolation, exact at the knots."""
    q = np.asarray(queries, dtype=np.float64)
    j = np.clip(np.searchsorted(knots, q, side="right") - 1, 0, knots.shape[0] - 2)
    left = knots[j]
    right = knots[j + 1]
    u = (q - left) / (right - left)
    u[q == left] = 0.0
    u[q == right] = 1.0
    return values[j] * (1.0 - u)[:, None] + values[j + 1] * u[:, None]


class WarpedRpe:
    """Piecewise-linear positional kernel on warped coordinates.

    Stores ``values`` of shape (K, d) at increasing ``knots`` spanning
    [-1, 1].  Evaluation warps the raw offset, then interpolates linearly;
    the knot at zero is pinned to zero per channel so the kernel vanishes at
    offset zero.
    """

    __slots__ = ("knots", "values", "lam")

    def __init__(self, knots, values, lam):
        knots = np.ascontiguousarray(knots, dtype=np.float64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if knots.ndim != 1 or knots.shape[0] < 3:
            raise ValueError("need at least 3 knots on [-1, 1]")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if knots[0] != -1.0 or knots[-1] != 1.0:
            raise ValueError("knots must span [-1, 1] with both endpoints present")
        zero = np.where(knots == 0.0)[0]
        if zero.shape[0] != 1:
            raise ValueError("knots must include 0 exactly once")
        if values.ndim != 2 or values.shape[0] != knots.shape[0]:
            raise ValueError(f"values shape {values.shape} does not match {knots.shape[0]} knots")
        check_finite(values, "rpe grid values")
        if np.any(values[zero[0]] != 0.0):
            raise ValueError("value at the zero knot must be pinned to 0 per channel")
        if not (0.0 < float(lam) < 1.0):
            raise ValueError("warp decay must lie in (0, 1)")
        self.knots = knots
        self.values = values
        self.lam = float(lam)

    @property
    def d(self):
        return self.values.shape[1]

    @classmethod
    def initialize(cls, d, r, lam, seed=0, scale=0.02):
        """Uniform knots (2r-1 of them) on [-1, 1], values ~ N(0, scale^2)."""
        k = 2 * int(r) - 1
        if k < 3:
            k = 3
        knots = np.linspace(-1.0, 1.0, k)
        knots[k // 2] = 0.0
        rng = np.random.default_rng(seed)
        values = rng.normal(0.0, scale, size=(k, d))
        values[k // 2] = 0.0
        return cls(knots, values, lam)

    def __call__(self, t):
        """Kernel values at raw offsets ``t``; shape (len(t), d)."""
        u = inverse_time_warp(np.atleast_1d(t), self.lam)
        out = _interp_1d(self.knots, self.values, u)
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def eval_warped_rpe(rpe, t):
    """Functional alias for ``rpe(t)``."""
    return rpe(t)


class InterpOperator:
    """Sparse interpolation weights from an inducing grid to query positions.

    Row ``i`` holds the degree-N Lagrange weights of query ``i`` over its
    N+1 nearest inducing points; rows are a partition of unity and a query
    sitting exactly on an inducing point gets a single unit weight.
    """

    __slots__ = ("grid", "degree", "indices", "weights", "_csr")

    def __init__(self, grid, degree, indices, weights):
        if weights.shape != indices.shape:
            raise ValueError("indices and weights must have matching shapes")
        sums = weights.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise ValueError("interpolation rows must sum to 1")
        self.grid = grid
        self.degree = degree
        self.indices = indices
        self.weights = weights
        self._csr = None

    @property
    def n_queries(self):
        return self.indices.shape[0]

    def to_csr(self):
        if self._csr is None:
            nq, k = self.indices.shape
            indptr = np.arange(0, nq * k + 1, k)
            self._csr = scipy.sparse.csr_matrix(
                (self.weights.ravel(), self.indices.ravel(), indptr),
                shape=(nq, self.grid.r),
            )
        return self._csr

    def to_dense(self):
        return self.to_csr().toarray()

    def apply(self, v):
        """``W @ v`` with v of shape (r,) or (r, d)."""
        return self.to_csr() @ v

    def apply_transpose(self, x):
        """``W.T @ x`` with x of shape (n,) or (n, d)."""
        return self.to_csr().T @ x


def interpolation_weights(grid, queries, degree=1):
    """Lagrange interpolation rows over the ``degree+1`` nearest inducing points.

    Degree 1 (linear) uses the bracketing pair; degree 3 (cubic) the four
    nearest points, one-sided at the grid ends.
    """
    if degree not in (1, 3):
        raise ValueError(f"interpolation degree must be 1 or 3, got {degree}")
    q = check_sequence(np.asarray(queries, dtype=np.float64).ravel(), name="queries")
    p = grid.points
    if np.any(q < p[0]) or np.any(q > p[-1]):
        raise ValueError("query outside the inducing grid span")
    r = grid.r
    if degree == 3 and r < 4:
        raise ValueError("cubic interpolation needs at least 4 inducing points")
    pos = (q - p[0]) / grid.spacing
    if degree == 1:
        j = np.clip(np.floor(pos).astype(np.int64), 0, r - 2)
        left = p[j]
        right = p[j + 1]
        u = (q - left) / (right - left)
        u[q == left] = 0.0
        u[q == right] = 1.0
        indices = np.stack([j, j + 1], axis=1)
        weights = np.stack([1.0 - u, u], axis=1)
        return InterpOperator(grid, degree, indices, weights)

    base = np.clip(np.floor(pos).astype(np.int64) - 1, 0, r - 4)
    indices = base[:, None] + np.arange(4)[None, :]
    nodes = p[indices]  # (nq, 4)
    weights = np.ones_like(nodes)
    for k in range(4):
        for m in range(4):
            if m == k:
                continue
            weights[:, k] *= (q - nodes[:, m]) / (nodes[:, k] - nodes[:, m])
    # exact-node snap: a query equal to a stencil node keeps one unit weight
    for k in range(4):
        on_node = q == nodes[:, k]
        if np.any(on_node):
            weights[on_node] = 0.0
            weights[on_node, k] = 1.0
    return InterpOperator(grid, degree, indices, weights)


class SparseFilter:
    """Short per-channel convolution taps for the near-diagonal band.

    Bidirectional filters are centered and need odd width; causal filters are
    one-sided with taps at offsets 0..m-1.
    """

    __slots__ = ("taps", "causal")

    def __init__(self, taps, causal=False):
        taps = check_sequence(taps, name="taps")
        m = taps.shape[0]
        if m < 1 or m > MAX_FILTER_WIDTH:
            raise ValueError(f"filter width must lie in [1, {MAX_FILTER_WIDTH}], got {m}")
        if not causal and m % 2 == 0:
            raise ValueError("bidirectional filter width must be odd (center undefined)")
        self.taps = taps
        self.causal = bool(causal)

    @property
    def m(self):
        return self.taps.shape[0]

    @property
    def center(self):
        return 0 if self.causal else (self.m - 1) // 2

    def offsets(self):
        return np.arange(self.m) - self.center

    def as_kernel(self, n):
        """Equivalent banded ToeplitzKernel of order n."""
        values = np.zeros(2 * n - 1)
        for j, delta in enumerate(self.offsets()):
            if -(n - 1) <= delta <= n - 1:
                values[delta + n - 1] = self.taps[j]
        return ToeplitzKernel(n, values, causal=self.causal)


def sparse_conv_matvec(f, x):
    """Banded Toeplitz product ``y[i] = sum_delta f[delta] x[i-delta]`` with
    zero boundary handling."""
    x = check_sequence(x, name="x")
    n = x.shape[0]
    c = f.center
    return np.convolve(f.taps, x)[c : c + n]


def _banded_apply(taps, center, X):
    """Multi-channel banded product; ``taps`` (m, d), ``X`` (n, d)."""
    n = X.shape[0]
    out = np.zeros_like(X)
    for j in range(taps.shape[0]):
        delta = j - center
        w = taps[j]
        if delta >= 0:
            if delta < n:
                out[delta:] += w * X[: n - delta]
        elif -delta < n:
            out[: n + delta] += w * X[-delta:]
    return out


def ski_lowrank_matvec(W, A, x, ws=None):
    """Low-rank product ``W (A (W^T x))`` with the middle matvec done on the
    small Toeplitz Gram matrix in O(r log r)."""
    x = check_sequence(x, name="x")
    if W.n_queries != x.shape[0]:
        raise ValueError(f"W has {W.n_queries} rows, x has length {x.shape[0]}")
    if A.n != W.grid.r:
        raise ValueError(f"A is {A.n}x{A.n} but the grid has r={W.grid.r}")
    v = W.apply_transpose(x)
    mid = toeplitz_matvec(A, v, ws)
    return W.apply(mid)


def _observation_points(n):
    # positions 1..n; all interior to the canonical [0, n] grid
    return np.arange(1, n + 1, dtype=np.float64)


def ski_tno(X, cfg, rpe, filters, grid=None, interp=None):
    """Sparse + low-rank bidirectional token mixer.

    Per channel ``l`` the output is ``T_sparse^l x^l + W A^l W^T x^l`` where
    ``A^l`` holds the warped positional kernel at the inducing offsets
    ``p_i - p_j`` (a Toeplitz matrix, since the grid is uniform).  With
    ``cfg.mode == "ski-dense"`` the interpolation products run as dense
    matmuls instead of CSR products; both paths agree to 1e-12.
    """
    X = check_sequence_matrix(X)
    n, d = X.shape
    if rpe.d != d:
        raise ValueError(f"rpe has {rpe.d} channels, input has {d}")
    filters = list(filters)
    if len(filters) != d:
        raise ValueError(f"need one filter per channel, got {len(filters)} for d={d}")
    if grid is None:
        grid = make_inducing_grid(n, cfg.r)
    r = grid.r
    if interp is None:
        interp = interpolation_weights(grid, _observation_points(n), cfg.degree)

    centers = {f.center for f in filters}
    if len(centers) == 1:
        taps = np.stack([f.taps for f in filters], axis=1)
        y = _banded_apply(taps, centers.pop(), X)
    else:
        y = np.stack(
            [sparse_conv_matvec(f, X[:, l]) for l, f in enumerate(filters)], axis=1
        )

    offsets = np.arange(-(r - 1), r, dtype=np.float64) * grid.spacing
    avals = rpe(offsets)  # (2r-1, d)

    dense = getattr(cfg, "mode", "ski") == "ski-dense"
    if dense:
        Wd = interp.to_dense()
        v = Wd.T @ X
    else:
        v = interp.apply_transpose(X)
    ws = FftWorkspace(r)
    mid = _circulant_apply(avals.T, v, ws.fft_len)
    y += Wd @ mid if dense else interp.apply(mid)
    return y


def ski_causal_scan(W, A, x):
    """Causally masked low-rank product via the sequential scan recursion.

    Implements ``s_{i} = s_{i-1} + w_i x_i`` and ``y_i = (W A)_i . s_i``,
    which equals ``(tril(W A W^T)) x``.  The recursion is inherently
    sequential, which is the point: it exists as a benchmark subject showing
    this path loses to the FFT baseline, not as a production path.
    """
    x = check_sequence(x, name="x")
    n = x.shape[0]
    if W.n_queries != n:
        raise ValueError(f"W has {W.n_queries} rows, x has length {n}")
    A = np.asarray(A, dtype=np.float64)
    r = W.grid.r
    if A.shape != (r, r):
        raise ValueError(f"A must be ({r}, {r}), got {A.shape}")
    WA = W.to_csr() @ A  # the unavoidable O(nr) precompute
    idx = W.indices
    wts = W.weights
    s = np.zeros(r)
    out = np.empty(n)
    for i in range(n):
        s[idx[i]] += wts[i] * x[i]
        out[i] = WA[i] @ s
    return out
