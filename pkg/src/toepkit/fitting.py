"""Toy gradient-descent fits proving the operators train end to end.

These are deliberately small: plain gradient descent with a backtracking
line search (so the loss trace is monotone non-increasing), driven by the
hand-derived net gradients and the adjoints of the linear operator paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .freqdom import FreqResponse, REAL_EVEN, frequency_bins
from .rpe import MlpRpe
from .ski import WarpedRpe, inverse_time_warp, interpolation_weights, make_inducing_grid
from .toeplitz import ToeplitzKernel, toeplitz_dense

__all__ = ["FitResult", "FitDivergence", "toy_fit", "fit_fd_causal", "fit_ski"]


class FitDivergence(RuntimeError):
    """Loss became non-finite; carries the offending step index."""

    def __init__(self, step, loss):
        super().__init__(f"loss diverged to {loss} at step {step}")
        self.step = step


@dataclass
class FitResult:
    model: object
    losses: np.ndarray
    steps: int
    final_lr: float

    @property
    def initial_loss(self):
        return float(self.losses[0])

    @property
    def final_loss(self):
        return float(self.losses[-1])


def _descend(params, evaluate, steps, lr):
    """Monotone gradient descent over a list of parameter arrays.

    ``evaluate()`` returns (loss, grads) at the current parameters.  Step
    sizes follow the alternating Barzilai-Borwein rule with a backtracking
    line search, so the returned loss trace never increases; a non-finite
    starting loss raises :class:`FitDivergence`.
    """
    losses = np.empty(steps + 1)
    loss, grads = evaluate()
    losses[0] = loss
    if not np.isfinite(loss):
        raise FitDivergence(0, loss)
    prev_p = prev_g = None
    step = 0
    for step in range(1, steps + 1):
        saved = [p.copy() for p in params]
        gsaved = [g.copy() for g in grads]
        if prev_p is not None:
            dp = [a - b for a, b in zip(saved, prev_p)]
            dg = [a - b for a, b in zip(gsaved, prev_g)]
            pg = sum(float(np.sum(a * b)) for a, b in zip(dp, dg))
            if step % 2:
                num = sum(float(np.sum(a * a)) for a in dp)
                if pg > 0.0:
                    lr = min(max(num / pg, 1e-12), 1e3)
            else:
                den = sum(float(np.sum(a * a)) for a in dg)
                if den > 0.0 and pg > 0.0:
                    lr = min(max(pg / den, 1e-12), 1e3)
        while True:
            for p, s, g in zip(params, saved, gsaved):
                p[...] = s - lr * g
            new_loss, new_grads = evaluate()
            if np.isfinite(new_loss) and new_loss <= loss:
                prev_p, prev_g = saved, gsaved
                loss, grads = new_loss, new_grads
                break
            lr *= 0.5
            if lr < 1e-14:  # flat to machine precision: keep the old point
                for p, s in zip(params, saved):
                    p[...] = s
                evaluate()
                break
        losses[step] = loss
        if lr < 1e-14:
            losses[step:] = loss
            break
    return losses, step, lr


def _target_outputs(target, X):
    """Apply the target operator columnwise to training inputs (n, B)."""
    n = X.shape[0]
    if isinstance(target, ToeplitzKernel):
        if target.n != n:
            raise ValueError(f"target kernel has n={target.n}, inputs have n={n}")
        return toeplitz_dense(target) @ X
    if isinstance(target, FreqResponse):
        if target.n != n:
            raise ValueError(f"target response has n={target.n}, inputs have n={n}")
        xhat = np.fft.rfft(X.T, 2 * n)
        return np.fft.irfft(target.samples[None, :] * xhat, 2 * n)[:, :n].T
    raise TypeError(f"unsupported target type {type(target).__name__}")


def _hilbert_matrix(n):
    """Dense (n+1)x(n+1) realization of the discrete Hilbert transform."""
    from .freqdom import discrete_hilbert

    H = np.empty((n + 1, n + 1))
    eye = np.eye(n + 1)
    for j in range(n + 1):
        H[:, j] = discrete_hilbert(FreqResponse(n, eye[j], REAL_EVEN))
    return H


def fit_fd_causal(net, target, n, steps=2000, lr=0.05, seed=0, batch=4):
    """Fit a frequency net so the causal mixer reproduces a target operator.

    Minimizes the mean squared difference between the causal operator's
    output and the target operator's output on seeded Gaussian inputs, with
    gradients flowing through the Hilbert completion and the transform
    product back into the net parameters.
    """
    if not isinstance(net, MlpRpe):
        raise TypeError("the frequency-domain fit trains an MlpRpe")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, batch))
    T = _target_outputs(target, X)  # (n, batch), shared across channels
    M = 2 * n
    omega = frequency_bins(n)
    H = _hilbert_matrix(n)
    xhat = np.fft.rfft(X.T, M)  # (batch, n+1)
    d = net.out_dim
    size = d * batch * n

    # adjoint scaling of irfft bins: interior bins appear twice in the
    # conjugate-symmetric completion
    cm = np.full(n + 1, 2.0)
    cm[0] = 1.0
    cm[n] = 1.0

    def evaluate():
        kh = net.forward(omega, keep_cache=True)
        kc = (kh - 1j * (H @ kh)).T  # (d, n+1)
        y = np.fft.irfft(kc[:, None, :] * xhat[None, :, :], M)[..., :n]
        resid = y - T.T[None, :, :]
        loss = float(np.sum(resid**2) / size)
        if not np.isfinite(loss):
            return loss, None
        g_full = np.zeros((d, batch, M))
        g_full[..., :n] = (2.0 / size) * resid
        G_v = cm / M * np.fft.rfft(g_full)
        G_u = np.sum(G_v * np.conj(xhat)[None, :, :], axis=1)  # (d, n+1)
        g_kh = G_u.real.T - H.T @ G_u.imag.T  # (n+1, d)
        return loss, net.gradient_arrays(net.backward(g_kh))

    losses, step, lr = _descend(net.parameter_arrays(), evaluate, steps, lr)
    return FitResult(model=net, losses=losses, steps=step, final_lr=lr)


def _warp_interp_matrix(rpe, offsets):
    """Linear map from knot values to kernel values at raw offsets."""
    u = inverse_time_warp(offsets, rpe.lam)
    knots = rpe.knots
    j = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, knots.shape[0] - 2)
    w = (u - knots[j]) / (knots[j + 1] - knots[j])
    w[u == knots[j]] = 0.0
    w[u == knots[j + 1]] = 1.0
    Mw = np.zeros((offsets.shape[0], knots.shape[0]))
    rows = np.arange(offsets.shape[0])
    Mw[rows, j] += 1.0 - w
    Mw[rows, j + 1] += w
    return Mw


def _lag_correlation(g, v, lags):
    """corr[delta] = sum_i g[i] * v[i - delta] for delta in -lags..lags."""
    full = np.correlate(g, v, mode="full")
    center = v.shape[0] - 1
    return full[center - lags : center + lags + 1]


def fit_ski(rpe, filters, target, cfg, steps=2000, lr=0.2, seed=0):
    """Fit the warped piecewise-linear kernel and filter taps against a
    target operator.  The whole model is linear in its parameters, so plain
    descent with a line search converges cleanly."""
    from .ski import ski_tno

    if not isinstance(rpe, WarpedRpe):
        raise TypeError("the ski fit trains a WarpedRpe")
    filters = list(filters)
    n, d = cfg.n, cfg.d
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    T = _target_outputs(target, X)
    grid = make_inducing_grid(n, cfg.r)
    interp = interpolation_weights(grid, np.arange(1, n + 1, dtype=np.float64), cfg.degree)
    r = grid.r
    offsets = np.arange(-(r - 1), r, dtype=np.float64) * grid.spacing
    Mw = _warp_interp_matrix(rpe, offsets)
    pin = int(np.where(rpe.knots == 0.0)[0][0])
    centers = [f.center for f in filters]
    size = n * d

    v_fixed = interp.apply_transpose(X)

    def evaluate():
        y = ski_tno(X, cfg, rpe, filters, grid=grid, interp=interp)
        resid = y - T
        loss = float(np.sum(resid**2) / size)
        if not np.isfinite(loss):
            return loss, None
        g = (2.0 / size) * resid
        g_taps = []
        for l, f in enumerate(filters):
            gt = np.empty(f.m)
            for j, delta in enumerate(f.offsets()):
                if delta >= 0:
                    gt[j] = g[delta:, l] @ X[: n - delta, l]
                else:
                    gt[j] = g[: n + delta, l] @ X[-delta:, l]
            g_taps.append(gt)
        g_mid = interp.apply_transpose(g)  # (r, d)
        g_avals = np.stack(
            [_lag_correlation(g_mid[:, l], v_fixed[:, l], r - 1) for l in range(d)], axis=1
        )
        g_values = Mw.T @ g_avals
        g_values[pin] = 0.0
        return loss, [g_values] + g_taps

    params = [rpe.values] + [f.taps for f in filters]
    losses, step, lr = _descend(params, evaluate, steps, lr)
    return FitResult(model=(rpe, filters), losses=losses, steps=step, final_lr=lr)


def toy_fit(target, model, steps=2000, lr=None, *, n=None, cfg=None, seed=0, batch=4):
    """Dispatch a toy fit: an MlpRpe trains against the causal
    frequency-domain mixer, a (WarpedRpe, filters) pair against the
    sparse+low-rank mixer."""
    if isinstance(model, MlpRpe):
        if n is None:
            n = target.n
        return fit_fd_causal(model, target, n, steps=steps, lr=0.05 if lr is None else lr,
                             seed=seed, batch=batch)
    if isinstance(model, tuple) and len(model) == 2 and isinstance(model[0], WarpedRpe):
        if cfg is None:
            raise ValueError("the ski fit needs a TnoConfig")
        return fit_ski(model[0], model[1], target, cfg, steps=steps,
                       lr=0.2 if lr is None else lr, seed=seed)
    raise TypeError(f"no toy fit for model type {type(model).__name__}")
