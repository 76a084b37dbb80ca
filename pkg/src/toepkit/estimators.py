"""Scikit-learn style wrappers around the token mixers.

Each estimator treats a (sequence_length, channels) array as one sample and
mixes along the sequence axis.  ``fit`` seeds the positional model from the
channel count (and, when targets are given, runs the toy gradient fit);
``transform`` applies the operator.  Parameters follow the sklearn
get_params/set_params protocol so the mixers drop into pipelines and grid
searches.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import TnoConfig
from .fitting import fit_fd_causal, fit_ski
from .freqdom import fd_tno_bidirectional, fd_tno_causal
from .rpe import MlpRpe
from .ski import SparseFilter, WarpedRpe, ski_tno
from .toeplitz import DecayBias, FftWorkspace, ToeplitzKernel, tno_baseline
from .validation import check_sequence_matrix

__all__ = ["BaselineTno", "SkiTno", "CausalFreqTno", "BidirectionalFreqTno"]


class _TnoBase(TransformerMixin, BaseEstimator):
    def _validate(self, X, reset):
        X = check_sequence_matrix(X)
        if reset:
            self.n_features_in_ = X.shape[1]
        else:
            check_is_fitted(self)
            if X.shape[1] != self.n_features_in_:
                raise ValueError(
                    f"X has {X.shape[1]} channels, estimator was fitted with "
                    f"{self.n_features_in_}"
                )
        return X

    def _as_target_kernel(self, y, n):
        if isinstance(y, ToeplitzKernel):
            return y
        raise TypeError(
            "y must be a ToeplitzKernel target operator (or None); "
            f"got {type(y).__name__}"
        )


class BaselineTno(_TnoBase):
    """Exact decay-biased Toeplitz mixer (the reference path).

    Parameters
    ----------
    hidden : tuple of int, hidden widths of the offset-input net.
    activation : {'relu', 'gelu', 'silu'}
    layer_norm : bool, layer norm before each hidden activation.
    decay : float in (0, 1], the per-offset decay base.
    seed : int, net initialization seed.
    """

    def __init__(self, hidden=(64, 64, 64), activation="gelu", layer_norm=True,
                 decay=0.99, seed=0):
        self.hidden = hidden
        self.activation = activation
        self.layer_norm = layer_norm
        self.decay = decay
        self.seed = seed

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        self.rpe_ = MlpRpe(self.n_features_in_, hidden=self.hidden,
                           activation=self.activation, layer_norm=self.layer_norm,
                           seed=self.seed)
        return self

    def transform(self, X):
        X = self._validate(X, reset=False)
        return tno_baseline(X, self.rpe_, DecayBias(self.decay), FftWorkspace(X.shape[0]))


class SkiTno(_TnoBase):
    """Sparse + low-rank mixer over an inducing grid.

    ``fit(X)`` seeds the warped piecewise-linear kernel and per-channel
    filter taps; ``fit(X, y)`` additionally gradient-fits them against a
    target operator ``y`` (a ToeplitzKernel).  ``dense_products=True``
    selects the batched dense interpolation path, which trades asymptotics
    for matmul throughput.
    """

    def __init__(self, r=64, m=32, degree=1, warp_decay=0.99, dense_products=False,
                 init_scale=0.02, fit_steps=2000, fit_lr=0.2, seed=0):
        self.r = r
        self.m = m
        self.degree = degree
        self.warp_decay = warp_decay
        self.dense_products = dense_products
        self.init_scale = init_scale
        self.fit_steps = fit_steps
        self.fit_lr = fit_lr
        self.seed = seed

    def _config(self, n, d):
        return TnoConfig(n=n, d=d, r=self.r, m=self.m, lam=self.warp_decay,
                         degree=self.degree,
                         mode="ski-dense" if self.dense_products else "ski")

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        n, d = X.shape
        cfg = self._config(n, d)
        self.rpe_ = WarpedRpe.initialize(d, cfg.r, cfg.lam, seed=self.seed,
                                         scale=self.init_scale)
        rng = np.random.default_rng(self.seed + 1)
        self.filters_ = [
            SparseFilter(rng.normal(0.0, self.init_scale, size=cfg.m)) for _ in range(d)
        ]
        self.n_rows_ = n
        if y is not None:
            target = self._as_target_kernel(y, n)
            result = fit_ski(self.rpe_, self.filters_, target, cfg,
                             steps=self.fit_steps, lr=self.fit_lr, seed=self.seed)
            self.loss_trace_ = result.losses
        return self

    def transform(self, X):
        X = self._validate(X, reset=False)
        cfg = self._config(X.shape[0], X.shape[1])
        return ski_tno(X, cfg, self.rpe_, self.filters_)


class CausalFreqTno(_TnoBase):
    """Causal frequency-domain mixer (Hilbert-completed real response)."""

    def __init__(self, hidden=(64, 64, 64), activation="gelu", layer_norm=True,
                 fit_steps=2000, fit_lr=0.05, fit_batch=4, seed=0):
        self.hidden = hidden
        self.activation = activation
        self.layer_norm = layer_norm
        self.fit_steps = fit_steps
        self.fit_lr = fit_lr
        self.fit_batch = fit_batch
        self.seed = seed

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        self.rpe_ = MlpRpe(self.n_features_in_, hidden=self.hidden,
                           activation=self.activation, layer_norm=self.layer_norm,
                           seed=self.seed)
        self.n_rows_ = X.shape[0]
        if y is not None:
            target = self._as_target_kernel(y, X.shape[0])
            result = fit_fd_causal(self.rpe_, target, X.shape[0],
                                   steps=self.fit_steps, lr=self.fit_lr,
                                   seed=self.seed, batch=self.fit_batch)
            self.loss_trace_ = result.losses
        return self

    def transform(self, X):
        X = self._validate(X, reset=False)
        # longer inputs than seen in fit just sample the net at finer bins
        return fd_tno_causal(X, self.rpe_)


class BidirectionalFreqTno(_TnoBase):
    """Bidirectional frequency-domain mixer (direct complex response)."""

    def __init__(self, hidden=(64, 64, 64), activation="gelu", layer_norm=True, seed=0):
        self.hidden = hidden
        self.activation = activation
        self.layer_norm = layer_norm
        self.seed = seed

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        self.rpe_ = MlpRpe(2 * self.n_features_in_, hidden=self.hidden,
                           activation=self.activation, layer_norm=self.layer_norm,
                           seed=self.seed)
        return self

    def transform(self, X):
        X = self._validate(X, reset=False)
        return fd_tno_bidirectional(X, self.rpe_)
