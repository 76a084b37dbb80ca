"""Small MLP positional encoders with hand-derived gradients.

A net maps one scalar (a relative offset, or a frequency in [0, pi]) to ``d``
outputs (``2d`` for complex bidirectional responses).  Hidden layers apply an
affine map, layer norm, then the activation; the output layer is purely
affine.  Reverse-mode gradients are derived by hand for exactly this
architecture; there is no general autodiff here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

__all__ = [
    "MlpRpe",
    "GradBundle",
    "layer_norm",
    "piecewise_linearity_probe",
    "ProbeReport",
    "ACTIVATIONS",
    "LAYER_NORM_EPS",
]

LAYER_NORM_EPS = 1e-5

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0.0).astype(np.float64)


def _gelu(x):
    # exact Gaussian-CDF form; the tanh approximation is deliberately not used
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x):
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * phi


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _silu(x):
    return x * _sigmoid(x)


def _silu_grad(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "gelu": (_gelu, _gelu_grad),
    "silu": (_silu, _silu_grad),
}

_ACTIVATION_IDS = {"relu": 0, "gelu": 1, "silu": 2}
_ACTIVATION_NAMES = {v: k for k, v in _ACTIVATION_IDS.items()}


def layer_norm(z, gamma=None, beta=None, eps=LAYER_NORM_EPS):
    """Normalize over the last axis, then apply the affine scale/shift."""
    mu = z.mean(axis=-1, keepdims=True)
    var = z.var(axis=-1, keepdims=True)
    zhat = (z - mu) / np.sqrt(var + eps)
    if gamma is not None:
        zhat = zhat * gamma
    if beta is not None:
        zhat = zhat + beta
    return zhat


@dataclass
class GradBundle:
    """Gradients shaped like the net parameters, plus the input gradient."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    ln_scale: list = field(default_factory=list)
    ln_shift: list = field(default_factory=list)
    inputs: np.ndarray | None = None


class MlpRpe:
    """Scalar-input MLP with selectable activation and optional layer norm."""

    def __init__(self, out_dim, hidden=(64, 64, 64), activation="gelu", layer_norm=True, seed=0):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.out_dim = int(out_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.layer_norm = bool(layer_norm)
        widths = (1,) + self.hidden + (self.out_dim,)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            s = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-s, s, size=fan_out))
        self.ln_scale = [np.ones(h) for h in self.hidden]
        self.ln_shift = [np.zeros(h) for h in self.hidden]
        self._cache = None

    @property
    def widths(self):
        return (1,) + self.hidden + (self.out_dim,)

    @property
    def hidden_units(self):
        return int(sum(self.hidden))

    def __call__(self, t):
        return self.forward(t)

    def forward(self, t, keep_cache=False):
        """Forward pass at scalar or 1-D input; returns (d,) or (P, d).

        With ``keep_cache=True`` the per-layer activations are stored on the
        instance for a subsequent :meth:`backward`; a cached net must not be
        shared across threads.
        """
        scalar = np.ndim(t) == 0
        a = np.atleast_1d(np.asarray(t, dtype=np.float64)).reshape(-1, 1)
        act, _ = ACTIVATIONS[self.activation]
        cache = {"inputs": [a], "pre_ln": [], "zhat": [], "sigma": [], "pre_act": []}
        for i in range(len(self.hidden)):
            z = a @ self.weights[i] + self.biases[i]
            if self.layer_norm:
                mu = z.mean(axis=1, keepdims=True)
                var = z.var(axis=1, keepdims=True)
                sigma = np.sqrt(var + LAYER_NORM_EPS)
                zhat = (z - mu) / sigma
                h = zhat * self.ln_scale[i] + self.ln_shift[i]
            else:
                sigma = None
                zhat = z
                h = z
            a = act(h)
            if keep_cache:
                cache["pre_ln"].append(z)
                cache["zhat"].append(zhat)
                cache["sigma"].append(sigma)
                cache["pre_act"].append(h)
                cache["inputs"].append(a)
        y = a @ self.weights[-1] + self.biases[-1]
        if keep_cache:
            self._cache = cache
        return y[0] if scalar else y

    def backward(self, upstream):
        """Exact reverse-mode gradients for the most recent cached forward.

        ``upstream`` is dL/dy with the same shape the forward returned;
        parameter gradients are summed over the batch.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        cache = self._cache
        g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        _, act_grad = ACTIVATIONS[self.activation]
        nh = len(self.hidden)
        bundle = GradBundle(
            weights=[None] * (nh + 1),
            biases=[None] * (nh + 1),
            ln_scale=[None] * nh,
            ln_shift=[None] * nh,
        )
        a_last = cache["inputs"][nh]
        bundle.weights[nh] = a_last.T @ g
        bundle.biases[nh] = g.sum(axis=0)
        ga = g @ self.weights[nh].T
        for i in reversed(range(nh)):
            gh = ga * act_grad(cache["pre_act"][i])
            if self.layer_norm:
                zhat = cache["zhat"][i]
                sigma = cache["sigma"][i]
                bundle.ln_scale[i] = (gh * zhat).sum(axis=0)
                bundle.ln_shift[i] = gh.sum(axis=0)
                gzh = gh * self.ln_scale[i]
                m1 = gzh.mean(axis=1, keepdims=True)
                m2 = (gzh * zhat).mean(axis=1, keepdims=True)
                gz = (gzh - m1 - zhat * m2) / sigma
            else:
                bundle.ln_scale[i] = np.zeros_like(self.ln_scale[i])
                bundle.ln_shift[i] = np.zeros_like(self.ln_shift[i])
                gz = gh
            a_prev = cache["inputs"][i]
            bundle.weights[i] = a_prev.T @ gz
            bundle.biases[i] = gz.sum(axis=0)
            ga = gz @ self.weights[i].T
        bundle.inputs = ga[:, 0]
        return bundle

    # -- flat parameter views used by the gradient checks and toy fits ------

    def parameter_arrays(self):
        arrs = list(self.weights) + list(self.biases)
        if self.layer_norm:
            arrs += list(self.ln_scale) + list(self.ln_shift)
        return arrs

    def gradient_arrays(self, bundle):
        arrs = list(bundle.weights) + list(bundle.biases)
        if self.layer_norm:
            arrs += list(bundle.ln_scale) + list(bundle.ln_shift)
        return arrs

    # -- serialization -------------------------------------------------------
    #
    # Byte layout (little endian):
    #   magic   4 bytes  b"MRPE"
    #   version u16      currently 1
    #   act     u8       0=relu 1=gelu 2=silu
    #   lnorm   u8       0/1
    #   nwidths u32      number of layer widths incl. input and output
    #   widths  u32[nwidths]
    #   params  f64, in order: per hidden layer W (row major), b, ln_scale,
    #           ln_shift; then output W, b.

    MAGIC = b"MRPE"

    def save(self, path):
        widths = self.widths
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<HBBI", 1, _ACTIVATION_IDS[self.activation],
                                 int(self.layer_norm), len(widths)))
            fh.write(struct.pack(f"<{len(widths)}I", *widths))
            for i in range(len(self.hidden)):
                self.weights[i].astype("<f8").tofile(fh)
                self.biases[i].astype("<f8").tofile(fh)
                self.ln_scale[i].astype("<f8").tofile(fh)
                self.ln_shift[i].astype("<f8").tofile(fh)
            self.weights[-1].astype("<f8").tofile(fh)
            self.biases[-1].astype("<f8").tofile(fh)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ValueError("not a serialized rpe net")
            version, act_id, lnorm, nwidths = struct.unpack("<HBBI", fh.read(8))
            if version != 1:
                raise ValueError(f"unsupported net format version {version}")
            widths = struct.unpack(f"<{nwidths}I", fh.read(4 * nwidths))
            net = cls(widths[-1], hidden=widths[1:-1],
                      activation=_ACTIVATION_NAMES[act_id], layer_norm=bool(lnorm))

            def read(shape):
                count = int(np.prod(shape))
                arr = np.fromfile(fh, dtype="<f8", count=count)
                if arr.shape[0] != count:
                    raise ValueError("truncated net file")
                return arr.reshape(shape)

            for i, h in enumerate(net.hidden):
                net.weights[i] = read((widths[i], h))
                net.biases[i] = read((h,))
                net.ln_scale[i] = read((h,))
                net.ln_shift[i] = read((h,))
            net.weights[-1] = read((widths[-2], widths[-1]))
            net.biases[-1] = read((widths[-1],))
        return net


@dataclass
class ProbeReport:
    interval: tuple
    grid_points: int
    hidden_units: int
    breakpoints: list          # per output channel
    breakpoint_locations: list  # per output channel
    max_off_kink_second_diff: float
    threshold: float
    passed: bool


def piecewise_linearity_probe(net, interval=(-1.0, 1.0), grid_points=10_000):
    """Scan a ReLU net on a dense grid and certify piecewise linearity.

    Second finite differences must vanish (<= 1e-8 of the output scale)
    except within one grid step of detected kinks, and the kink count per
    channel may not exceed the total hidden unit count.  Smooth activations
    are refused: the property simply does not hold for them.
    """
    if net.activation != "relu":
        raise ValueError(
            f"piecewise-linearity probe requires a relu net, got {net.activation!r}"
        )
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError("empty probe interval")
    xs = np.linspace(a, b, int(grid_points))
    y = np.atleast_2d(net(xs))
    d2 = y[2:] - 2.0 * y[1:-1] + y[:-2]
    scale = max(float(np.abs(y).max()), 1e-30)
    threshold = 1e-8 * scale
    counts = []
    locations = []
    max_off = 0.0
    for l in range(y.shape[1]):
        flagged = np.where(np.abs(d2[:, l]) > threshold)[0]
        clusters = []
        for idx in flagged:
            if clusters and idx - clusters[-1][-1] <= 2:
                clusters[-1].append(idx)
            else:
                clusters.append([idx])
        counts.append(len(clusters))
        locations.append([float(xs[int(np.mean(c)) + 1]) for c in clusters])
        off = np.ones(d2.shape[0], dtype=bool)
        for idx in flagged:
            off[max(idx - 1, 0) : idx + 2] = False
        if np.any(off):
            max_off = max(max_off, float(np.abs(d2[off, l]).max()))
    passed = max_off <= threshold and all(c <= net.hidden_units for c in counts)
    return ProbeReport(
        interval=(a, b),
        grid_points=int(grid_points),
        hidden_units=net.hidden_units,
        breakpoints=counts,
        breakpoint_locations=locations,
        max_off_kink_second_diff=max_off,
        threshold=threshold,
        passed=passed,
    )
