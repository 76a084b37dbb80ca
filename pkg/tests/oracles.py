"""Independent brute-force oracles the fast paths are checked against.

Everything here is deliberately written the slow, obvious way and never
reuses the library's fast code paths.
"""

import numpy as np
from scipy.special import erf


def dense_toeplitz_matvec(values, x):
    """O(n^2) loop evaluation of y[i] = sum_j t[i-j] x[j]."""
    n = x.shape[0]
    y = np.zeros(n)
    for i in range(n):
        for j in range(n):
            y[i] += values[(i - j) + n - 1] * x[j]
    return y


def dense_banded_matvec(taps, center, x):
    """Banded Toeplitz product with zero boundaries."""
    n = x.shape[0]
    y = np.zeros(n)
    for i in range(n):
        for j, t in enumerate(taps):
            delta = j - center
            src = i - delta
            if 0 <= src < n:
                y[i] += t * x[src]
    return y


def dense_circular_toeplitz(g, n):
    """Dense matrix of the length-2n circular kernel on zero-padded inputs."""
    m = g.shape[0]
    T = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            T[i, j] = g[(i - j) % m]
    return T


def hilbert_direct_periodic(kh):
    """Discrete Hilbert transform by direct circular convolution.

    Uses the period-summed odd kernel sum_j 2/(pi (l + 2 n j)), whose closed
    form is cot(pi l / (2n)) / n for odd l; this is the convergent completion
    of the textbook 2/(pi l) kernel on the sampled frequency circle.
    """
    n = kh.shape[0] - 1
    m = 2 * n
    full = np.concatenate([kh, kh[-2:0:-1]])  # even periodic extension
    out = np.zeros(n + 1)
    for mm in range(n + 1):
        acc = 0.0
        for l in range(1, m, 2):
            acc += full[(mm - l) % m] * (1.0 / np.tan(np.pi * l / m)) / n
        out[mm] = acc
    return out


def hilbert_direct_truncated(kh, L):
    """Direct convolution with the raw kernel h[l] = 2/(pi l) (odd l),
    truncated at |l| <= L over the periodic even extension."""
    n = kh.shape[0] - 1
    m = 2 * n
    full = np.concatenate([kh, kh[-2:0:-1]])
    out = np.zeros(n + 1)
    for mm in range(n + 1):
        acc = 0.0
        for l in range(-L, L + 1):
            if l % 2 == 0:
                continue
            acc += full[(mm - l) % m] * 2.0 / (np.pi * l)
        out[mm] = acc
    return out


def mlp_forward_reference(net, t):
    """Straight-line re-implementation of the net forward pass."""
    a = np.atleast_1d(np.asarray(t, dtype=np.float64)).reshape(-1, 1)
    for i in range(len(net.hidden)):
        z = a @ net.weights[i] + net.biases[i]
        if net.layer_norm:
            mu = z.mean(axis=1, keepdims=True)
            var = z.var(axis=1, keepdims=True)
            z = (z - mu) / np.sqrt(var + 1e-5) * net.ln_scale[i] + net.ln_shift[i]
        if net.activation == "relu":
            a = np.maximum(z, 0.0)
        elif net.activation == "gelu":
            a = 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))
        else:
            a = z / (1.0 + np.exp(-z))
    return a @ net.weights[-1] + net.biases[-1]


def lagrange_weights_reference(nodes, q):
    """Direct evaluation of the Lagrange basis polynomials at q."""
    k = len(nodes)
    w = np.ones(k)
    for i in range(k):
        for j in range(k):
            if i != j:
                w[i] *= (q - nodes[j]) / (nodes[i] - nodes[j])
    return w
