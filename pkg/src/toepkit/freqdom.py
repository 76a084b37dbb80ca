"""Frequency-domain token mixers with Hilbert-transform causality.

Kernels are represented by their sampled frequency response at the ``n+1``
bins ``omega_m = m*pi/n``.  A causal kernel is built from a real even
response alone: its imaginary part is the negated discrete Hilbert transform
of the real part, and the length-2n inverse transform of the completed
response vanishes on the anticausal half.  Bidirectional kernels model the
complex response directly (real at the DC and Nyquist bins), which skips the
kernel-side forward FFT entirely.
"""

from __future__ import annotations

import numpy as np

from .validation import check_finite, check_sequence_matrix

__all__ = [
    "REAL_EVEN",
    "CAUSAL",
    "BIDIRECTIONAL",
    "FreqResponse",
    "frequency_bins",
    "discrete_hilbert",
    "hilbert_periodic",
    "causal_freq_kernel",
    "fd_tno_causal",
    "fd_tno_bidirectional",
    "impulse_response",
    "sample_spectrum",
]

REAL_EVEN = "real-even"
CAUSAL = "causal"
BIDIRECTIONAL = "complex-bidirectional"

_FLAVORS = (REAL_EVEN, CAUSAL, BIDIRECTIONAL)


def frequency_bins(n):
    """The n+1 sample frequencies ``m*pi/n`` for m = 0..n."""
    return np.arange(n + 1) * (np.pi / n)


class FreqResponse:
    """Sampled frequency response of one kernel channel.

    ``samples`` holds the ``n+1`` response values at ``omega_m = m*pi/n``.
    Real-even responses are stored as float64; causal and bidirectional ones
    as complex128 with exactly real DC and Nyquist bins, so the length-2n
    time kernel is real.
    """

    __slots__ = ("n", "samples", "flavor")

    def __init__(self, n, samples, flavor=REAL_EVEN):
        n = int(n)
        if n < 1:
            raise ValueError("base length must be positive")
        if flavor not in _FLAVORS:
            raise ValueError(f"unknown flavor {flavor!r}")
        samples = np.asarray(samples)
        if samples.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} samples for n={n}, got shape {samples.shape}")
        if flavor == REAL_EVEN:
            if np.iscomplexobj(samples):
                if np.any(samples.imag != 0.0):
                    raise ValueError("real-even response has nonzero imaginary parts")
                samples = samples.real
            samples = np.ascontiguousarray(samples, dtype=np.float64)
        else:
            samples = np.ascontiguousarray(samples, dtype=np.complex128)
            if samples[0].imag != 0.0 or samples[n].imag != 0.0:
                raise ValueError("responses at omega = 0 and pi must be real-valued")
        check_finite(samples, "response samples")
        self.n = n
        self.samples = samples
        self.flavor = flavor


def _causal_projection_weights(m):
    """Time-domain weights keeping t=0 and t=m/2, doubling 0 < t < m/2,
    zeroing the anticausal half."""
    w = np.zeros(m)
    w[0] = 1.0
    w[m // 2] = 1.0
    w[1 : m // 2] = 2.0
    return w


def discrete_hilbert(resp):
    """Discrete Hilbert transform of a real even response at the same bins.

    Computed by the transform route: inverse-transform the response to its
    even time signal, apply the causal projection pattern, transform back,
    and take the negated imaginary part.  Equals the direct circular
    convolution with the period-summed odd kernel ``2/(pi l)``.
    """
    if resp.flavor != REAL_EVEN:
        raise ValueError(f"discrete Hilbert transform needs a real-even response, got {resp.flavor!r}")
    n = resp.n
    t = np.fft.irfft(resp.samples, 2 * n)
    g = np.fft.rfft(_causal_projection_weights(2 * n) * t)
    return -g.imag


def hilbert_periodic(spectrum):
    """Circular discrete Hilbert transform of a full length-M spectrum.

    ``spectrum`` covers all M bins of an even-length circle.  Returns a
    complex array; for a real even input the result is real and odd up to
    roundoff.  Applying it twice negates any zero-mean spectrum away from the
    DC and Nyquist bins.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    m = spectrum.shape[0]
    if m < 2 or m % 2:
        raise ValueError("full spectrum must have even length")
    g = np.fft.fft(_causal_projection_weights(m) * np.fft.ifft(spectrum))
    return 1j * (g - spectrum)


def causal_freq_kernel(resp):
    """Complete a real even response into a causal complex response.

    The real part is the input, bitwise untouched; the imaginary part is the
    negated discrete Hilbert transform.  The length-2n inverse transform of
    the result is causal: samples n+1..2n-1 vanish to roundoff.
    """
    if resp.flavor != REAL_EVEN:
        raise ValueError(f"causal completion needs a real-even response, got {resp.flavor!r}")
    samples = np.empty(resp.n + 1, dtype=np.complex128)
    samples.real = resp.samples
    samples.imag = -discrete_hilbert(resp)
    return FreqResponse(resp.n, samples, flavor=CAUSAL)


def impulse_response(resp):
    """Length-2n inverse transform of the conjugate-symmetric completion."""
    return np.fft.irfft(resp.samples, 2 * resp.n)


def sample_spectrum(net, n):
    """Evaluate a frequency-input net at the n+1 bins; returns (n+1, width)."""
    vals = np.atleast_2d(np.asarray(net(frequency_bins(n)), dtype=np.float64))
    if vals.shape[0] != n + 1:
        raise ValueError(f"net returned {vals.shape[0]} rows, expected {n + 1}")
    return vals


def _resolve_length(n_rows, length):
    if length is None:
        return n_rows
    length = int(length)
    if length < n_rows:
        raise ValueError(f"evaluation length {length} shorter than the input ({n_rows} rows)")
    return length


def fd_tno_causal(X, rpe, length=None):
    """Causal frequency-domain token mixer.

    Per channel: sample the net's real even response at the ``length+1``
    bins, complete it causally via the Hilbert transform, multiply with the
    zero-padded input spectrum, inverse-transform, and truncate.  Passing
    ``length > n`` evaluates the net at finer bins, which is how a net
    trained at one length extrapolates to longer sequences.
    """
    X = check_sequence_matrix(X)
    n, d = X.shape
    ne = _resolve_length(n, length)
    kh = sample_spectrum(rpe, ne)
    if kh.shape[1] != d:
        raise ValueError(f"rpe produced {kh.shape[1]} channels, input has {d}")
    t = np.fft.irfft(kh.T, 2 * ne)
    g = np.fft.rfft(_causal_projection_weights(2 * ne) * t)
    kc = np.empty((d, ne + 1), dtype=np.complex128)
    kc.real = kh.T
    kc.imag = g.imag  # Im(rfft(w*t)) = -H{kh}, the causal completion's imaginary part
    xhat = np.fft.rfft(X.T, 2 * ne)
    y = np.fft.irfft(kc * xhat, 2 * ne)
    return y[:, :n].T.copy()


def fd_tno_bidirectional(X, rpe, length=None):
    """Bidirectional frequency-domain token mixer.

    The net's output width is ``2d``: the first half supplies real parts,
    the second half imaginary parts, with the DC and Nyquist bins projected
    to be exactly real.  Needs one fewer transform than the time-domain
    baseline since the kernel is already spectral.
    """
    X = check_sequence_matrix(X)
    n, d = X.shape
    ne = _resolve_length(n, length)
    vals = sample_spectrum(rpe, ne)
    if vals.shape[1] % 2:
        raise ValueError(f"bidirectional rpe width must be even, got {vals.shape[1]}")
    if vals.shape[1] != 2 * d:
        raise ValueError(f"rpe produced {vals.shape[1]} outputs, expected {2 * d} for d={d}")
    resp = np.empty((d, ne + 1), dtype=np.complex128)
    resp.real = vals[:, :d].T
    resp.imag = vals[:, d:].T
    resp.imag[:, 0] = 0.0
    resp.imag[:, ne] = 0.0
    xhat = np.fft.rfft(X.T, 2 * ne)
    y = np.fft.irfft(resp * xhat, 2 * ne)
    return y[:, :n].T.copy()
