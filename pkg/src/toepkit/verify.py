"""Built-in invariant checks behind ``toepkit verify``.

Every check is seeded, deterministic, and prints no timing information, so
two runs with the same seed produce byte-identical reports.  Check names are
stable identifiers; the CLI exits nonzero if any check fails.
"""

from __future__ import annotations

import numpy as np

from . import analysis, freqdom, rpe as rpe_mod, ski as ski_mod
from .analysis import (
    bound_suite_kernels,
    decay_diagnostics,
    lagrange_factors,
    nystrom_dense,
    ski_bound_evaluate,
    spectral_norm,
)
from .freqdom import (
    REAL_EVEN,
    FreqResponse,
    causal_freq_kernel,
    discrete_hilbert,
    fd_tno_bidirectional,
    fd_tno_causal,
    frequency_bins,
    hilbert_periodic,
    impulse_response,
    sample_spectrum,
)
from .rpe import MlpRpe, layer_norm, piecewise_linearity_probe
from .ski import (
    InducingGrid,
    SparseFilter,
    WarpedRpe,
    interpolation_weights,
    inverse_time_warp,
    make_inducing_grid,
    ski_causal_scan,
    ski_lowrank_matvec,
    ski_tno,
    sparse_conv_matvec,
)
from .config import TnoConfig
from .toeplitz import (
    DecayBias,
    FftWorkspace,
    ToeplitzKernel,
    apply_decay_bias,
    tno_baseline,
    toeplitz_dense,
    toeplitz_matvec,
)

__all__ = ["SUITES", "run_suite", "list_checks", "validate_kernel_file"]


def _rel_err(approx, exact):
    denom = np.linalg.norm(exact)
    if denom == 0.0:
        return float(np.linalg.norm(approx - exact))
    return float(np.linalg.norm(approx - exact) / denom)


def _seeded_kernel(n, seed, causal=False):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(2 * n - 1)
    if causal:
        values[: n - 1] = 0.0
    return ToeplitzKernel(n, values, causal=causal)


# --------------------------------------------------------------------------
# tcore


def check_tcore_oracle_equivalence(seed):
    worst = 0.0
    for n in range(2, 513):
        rng = np.random.default_rng(seed + n)
        kernel = ToeplitzKernel(n, rng.standard_normal(2 * n - 1))
        x = rng.standard_normal(n)
        y = toeplitz_matvec(kernel, x)
        worst = max(worst, _rel_err(y, toeplitz_dense(kernel) @ x))
    return worst <= 1e-10, f"worst relative error {worst:.3e} over n=2..512 (limit 1e-10)"


def check_tcore_linearity(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (3, 17, 64, 129):
        kernel = ToeplitzKernel(n, rng.standard_normal(2 * n - 1))
        ws = FftWorkspace(n)
        x, z = rng.standard_normal((2, n))
        a, b = rng.standard_normal(2)
        lhs = toeplitz_matvec(kernel, a * x + b * z, ws)
        rhs = a * toeplitz_matvec(kernel, x, ws) + b * toeplitz_matvec(kernel, z, ws)
        worst = max(worst, _rel_err(lhs, rhs))
    return worst <= 1e-12, f"worst relative deviation {worst:.3e} (limit 1e-12)"


def check_tcore_causality(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (8, 33, 128):
        kernel = _seeded_kernel(n, seed + n, causal=True)
        ws = FftWorkspace(n)
        x = rng.standard_normal(n)
        y = toeplitz_matvec(kernel, x, ws)
        scale = max(np.abs(y).max(), 1.0)
        for _ in range(8):
            i = int(rng.integers(0, n - 1))
            j = int(rng.integers(i + 1, n))
            xp = x.copy()
            xp[j] += rng.standard_normal() * 10.0
            yp = toeplitz_matvec(kernel, xp, ws)
            worst = max(worst, float(np.abs(yp[: i + 1] - y[: i + 1]).max()) / scale)
    return worst <= 1e-11, f"worst past-output change {worst:.3e} of scale (limit 1e-11)"


def check_tcore_decay_monotonicity(seed):
    n = 64
    kernel = ToeplitzKernel(n, np.ones(2 * n - 1))
    for lam in (0.5, 0.9, 0.99):
        scaled = apply_decay_bias(kernel, DecayBias(lam))
        mags = np.abs(scaled.values[n - 1 :])  # |delta| = 0..n-1
        if not np.all(np.diff(mags) < 0):
            return False, f"values not strictly decreasing in |delta| for lam={lam}"
    return True, "strictly decreasing in |delta| for lam in {0.5, 0.9, 0.99}"


# --------------------------------------------------------------------------
# ski


def check_ski_exactness(seed):
    # unit-spaced inducing grid covering every observation offset: the kernel
    # equals the piecewise-linear interpolant of its inducing values, and the
    # factorization must reproduce the Gram matrix exactly
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (16, 48):
        grid = InducingGrid(np.arange(0.0, n + 1.0))
        r = grid.r
        avals = rng.standard_normal(2 * r - 1)
        kfun = lambda t: np.interp(t, np.arange(-(r - 1.0), r), avals)
        queries = np.arange(1.0, n + 1.0)
        W = interpolation_weights(grid, queries, degree=1).to_dense()
        A = kfun(grid.points[:, None] - grid.points[None, :])
        T = kfun(queries[:, None] - queries[None, :])
        worst = max(worst, float(np.linalg.norm(W @ A @ W.T - T)))
    return worst <= 1e-10, f"worst Frobenius gap {worst:.3e} (limit 1e-10)"


def check_ski_partition_of_unity(seed):
    worst_row = 0.0
    worst_const = 0.0
    for n, r, degree in ((64, 9, 1), (64, 16, 3), (128, 32, 1)):
        grid = make_inducing_grid(n, r)
        q = np.arange(1.0, n + 1.0)
        interp = interpolation_weights(grid, q, degree)
        worst_row = max(worst_row, float(np.abs(interp.weights.sum(axis=1) - 1.0).max()))
        c = 0.75
        A = np.full((r, r), c)
        W = interp.to_dense()
        out = W @ (A @ (W.T @ np.ones(n)))
        worst_const = max(worst_const, _rel_err(out, c * n * np.ones(n)))
    ok = worst_row <= 1e-12 and worst_const <= 1e-8
    return ok, (
        f"worst row-sum deviation {worst_row:.3e} (limit 1e-12); "
        f"constant reproduction error {worst_const:.3e} (limit 1e-8)"
    )


def check_ski_lagrange_factor(seed):
    worst_excess = -np.inf
    worst_mid = np.inf
    for n, r in ((64, 9), (128, 16), (200, 25)):
        grid = make_inducing_grid(n, r)
        h = grid.spacing
        q = np.arange(1.0, n + 1.0)
        factors = lagrange_factors(grid, q, degree=1)
        bound = h * h / 8.0
        worst_excess = max(worst_excess, float(factors.max() - bound))
        mids = (grid.points[:-1] + grid.points[1:]) / 2.0
        mid_factors = lagrange_factors(grid, mids, degree=1)
        worst_mid = min(worst_mid, float(np.abs(mid_factors - bound).max()))
        if np.abs(mid_factors - bound).max() > 1e-12 * bound:
            return False, "midpoint factor not tight against h^2/8"
    ok = worst_excess <= 0.0
    return ok, f"max factor excess over h^2/8 is {worst_excess:.3e}; midpoints tight to 1e-12"


def check_ski_warp_oddness(seed):
    rng = np.random.default_rng(seed)
    t = np.concatenate([rng.uniform(-300, 300, 200), [0.0, 1.0, -1.0, 200.0]])
    for lam in (0.3, 0.9, 0.99):
        if np.any(inverse_time_warp(-t, lam) != -inverse_time_warp(t, lam)):
            return False, f"warp not exactly odd for lam={lam}"
    return True, "sign(t)*lam**|t| exactly odd for lam in {0.3, 0.9, 0.99}"


def check_ski_scan_agreement(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (4, 17, 64, 256):
        r = max(2, n // 4)
        grid = make_inducing_grid(n, r)
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), degree=1)
        A = rng.standard_normal((r, r))
        x = rng.standard_normal(n)
        got = ski_causal_scan(W, A, x)
        Wd = W.to_dense()
        want = np.tril(Wd @ A @ Wd.T) @ x
        worst = max(worst, _rel_err(got, want))
    return worst <= 1e-10, f"worst relative error vs masked dense oracle {worst:.3e} (limit 1e-10)"


# --------------------------------------------------------------------------
# fdom


def check_fdom_hilbert_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (16, 64, 128):
        m = 2 * n
        half = rng.standard_normal(n + 1)
        full = np.concatenate([half, half[-2:0:-1]])  # even periodic extension
        # project out the DC/Nyquist components (the spectrum's mean and
        # alternating mean); H^2 = -1 holds on the remaining AC part
        alt = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        full = full - full.mean() - (full * alt).mean() * alt
        twice = hilbert_periodic(hilbert_periodic(full))
        worst = max(worst, float(np.abs(twice + full).max()))
    return worst <= 1e-8, f"worst |H(H(k))+k| on the AC part {worst:.3e} (limit 1e-8)"


def check_fdom_causality(seed):
    worst = 0.0
    for i in range(6):
        n = (32, 64, 128)[i % 3]
        net = MlpRpe(2, hidden=(32, 32), activation=("gelu", "silu", "relu")[i % 3],
                     seed=seed + i)
        kh = sample_spectrum(net, n)
        for l in range(2):
            resp = causal_freq_kernel(FreqResponse(n, kh[:, l], REAL_EVEN))
            k = impulse_response(resp)
            leak = np.abs(k[n + 1 :]).max() / max(np.abs(k).max(), 1e-300)
            worst = max(worst, float(leak))
    return worst <= 1e-8, f"worst anticausal leakage {worst:.3e} of peak (limit 1e-8)"


def check_fdom_real_part_preserved(seed):
    rng = np.random.default_rng(seed)
    for n in (16, 100):
        kh = rng.standard_normal(n + 1)
        resp = causal_freq_kernel(FreqResponse(n, kh, REAL_EVEN))
        if not np.all(resp.samples.real == kh):
            return False, "real part of the causal response differs bitwise from the input"
    return True, "real part bitwise identical to the input response"


def check_fdom_parseval(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (16, 64, 256):
        kh = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
        kh[0] = kh[0].real
        kh[n] = kh[n].real
        k = np.fft.irfft(kh, 2 * n)
        time_e = float(np.sum(k**2))
        spec_e = (abs(kh[0]) ** 2 + abs(kh[n]) ** 2 + 2 * np.sum(np.abs(kh[1:n]) ** 2)) / (2 * n)
        worst = max(worst, abs(time_e - spec_e) / spec_e)
    return worst <= 1e-10, f"worst relative Parseval mismatch {worst:.3e} (limit 1e-10)"


def check_fdom_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (8, 33, 130, 256):
        d = 2
        X = rng.standard_normal((n, d))
        net = MlpRpe(d, hidden=(16,), activation="gelu", seed=seed + n)
        y = fd_tno_causal(X, net)
        kh = sample_spectrum(net, n)
        for l in range(d):
            resp = causal_freq_kernel(FreqResponse(n, kh[:, l], REAL_EVEN))
            g = impulse_response(resp)
            T = _dense_from_circular(g, n)
            worst = max(worst, _rel_err(y[:, l], T @ X[:, l]))
        net2 = MlpRpe(2 * d, hidden=(16,), activation="silu", seed=seed + n + 1)
        y2 = fd_tno_bidirectional(X, net2)
        vals = sample_spectrum(net2, n)
        for l in range(d):
            resp = vals[:, l] + 1j * np.concatenate(
                [[0.0], vals[1:n, d + l], [0.0]]
            )
            g = np.fft.irfft(resp, 2 * n)
            T = _dense_from_circular(g, n)
            worst = max(worst, _rel_err(y2[:, l], T @ X[:, l]))
    return worst <= 1e-8, f"worst relative error vs dense oracles {worst:.3e} (limit 1e-8)"


def _dense_from_circular(g, n):
    """Dense Toeplitz matrix of the circular length-2n kernel acting on
    zero-padded length-n inputs."""
    idx = np.arange(n)
    return g[np.mod(idx[:, None] - idx[None, :], 2 * n)]


# --------------------------------------------------------------------------
# rpe


def check_rpe_gradients(seed):
    worst = 0.0
    coords_checked = 0
    for activation in ("gelu", "silu"):
        net = MlpRpe(3, hidden=(8, 8), activation=activation, seed=seed)
        rng = np.random.default_rng(seed + 1)
        ts = rng.uniform(-2.0, 2.0, 12)
        up = rng.standard_normal((12, 3))
        net.forward(ts, keep_cache=True)
        bundle = net.backward(up)
        params = net.parameter_arrays()
        grads = net.gradient_arrays(bundle)

        def loss():
            return float(np.sum(net.forward(ts) * up))

        for p, g in zip(params, grads):
            flat_p = p.ravel()
            flat_g = g.ravel()
            take = min(12, flat_p.shape[0])
            for idx in rng.choice(flat_p.shape[0], size=take, replace=False):
                old = flat_p[idx]
                flat_p[idx] = old + 1e-5
                up_l = loss()
                flat_p[idx] = old - 1e-5
                dn_l = loss()
                flat_p[idx] = old
                fd = (up_l - dn_l) / 2e-5
                denom = max(abs(fd), abs(flat_g[idx]), 1e-8)
                worst = max(worst, abs(fd - flat_g[idx]) / denom)
                coords_checked += 1
    return worst <= 1e-5, (
        f"worst relative gradient error {worst:.3e} over {coords_checked} coordinates "
        "(limit 1e-5)"
    )


def check_rpe_piecewise_linearity(seed):
    net = MlpRpe(2, hidden=(16, 16), activation="relu", layer_norm=False, seed=seed)
    report = piecewise_linearity_probe(net, (-1.0, 1.0))
    ok = report.passed
    try:
        gelu_net = MlpRpe(2, hidden=(8,), activation="gelu", seed=seed)
        piecewise_linearity_probe(gelu_net, (-1.0, 1.0))
        return False, "probe failed to refuse a gelu net"
    except ValueError:
        pass
    return ok, (
        f"breakpoints per channel {report.breakpoints} (unit budget {report.hidden_units}); "
        f"off-kink second difference {report.max_off_kink_second_diff:.3e} "
        f"<= threshold {report.threshold:.3e}; smooth activations refused"
    )


def check_rpe_layer_norm_invariance(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 2e4, size=(16, 64))  # large scale keeps eps negligible
    gamma = rng.standard_normal(64)
    beta = rng.standard_normal(64)
    worst = 0.0
    for c in (2.0, 0.5, 117.0):
        worst = max(
            worst,
            float(np.abs(layer_norm(c * z, gamma, beta) - layer_norm(z, gamma, beta)).max()),
        )
    return worst <= 1e-10, f"worst output change under input scaling {worst:.3e} (limit 1e-10)"


# --------------------------------------------------------------------------
# analysis


def check_analysis_bound_validity(seed):
    cells = 0
    for kernel in bound_suite_kernels():
        for n in (64, 128):
            for r in (8, 16, 32):
                for degree in (1, 3):
                    report = ski_bound_evaluate(kernel, make_inducing_grid(n, r), degree, n)
                    cells += 1
                    if not report.holds:
                        return False, (
                            f"bound violated for {kernel.name} n={n} r={r} N={degree}: "
                            f"{report.ski_err_empirical:.6g} > {report.ski_bound:.6g}"
                        )
    return True, f"empirical error within the bound in {cells}/60 cells"


def check_analysis_nystrom_collapse(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (24, 64):
        vals = rng.standard_normal(2 * n - 1)
        idx = np.arange(n)
        T = vals[(idx[:, None] - idx[None, :]) + n - 1]
        K = nystrom_dense(T, T, T)
        worst = max(worst, spectral_norm(K - T))
    return worst <= 1e-8, f"worst ||F A^+ B - T||_2 at r=n: {worst:.3e} (limit 1e-8)"


def check_analysis_power_iteration(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for shape in ((16, 16), (64, 64), (256, 256), (64, 128)):
        M = rng.standard_normal(shape)
        got = spectral_norm(M)
        want = float(np.linalg.svd(M, compute_uv=False)[0])
        worst = max(worst, abs(got - want) / want)
    return worst <= 1e-8, f"worst relative gap vs SVD {worst:.3e} (limit 1e-8)"


# --------------------------------------------------------------------------

SUITES = {
    "tcore": [
        ("oracle-equivalence", check_tcore_oracle_equivalence),
        ("linearity", check_tcore_linearity),
        ("causality", check_tcore_causality),
        ("decay-bias-monotonicity", check_tcore_decay_monotonicity),
    ],
    "ski": [
        ("ski-exactness", check_ski_exactness),
        ("partition-of-unity", check_ski_partition_of_unity),
        ("lagrange-factor", check_ski_lagrange_factor),
        ("warp-oddness", check_ski_warp_oddness),
        ("scan-oracle-agreement", check_ski_scan_agreement),
    ],
    "fdom": [
        ("hilbert-antisymmetry", check_fdom_hilbert_antisymmetry),
        ("causality-leakage", check_fdom_causality),
        ("real-part-preserved", check_fdom_real_part_preserved),
        ("parseval", check_fdom_parseval),
        ("oracle-equivalence", check_fdom_oracle_equivalence),
    ],
    "rpe": [
        ("gradient-correctness", check_rpe_gradients),
        ("piecewise-linearity", check_rpe_piecewise_linearity),
        ("layer-norm-invariance", check_rpe_layer_norm_invariance),
    ],
    "analysis": [
        ("bound-validity", check_analysis_bound_validity),
        ("nystrom-collapse", check_analysis_nystrom_collapse),
        ("power-iteration-vs-svd", check_analysis_power_iteration),
    ],
}


def list_checks(suite="all"):
    names = []
    suites = SUITES.keys() if suite == "all" else [suite]
    for s in suites:
        if s not in SUITES:
            raise ValueError(f"unknown suite {s!r}; choose from {sorted(SUITES)} or 'all'")
        names.extend(f"{s}/{name}" for name, _ in SUITES[s])
    return names


def run_suite(suite="all", seed=0):
    """Run the named invariant checks; returns (all_passed, report lines)."""
    suites = list(SUITES.keys()) if suite == "all" else [suite]
    for s in suites:
        if s not in SUITES:
            raise ValueError(f"unknown suite {s!r}; choose from {sorted(SUITES)} or 'all'")
    lines = []
    failures = 0
    total = 0
    for s in suites:
        for name, fn in SUITES[s]:
            total += 1
            try:
                ok, detail = fn(seed)
            except Exception as exc:  # a crashed check is a failed check
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            failures += 0 if ok else 1
            lines.append(f"{'PASS' if ok else 'FAIL'} {s}/{name}: {detail}")
    lines.append(f"# summary: checks={total} passed={total - failures} failed={failures}")
    return failures == 0, lines


def validate_kernel_file(path):
    """Validate a serialized kernel against its construction invariants.

    Returns (ok, lines); a truncated or corrupted file fails with the
    violated invariant named.
    """
    from .io import read_kernel_csv

    try:
        kernel = read_kernel_csv(path)
    except ValueError as exc:
        return False, [f"FAIL kernel-file: {exc}"]
    return True, [
        f"PASS kernel-file: n={kernel.n} causal={int(kernel.causal)} "
        f"values={kernel.values.shape[0]} all finite"
    ]
