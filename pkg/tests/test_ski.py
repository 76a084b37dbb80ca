import numpy as np
import pytest

from toepkit import (
    InducingGrid,
    SparseFilter,
    TnoConfig,
    ToeplitzKernel,
    WarpedRpe,
    interpolation_weights,
    inverse_time_warp,
    make_inducing_grid,
    ski_causal_scan,
    ski_lowrank_matvec,
    ski_tno,
    sparse_conv_matvec,
    tno_baseline,
)
from toepkit.analysis import lagrange_factors

from oracles import dense_banded_matvec, lagrange_weights_reference


class TestInducingGrid:
    def test_two_points(self):
        g = make_inducing_grid(4, 2)
        np.testing.assert_array_equal(g.points, [0.0, 4.0])

    def test_unit_spacing(self):
        g = make_inducing_grid(4, 5)
        np.testing.assert_array_equal(g.points, [0.0, 1.0, 2.0, 3.0, 4.0])

    def test_lra_style_spacing(self):
        g = make_inducing_grid(512, 64)
        assert abs(g.spacing - 512.0 / 63.0) < 1e-12
        assert abs(g.spacing - 8.126984126984127) < 1e-12

    def test_r_out_of_range(self):
        with pytest.raises(ValueError):
            make_inducing_grid(8, 1)
        with pytest.raises(ValueError):
            make_inducing_grid(8, 10)

    def test_uneven_points_rejected(self):
        with pytest.raises(ValueError, match="evenly"):
            InducingGrid([0.0, 1.0, 3.0])

    def test_endpoints_included(self):
        g = make_inducing_grid(100, 7)
        assert g.points[0] == 0.0 and g.points[-1] == 100.0


class TestInverseTimeWarp:
    def test_zero_maps_to_zero(self):
        assert inverse_time_warp(0.0, 0.99) == 0.0

    def test_unit_offset(self):
        assert inverse_time_warp(1.0, 0.99) == 0.99

    def test_large_negative_offset(self):
        got = inverse_time_warp(-200.0, 0.99)
        np.testing.assert_allclose(got, -(0.99**200), rtol=1e-15)
        assert abs(got + 0.1339796748) < 1e-9

    def test_odd_exactly(self):
        t = np.linspace(-50, 50, 301)
        np.testing.assert_array_equal(inverse_time_warp(-t, 0.9), -inverse_time_warp(t, 0.9))

    def test_magnitude_shrinks_with_distance(self):
        t = np.arange(1.0, 200.0)
        x = inverse_time_warp(t, 0.95)
        assert np.all(x > 0) and np.all(np.diff(x) < 0)
        assert np.all(np.abs(inverse_time_warp(np.concatenate([-t, t]), 0.95)) <= 0.95)

    def test_invalid_lambda(self):
        for lam in (0.0, 1.0, 1.2):
            with pytest.raises(ValueError):
                inverse_time_warp(1.0, lam)


class TestWarpedRpe:
    def test_zero_offset_pinned(self):
        rpe = WarpedRpe.initialize(3, 8, 0.99, seed=0)
        np.testing.assert_array_equal(rpe(0.0), np.zeros(3))

    def test_exact_at_warped_node(self):
        # lam = 0.5 makes x(2) = 0.25 exactly representable
        knots = np.array([-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0])
        values = np.arange(7.0).reshape(7, 1) - 3.0
        values[3] = 0.0
        rpe = WarpedRpe(knots, values, lam=0.5)
        np.testing.assert_array_equal(rpe(2.0), values[4])   # x(2) = 0.25
        np.testing.assert_array_equal(rpe(1.0), values[5])   # x(1) = 0.5
        np.testing.assert_array_equal(rpe(-1.0), values[1])  # x(-1) = -0.5

    def test_linear_midpoint(self):
        knots = np.array([-1.0, 0.0, 0.25, 0.5, 1.0])
        values = np.array([[0.0], [0.0], [2.0], [4.0], [1.0]])
        rpe = WarpedRpe(knots, values, lam=0.5)
        t = np.log(0.375) / np.log(0.5)  # x(t) = 0.375, halfway in warped space
        np.testing.assert_allclose(rpe(t), [3.0], rtol=1e-12)

    def test_zero_pin_enforced(self):
        knots = np.array([-1.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="pinned"):
            WarpedRpe(knots, np.ones((3, 1)), lam=0.5)

    def test_all_integer_offsets_interior(self):
        rpe = WarpedRpe.initialize(1, 4, 0.99, seed=1)
        t = np.arange(-5000.0, 5001.0)
        out = rpe(t)
        assert np.all(np.isfinite(out))


class TestInterpolationWeights:
    def test_node_query_single_unit_weight(self):
        g = make_inducing_grid(64, 9)
        op = interpolation_weights(g, [g.points[3]], degree=1)
        w = op.weights[0]
        assert set(np.unique(w)) <= {0.0, 1.0} and w.sum() == 1.0
        assert op.indices[0][np.argmax(w)] == 3

    def test_linear_midpoint(self):
        g = make_inducing_grid(64, 9)
        q = (g.points[2] + g.points[3]) / 2.0
        op = interpolation_weights(g, [q], degree=1)
        np.testing.assert_allclose(op.weights[0], [0.5, 0.5])
        np.testing.assert_array_equal(op.indices[0], [2, 3])

    def test_cubic_matches_lagrange_basis(self):
        g = make_inducing_grid(64, 9)
        q = g.points[2] + 0.25 * g.spacing
        op = interpolation_weights(g, [q], degree=3)
        want = lagrange_weights_reference(g.points[op.indices[0]], q)
        np.testing.assert_allclose(op.weights[0], want, rtol=1e-12)

    def test_cubic_node_exactness(self):
        g = make_inducing_grid(64, 9)
        op = interpolation_weights(g, [g.points[4]], degree=3)
        w = op.weights[0]
        assert np.count_nonzero(w) == 1 and w.max() == 1.0

    def test_cubic_one_sided_at_edges(self):
        g = make_inducing_grid(64, 9)
        op = interpolation_weights(g, [0.1, 63.9], degree=3)
        assert op.indices[0].min() == 0
        assert op.indices[1].max() == g.r - 1

    def test_rows_sum_to_one(self):
        g = make_inducing_grid(128, 17)
        q = np.linspace(0.0, 128.0, 301)
        for degree in (1, 3):
            op = interpolation_weights(g, q, degree)
            np.testing.assert_allclose(op.weights.sum(axis=1), 1.0, atol=1e-12)

    def test_query_outside_span_rejected(self):
        g = make_inducing_grid(16, 5)
        with pytest.raises(ValueError, match="span"):
            interpolation_weights(g, [-0.5], degree=1)

    def test_invalid_degree(self):
        g = make_inducing_grid(16, 5)
        with pytest.raises(ValueError, match="degree"):
            interpolation_weights(g, [1.0], degree=2)

    def test_lagrange_factor_bound_and_midpoint_tightness(self):
        g = make_inducing_grid(64, 9)
        h = g.spacing
        q = np.linspace(0.0, 64.0, 1001)
        f = lagrange_factors(g, q, degree=1)
        assert np.all(f <= h * h / 8.0 + 1e-15)
        mids = (g.points[:-1] + g.points[1:]) / 2.0
        np.testing.assert_allclose(lagrange_factors(g, mids, 1), h * h / 8.0, rtol=1e-12)


class TestSparseConv:
    def test_center_delta_is_identity(self):
        x = np.random.default_rng(0).standard_normal(16)
        f = SparseFilter([0.0, 1.0, 0.0])
        np.testing.assert_array_equal(sparse_conv_matvec(f, x), x)

    def test_single_off_center_tap(self):
        # taps (1, 0, 0) put weight at offset -1: y[i] = x[i+1]
        x = np.arange(1.0, 7.0)
        f = SparseFilter([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(
            sparse_conv_matvec(f, x), np.concatenate([x[1:], [0.0]])
        )

    def test_matches_banded_oracle(self):
        rng = np.random.default_rng(33)
        taps = rng.standard_normal(33)
        x = rng.standard_normal(256)
        f = SparseFilter(taps)
        want = dense_banded_matvec(taps, 16, x)
        np.testing.assert_allclose(sparse_conv_matvec(f, x), want, atol=1e-12)

    def test_even_width_rejected_bidirectional(self):
        with pytest.raises(ValueError, match="odd"):
            SparseFilter(np.ones(4))

    def test_causal_one_sided(self):
        x = np.arange(1.0, 6.0)
        f = SparseFilter([1.0, 1.0], causal=True)
        # y[i] = x[i] + x[i-1]
        np.testing.assert_array_equal(
            sparse_conv_matvec(f, x), np.array([1.0, 3.0, 5.0, 7.0, 9.0])
        )

    def test_width_guard(self):
        with pytest.raises(ValueError, match="width"):
            SparseFilter(np.ones(129))


def _toeplitz_from_function(r, spacing, fn):
    offsets = np.arange(-(r - 1), r, dtype=np.float64) * spacing
    return ToeplitzKernel(r, fn(offsets))


class TestSkiLowRank:
    def test_collapse_to_exact_when_grid_is_observations(self):
        n = 12
        rng = np.random.default_rng(5)
        grid = InducingGrid(np.arange(1.0, n + 1.0))
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), degree=1)
        np.testing.assert_array_equal(W.to_dense(), np.eye(n))
        A = ToeplitzKernel(n, rng.standard_normal(2 * n - 1))
        x = rng.standard_normal(n)
        from toepkit import toeplitz_dense

        np.testing.assert_allclose(
            ski_lowrank_matvec(W, A, x), toeplitz_dense(A) @ x, rtol=1e-10
        )

    def test_zero_input(self):
        grid = make_inducing_grid(32, 8)
        W = interpolation_weights(grid, np.arange(1.0, 33.0), degree=1)
        A = _toeplitz_from_function(8, grid.spacing, lambda t: np.exp(-((t / 16.0) ** 2)))
        np.testing.assert_array_equal(ski_lowrank_matvec(W, A, np.zeros(32)), np.zeros(32))

    def test_matches_dense_factorization(self):
        n, r = 64, 16
        rng = np.random.default_rng(8)
        grid = make_inducing_grid(n, r)
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), degree=1)
        A = _toeplitz_from_function(r, grid.spacing, lambda t: np.exp(-((t / 16.0) ** 2)))
        x = rng.standard_normal(n)
        from toepkit import toeplitz_dense

        Wd = W.to_dense()
        want = Wd @ (toeplitz_dense(A) @ (Wd.T @ x))
        got = ski_lowrank_matvec(W, A, x)
        assert np.linalg.norm(got - want) / np.linalg.norm(want) <= 1e-10

    def test_shape_mismatch(self):
        grid = make_inducing_grid(32, 8)
        W = interpolation_weights(grid, np.arange(1.0, 33.0), degree=1)
        A = ToeplitzKernel(7, np.zeros(13))
        with pytest.raises(ValueError):
            ski_lowrank_matvec(W, A, np.zeros(32))


class TestSkiTno:
    def test_zero_model_zero_output(self):
        n, d, r = 32, 3, 8
        cfg = TnoConfig(n=n, d=d, r=r, m=5, lam=0.9, degree=1, mode="ski")
        knots = np.linspace(-1, 1, 2 * r - 1)
        knots[r - 1] = 0.0
        rpe = WarpedRpe(knots, np.zeros((2 * r - 1, d)), lam=0.9)
        filters = [SparseFilter(np.zeros(5)) for _ in range(d)]
        X = np.random.default_rng(0).standard_normal((n, d))
        np.testing.assert_array_equal(ski_tno(X, cfg, rpe, filters), np.zeros((n, d)))

    def test_exact_collapse_equals_baseline_with_warped_kernel(self):
        n, d = 24, 2
        cfg = TnoConfig(n=n, d=d, r=n, m=3, lam=0.9, degree=1, mode="ski")
        rpe = WarpedRpe.initialize(d, 6, 0.9, seed=3, scale=0.5)
        filters = [SparseFilter(np.zeros(3)) for _ in range(d)]
        X = np.random.default_rng(1).standard_normal((n, d))
        grid = InducingGrid(np.arange(1.0, n + 1.0))  # observation points
        got = ski_tno(X, cfg, rpe, filters, grid=grid)
        want = tno_baseline(X, rpe, 1.0)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_matches_dense_sum_oracle(self):
        n, d, r, m = 128, 4, 32, 17
        cfg = TnoConfig(n=n, d=d, r=r, m=m, lam=0.99, degree=1, mode="ski")
        rng = np.random.default_rng(10)
        rpe = WarpedRpe.initialize(d, r, 0.99, seed=10, scale=0.3)
        filters = [SparseFilter(rng.standard_normal(m)) for _ in range(d)]
        X = rng.standard_normal((n, d))
        got = ski_tno(X, cfg, rpe, filters)

        grid = make_inducing_grid(n, r)
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), 1).to_dense()
        offsets = np.arange(-(r - 1), r, dtype=np.float64) * grid.spacing
        avals = rpe(offsets)
        idx = np.arange(r)
        for l in range(d):
            A = avals[(idx[:, None] - idx[None, :]) + r - 1, l]
            T_low = W @ A @ W.T
            want = T_low @ X[:, l] + dense_banded_matvec(filters[l].taps, filters[l].center, X[:, l])
            err = np.linalg.norm(got[:, l] - want) / np.linalg.norm(want)
            assert err <= 1e-10, f"channel {l}: {err}"

    def test_sparse_and_dense_paths_agree(self):
        n, d, r, m = 96, 3, 16, 9
        rng = np.random.default_rng(2)
        rpe = WarpedRpe.initialize(d, r, 0.95, seed=2, scale=0.2)
        filters = [SparseFilter(rng.standard_normal(m)) for _ in range(d)]
        X = rng.standard_normal((n, d))
        a = ski_tno(X, TnoConfig(n=n, d=d, r=r, m=m, degree=1, mode="ski"), rpe, filters)
        b = ski_tno(X, TnoConfig(n=n, d=d, r=r, m=m, degree=1, mode="ski-dense"), rpe, filters)
        assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())

    def test_channel_count_must_match(self):
        cfg = TnoConfig(n=16, d=2, r=4, m=3)
        rpe = WarpedRpe.initialize(3, 4, 0.9, seed=0)
        filters = [SparseFilter(np.zeros(3))] * 3
        with pytest.raises(ValueError, match="channels"):
            ski_tno(np.zeros((16, 2)), cfg, rpe, filters)


class TestCausalScan:
    def test_single_step(self):
        grid = InducingGrid(np.array([0.0, 1.0]))
        W = interpolation_weights(grid, [0.5], degree=1)
        A = np.array([[2.0, 0.5], [1.0, 3.0]])
        x = np.array([4.0])
        w = np.array([0.5, 0.5])
        np.testing.assert_allclose(ski_causal_scan(W, A, x), [w @ A @ w * 4.0])

    def test_identity_collapse(self):
        n = 8
        grid = InducingGrid(np.arange(0.0, n))
        W = interpolation_weights(grid, np.arange(0.0, n), degree=1)
        x = np.random.default_rng(3).standard_normal(n)
        np.testing.assert_allclose(ski_causal_scan(W, np.eye(n), x), x, atol=1e-12)

    def test_matches_masked_dense_oracle(self):
        n, r = 64, 16
        rng = np.random.default_rng(6)
        grid = make_inducing_grid(n, r)
        W = interpolation_weights(grid, np.arange(1.0, n + 1.0), degree=1)
        A = rng.standard_normal((r, r))
        x = rng.standard_normal(n)
        Wd = W.to_dense()
        want = np.tril(Wd @ A @ Wd.T) @ x
        got = ski_causal_scan(W, A, x)
        assert np.linalg.norm(got - want) / np.linalg.norm(want) <= 1e-10

    def test_shape_mismatch(self):
        grid = make_inducing_grid(16, 4)
        W = interpolation_weights(grid, np.arange(1.0, 17.0), degree=1)
        with pytest.raises(ValueError):
            ski_causal_scan(W, np.eye(5), np.zeros(16))
