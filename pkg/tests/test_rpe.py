import numpy as np
import pytest

from toepkit import MlpRpe, layer_norm, piecewise_linearity_probe

from oracles import mlp_forward_reference


def finite_diff_check(net, n_coords_per_array=10, step=1e-5, seed=0, kink_floor=0.0):
    """Worst relative error between backward() and central differences."""
    rng = np.random.default_rng(seed)
    ts = rng.uniform(-2.0, 2.0, 16)
    upstream = rng.standard_normal((16, net.out_dim))

    if kink_floor > 0.0:
        # relu comparisons are only valid away from the kinks
        net.forward(ts, keep_cache=True)
        pre = np.concatenate([np.abs(a).ravel() for a in net._cache["pre_act"]])
        assert np.min(pre) >= kink_floor

    def loss():
        return float(np.sum(net.forward(ts) * upstream))

    net.forward(ts, keep_cache=True)
    bundle = net.backward(upstream)
    worst = 0.0
    checked = 0
    for p, g in zip(net.parameter_arrays(), net.gradient_arrays(bundle)):
        fp, fg = p.ravel(), g.ravel()
        take = min(n_coords_per_array, fp.shape[0])
        for idx in rng.choice(fp.shape[0], size=take, replace=False):
            old = fp[idx]
            fp[idx] = old + step
            hi = loss()
            fp[idx] = old - step
            lo = loss()
            fp[idx] = old
            fd = (hi - lo) / (2.0 * step)
            denom = max(abs(fd), abs(fg[idx]), 1e-8)
            worst = max(worst, abs(fd - fg[idx]) / denom)
            checked += 1
    return worst, checked


class TestForward:
    def test_zeroed_net_outputs_zero(self):
        net = MlpRpe(3, hidden=(8,), activation="relu", seed=0)
        for w in net.weights:
            w[...] = 0.0
        for b in net.biases:
            b[...] = 0.0
        for s in net.ln_shift:
            s[...] = 0.0
        out = net(np.linspace(-2, 2, 7))
        np.testing.assert_array_equal(out, np.zeros((7, 3)))

    def test_pure_linear_layer(self):
        net = MlpRpe(1, hidden=(), activation="relu", seed=0)
        net.weights[0][...] = 2.5
        net.biases[0][...] = -0.75
        np.testing.assert_allclose(net(2.0), [2.5 * 2.0 - 0.75])
        assert net.hidden_units == 0

    def test_matches_reference_reimplementation(self):
        for act in ("relu", "gelu", "silu"):
            for ln in (True, False):
                net = MlpRpe(4, hidden=(16, 8), activation=act, layer_norm=ln, seed=11)
                got = net(0.37)
                want = mlp_forward_reference(net, 0.37)[0]
                np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_scalar_and_batch_agree(self):
        net = MlpRpe(2, hidden=(8,), seed=5)
        batch = net(np.array([0.1, -0.4]))
        # gemm vs dot kernels may round the last bit differently
        np.testing.assert_allclose(batch[0], net(0.1), rtol=0, atol=1e-14)
        np.testing.assert_allclose(batch[1], net(-0.4), rtol=0, atol=1e-14)

    def test_unknown_activation(self):
        with pytest.raises(ValueError, match="activation"):
            MlpRpe(1, activation="tanh")


class TestBackward:
    def test_requires_cached_forward(self):
        net = MlpRpe(2, hidden=(4,), seed=0)
        with pytest.raises(RuntimeError, match="cache"):
            net.backward(np.ones((3, 2)))

    def test_zero_upstream_zero_grads(self):
        net = MlpRpe(2, hidden=(4, 4), seed=1)
        net.forward(np.linspace(-1, 1, 5), keep_cache=True)
        bundle = net.backward(np.zeros((5, 2)))
        for g in net.gradient_arrays(bundle):
            np.testing.assert_array_equal(g, 0.0)
        np.testing.assert_array_equal(bundle.inputs, np.zeros(5))

    def test_single_linear_layer_weight_grad_is_input(self):
        net = MlpRpe(1, hidden=(), seed=0)
        net.forward(np.array([3.0]), keep_cache=True)
        bundle = net.backward(np.array([[1.0]]))
        np.testing.assert_allclose(bundle.weights[0], [[3.0]])
        np.testing.assert_allclose(bundle.biases[0], [1.0])
        np.testing.assert_allclose(bundle.inputs, [net.weights[0][0, 0]])

    @pytest.mark.parametrize("act", ["gelu", "silu"])
    @pytest.mark.parametrize("ln", [True, False])
    def test_finite_difference_agreement(self, act, ln):
        net = MlpRpe(3, hidden=(10, 6), activation=act, layer_norm=ln, seed=7)
        worst, checked = finite_diff_check(net, seed=3)
        assert checked >= 40
        assert worst <= 1e-5, f"worst relative error {worst}"

    def test_relu_agreement_away_from_kinks(self):
        net = MlpRpe(2, hidden=(8,), activation="relu", layer_norm=False, seed=2)
        worst, _ = finite_diff_check(net, seed=4, kink_floor=1e-3)
        assert worst <= 1e-5

    def test_input_gradient_finite_difference(self):
        net = MlpRpe(2, hidden=(8, 8), activation="silu", seed=9)
        t0 = 0.613
        up = np.array([[0.7, -1.3]])
        net.forward(np.array([t0]), keep_cache=True)
        g = net.backward(up).inputs[0]
        h = 1e-6
        fd = (np.sum(net(np.array([t0 + h])) * up) - np.sum(net(np.array([t0 - h])) * up)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-6)


class TestLayerNorm:
    def test_scale_invariance_mechanism(self):
        rng = np.random.default_rng(0)
        z = rng.normal(0.0, 3e4, size=(8, 32))
        gamma = rng.standard_normal(32)
        beta = rng.standard_normal(32)
        for c in (0.5, 2.0, 40.0):
            delta = np.abs(layer_norm(c * z, gamma, beta) - layer_norm(z, gamma, beta)).max()
            assert delta <= 1e-10

    def test_normalizes_mean_and_variance(self):
        rng = np.random.default_rng(1)
        z = rng.normal(5.0, 3.0, size=(4, 64))
        out = layer_norm(z)
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)


class TestPiecewiseProbe:
    def test_linear_net_has_no_breakpoints(self):
        net = MlpRpe(2, hidden=(), activation="relu", seed=0)
        report = piecewise_linearity_probe(net, (-1, 1))
        assert report.passed
        assert report.breakpoints == [0, 0]

    def test_single_unit_kink_location(self):
        net = MlpRpe(1, hidden=(1,), activation="relu", layer_norm=False, seed=0)
        net.weights[0][...] = 1.7
        net.biases[0][...] = -0.4
        net.weights[1][...] = 1.0
        net.biases[1][...] = 0.0
        report = piecewise_linearity_probe(net, (-1.0, 1.0))
        assert report.passed
        assert report.breakpoints == [1]
        kink = 0.4 / 1.7
        step = 2.0 / (report.grid_points - 1)
        assert abs(report.breakpoint_locations[0][0] - kink) <= 2 * step

    def test_seeded_net_kink_budget(self):
        net = MlpRpe(2, hidden=(16, 16), activation="relu", layer_norm=False, seed=3)
        report = piecewise_linearity_probe(net, (-1.0, 1.0))
        assert report.passed
        assert all(c <= 32 for c in report.breakpoints)
        assert report.max_off_kink_second_diff <= report.threshold

    def test_smooth_activation_refused(self):
        net = MlpRpe(1, hidden=(4,), activation="gelu", seed=0)
        with pytest.raises(ValueError, match="relu"):
            piecewise_linearity_probe(net, (-1, 1))

    def test_layer_norm_bends_pieces_measurably(self):
        # variance normalization bends the linear pieces: still below the
        # probe threshold at this grid resolution (so LN nets are accepted),
        # but orders of magnitude above the float noise of an exactly
        # piecewise-linear net
        bare = MlpRpe(2, hidden=(16, 16), activation="relu", layer_norm=False, seed=3)
        ln = MlpRpe(2, hidden=(16, 16), activation="relu", layer_norm=True, seed=3)
        rep_bare = piecewise_linearity_probe(bare, (-1.0, 1.0))
        rep_ln = piecewise_linearity_probe(ln, (-1.0, 1.0))
        assert rep_bare.passed and rep_ln.passed
        assert rep_ln.max_off_kink_second_diff > 1e3 * max(
            rep_bare.max_off_kink_second_diff, 1e-16
        )


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        net = MlpRpe(3, hidden=(8, 4), activation="silu", seed=13)
        path = tmp_path / "net.bin"
        net.save(path)
        other = MlpRpe.load(path)
        assert other.activation == "silu"
        assert other.hidden == (8, 4)
        t = np.linspace(-2, 2, 9)
        np.testing.assert_array_equal(net(t), other(t))

    def test_truncated_file_rejected(self, tmp_path):
        net = MlpRpe(2, hidden=(8,), seed=0)
        path = tmp_path / "net.bin"
        net.save(path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 16])
        with pytest.raises(ValueError, match="truncated"):
            MlpRpe.load(path)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"nope" + b"\x00" * 64)
        with pytest.raises(ValueError, match="serialized"):
            MlpRpe.load(path)
