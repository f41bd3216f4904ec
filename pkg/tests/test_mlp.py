import numpy as np
import pytest

from fedmarl.mlp import Gradients, Mlp, sgd_step, soft_update


def zeroed(net):
    for w in net.weights:
        w[...] = 0.0
    for b in net.biases:
        b[...] = 0.0
    return net


def straight_line_forward(net, x):
    """Independent re-implementation: explicit loops, no shared code path."""
    a = list(np.asarray(x, dtype=float))
    for layer in range(len(net.weights)):
        w, b = net.weights[layer], net.biases[layer]
        z = [sum(a[i] * w[i, j] for i in range(w.shape[0])) + b[j]
             for j in range(w.shape[1])]
        if layer < len(net.weights) - 1:
            a = [max(v, 0.0) for v in z]
        elif net.output_activation == "tanh":
            a = [np.tanh(v) for v in z]
        else:
            a = z
    return np.array(a)


def finite_difference_grads(net, x, upstream, h=1e-5):
    flat = net.get_flat()
    grad = np.zeros_like(flat)
    for i in range(len(flat)):
        bumped = flat.copy()
        bumped[i] += h
        net.set_flat(bumped)
        up_val = float(np.sum(net.forward(x) * upstream))
        bumped[i] -= 2 * h
        net.set_flat(bumped)
        down_val = float(np.sum(net.forward(x) * upstream))
        grad[i] = (up_val - down_val) / (2 * h)
    net.set_flat(flat)
    return grad


def flatten_grads(grads):
    return np.concatenate([g.ravel() for g in grads.weights]
                          + [g.ravel() for g in grads.biases])


class TestForward:
    def test_zero_net_outputs_zero(self):
        net = zeroed(Mlp([3, 8, 8, 8, 4], "tanh", np.random.default_rng(0)))
        assert np.all(net.forward(np.ones(3)) == 0.0)

    def test_identity_single_layer(self):
        net = zeroed(Mlp([1, 1], "identity", np.random.default_rng(0)))
        net.weights[0][0, 0] = 1.0
        assert net.forward(np.array([2.0]))[0] == pytest.approx(2.0)

    def test_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(4)
        for activation in ("tanh", "identity"):
            net = Mlp([5, 8, 8, 3], activation, rng)
            for _ in range(5):
                x = rng.standard_normal(5)
                assert np.allclose(net.forward(x),
                                   straight_line_forward(net, x), atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        net = Mlp([3, 4], "identity", np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.forward(np.ones(5))

    def test_forward_is_pure(self):
        rng = np.random.default_rng(1)
        net = Mlp([3, 8, 2], "tanh", rng)
        x = rng.standard_normal((4, 3))
        assert np.array_equal(net.forward(x), net.forward(x))


class TestBackward:
    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            net = Mlp([3, 8, 8, 8, 4], "tanh" if trial % 2 else "identity", rng)
            x = rng.standard_normal((3, 3))
            up = rng.standard_normal((3, 4))
            _, cache = net.forward_cached(x)
            analytic = flatten_grads(net.backward(cache, up)[0])
            numeric = finite_difference_grads(net, x, up)
            rel = np.abs(analytic - numeric) / np.maximum(
                np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
            assert rel.max() < 1e-4

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(2)
        net = Mlp([3, 8, 2], "tanh", rng)
        _, cache = net.forward_cached(rng.standard_normal((2, 3)))
        grads, d_in = net.backward(cache, np.zeros((2, 2)))
        assert all(np.all(g == 0.0) for g in grads.weights + grads.biases)
        assert np.all(d_in == 0.0)

    def test_linear_net_bias_gradient_is_upstream_sum(self):
        net = Mlp([2, 3], "identity", np.random.default_rng(0))
        x = np.random.default_rng(1).standard_normal((4, 2))
        up = np.random.default_rng(2).standard_normal((4, 3))
        _, cache = net.forward_cached(x)
        grads, _ = net.backward(cache, up)
        assert np.allclose(grads.biases[0], up.sum(axis=0), atol=1e-12)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        net = Mlp([4, 8, 2], "identity", rng)
        x = rng.standard_normal(4)
        up = rng.standard_normal(2)
        _, cache = net.forward_cached(x)
        _, d_in = net.backward(cache, up)
        h = 1e-6
        for i in range(4):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (np.sum(net.forward(xp) * up) - np.sum(net.forward(xm) * up)) / (2 * h)
            assert d_in[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestSgdStep:
    def test_zero_gradient_leaves_net_unchanged(self):
        net = Mlp([2, 3], "identity", np.random.default_rng(0))
        before = net.get_flat()
        grads = Gradients([np.zeros((2, 3))], [np.zeros(3)])
        sgd_step(net, grads, 0.002)
        assert np.array_equal(net.get_flat(), before)

    def test_scalar_arithmetic(self):
        net = zeroed(Mlp([1, 1], "identity", np.random.default_rng(0)))
        net.weights[0][0, 0] = 1.0
        sgd_step(net, Gradients([np.array([[0.5]])], [np.zeros(1)]), 0.002)
        assert net.weights[0][0, 0] == pytest.approx(0.999, rel=1e-12)

    def test_descends_convex_quadratic(self):
        # fit y = 0 from a fixed batch; one small step must reduce the loss
        rng = np.random.default_rng(5)
        net = Mlp([2, 1], "identity", rng)
        x = rng.standard_normal((8, 2))

        def loss():
            return float(np.mean(net.forward(x) ** 2))

        before = loss()
        out, cache = net.forward_cached(x)
        grads, _ = net.backward(cache, 2.0 * out / len(x))
        sgd_step(net, grads, 0.01)
        assert loss() < before

    def test_nan_gradient_rejected(self):
        net = Mlp([1, 1], "identity", np.random.default_rng(0))
        with pytest.raises(ValueError):
            sgd_step(net, Gradients([np.array([[np.nan]])], [np.zeros(1)]), 0.01)


class TestSoftUpdate:
    def test_full_blend_copies_online(self):
        rng = np.random.default_rng(3)
        online, target = Mlp([2, 3], "identity", rng), Mlp([2, 3], "identity", rng)
        soft_update(target, online, 1.0)
        assert np.array_equal(target.get_flat(), online.get_flat())

    def test_zero_blend_is_identity(self):
        rng = np.random.default_rng(4)
        online, target = Mlp([2, 3], "identity", rng), Mlp([2, 3], "identity", rng)
        before = target.get_flat()
        soft_update(target, online, 0.0)
        assert np.array_equal(target.get_flat(), before)

    def test_reference_blend_value(self):
        online = zeroed(Mlp([1, 1], "identity", np.random.default_rng(0)))
        target = zeroed(Mlp([1, 1], "identity", np.random.default_rng(0)))
        online.weights[0][0, 0] = 1.0
        soft_update(target, online, 0.1)
        assert target.weights[0][0, 0] == pytest.approx(0.1, rel=1e-12)

    def test_contraction_toward_online(self):
        rng = np.random.default_rng(6)
        online, target = Mlp([3, 4], "identity", rng), Mlp([3, 4], "identity", rng)
        gap = np.abs(target.get_flat() - online.get_flat())
        soft_update(target, online, 0.1)
        new_gap = np.abs(target.get_flat() - online.get_flat())
        assert np.allclose(new_gap, 0.9 * gap, atol=1e-12)

    def test_out_of_range_blend_rejected(self):
        rng = np.random.default_rng(7)
        online, target = Mlp([2, 2], "identity", rng), Mlp([2, 2], "identity", rng)
        for phi in (-0.1, 1.1):
            with pytest.raises(ValueError):
                soft_update(target, online, phi)


class TestPersistence:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        net = Mlp([3, 8, 8, 8, 4], "tanh", rng)
        path = tmp_path / "net.npz"
        net.save(path)
        loaded = Mlp.load(path)
        assert loaded.layer_sizes == net.layer_sizes
        assert loaded.output_activation == net.output_activation
        assert np.array_equal(loaded.get_flat(), net.get_flat())

    def test_flat_round_trip(self):
        net = Mlp([4, 8, 2], "identity", np.random.default_rng(10))
        vec = net.get_flat()
        other = Mlp([4, 8, 2], "identity", np.random.default_rng(99))
        other.set_flat(vec)
        assert np.array_equal(other.get_flat(), vec)

    def test_gradient_clipping(self):
        g = Gradients([np.full((2, 2), 3.0)], [np.zeros(2)])
        clipped = g.clipped(1.0)
        assert clipped.global_norm() == pytest.approx(1.0, rel=1e-12)
        small = Gradients([np.full((2, 2), 0.01)], [np.zeros(2)])
        assert small.clipped(1.0) is small
