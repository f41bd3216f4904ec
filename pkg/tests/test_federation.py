import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedmarl import federation
from fedmarl.mlp import Mlp


def scalar_model(value: float) -> Mlp:
    net = Mlp([1, 1], "identity", np.random.default_rng(0))
    net.set_flat(np.array([value, 0.0]))
    return net


class TestDivergence:
    def test_identical_rewards_give_zero(self):
        stats = federation.RewardStats(3)
        stats.add([0.5, 0.5, 0.5])
        assert np.array_equal(federation.estimate_divergence(stats), np.zeros(3))
        # non-dyadic values agree only up to float summation error
        other = federation.RewardStats(3)
        other.add([0.7, 0.7, 0.7])
        assert np.allclose(federation.estimate_divergence(other), 0.0, atol=1e-12)

    def test_two_agent_arithmetic(self):
        stats = federation.RewardStats(2)
        stats.add([2.0, 0.0])
        assert np.allclose(federation.estimate_divergence(stats), [1.0, 1.0])

    def test_absolute_homogeneity(self):
        base = federation.RewardStats(3)
        base.add([0.2, 0.5, -0.4])
        scaled = federation.RewardStats(3)
        scaled.add([-0.6, -1.5, 1.2])
        assert np.allclose(federation.estimate_divergence(scaled),
                           3.0 * federation.estimate_divergence(base))

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            federation.estimate_divergence(federation.RewardStats(2))

    def test_multi_slot_means(self):
        stats = federation.RewardStats(2)
        stats.add([1.0, 0.0])
        stats.add([3.0, 0.0])
        assert np.allclose(stats.per_agent_mean(), [2.0, 0.0])
        assert stats.global_mean() == pytest.approx(1.0)


class TestFedWeights:
    def test_hand_oracle(self):
        fw = federation.fed_weights([1.0, 2.0])
        assert np.allclose(fw.weights, [0.8, 0.2], atol=1e-15)

    def test_equal_divergence_is_uniform(self):
        fw = federation.fed_weights([0.3, 0.3, 0.3, 0.3])
        assert np.allclose(fw.weights, 0.25, atol=1e-15)

    def test_floored_zero_dominates(self):
        fw = federation.fed_weights([0.0, 1.0])
        assert fw.weights[0] > 1.0 - 1e-8

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            federation.fed_weights([])

    @given(st.lists(st.floats(min_value=1e-6, max_value=10.0),
                    min_size=2, max_size=16))
    @settings(max_examples=100, deadline=None)
    def test_simplex_invariant(self, psi):
        fw = federation.fed_weights(psi)
        assert abs(float(fw.weights.sum()) - 1.0) <= 1e-12
        assert (fw.weights >= 0).all()

    @given(st.lists(st.floats(min_value=1e-3, max_value=5.0),
                    min_size=2, max_size=8),
           st.integers(min_value=0, max_value=7))
    @settings(max_examples=100, deadline=None)
    def test_raising_one_divergence_lowers_its_weight(self, psi, which):
        which = which % len(psi)
        before = federation.fed_weights(psi).weights
        bumped = list(psi)
        bumped[which] *= 2.0
        after = federation.fed_weights(bumped).weights
        assert after[which] < before[which]
        others = [i for i in range(len(psi)) if i != which]
        assert all(after[i] >= before[i] - 1e-15 for i in others)


class TestLossBound:
    params = federation.DivergenceBoundParams(
        learning_rate=0.1, lipschitz=1.0, smoothness=1.0, rounds=2)

    def test_hand_oracle(self):
        # radicand 0.81, root 0.9, factor 0.1*(1-0.81)/0.1 = 0.19
        assert federation.loss_bound(self.params, [1.0], [1.0]) == pytest.approx(
            0.19, abs=1e-12)

    def test_zero_divergence_gives_zero(self):
        assert federation.loss_bound(self.params, [0.5, 0.5], [0.0, 0.0]) == 0.0

    def test_single_round_reduces_to_learning_rate(self):
        p = federation.DivergenceBoundParams(0.1, 1.0, 1.0, 1)
        assert federation.loss_bound(p, [1.0], [1.0]) == pytest.approx(0.1, abs=1e-15)

    def test_nonpositive_radicand_rejected(self):
        p = federation.DivergenceBoundParams(0.5, 0.1, 2.0, 2)
        with pytest.raises(federation.BoundUndefinedError):
            federation.loss_bound(p, [1.0], [1.0])

    def test_unit_root_rejected(self):
        p = federation.DivergenceBoundParams(0.1, 0.0 + 1e-12, 0.0, 2)
        with pytest.raises(federation.BoundUndefinedError):
            federation.loss_bound(p, [1.0], [1.0])


class TestAggregate:
    def test_scalar_hand_oracle(self):
        models = [scalar_model(1.0), scalar_model(3.0)]
        fused = federation.aggregate(models, [0.8, 0.2], "fedwgt")
        key = ((1, 1), "identity")
        assert fused[key][0] == pytest.approx(1.4, rel=1e-12)
        assert models[0].get_flat()[0] == pytest.approx(1.4)
        assert np.array_equal(models[0].get_flat(), models[1].get_flat())

    def test_fedavg_idempotent_on_identical_models(self):
        models = [scalar_model(2.0), scalar_model(2.0)]
        federation.aggregate(models, [0.9, 0.1], "fedavg")
        assert models[0].get_flat()[0] == pytest.approx(2.0, rel=1e-15)

    def test_single_member_class_keeps_its_parameters(self):
        m = scalar_model(7.0)
        federation.aggregate([m], [0.123], "fedwgt")
        assert m.get_flat()[0] == pytest.approx(7.0, rel=1e-15)

    def test_equal_psi_fedwgt_matches_fedavg_bitwise(self):
        w = federation.fed_weights([0.4, 0.4, 0.4]).weights
        models_a = [Mlp([2, 3, 1], "identity", np.random.default_rng(i))
                    for i in range(3)]
        models_b = [m.copy() for m in models_a]
        federation.aggregate(models_a, w, "fedwgt")
        federation.aggregate(models_b, w, "fedavg")
        for a, b in zip(models_a, models_b):
            assert np.array_equal(a.get_flat(), b.get_flat())

    def test_affine_on_equal_models(self):
        vec = np.random.default_rng(1).standard_normal(7)
        models = []
        for _ in range(4):
            m = Mlp([1, 2, 1], "identity", np.random.default_rng(0))
            m.set_flat(vec)
            models.append(m)
        federation.aggregate(models, [0.7, 0.1, 0.1, 0.1], "fedwgt")
        for m in models:
            assert np.allclose(m.get_flat(), vec, atol=1e-15)

    def test_shape_classes_never_mix(self):
        small = [scalar_model(1.0), scalar_model(3.0)]
        big = Mlp([2, 2, 1], "identity", np.random.default_rng(2))
        big_before = big.get_flat().copy()
        federation.aggregate(small + [big], [0.25, 0.25, 0.5], "fedwgt")
        # the lone wide model keeps its parameters; the scalars fuse together
        assert np.array_equal(big.get_flat(), big_before)
        assert np.array_equal(small[0].get_flat(), small[1].get_flat())
        # within-class renormalization: 0.25/0.25 -> equal halves
        assert small[0].get_flat()[0] == pytest.approx(2.0, rel=1e-12)

    def test_none_strategy_is_noop(self):
        m = scalar_model(5.0)
        assert federation.aggregate([m], [1.0], "none") == {}
        assert m.get_flat()[0] == 5.0

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            federation.aggregate([scalar_model(1.0)], [1.0], "median")
