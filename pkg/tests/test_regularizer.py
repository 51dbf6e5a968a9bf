import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgrbm.errors import ConfigurationError, ParameterError
from sgrbm.oracle import exact_gradient, joint_log_likelihood
from sgrbm.rbm import RbmParams, cd_gradient, hidden_probabilities
from sgrbm.regularizer import (
    Grouping,
    RegularizerConfig,
    baseline_penalty,
    group_norms,
    mixed_norm_penalty,
    penalty_gradient,
    regularized_cd_gradient,
    sparse_rbm_baseline_gradient,
)

from conftest import random_rbm


def fd_grad(f, params, step=1e-5):
    """Centered differences of f(params) w.r.t. weights and hidden biases."""
    dW = np.zeros_like(params.weights)
    dc = np.zeros_like(params.hidden_bias)
    for arr, out in ((params.weights, dW), (params.hidden_bias, dc)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            up = f(params)
            arr[idx] = old - step
            down = f(params)
            arr[idx] = old
            out[idx] = (up - down) / (2 * step)
    return dW, dc


class TestGrouping:
    def test_uniform_blocks(self):
        g = Grouping.uniform(6, 2)
        assert g.n_groups == 3
        np.testing.assert_array_equal(g.group_of, [0, 0, 1, 1, 2, 2])

    def test_remainder_group_warns(self):
        with pytest.warns(UserWarning, match="does not divide"):
            g = Grouping.uniform(7, 3)
        assert [len(m) for m in g.groups] == [3, 3, 1]

    def test_large_group_warns(self):
        with pytest.warns(UserWarning, match="recommended"):
            Grouping.uniform(24, 12)

    def test_rejects_overlap_and_gaps(self):
        with pytest.raises(ConfigurationError):
            Grouping(np.array([0, 0, 1]), [[0, 1], [1, 2]])
        with pytest.raises(ConfigurationError):
            Grouping(np.array([0, 0, 1]), [[0, 1], []])
        with pytest.raises(ConfigurationError):
            Grouping(np.array([0, 0, 0]), [[0, 1]])

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=12))
    def test_partition_property(self, labels):
        g = Grouping.from_group_of(np.unique(labels, return_inverse=True)[1])
        seen = np.concatenate(g.groups)
        assert sorted(seen.tolist()) == list(range(len(labels)))


class TestGroupNorms:
    def test_zero(self):
        np.testing.assert_array_equal(group_norms(np.zeros(6), Grouping.uniform(6, 3)), 0.0)

    def test_three_four_five(self):
        assert group_norms(np.array([0.6, 0.8]), Grouping.uniform(2, 2))[0] == pytest.approx(1.0)

    def test_bounded(self, rng):
        g = Grouping.uniform(12, 4)
        assert np.all(group_norms(rng.random(12), g) <= 2.0)

    def test_relabel_equivariance(self, rng):
        P = rng.random(9)
        g = Grouping.from_group_of([0, 1, 2, 0, 1, 2, 0, 1, 2])
        perm = np.array([2, 0, 1])  # group k -> new label perm[k]
        h = Grouping.from_group_of(perm[g.group_of])
        np.testing.assert_allclose(group_norms(P, h)[perm], group_norms(P, g), rtol=0, atol=0)


class TestPenalty:
    def test_zero(self):
        assert mixed_norm_penalty(np.zeros(4), Grouping.uniform(4, 2)) == 0.0

    def test_sum_of_norms(self):
        P = np.array([0.6, 0.8, 0.3, 0.4])
        assert mixed_norm_penalty(P, Grouping.uniform(4, 2)) == pytest.approx(1.5)

    @given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
    def test_bound(self, probs):
        assert mixed_norm_penalty(np.array(probs), Grouping.uniform(6, 3)) <= np.sqrt(3) * 2 + 1e-12

    def test_batch(self, rng):
        P = rng.random((5, 6))
        g = Grouping.uniform(6, 2)
        np.testing.assert_allclose(mixed_norm_penalty(P, g), group_norms(P, g).sum(axis=1))


class TestPenaltyGradient:
    def test_vanishes_at_zero_and_one(self):
        p = RbmParams.zeros(3, 4)
        cfg = RegularizerConfig(lam=0.1, group_size=2)
        g = Grouping.uniform(4, 2)
        for c in (-1e3, 1e3):  # P = 0 or P = 1 exactly in double precision
            p.hidden_bias[:] = c
            grad = penalty_gradient(p, np.ones(3), g, cfg)
            np.testing.assert_array_equal(grad.d_weights, 0.0)
            np.testing.assert_array_equal(grad.d_hidden_bias, 0.0)

    @pytest.mark.parametrize("P", [1e-6, 1 - 1e-6])
    def test_near_saturation(self, P):
        p = RbmParams.zeros(2, 3)
        p.hidden_bias[:] = np.log(P / (1 - P))
        cfg = RegularizerConfig(lam=0.1, group_size=3)
        grad = penalty_gradient(p, np.ones(2), Grouping.uniform(3, 3), cfg)
        assert np.abs(grad.d_hidden_bias).max() <= 1e-5 * cfg.lam

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        p = random_rbm(r, 5, 6, scale=0.7)
        g = Grouping.uniform(6, 3)
        cfg = RegularizerConfig(lam=0.3, group_size=3)
        x = (r.random((4, 5)) < 0.5).astype(float)
        f = lambda q: cfg.lam * mixed_norm_penalty(hidden_probabilities(q, x), g).mean()
        dW, dc = fd_grad(f, p)
        grad = penalty_gradient(p, x, g, cfg)
        assert np.abs(grad.d_weights - dW).max() <= 1e-6
        assert np.abs(grad.d_hidden_bias - dc).max() <= 1e-6
        np.testing.assert_array_equal(grad.d_visible_bias, 0.0)

    def test_needs_sparse_group_kind(self, small_rbm):
        with pytest.raises(ConfigurationError):
            penalty_gradient(small_rbm, np.ones(4), Grouping.uniform(3, 3), RegularizerConfig(kind="none"))


class TestRegularizedCd:
    def test_lambda_zero_is_plain_cd(self, small_rbm):
        x = np.array([[1.0, 0, 1, 0], [0, 1, 1, 1]])
        cfg = RegularizerConfig(lam=0.0, group_size=3)
        a = regularized_cd_gradient(small_rbm, x, 1, Grouping.uniform(3, 3), cfg, np.random.default_rng(3))
        b = cd_gradient(small_rbm, x, 1, np.random.default_rng(3))
        assert a.flat().tobytes() == b.flat().tobytes()

    def test_single_group_direction(self, rng):
        p = random_rbm(rng, 4, 5)
        x = np.array([1.0, 0.0, 1.0, 1.0])
        cfg = RegularizerConfig(lam=1e-3, group_size=5)
        g = Grouping.uniform(5, 5)
        plain = cd_gradient(p, x, 1, np.random.default_rng(1))
        reg = regularized_cd_gradient(p, x, 1, g, cfg, np.random.default_rng(1))
        corr = (plain - reg).d_hidden_bias
        P = hidden_probabilities(p, x)
        expect = P**2 * (1 - P)
        np.testing.assert_allclose(corr / np.linalg.norm(corr), expect / np.linalg.norm(expect), rtol=1e-10)

    def test_objective_ascent(self):
        r = np.random.default_rng(11)
        p = random_rbm(r, 6, 4, scale=0.5)
        g = Grouping.uniform(4, 2)
        cfg = RegularizerConfig(lam=0.5, group_size=2)
        x = (r.random((8, 6)) < 0.5).astype(float)

        def objective(q):
            return joint_log_likelihood(q, x) - cfg.lam * mixed_norm_penalty(hidden_probabilities(q, x), g).mean()

        direction = exact_gradient(p, x) - penalty_gradient(p, x, g, cfg)
        step = RbmParams(p.weights + 1e-3 * direction.d_weights,
                         p.visible_bias + 1e-3 * direction.d_visible_bias,
                         p.hidden_bias + 1e-3 * direction.d_hidden_bias)
        assert objective(step) > objective(p)

    def test_none_kind(self, small_rbm):
        x = np.ones((2, 4))
        a = regularized_cd_gradient(small_rbm, x, 1, None, RegularizerConfig(kind="none"), np.random.default_rng(0))
        b = cd_gradient(small_rbm, x, 1, np.random.default_rng(0))
        assert a.flat().tobytes() == b.flat().tobytes()


class TestBaseline:
    def test_target_met_gives_zero(self):
        p = RbmParams.zeros(3, 4)  # every P = 0.5
        grad = sparse_rbm_baseline_gradient(p, np.ones((2, 3)), 0.5, 1.0)
        np.testing.assert_array_equal(grad.d_weights, 0.0)
        np.testing.assert_array_equal(grad.d_hidden_bias, 0.0)

    def test_zero_weight(self, small_rbm):
        grad = sparse_rbm_baseline_gradient(small_rbm, np.ones((2, 4)), 0.1, 0.0)
        assert not grad.flat().any()

    def test_rejects_bad_target(self, small_rbm):
        for t in (0.0, 1.0, 50.0):
            with pytest.raises(ParameterError):
                sparse_rbm_baseline_gradient(small_rbm, np.ones((1, 4)), t, 0.1)

    def test_finite_differences(self, rng):
        p = random_rbm(rng, 5, 4, scale=0.6)
        x = (rng.random((6, 5)) < 0.5).astype(float)
        dW, dc = fd_grad(lambda q: baseline_penalty(q, x, 0.1, 0.7), p)
        grad = sparse_rbm_baseline_gradient(p, x, 0.1, 0.7)
        assert np.abs(grad.d_weights - dW).max() <= 1e-6
        assert np.abs(grad.d_hidden_bias - dc).max() <= 1e-6

    def test_count_target_normalized(self):
        cfg = RegularizerConfig(kind="sparse_rbm_baseline", baseline_target=50, baseline_target_is_count=True)
        assert cfg.target_probability(400) == 0.125

    def test_regularized_uses_baseline(self, small_rbm):
        cfg = RegularizerConfig(kind="sparse_rbm_baseline", baseline_target=0.1, baseline_weight=0.5)
        x = np.ones((3, 4))
        a = regularized_cd_gradient(small_rbm, x, 1, None, cfg, np.random.default_rng(0))
        b = cd_gradient(small_rbm, x, 1, np.random.default_rng(0)) - sparse_rbm_baseline_gradient(small_rbm, x, 0.1, 0.5)
        assert a.flat().tobytes() == b.flat().tobytes()


def test_config_validation():
    with pytest.raises(ConfigurationError):
        RegularizerConfig(kind="l2")
    with pytest.raises(ConfigurationError):
        RegularizerConfig(lam=-1)
