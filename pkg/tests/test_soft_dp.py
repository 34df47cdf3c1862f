import numpy as np
import pytest

from softrl.envs import make_random_mdp
from softrl.errors import (
    ConvergenceError,
    DegenerateDistributionError,
    ParameterError,
)
from softrl.mdp import (
    CustomizationSpec,
    LogPolicyTable,
    TabularMdp,
    augment_mdp,
    policy_total_variation,
)
from softrl.soft_dp import (
    SoftQTable,
    boltzmann_policy,
    customized_policy_from_residual,
    lemma1_transform,
    lemma2_shaped_reward,
    residual_soft_q_backup,
    residual_soft_q_iteration,
    soft_bellman_backup,
    soft_policy_evaluation,
    soft_state_values,
    soft_value_iteration,
    temperature_rescale_check,
)


def self_loop_mdp(gamma=0.5, n_actions=2, reward=0.0):
    return TabularMdp(1, n_actions, np.full((1, n_actions), reward),
                      np.ones((1, n_actions, 1)), gamma)


class TestSoftBellmanBackup:
    def test_gamma_zero_returns_reward(self):
        mdp = make_random_mdp(3, 2, seed=1, gamma=0.0)
        q = SoftQTable(np.random.default_rng(0).normal(size=(3, 2)), 1.0)
        out = soft_bellman_backup(q, mdp, 1.0)
        np.testing.assert_array_equal(out.q, mdp.reward)

    def test_scalar_self_loop(self):
        out = soft_bellman_backup(SoftQTable(np.zeros((1, 2)), 1.0),
                                  self_loop_mdp(), 1.0)
        np.testing.assert_allclose(out.q, 0.5 * np.log(2.0), atol=1e-15)

    def test_constant_shift_scales_by_gamma(self):
        mdp = make_random_mdp(4, 3, seed=2, gamma=0.7)
        rng = np.random.default_rng(3)
        q = SoftQTable(rng.normal(size=(4, 3)), 0.5)
        shifted = SoftQTable(q.q + 2.5, 0.5)
        a = soft_bellman_backup(q, mdp, 0.5)
        b = soft_bellman_backup(shifted, mdp, 0.5)
        np.testing.assert_allclose(b.q, a.q + 0.7 * 2.5, atol=1e-12)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ParameterError):
            soft_bellman_backup(SoftQTable(np.zeros((1, 2)), 1.0),
                                self_loop_mdp(), 0.0)

    def test_contraction_in_sup_norm(self):
        mdp = make_random_mdp(5, 3, seed=4, gamma=0.9)
        rng = np.random.default_rng(5)
        for _ in range(100):
            q1 = SoftQTable(rng.normal(scale=3.0, size=(5, 3)), 0.7)
            q2 = SoftQTable(rng.normal(scale=3.0, size=(5, 3)), 0.7)
            lhs = np.abs(soft_bellman_backup(q1, mdp, 0.7).q
                         - soft_bellman_backup(q2, mdp, 0.7).q).max()
            rhs = 0.9 * np.abs(q1.q - q2.q).max()
            assert lhs <= rhs + 1e-12


class TestSoftValueIteration:
    def test_gamma_zero_converges_to_reward(self):
        mdp = make_random_mdp(3, 2, seed=6, gamma=0.0)
        q, _ = soft_value_iteration(mdp, 1.0)
        np.testing.assert_allclose(q.q, mdp.reward, atol=1e-12)

    def test_scalar_fixed_point(self):
        # x = 0.5 (x + log 2) has the unique solution x = log 2
        q, v = soft_value_iteration(self_loop_mdp(), 1.0)
        np.testing.assert_allclose(q.q, np.log(2.0), atol=1e-9)
        np.testing.assert_allclose(v.v, 2.0 * np.log(2.0), atol=1e-9)

    def test_constant_reward_gives_uniform_policy(self):
        mdp = self_loop_mdp(gamma=0.8, n_actions=3, reward=1.7)
        q, _ = soft_value_iteration(mdp, 0.5)
        probs = boltzmann_policy(q, 0.5).probs()
        np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-12)

    def test_value_matches_q_logsumexp(self):
        mdp = make_random_mdp(4, 3, seed=7)
        q, v = soft_value_iteration(mdp, 0.3)
        np.testing.assert_allclose(v.v, soft_state_values(q.q, 0.3), atol=1e-9)

    def test_logsumexp_bounds_on_value(self):
        mdp = make_random_mdp(5, 4, seed=8)
        q, v = soft_value_iteration(mdp, 0.6)
        q_max = q.q.max(axis=1)
        assert np.all(v.v >= q_max - 1e-12)
        assert np.all(v.v <= q_max + 0.6 * np.log(4) + 1e-12)

    def test_nonconvergence_carries_residual(self):
        mdp = make_random_mdp(3, 2, seed=9, gamma=0.99)
        with pytest.raises(ConvergenceError) as err:
            soft_value_iteration(mdp, 1.0, tol=1e-12, max_iters=3)
        assert err.value.residual > 0

    def test_gamma_one_requires_horizon(self):
        mdp = TabularMdp(1, 2, np.zeros((1, 2)), np.ones((1, 2, 1)), 1.0)
        with pytest.raises(ParameterError):
            soft_value_iteration(mdp, 1.0)
        # each sweep adds one log 2 of entropy value at gamma = 1
        q, _ = soft_value_iteration(mdp, 1.0, horizon=3)
        np.testing.assert_allclose(q.q, 3.0 * np.log(2.0), atol=1e-12)

    def test_small_temperature_stays_finite(self):
        mdp = make_random_mdp(4, 3, seed=10)
        q, v = soft_value_iteration(mdp, 1e-3)
        assert np.isfinite(q.q).all() and np.isfinite(v.v).all()


class TestBoltzmannPolicy:
    def test_equal_q_gives_uniform(self):
        pol = boltzmann_policy(SoftQTable(np.zeros((2, 4)), 1.0), 1.0)
        np.testing.assert_allclose(pol.probs(), 0.25, atol=1e-15)

    def test_logistic_example(self):
        pol = boltzmann_policy(SoftQTable(np.array([[1.0, 0.0]]), 1.0), 1.0)
        np.testing.assert_allclose(pol.probs()[0], [0.73106, 0.26894], atol=5e-6)

    def test_per_state_offset_invariance(self):
        rng = np.random.default_rng(11)
        q = rng.normal(size=(3, 4))
        offsets = rng.normal(size=(3, 1))
        a = boltzmann_policy(SoftQTable(q, 1.0), 0.7).probs()
        b = boltzmann_policy(SoftQTable(q + offsets * 0.7, 1.0), 0.7).probs()
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_neg_inf_row_raises(self):
        q = SoftQTable(np.full((1, 2), -np.inf), 1.0)
        with pytest.raises(DegenerateDistributionError):
            boltzmann_policy(q, 1.0)

    def test_partial_support(self):
        q = SoftQTable(np.array([[0.0, -np.inf]]), 1.0)
        pol = boltzmann_policy(q, 1.0)
        np.testing.assert_allclose(pol.probs(), [[1.0, 0.0]])


class TestResidualBackup:
    def test_zero_coefficient_reduces_to_soft_backup(self):
        mdp = make_random_mdp(4, 3, seed=12)
        rng = np.random.default_rng(13)
        addon = rng.uniform(-1, 1, size=(4, 3))
        addon_mdp = TabularMdp(4, 3, addon, mdp.transition, mdp.gamma)
        q = SoftQTable(rng.normal(size=(4, 3)), 0.5)
        prior = LogPolicyTable.uniform(4, 3)
        a = residual_soft_q_backup(q, prior, addon, mdp, 0.0, 0.5)
        b = soft_bellman_backup(q, addon_mdp, 0.5)
        np.testing.assert_array_equal(a.q, b.q)

    def test_matches_augmented_backup_restructured(self):
        # The residual update is the augmented MDP's soft backup with the
        # log-prior moved from the immediate reward into the lookahead.
        mdp = make_random_mdp(5, 3, seed=14)
        rng = np.random.default_rng(15)
        addon = rng.uniform(-1, 1, size=(5, 3))
        prior = boltzmann_policy(soft_value_iteration(mdp, 0.7)[0], 0.7)
        spec = CustomizationSpec(addon, prior_weight=1.3, prior_entropy_coeff=0.7)
        aug = augment_mdp(mdp, spec, prior)
        omega_prime = spec.augment_coeff
        q_r = SoftQTable(rng.normal(size=(5, 3)), 0.4)
        q_aug = SoftQTable(q_r.q + omega_prime * prior.log_probs, 0.4)
        lhs = residual_soft_q_backup(q_r, prior, addon, mdp, omega_prime, 0.4)
        rhs = soft_bellman_backup(q_aug, aug, 0.4).q - omega_prime * prior.log_probs
        np.testing.assert_allclose(lhs.q, rhs, atol=1e-12)

    def test_prior_fixed_point_recovers_prior(self):
        mdp = make_random_mdp(4, 3, seed=16)
        alpha = 0.6
        prior = boltzmann_policy(soft_value_iteration(mdp, alpha)[0], alpha)
        q_r = residual_soft_q_iteration(
            prior, np.zeros((4, 3)), mdp, omega_prime=alpha, alpha_hat=alpha
        )
        customized = customized_policy_from_residual(q_r, prior, alpha, alpha)
        assert policy_total_variation(customized, prior).max() <= 1e-6

    def test_customized_equals_direct_solution_on_summed_reward(self):
        mdp = make_random_mdp(4, 3, seed=17, gamma=0.9)
        alpha = alpha_hat = 0.5
        rng = np.random.default_rng(18)
        addon = rng.uniform(-1, 1, size=(4, 3))
        prior = boltzmann_policy(soft_value_iteration(mdp, alpha)[0], alpha)
        q_r = residual_soft_q_iteration(prior, addon, mdp, alpha, alpha_hat)
        customized = customized_policy_from_residual(q_r, prior, alpha, alpha_hat)
        summed = TabularMdp(4, 3, mdp.reward + addon, mdp.transition, 0.9)
        target = boltzmann_policy(soft_value_iteration(summed, alpha_hat)[0], alpha_hat)
        assert policy_total_variation(customized, target).max() <= 1e-6


class TestCustomizedPolicyFromResidual:
    def test_zero_residual_unit_weight_returns_prior(self):
        rng = np.random.default_rng(19)
        prior = LogPolicyTable(np.log(rng.dirichlet(np.ones(3), size=4)))
        q_r = SoftQTable(np.zeros((4, 3)), 1.0)
        out = customized_policy_from_residual(q_r, prior, omega_prime=1.0, alpha_hat=1.0)
        np.testing.assert_allclose(out.probs(), prior.probs(), atol=1e-12)

    def test_zero_weight_is_plain_boltzmann(self):
        rng = np.random.default_rng(20)
        q_r = SoftQTable(rng.normal(size=(4, 3)), 0.8)
        prior = LogPolicyTable(np.log(rng.dirichlet(np.ones(3), size=4)))
        a = customized_policy_from_residual(q_r, prior, 0.0, 0.8)
        b = boltzmann_policy(q_r, 0.8)
        np.testing.assert_allclose(a.probs(), b.probs(), atol=1e-15)

    def test_scalar_softmax_example(self):
        q_r = SoftQTable(np.array([[0.2, 0.0]]), 1.0)
        prior = LogPolicyTable.uniform(1, 2)
        out = customized_policy_from_residual(q_r, prior, 1.0, 1.0)
        np.testing.assert_allclose(out.probs()[0], [0.54983, 0.45017], atol=5e-6)


class TestLemma1:
    def test_identity(self):
        q = SoftQTable(np.arange(6.0).reshape(2, 3), 1.0)
        out = lemma1_transform(q, 0.9, 0.9, np.zeros(2))
        np.testing.assert_array_equal(out.q, q.q)

    def test_double_temperature_doubles_q(self):
        q = SoftQTable(np.arange(6.0).reshape(2, 3), 1.0)
        out = lemma1_transform(q, 0.5, 1.0, np.zeros(2))
        np.testing.assert_allclose(out.q, 2.0 * q.q)
        a = boltzmann_policy(q, 0.5).probs()
        b = boltzmann_policy(out, 1.0).probs()
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_random_transform_preserves_policy(self):
        rng = np.random.default_rng(21)
        q = SoftQTable(rng.normal(size=(4, 3)), 1.0)
        offset = rng.normal(size=4)
        out = lemma1_transform(q, 0.7, 1.3, offset)
        a = boltzmann_policy(q, 0.7).probs()
        b = boltzmann_policy(out, 1.3).probs()
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestLemma2:
    def test_identity_when_potential_zero_and_equal_temps(self):
        mdp = make_random_mdp(3, 2, seed=22)
        r1 = lemma2_shaped_reward(mdp.reward, 0.8, 0.8, np.zeros(3), mdp)
        np.testing.assert_allclose(r1, mdp.reward, atol=1e-15)

    def test_constant_potential_shifts_reward_constantly(self):
        mdp = make_random_mdp(3, 2, seed=23, gamma=0.9)
        r1 = lemma2_shaped_reward(mdp.reward, 1.0, 1.0, np.full(3, 2.0), mdp)
        np.testing.assert_allclose(r1 - mdp.reward, -1.0 * 2.0 * (1 - 0.9), atol=1e-12)

    def test_shaping_preserves_soft_optimal_policy(self):
        mdp = make_random_mdp(3, 3, seed=24, gamma=0.9)
        rng = np.random.default_rng(25)
        potential = rng.normal(size=3)
        r1 = lemma2_shaped_reward(mdp.reward, 1.0, 2.0, potential, mdp)
        shaped = TabularMdp(3, 3, r1, mdp.transition, 0.9)
        pi1 = boltzmann_policy(soft_value_iteration(shaped, 1.0)[0], 1.0)
        pi2 = boltzmann_policy(soft_value_iteration(mdp, 2.0)[0], 2.0)
        assert policy_total_variation(pi1, pi2).max() <= 1e-6


class TestTemperatureRescale:
    def test_equal_temperatures_trivially_true(self):
        mdp = make_random_mdp(3, 2, seed=26)
        assert temperature_rescale_check(mdp, 0.7, 0.7, 1e-12)

    def test_random_mdp_identity(self):
        mdp = make_random_mdp(4, 3, seed=27)
        assert temperature_rescale_check(mdp, 0.5, 1.0, 1e-8)

    def test_degenerate_single_state(self):
        mdp = TabularMdp(1, 1, [[1.0]], np.ones((1, 1, 1)), 0.0)
        assert temperature_rescale_check(mdp, 0.3, 1.7, 1e-10)


class TestSoftPolicyEvaluation:
    def test_optimal_policy_attains_optimal_value(self):
        mdp = make_random_mdp(4, 3, seed=28)
        alpha = 0.5
        q, v = soft_value_iteration(mdp, alpha)
        pi = boltzmann_policy(q, alpha)
        v_pi = soft_policy_evaluation(mdp, pi, alpha)
        np.testing.assert_allclose(v_pi.v, v.v, atol=1e-8)

    def test_alpha_zero_is_plain_return(self):
        # one state, one action, reward 1: v = 1 / (1 - gamma)
        mdp = TabularMdp(1, 1, [[1.0]], np.ones((1, 1, 1)), 0.9)
        pi = LogPolicyTable.uniform(1, 1)
        np.testing.assert_allclose(
            soft_policy_evaluation(mdp, pi, 0.0).v, 10.0, atol=1e-9
        )

    def test_suboptimal_policy_is_dominated(self):
        mdp = make_random_mdp(5, 3, seed=29)
        alpha = 0.4
        _, v_star = soft_value_iteration(mdp, alpha)
        worse = LogPolicyTable.uniform(5, 3)
        v_pi = soft_policy_evaluation(mdp, worse, alpha)
        assert np.all(v_pi.v <= v_star.v + 1e-9)
