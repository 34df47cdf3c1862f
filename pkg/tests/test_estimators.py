import numpy as np
import pytest

from softrl.envs import GaussianBanditSpec, gaussian_bandit_objective, make_random_mdp
from softrl.errors import ParameterError
from softrl.estimators import (
    EstimatorConfig,
    estimate_gradient,
    exact_soft_gradient,
    exact_soft_objective,
    ppo_clip_objective,
    score_function_expectation,
)
from softrl.mdp import LogPolicyTable, TabularMdp
from softrl.policies import (
    DiagonalGaussianPolicy,
    TabularSoftmaxPolicy,
    finite_difference_gradient,
)
from softrl.trajectories import enumerate_trajectories, sample_trajectories

VARIANTS = ("no_entropy", "end_entropy", "repeat_entropy", "soft_pg")


def bandit_mdp(rewards):
    # single state, len(rewards) actions, self-loop
    r = np.array([rewards], dtype=float)
    n_a = r.shape[1]
    return TabularMdp(1, n_a, r, np.ones((1, n_a, 1)), 0.9)


class TestEstimateGradient:
    def test_alpha_zero_all_variants_bitwise_equal(self):
        mdp = make_random_mdp(3, 2, seed=0)
        pol = TabularSoftmaxPolicy(np.random.default_rng(1).normal(size=(3, 2)))
        batch = sample_trajectories(mdp, pol, 4, 20, seed=2)
        grads = [
            estimate_gradient(batch, pol,
                              EstimatorConfig(variant=v, alpha=0.0, gamma=0.9))
            for v in VARIANTS
        ]
        for g in grads[1:]:
            np.testing.assert_array_equal(grads[0], g)

    def test_horizon_one_end_entropy_equals_soft_pg(self):
        mdp = bandit_mdp([1.0, 0.0])
        pol = TabularSoftmaxPolicy([[0.3, -0.2]])
        batch = enumerate_trajectories(mdp, pol, horizon=1)
        end = estimate_gradient(batch, pol,
                                EstimatorConfig("end_entropy", 0.5, 1.0))
        soft = estimate_gradient(batch, pol,
                                 EstimatorConfig("soft_pg", 0.5, 1.0))
        np.testing.assert_allclose(end, soft, atol=1e-15)

    def test_two_action_bandit_matches_analytic_gradient(self):
        # J(theta) = sum_a pi(a) (r(a) - alpha log pi(a)); the enumerated
        # soft estimator must equal its finite-difference gradient.
        alpha = 0.5
        mdp = bandit_mdp([1.0, 0.0])
        pol = TabularSoftmaxPolicy([[0.0, 0.0]])
        batch = enumerate_trajectories(mdp, pol, horizon=1)
        est = estimate_gradient(batch, pol, EstimatorConfig("soft_pg", alpha, 1.0))

        def j(params):
            z = params - np.max(params)
            p = np.exp(z) / np.exp(z).sum()
            logp = np.log(p)
            return float((p * (np.array([1.0, 0.0]) - alpha * logp)).sum())

        fd = finite_difference_gradient(j, pol.get_params(), step=1e-6)
        np.testing.assert_allclose(est, fd, rtol=1e-6, atol=1e-9)

    def test_on_policy_expectation_matches_oracle_at_gamma_one(self):
        mdp = make_random_mdp(3, 3, seed=3)
        rng = np.random.default_rng(4)
        pol = TabularSoftmaxPolicy(rng.uniform(-1, 1, size=(3, 3)))
        alpha, horizon = 0.3, 3
        batch = enumerate_trajectories(mdp, pol, horizon)
        est = estimate_gradient(batch, pol, EstimatorConfig("soft_pg", alpha, 1.0))
        oracle = exact_soft_gradient(mdp, pol, alpha, 1.0, horizon, step=1e-6)
        np.testing.assert_allclose(est, oracle, rtol=1e-4, atol=1e-7)

    def test_negative_alpha_rejected(self):
        with pytest.raises(ParameterError):
            EstimatorConfig("soft_pg", -0.1, 0.9)

    def test_rpg_mode_requires_prior(self):
        with pytest.raises(ParameterError):
            EstimatorConfig("soft_pg", 0.1, 0.9, reward_mode="rpg", omega_prime=0.5)

    def test_kl_mode_pins_omega_prime(self):
        prior = LogPolicyTable.uniform(3, 2)
        cfg = EstimatorConfig("soft_pg", 0.7, 0.9, reward_mode="kl", prior=prior)
        assert cfg.omega_prime == 0.7

    def test_rpg_pinned_equals_kl(self):
        mdp = make_random_mdp(3, 2, seed=5)
        rng = np.random.default_rng(6)
        pol = TabularSoftmaxPolicy(rng.normal(size=(3, 2)))
        prior = LogPolicyTable(
            np.log(rng.dirichlet(np.ones(2), size=3))
        )
        batch = enumerate_trajectories(mdp, pol, 2)
        beta = 0.4
        a = estimate_gradient(batch, pol, EstimatorConfig(
            "soft_pg", beta, 0.9, reward_mode="rpg", omega_prime=beta, prior=prior))
        b = estimate_gradient(batch, pol, EstimatorConfig(
            "soft_pg", beta, 0.9, reward_mode="kl", prior=prior))
        np.testing.assert_array_equal(a, b)

    def test_rpg_zero_weight_is_plain_soft_estimator(self):
        # the other nesting: a zero prior weight reduces the customization
        # reward to the batch's own (add-on) reward
        mdp = make_random_mdp(3, 2, seed=15)
        rng = np.random.default_rng(16)
        pol = TabularSoftmaxPolicy(rng.normal(size=(3, 2)))
        prior = LogPolicyTable(np.log(rng.dirichlet(np.ones(2), size=3)))
        batch = enumerate_trajectories(mdp, pol, 2)
        a = estimate_gradient(batch, pol, EstimatorConfig(
            "soft_pg", 0.3, 0.9, reward_mode="rpg", omega_prime=0.0, prior=prior))
        b = estimate_gradient(batch, pol, EstimatorConfig("soft_pg", 0.3, 0.9))
        np.testing.assert_allclose(a, b, atol=1e-15)


class TestVariantAlgebra:
    def setup_method(self):
        self.mdp = make_random_mdp(3, 3, seed=7)
        rng = np.random.default_rng(8)
        self.pol = TabularSoftmaxPolicy(rng.uniform(-1, 1, size=(3, 3)))
        self.alpha, self.gamma = 0.6, 0.8
        self.batch = enumerate_trajectories(self.mdp, self.pol, horizon=2)

    def grad(self, variant):
        return estimate_gradient(
            self.batch, self.pol,
            EstimatorConfig(variant, self.alpha, self.gamma),
        )

    def test_repeat_minus_soft_is_entropy_gradient_term(self):
        delta = np.zeros(self.pol.num_params)
        for traj in self.batch.trajectories:
            w = traj.path_probability
            for t in range(2):
                delta += w * self.alpha * self.pol.grad_entropy(int(traj.states[t]))
        diff = self.grad("repeat_entropy") - self.grad("soft_pg")
        np.testing.assert_allclose(diff, delta, atol=1e-9)

    def test_end_minus_soft_drops_future_entropy_terms(self):
        # at horizon 2 the only surviving correction multiplies the t=0 score
        # by alpha * gamma * log pi(a_1 | s_1)
        delta = np.zeros(self.pol.num_params)
        for traj in self.batch.trajectories:
            w = traj.path_probability
            tail = self.alpha * self.gamma * float(traj.log_probs[1])
            delta += w * tail * self.pol.grad_log_prob(
                int(traj.states[0]), int(traj.actions[0])
            )
        diff = self.grad("end_entropy") - self.grad("soft_pg")
        np.testing.assert_allclose(diff, delta, atol=1e-9)

    def test_score_function_zero_mean(self):
        z = score_function_expectation(self.batch, self.pol)
        np.testing.assert_allclose(z, 0.0, atol=1e-9)


class TestExactSoftObjective:
    def test_deterministic_path_alpha_zero(self):
        transition = np.zeros((2, 2, 2))
        transition[:, 0, 0] = 1.0
        transition[:, 1, 1] = 1.0
        reward = np.array([[0.0, 1.0], [0.0, 0.5]])
        mdp = TabularMdp(2, 2, reward, transition, 0.9)
        pol = TabularSoftmaxPolicy([[-200.0, 0.0], [-200.0, 0.0]])  # always right
        j = exact_soft_objective(mdp, pol, 0.0, 0.9, horizon=3)
        assert j == pytest.approx(1.0 + 0.9 * 0.5 + 0.81 * 0.5, abs=1e-9)

    def test_pure_entropy_uniform_policy(self):
        mdp = make_random_mdp(3, 4, seed=9)
        zeroed = TabularMdp(3, 4, np.zeros((3, 4)), mdp.transition, 0.9)
        pol = TabularSoftmaxPolicy.uniform(3, 4)
        j = exact_soft_objective(zeroed, pol, 0.7, 1.0, horizon=6)
        assert j == pytest.approx(6 * 0.7 * np.log(4), abs=1e-9)

    def test_matches_direct_enumeration(self):
        from softrl.trajectories import soft_return
        mdp = make_random_mdp(3, 2, seed=10)
        rng = np.random.default_rng(11)
        pol = TabularSoftmaxPolicy(rng.normal(size=(3, 2)))
        alpha, gamma, horizon = 0.4, 0.85, 4
        j_dp = exact_soft_objective(mdp, pol, alpha, gamma, horizon)
        batch = enumerate_trajectories(mdp, pol, horizon)
        j_enum = sum(
            t.path_probability * soft_return(t, alpha, gamma)
            for t in batch.trajectories
        )
        assert j_dp == pytest.approx(j_enum, abs=1e-12)


class TestGaussianBanditGradient:
    def test_sampled_soft_estimator_matches_analytic_gradient(self):
        # horizon-1 objective: grad J = E[grad log pi (r - alpha log pi)],
        # checked against the closed-form objective by finite differences.
        spec = GaussianBanditSpec(target=np.array([0.4, -0.3]), penalty=1.0)
        pol = DiagonalGaussianPolicy(np.zeros((1, 2)), np.array([-0.2, 0.1]))
        alpha = 0.3
        rng = np.random.default_rng(12)
        count = 1_000_000
        std = np.exp(pol.log_std)
        z = rng.standard_normal((count, 2))
        actions = pol.mean[0] + std * z
        rewards = -spec.penalty * ((actions - spec.target) ** 2).sum(axis=1)
        log_probs = (-0.5 * (z * z).sum(axis=1) - pol.log_std.sum()
                     - np.log(2 * np.pi))
        weights = rewards - alpha * log_probs
        grad_mean = (weights[:, None] * (z / std)).mean(axis=0)
        grad_log_std = (weights[:, None] * (z * z - 1.0)).mean(axis=0)
        grad = np.concatenate([grad_mean, grad_log_std])

        def j(params):
            probe = pol.copy()
            probe.set_params(params)
            return gaussian_bandit_objective(probe, spec, alpha)

        exact = finite_difference_gradient(j, pol.get_params(), step=1e-5)
        np.testing.assert_allclose(grad, exact, atol=0.02)


class TestPpoClipObjective:
    def test_ratio_one_returns_advantage(self):
        assert ppo_clip_objective(1.0, 2.5, 0.2) == 2.5

    def test_positive_advantage_clips_above(self):
        assert ppo_clip_objective(2.0, 1.0, 0.2) == pytest.approx(1.2)

    def test_negative_advantage_clips_below(self):
        assert ppo_clip_objective(0.5, -1.0, 0.2) == pytest.approx(-0.8)

    def test_pessimism_bound(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            ratio = float(rng.uniform(0.05, 3.0))
            adv = float(rng.normal())
            eps = float(rng.uniform(0.05, 0.5))
            value = ppo_clip_objective(ratio, adv, eps)
            assert value <= ratio * adv + 1e-15
            if 1 - eps <= ratio <= 1 + eps:
                assert value == pytest.approx(ratio * adv)

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            ppo_clip_objective(1.0, 1.0, 1.5)
        with pytest.raises(ParameterError):
            ppo_clip_objective(-0.1, 1.0, 0.2)
