"""Cross-module verification suite.

Each check exercises one of the package's structural claims against an
independent oracle and reports the worst measured residual over a batch of
seeded random instances. The suite is fully deterministic for a given seed,
so repeated runs produce bit-identical reports.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .envs import make_random_mdp
from .errors import ParameterError
from .estimators import (
    EstimatorConfig,
    estimate_gradient,
    exact_soft_gradient,
)
from .mcts import (
    SearchConfig,
    accumulation_equivalence_check,
    exact_tree_soft_values,
    extract_root_policy,
    make_random_tree,
    run_search,
    tree_is_fully_expanded,
    DeterministicTreeModel,
)
from .mdp import LogPolicyTable, TabularMdp, policy_total_variation
from .policies import TabularSoftmaxPolicy
from .preference import PreferenceExample, decomposed_dpo_loss, dpo_loss
from .soft_dp import (
    SoftQTable,
    boltzmann_policy,
    customized_policy_from_residual,
    lemma1_transform,
    lemma2_shaped_reward,
    residual_soft_q_iteration,
    soft_value_iteration,
    temperature_rescale_residuals,
)
from .trajectories import enumerate_trajectories


@dataclass(frozen=True)
class ToleranceProfile:
    residual_equivalence: float = 1e-6
    spg_rtol: float = 1e-4
    spg_atol: float = 1e-7
    variant_algebra: float = 1e-9
    kl_decoupling: float = 1e-6
    lemma1: float = 1e-12
    lemma2: float = 1e-6
    temperature_rescale: float = 1e-8
    mcts_soft: float = 1e-9
    mcts_residual_tv: float = 1e-6
    accumulation: float = 1e-9
    dpo_collapse: float = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


@dataclass
class VerifyReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> str:
        doc = {
            "passed": self.passed,
            "checks": [
                {**asdict(r), "residual": repr(r.residual)} for r in self.results
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _random_full_support_policy(
    rng: np.random.Generator, n_states: int, n_actions: int
) -> TabularSoftmaxPolicy:
    return TabularSoftmaxPolicy(rng.uniform(-1.0, 1.0, size=(n_states, n_actions)))


def residual_equivalence_case(
    mdp: TabularMdp,
    addon_reward: np.ndarray,
    prior: LogPolicyTable,
    alpha: float,
    alpha_hat: float,
    omega: float = 1.0,
) -> float:
    """Max per-state TV between the residual-route and direct-route policies.

    Residual route: iterate the residual soft-Q backup against the prior and
    extract the customized policy. Direct route: soft value iteration on the
    summed reward omega * r + r_addon at the new temperature. The prior must
    be a valid policy; a denormalized row fails fast, naming the row.
    """
    violations = prior.validate()
    if violations:
        raise ParameterError(f"invalid prior: {violations[0]}")
    omega_prime = omega * alpha
    q_r = residual_soft_q_iteration(prior, addon_reward, mdp, omega_prime, alpha_hat)
    customized = customized_policy_from_residual(q_r, prior, omega_prime, alpha_hat)
    summed = TabularMdp(
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        reward=omega * mdp.reward + addon_reward,
        transition=mdp.transition,
        gamma=mdp.gamma,
        terminal=np.zeros(mdp.num_states, dtype=bool),
    )
    q_direct, _ = soft_value_iteration(summed, alpha_hat)
    target = boltzmann_policy(q_direct, alpha_hat)
    return float(policy_total_variation(customized, target).max())


def check_residual_equivalence(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """Customizing through the residual backup must match solving the summed
    reward directly (prior soft-optimal, omega = 1), across 20 random MDPs."""
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    try:
        for _ in range(20):
            n_s = int(rng.integers(2, 7))
            n_a = int(rng.integers(2, 5))
            mdp = make_random_mdp(n_s, n_a, int(rng.integers(2**31)), gamma=0.9)
            alpha = float(rng.uniform(0.2, 1.0))
            alpha_hat = float(rng.uniform(0.2, 1.0))
            addon = rng.uniform(-1.0, 1.0, size=mdp.shape)
            q_star, _ = soft_value_iteration(mdp, alpha)
            prior = boltzmann_policy(q_star, alpha)
            worst = max(
                worst,
                residual_equivalence_case(mdp, addon, prior, alpha, alpha_hat),
            )
    except ParameterError as exc:
        return CheckResult(
            "residual_equivalence", False, float("nan"),
            profile.residual_equivalence, str(exc),
        )
    return CheckResult(
        "residual_equivalence", worst <= profile.residual_equivalence, worst,
        profile.residual_equivalence, "max per-state TV, 20 random MDPs",
    )


def check_spg_exactness(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """At gamma = 1 the enumerated expectation of the soft estimator must match
    finite differences of the exact objective, per parameter."""
    rng = np.random.default_rng([seed, 2])
    worst = 0.0
    ok = True
    for _ in range(10):
        n_s, n_a = 3, int(rng.integers(2, 4))
        horizon = int(rng.integers(3, 5))
        mdp = make_random_mdp(n_s, n_a, int(rng.integers(2**31)), gamma=0.9)
        alpha = float(rng.uniform(0.1, 0.8))
        policy = _random_full_support_policy(rng, n_s, n_a)
        batch = enumerate_trajectories(mdp, policy, horizon)
        cfg = EstimatorConfig(variant="soft_pg", alpha=alpha, gamma=1.0)
        est = estimate_gradient(batch, policy, cfg)
        oracle = exact_soft_gradient(mdp, policy, alpha, 1.0, horizon, step=1e-6)
        err = np.abs(est - oracle)
        ok = ok and bool(np.all(err <= profile.spg_rtol * np.abs(oracle) + profile.spg_atol))
        worst = max(worst, float((err / np.maximum(np.abs(oracle), profile.spg_atol)).max()))
    return CheckResult(
        "spg_exactness_gamma1", ok, worst, profile.spg_rtol,
        "max relative error vs finite differences, 10 random MDPs",
    )


def check_variant_algebra(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """The entropy-placement variants must differ from the soft estimator by
    exactly their delta terms, and coincide bit-for-bit at alpha = 0."""
    rng = np.random.default_rng([seed, 3])
    worst = 0.0
    bit_equal = True
    for _ in range(5):
        n_s, n_a, horizon = 3, 3, 2
        mdp = make_random_mdp(n_s, n_a, int(rng.integers(2**31)), gamma=0.9)
        gamma = float(rng.uniform(0.5, 1.0))
        alpha = float(rng.uniform(0.2, 0.9))
        policy = _random_full_support_policy(rng, n_s, n_a)
        batch = enumerate_trajectories(mdp, policy, horizon)
        grads = {
            v: estimate_gradient(
                batch, policy, EstimatorConfig(variant=v, alpha=alpha, gamma=gamma)
            )
            for v in ("no_entropy", "end_entropy", "repeat_entropy", "soft_pg")
        }
        # repeat - soft = alpha * E[sum_t grad H(pi(.|s_t))], entropy gradient
        # taken in closed form.
        delta_repeat = np.zeros(policy.num_params)
        delta_end = np.zeros(policy.num_params)
        for w, traj in zip(batch.weights(), batch.trajectories):
            for t in range(horizon):
                s, a = int(traj.states[t]), int(traj.actions[t])
                delta_repeat += w * alpha * policy.grad_entropy(s)
                # end - soft removes the entropy terms at t' > t; horizon 2
                # leaves a single t=0 correction of alpha * gamma * log pi_1.
                if t == 0:
                    tail = alpha * gamma * float(traj.log_probs[1])
                    delta_end += w * tail * policy.grad_log_prob(s, a)
        worst = max(
            worst,
            float(np.abs(grads["repeat_entropy"] - grads["soft_pg"] - delta_repeat).max()),
            float(np.abs(grads["end_entropy"] - grads["soft_pg"] - delta_end).max()),
        )
        zero_grads = [
            estimate_gradient(
                batch, policy, EstimatorConfig(variant=v, alpha=0.0, gamma=gamma)
            )
            for v in ("no_entropy", "end_entropy", "repeat_entropy", "soft_pg")
        ]
        bit_equal = bit_equal and all(
            np.array_equal(zero_grads[0], g) for g in zero_grads[1:]
        )
    return CheckResult(
        "estimator_variant_algebra", worst <= profile.variant_algebra and bit_equal,
        worst, profile.variant_algebra,
        "alpha=0 coincidence " + ("held" if bit_equal else "BROKE"),
    )


def check_kl_decoupling(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """With omega_prime = alpha_hat = alpha and a soft-optimal prior, the
    customized policy must solve the plain summed-reward MDP at alpha."""
    rng = np.random.default_rng([seed, 4])
    worst = 0.0
    for _ in range(10):
        n_s = int(rng.integers(2, 6))
        n_a = int(rng.integers(2, 4))
        mdp = make_random_mdp(n_s, n_a, int(rng.integers(2**31)), gamma=0.9)
        alpha = float(rng.uniform(0.2, 1.0))
        addon = rng.uniform(-1.0, 1.0, size=mdp.shape)
        q_star, _ = soft_value_iteration(mdp, alpha)
        prior = boltzmann_policy(q_star, alpha)
        # omega_prime = alpha_hat = alpha is omega = 1 at the prior's temperature
        worst = max(
            worst, residual_equivalence_case(mdp, addon, prior, alpha, alpha)
        )
    return CheckResult(
        "kl_decoupling", worst <= profile.kl_decoupling, worst,
        profile.kl_decoupling, "KL-configuration TV vs direct soft solution",
    )


def check_lemma1(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng([seed, 5])
    worst = 0.0
    for _ in range(1000):
        n_s = int(rng.integers(1, 5))
        n_a = int(rng.integers(2, 5))
        q = SoftQTable(rng.uniform(-3.0, 3.0, size=(n_s, n_a)), 1.0)
        alpha = float(rng.uniform(0.2, 2.0))
        beta = float(rng.uniform(0.2, 2.0))
        offset = rng.uniform(-2.0, 2.0, size=n_s)
        q2 = lemma1_transform(q, alpha, beta, offset)
        p1 = boltzmann_policy(q, alpha).probs()
        p2 = boltzmann_policy(q2, beta).probs()
        worst = max(worst, float(np.abs(p1 - p2).max()))
    return CheckResult(
        "lemma1_policy_invariance", worst <= profile.lemma1, worst, profile.lemma1,
        "max probability deviation, 1000 random tables",
    )


def check_lemma2(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng([seed, 6])
    worst = 0.0
    for _ in range(20):
        n_s = int(rng.integers(2, 5))
        n_a = int(rng.integers(2, 4))
        mdp = make_random_mdp(n_s, n_a, int(rng.integers(2**31)), gamma=0.9)
        alpha = float(rng.uniform(0.3, 1.5))
        beta = float(rng.uniform(0.3, 1.5))
        potential = rng.uniform(-1.0, 1.0, size=n_s)
        r1 = lemma2_shaped_reward(mdp.reward, alpha, beta, potential, mdp)
        shaped = TabularMdp(
            num_states=n_s, num_actions=n_a, reward=r1,
            transition=mdp.transition, gamma=mdp.gamma,
        )
        pi_shaped = boltzmann_policy(soft_value_iteration(shaped, alpha)[0], alpha)
        pi_orig = boltzmann_policy(soft_value_iteration(mdp, beta)[0], beta)
        worst = max(worst, float(policy_total_variation(pi_shaped, pi_orig).max()))
    return CheckResult(
        "lemma2_reward_shaping", worst <= profile.lemma2, worst, profile.lemma2,
        "max per-state TV between shaped and original soft-optimal policies",
    )


def check_temperature_rescale(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(10):
        mdp = make_random_mdp(
            int(rng.integers(2, 5)), int(rng.integers(2, 4)),
            int(rng.integers(2**31)), gamma=0.9,
        )
        alpha = float(rng.uniform(0.2, 1.5))
        beta = float(rng.uniform(0.2, 1.5))
        q_dev, pi_dev = temperature_rescale_residuals(mdp, alpha, beta)
        worst = max(worst, q_dev, pi_dev)
    return CheckResult(
        "temperature_rescale", worst <= profile.temperature_rescale, worst,
        profile.temperature_rescale, "max Q/policy deviation across 10 random MDPs",
    )


def _search_until_expanded(model, cfg: SearchConfig, seed: int):
    root = run_search(model, cfg, seed)
    if not tree_is_fully_expanded(root, model):
        raise ParameterError(
            f"search budget {cfg.max_iterations} left the tree partially expanded"
        )
    return root


def check_mcts_soft_consistency(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """Fully expanded max-ent search must reproduce the bottom-up soft recursion."""
    rng = np.random.default_rng([seed, 8])
    worst = 0.0
    for _ in range(20):
        depth = int(rng.integers(1, 4))
        branching = int(rng.integers(2, 4))
        tau = float(rng.uniform(0.5, 1.5))
        model = make_random_tree(depth, branching, int(rng.integers(2**31)))
        n_nodes = len(model.all_states())
        cfg = SearchConfig(
            flavor="maxent", tau=tau, epsilon=0.4, gamma=1.0,
            max_iterations=80 * n_nodes,
        )
        root = _search_until_expanded(model, cfg, int(rng.integers(2**31)))
        oracle = exact_tree_soft_values(model, tau, gamma=1.0)
        q_root = oracle[model.root_state()][0]
        found = np.array([c.value for c in sorted(root.children, key=lambda c: c.action)])
        worst = max(worst, float(np.abs(found - q_root).max()))
    return CheckResult(
        "mcts_soft_consistency", worst <= profile.mcts_soft, worst, profile.mcts_soft,
        "max |root child Q - soft recursion| over 20 random trees",
    )


def check_mcts_residual_recovery(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    """Residual search with a soft-optimal prior and zero add-on reward must
    hand back the prior's root policy."""
    rng = np.random.default_rng([seed, 9])
    worst = 0.0
    for _ in range(5):
        depth = int(rng.integers(1, 4))
        branching = int(rng.integers(2, 4))
        tau = float(rng.uniform(0.5, 1.5))
        model = make_random_tree(depth, branching, int(rng.integers(2**31)))
        oracle = exact_tree_soft_values(model, tau, gamma=1.0)

        def prior_log_probs(state, _oracle=oracle, _tau=tau):
            q = _oracle[state][0]
            scores = q / _tau
            return scores - _tau_lse(scores)

        zero_model = DeterministicTreeModel(
            transitions={
                s: tuple((s2, 0.0) for s2, _ in edges)
                for s, edges in model.transitions.items()
            },
            root=model.root,
        )
        n_nodes = len(model.all_states())
        cfg = SearchConfig(
            flavor="residual", tau=tau, epsilon=0.4, gamma=1.0, prior_weight=1.0,
            max_iterations=80 * n_nodes, prior_log_probs=prior_log_probs,
        )
        root = _search_until_expanded(zero_model, cfg, int(rng.integers(2**31)))
        extracted = extract_root_policy(root, cfg)
        prior_root = np.exp(prior_log_probs(model.root_state()))
        worst = max(worst, 0.5 * float(np.abs(extracted - prior_root).sum()))
    return CheckResult(
        "mcts_residual_recovery", worst <= profile.mcts_residual_tv, worst,
        profile.mcts_residual_tv, "root-policy TV vs prior, zero add-on reward",
    )


def _tau_lse(scores: np.ndarray) -> float:
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def check_accumulation(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng([seed, 10])
    ok = True
    for _ in range(20):
        model = make_random_tree(2, int(rng.integers(2, 4)), int(rng.integers(2**31)))
        tau = float(rng.uniform(0.5, 1.5))
        ok = ok and accumulation_equivalence_check(model, tau, tol=profile.accumulation)
    return CheckResult(
        "accumulation_equivalence", ok, 0.0 if ok else float("nan"),
        profile.accumulation, "20 random depth-2 trees",
    )


def check_dpo_collapse(profile: ToleranceProfile, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng([seed, 11])
    worst = 0.0
    for _ in range(1000):
        beta = float(rng.uniform(0.1, 5.0))
        ex = PreferenceExample(
            logp_theta_w=float(rng.uniform(-10, 0)),
            logp_theta_l=float(rng.uniform(-10, 0)),
            logp_prior_w=float(rng.uniform(-10, 0)),
            logp_prior_l=float(rng.uniform(-10, 0)),
            beta=beta, alpha_hat=beta, omega_prime=beta,
        )
        worst = max(worst, abs(decomposed_dpo_loss(ex) - dpo_loss(ex)))
    return CheckResult(
        "dpo_decomposition_collapse", worst <= profile.dpo_collapse, worst,
        profile.dpo_collapse, "1000 random examples at alpha_hat = omega_prime = beta",
    )


ALL_CHECKS = (
    check_residual_equivalence,
    check_spg_exactness,
    check_variant_algebra,
    check_kl_decoupling,
    check_lemma1,
    check_lemma2,
    check_temperature_rescale,
    check_mcts_soft_consistency,
    check_mcts_residual_recovery,
    check_accumulation,
    check_dpo_collapse,
)


def verify_all(profile: ToleranceProfile | None = None, seed: int = 0) -> VerifyReport:
    """Run every cross-module check; deterministic for a given seed."""
    profile = profile or ToleranceProfile()
    report = VerifyReport()
    for check in ALL_CHECKS:
        report.results.append(check(profile, seed))
    return report
