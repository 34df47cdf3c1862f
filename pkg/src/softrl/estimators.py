"""Competing policy-gradient estimators for the maximum-entropy objective.

Four estimators share the score-function skeleton
``sum_t grad log pi(a_t|s_t) * G_t`` and differ only in how the entropy bonus
enters the reward-to-go G_t:

* ``no_entropy``      — G_t carries rewards only.
* ``end_entropy``     — rewards plus a single -alpha * log pi term at t' = t
                        (the naive entropy-regularized estimator).
* ``repeat_entropy``  — entropy at every step *and* an extra copy at t' = t.
* ``soft_pg``         — entropy at every step, exactly once: the reformulated
                        reward r - alpha * log pi_theta.

At alpha = 0 the four coincide; the code routes them through one arithmetic
path there so they coincide bit-for-bit. On an enumerated batch the weighted
sum over paths is the exact expectation of the estimator, and at gamma = 1
(where dropping the gamma^t trajectory weight is harmless) the soft_pg
expectation equals the true gradient of the finite-horizon objective.

``reward_mode`` swaps the per-step reward for its customization variants:
``rpg`` adds omega_prime * log pi_prior (alpha then plays the role of the new
task's entropy coefficient), and ``kl`` pins omega_prime to alpha, which is
the classic KL-regularized fine-tuning reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .mdp import LogPolicyTable, TabularMdp
from .policies import finite_difference_gradient
from .trajectories import Trajectory, TrajectoryBatch

VARIANTS = ("no_entropy", "end_entropy", "repeat_entropy", "soft_pg")
ESTIMATOR_REWARD_MODES = ("plain", "rpg", "kl")


@dataclass(frozen=True)
class EstimatorConfig:
    variant: str
    alpha: float
    gamma: float
    reward_mode: str = "plain"
    omega_prime: float | None = None
    prior: LogPolicyTable | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")
        if self.reward_mode not in ESTIMATOR_REWARD_MODES:
            raise ParameterError(f"unknown reward_mode {self.reward_mode!r}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.reward_mode in ("rpg", "kl") and self.prior is None:
            raise ParameterError(f"reward_mode {self.reward_mode!r} needs a prior")
        if self.reward_mode == "kl":
            object.__setattr__(self, "omega_prime", self.alpha)
        elif self.reward_mode == "rpg" and self.omega_prime is None:
            raise ParameterError("reward_mode 'rpg' needs omega_prime")


def _base_rewards(traj: Trajectory, cfg: EstimatorConfig) -> np.ndarray:
    if cfg.reward_mode == "plain":
        return traj.rewards
    prior_logs = cfg.prior.log_probs[traj.states[:-1], traj.actions]
    return traj.rewards + cfg.omega_prime * prior_logs


def _rewards_to_go(values: np.ndarray, gamma: float) -> np.ndarray:
    out = np.empty_like(values)
    acc = 0.0
    for t in range(len(values) - 1, -1, -1):
        acc = values[t] + gamma * acc
        out[t] = acc
    return out


def _trajectory_gradient(policy, traj: Trajectory, cfg: EstimatorConfig) -> np.ndarray:
    base = _base_rewards(traj, cfg)
    variant = cfg.variant if cfg.alpha != 0.0 else "no_entropy"
    if variant == "no_entropy":
        g_t = _rewards_to_go(base, cfg.gamma)
    elif variant == "soft_pg":
        g_t = _rewards_to_go(base - cfg.alpha * traj.log_probs, cfg.gamma)
    elif variant == "end_entropy":
        g_t = _rewards_to_go(base, cfg.gamma) - cfg.alpha * traj.log_probs
    else:  # repeat_entropy
        g_t = (
            _rewards_to_go(base - cfg.alpha * traj.log_probs, cfg.gamma)
            - cfg.alpha * traj.log_probs
        )
    grad = np.zeros(policy.num_params)
    for t in range(traj.horizon):
        grad += g_t[t] * policy.grad_log_prob(int(traj.states[t]), int(traj.actions[t]))
    return grad


def estimate_gradient(
    batch: TrajectoryBatch, policy, cfg: EstimatorConfig
) -> np.ndarray:
    """Estimator value on a batch generated under ``policy`` (on-policy).

    Sampled batches average the per-trajectory gradients; enumerated batches
    weight them by path probability, yielding the estimator's exact
    expectation.
    """
    weights = batch.weights()
    grad = np.zeros(policy.num_params)
    for w, traj in zip(weights, batch.trajectories):
        grad += w * _trajectory_gradient(policy, traj, cfg)
    return grad


def score_function_expectation(batch: TrajectoryBatch, policy) -> np.ndarray:
    """Expectation of sum_t grad log pi(a_t|s_t) over the batch.

    Over an enumerated batch this vanishes identically — the score function
    has zero mean — which is why additive constants in the reward-to-go leave
    estimator expectations unchanged.
    """
    weights = batch.weights()
    grad = np.zeros(policy.num_params)
    for w, traj in zip(weights, batch.trajectories):
        for t in range(traj.horizon):
            grad += w * policy.grad_log_prob(int(traj.states[t]), int(traj.actions[t]))
    return grad


def exact_soft_objective(
    mdp: TabularMdp,
    policy,
    alpha: float,
    gamma: float,
    horizon: int,
    start_state: int = 0,
) -> float:
    """Exact finite-horizon maximum-entropy objective of a tabular policy.

    J = E[sum_t gamma^t (r(s_t, a_t) - alpha * log pi(a_t|s_t))], computed by
    propagating the exact state distribution rather than materializing paths;
    the result is identical to enumerating every trajectory and weighting by
    path probability (the test suite cross-checks this), but stays cheap
    enough to finite-difference.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    log_table = policy.log_prob_table().log_probs
    probs = np.exp(log_table)
    with np.errstate(invalid="ignore"):
        step_reward = (
            probs * (mdp.reward - alpha * np.where(probs > 0, log_table, 0.0))
        ).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    d = np.zeros(mdp.num_states)
    d[start_state] = 1.0
    j = 0.0
    for t in range(horizon):
        j += (gamma**t) * float(d @ step_reward)
        if t + 1 < horizon:
            d = d @ p_pi
    return j


def exact_soft_gradient(
    mdp: TabularMdp,
    policy,
    alpha: float,
    gamma: float,
    horizon: int,
    start_state: int = 0,
    step: float = 1e-6,
) -> np.ndarray:
    """Oracle gradient of :func:`exact_soft_objective` by central finite differences."""
    base = policy.copy()

    def objective(params: np.ndarray) -> float:
        probe = base.copy()
        probe.set_params(params)
        return exact_soft_objective(mdp, probe, alpha, gamma, horizon, start_state)

    return finite_difference_gradient(objective, policy.get_params(), step=step)


def ppo_clip_objective(ratio: float, advantage: float, eps: float) -> float:
    """Clipped surrogate for one step: min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)."""
    if not (0.0 < eps < 1.0):
        raise ParameterError(f"eps must be in (0, 1), got {eps}")
    if ratio <= 0.0:
        raise ParameterError(f"probability ratio must be > 0, got {ratio}")
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps)
    return min(ratio * advantage, clipped * advantage)
