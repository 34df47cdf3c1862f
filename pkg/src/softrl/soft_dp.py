"""Exact soft dynamic programming on tabular MDPs.

Everything here is ground truth: synchronous soft value iteration, Boltzmann
policy extraction, residual soft-Q iteration for policy customization, exact
policy evaluation, and the reward/temperature transforms that leave the
soft-optimal policy invariant. The learning and search components elsewhere in
the package are tested against these routines.

The soft Bellman operator replaces the max of ordinary value iteration with a
temperature-scaled log-sum-exp,

    Q(s, a) <- r(s, a) + gamma * E_{s'}[ alpha * log sum_a' exp(Q(s', a') / alpha) ],

whose fixed point induces the Boltzmann policy pi(a|s) proportional to
exp(Q(s, a) / alpha). All log-sum-exps are computed with max-subtraction so
temperatures down to ~1e-3 stay inside float range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ConvergenceError,
    DegenerateDistributionError,
    DimensionError,
    ParameterError,
)
from .mdp import LogPolicyTable, TabularMdp

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000


@dataclass(frozen=True)
class SoftQTable:
    """A soft state-action value table together with the temperature it was
    solved under."""

    q: np.ndarray
    entropy_coeff: float

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise DimensionError("q must be a [num_states, num_actions] table")
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)
        if self.entropy_coeff <= 0:
            raise ParameterError(f"entropy_coeff must be > 0, got {self.entropy_coeff}")


@dataclass(frozen=True)
class SoftValueTable:
    """Soft state values, v[s] = alpha * logsumexp(q[s, :] / alpha)."""

    v: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.v, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise DimensionError("v must be a [num_states] vector")
        arr.setflags(write=False)
        object.__setattr__(self, "v", arr)


def soft_state_values(q: np.ndarray, alpha: float) -> np.ndarray:
    """alpha-scaled log-sum-exp over the action axis."""
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    with np.errstate(divide="ignore"):
        return alpha * logsumexp(q / alpha, axis=-1)


def soft_bellman_backup(q: SoftQTable, mdp: TabularMdp, alpha: float) -> SoftQTable:
    """One application of the soft Bellman operator at temperature alpha."""
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    if q.q.shape != mdp.shape:
        raise DimensionError(f"q shape {q.q.shape} != mdp shape {mdp.shape}")
    v = soft_state_values(q.q, alpha)
    return SoftQTable(mdp.reward + mdp.gamma * (mdp.transition @ v), alpha)


def soft_value_iteration(
    mdp: TabularMdp,
    alpha: float,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    horizon: int | None = None,
) -> tuple[SoftQTable, SoftValueTable]:
    """Solve for the soft-optimal Q and V tables.

    With ``horizon`` set, runs exactly that many synchronous sweeps from zero
    (the finite-horizon solution, required when gamma = 1). Otherwise iterates
    to a sup-norm fixed point and raises :class:`ConvergenceError` carrying the
    last residual if the budget runs out.
    """
    if tol <= 0 and horizon is None:
        raise ParameterError(f"tol must be > 0, got {tol}")
    if mdp.gamma >= 1.0 and horizon is None:
        raise ParameterError("gamma = 1 requires an explicit finite horizon")
    q = SoftQTable(np.zeros(mdp.shape), alpha)
    if horizon is not None:
        for _ in range(horizon):
            q = soft_bellman_backup(q, mdp, alpha)
        return q, SoftValueTable(soft_state_values(q.q, alpha))
    residual = np.inf
    for _ in range(max_iters):
        q_next = soft_bellman_backup(q, mdp, alpha)
        residual = float(np.max(np.abs(q_next.q - q.q)))
        q = q_next
        if residual <= tol:
            return q, SoftValueTable(soft_state_values(q.q, alpha))
    raise ConvergenceError(
        f"soft value iteration did not reach tol={tol} in {max_iters} sweeps "
        f"(last residual {residual:.3e})",
        residual=residual,
    )


def boltzmann_policy(q: SoftQTable, alpha: float) -> LogPolicyTable:
    """Extract the Boltzmann policy pi(a|s) proportional to exp(q[s, a] / alpha).

    Computed in log space with max-subtraction. A row that is -inf everywhere
    has no support and raises :class:`DegenerateDistributionError`.
    """
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    scaled = q.q / alpha
    row_max = np.max(scaled, axis=1)
    if np.any(np.isneginf(row_max)):
        bad = int(np.argwhere(np.isneginf(row_max))[0, 0])
        raise DegenerateDistributionError(f"state {bad} has no action with support")
    log_probs = scaled - row_max[:, None]
    with np.errstate(divide="ignore"):
        log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1))[:, None]
    return LogPolicyTable(log_probs)


def soft_policy_evaluation(
    mdp: TabularMdp, policy: LogPolicyTable, alpha: float
) -> SoftValueTable:
    """Exact infinite-horizon soft value of a fixed policy (linear solve).

    Solves (I - gamma * P_pi) v = r_pi with the per-state expected reformulated
    reward r_pi(s) = sum_a pi(a|s) (r(s, a) - alpha * log pi(a|s)). Passing
    alpha = 0 evaluates the plain discounted reward. Zero-probability actions
    contribute nothing (0 * log 0 = 0).
    """
    if policy.log_probs.shape != mdp.shape:
        raise DimensionError("policy shape does not match mdp")
    if mdp.gamma >= 1.0:
        raise ParameterError("policy evaluation requires gamma < 1")
    probs = policy.probs()
    with np.errstate(invalid="ignore"):
        ent = np.where(probs > 0.0, probs * policy.log_probs, 0.0)
    r_pi = (probs * mdp.reward).sum(axis=1) - alpha * ent.sum(axis=1)
    p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    v = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * p_pi, r_pi)
    return SoftValueTable(v)


# --- Residual soft-Q learning -------------------------------------------------


def residual_soft_q_backup(
    q_r: SoftQTable,
    prior: LogPolicyTable,
    addon_reward: np.ndarray,
    mdp: TabularMdp,
    omega_prime: float,
    alpha_hat: float,
) -> SoftQTable:
    """One residual soft-Q update against a prior policy.

    The residual table tracks the gap between the full-task soft Q and the
    (scaled) prior-task soft Q without ever seeing the prior's reward:

        Q_R <- r_addon + gamma * E_{s'}[ alpha_hat * log sum_a'
                   exp((Q_R(s', a') + omega_prime * log pi_prior(a'|s')) / alpha_hat) ].

    This is the soft Bellman backup of the augmented MDP, restated so the
    log-prior term rides inside the lookahead instead of the immediate reward.
    """
    if alpha_hat <= 0:
        raise ParameterError(f"alpha_hat must be > 0, got {alpha_hat}")
    addon_reward = np.asarray(addon_reward, dtype=np.float64)
    if addon_reward.shape != mdp.shape or q_r.q.shape != mdp.shape:
        raise DimensionError("addon_reward / q_r shape does not match mdp")
    if prior.log_probs.shape != mdp.shape:
        raise DimensionError("prior shape does not match mdp")
    with np.errstate(invalid="ignore"):
        shifted = q_r.q + omega_prime * prior.log_probs
    v = soft_state_values(shifted, alpha_hat)
    return SoftQTable(addon_reward + mdp.gamma * (mdp.transition @ v), alpha_hat)


def residual_soft_q_iteration(
    prior: LogPolicyTable,
    addon_reward: np.ndarray,
    mdp: TabularMdp,
    omega_prime: float,
    alpha_hat: float,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> SoftQTable:
    """Iterate :func:`residual_soft_q_backup` to its fixed point."""
    if mdp.gamma >= 1.0:
        raise ParameterError("residual iteration requires gamma < 1")
    q_r = SoftQTable(np.zeros(mdp.shape), alpha_hat)
    residual = np.inf
    for _ in range(max_iters):
        q_next = residual_soft_q_backup(
            q_r, prior, addon_reward, mdp, omega_prime, alpha_hat
        )
        residual = float(np.max(np.abs(q_next.q - q_r.q)))
        q_r = q_next
        if residual <= tol:
            return q_r
    raise ConvergenceError(
        f"residual soft-Q iteration did not reach tol={tol} in {max_iters} sweeps "
        f"(last residual {residual:.3e})",
        residual=residual,
    )


def customized_policy_from_residual(
    q_r: SoftQTable, prior: LogPolicyTable, omega_prime: float, alpha_hat: float
) -> LogPolicyTable:
    """Customized policy pi(a|s) prop. to exp(Q_R / alpha_hat + (omega_prime / alpha_hat) * log pi_prior)."""
    if alpha_hat <= 0:
        raise ParameterError(f"alpha_hat must be > 0, got {alpha_hat}")
    if q_r.q.shape != prior.log_probs.shape:
        raise DimensionError("q_r shape does not match prior")
    with np.errstate(invalid="ignore"):
        scores = q_r.q + omega_prime * prior.log_probs
    return boltzmann_policy(SoftQTable(scores, alpha_hat), alpha_hat)


# --- Policy-invariance transforms ----------------------------------------------


def lemma1_transform(
    q: SoftQTable, alpha: float, beta: float, offset: np.ndarray
) -> SoftQTable:
    """Re-express a soft Q table at a new temperature without changing its policy.

    Returns Q2 with Q2 / beta = Q1 / alpha + offset(s); the Boltzmann policy of
    (Q2, beta) matches that of (Q1, alpha) exactly, both as a distribution and
    in argmax.
    """
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be > 0")
    offset = np.asarray(offset, dtype=np.float64)
    if offset.shape != (q.q.shape[0],):
        raise DimensionError("offset must be a per-state vector")
    return SoftQTable(beta * (q.q / alpha + offset[:, None]), beta)


def lemma2_shaped_reward(
    r2: np.ndarray,
    alpha: float,
    beta: float,
    potential: np.ndarray,
    mdp: TabularMdp,
) -> np.ndarray:
    """Reshape a reward across temperatures while preserving the soft-optimal policy.

    Returns r1(s, a) = (alpha / beta) * r2(s, a) + f(s, a) with the
    potential-based term f(s, a) = -alpha * (c(s) - gamma * E_{s'|s,a}[c(s')]).
    The expectation makes f action-dependent through the kernel; that is the
    form the invariance argument actually manipulates. Solving (r1, alpha) and
    (r2, beta) yields the same Boltzmann policy.
    """
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be > 0")
    r2 = np.asarray(r2, dtype=np.float64)
    if r2.shape != mdp.shape:
        raise DimensionError("r2 shape does not match mdp")
    potential = np.asarray(potential, dtype=np.float64)
    if potential.shape != (mdp.num_states,):
        raise DimensionError("potential must be a per-state vector")
    expected_next = mdp.transition @ potential
    f = -alpha * (potential[:, None] - mdp.gamma * expected_next)
    return (alpha / beta) * r2 + f


def temperature_rescale_residuals(
    mdp: TabularMdp, alpha: float, beta: float
) -> tuple[float, float]:
    """Measured deviations from the temperature/reward rescaling identity.

    Solving reward r at temperature beta, and reward (alpha / beta) * r at
    temperature alpha, must satisfy Q_alpha = (alpha / beta) * Q_beta entrywise
    with identical Boltzmann policies. Returns (max Q deviation, max policy
    probability deviation).
    """
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be > 0")
    # Solve tightly: the fixed-point tolerance is amplified by 1/(1 - gamma)
    # in the Q error, and the identity is asserted at 1e-8.
    q_beta, _ = soft_value_iteration(mdp, beta, tol=1e-13)
    scaled = TabularMdp(
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        reward=(alpha / beta) * mdp.reward,
        transition=mdp.transition,
        gamma=mdp.gamma,
        terminal=mdp.terminal,
    )
    q_alpha, _ = soft_value_iteration(scaled, alpha, tol=1e-13)
    q_dev = float(np.max(np.abs(q_alpha.q - (alpha / beta) * q_beta.q)))
    pi_alpha = boltzmann_policy(q_alpha, alpha)
    pi_beta = boltzmann_policy(q_beta, beta)
    pi_dev = float(np.max(np.abs(pi_alpha.probs() - pi_beta.probs())))
    return q_dev, pi_dev


def temperature_rescale_check(
    mdp: TabularMdp, alpha: float, beta: float, tol: float
) -> bool:
    """True iff the rescaling identity holds on this MDP within tol."""
    q_dev, pi_dev = temperature_rescale_residuals(mdp, alpha, beta)
    return q_dev <= tol and pi_dev <= tol
