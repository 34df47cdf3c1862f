"""Trajectory generation and the returns/advantages fed to gradient estimators.

Two generation modes share one container: seeded Monte-Carlo sampling for
training, and exhaustive enumeration of every (action, next-state) path for
exact expectations. Enumerated batches carry exact path probabilities, so any
per-trajectory statistic can be averaged into its true expectation — that is
what makes the estimator tests exact rather than statistical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EnumerationBudgetError, ParameterError
from .mdp import LogPolicyTable, TabularMdp

ENUMERATION_BUDGET = 1_000_000


@dataclass(frozen=True)
class Trajectory:
    """One rollout of fixed horizon.

    ``states`` has length horizon + 1 (the trailing entry is the state after
    the final step); ``actions``, ``rewards`` and ``log_probs`` have length
    horizon. ``path_probability`` is set in enumeration mode only.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray
    path_probability: float | None = None

    def __post_init__(self):
        for name in ("states", "actions", "rewards", "log_probs"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        h = len(self.actions)
        if h < 1 or len(self.states) != h + 1:
            raise DimensionError("states must be one longer than actions")
        if len(self.rewards) != h or len(self.log_probs) != h:
            raise DimensionError("rewards/log_probs must match the horizon")

    @property
    def horizon(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class TrajectoryBatch:
    """A homogeneous-horizon collection of trajectories."""

    trajectories: tuple[Trajectory, ...]
    mode: str  # "sampled" | "enumerated"
    rng_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if self.mode not in ("sampled", "enumerated"):
            raise ParameterError(f"unknown batch mode {self.mode!r}")
        horizons = {t.horizon for t in self.trajectories}
        if len(horizons) > 1:
            raise DimensionError(f"mixed horizons in one batch: {sorted(horizons)}")

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def horizon(self) -> int:
        return self.trajectories[0].horizon

    def weights(self) -> np.ndarray:
        """Per-trajectory expectation weights: path probabilities when
        enumerated, 1/N when sampled."""
        if self.mode == "enumerated":
            return np.array([t.path_probability for t in self.trajectories])
        n = len(self.trajectories)
        return np.full(n, 1.0 / n)


def sample_trajectories(
    mdp: TabularMdp,
    policy,
    horizon: int,
    count: int,
    seed: int,
    start_state: int = 0,
) -> TrajectoryBatch:
    """Roll out ``count`` seeded trajectories of fixed horizon.

    Each trajectory draws from its own RNG stream derived from (seed, index),
    so batches are bit-reproducible and trajectories could be generated in any
    order or in parallel without changing the result.
    """
    if count < 1 or horizon < 1:
        raise ParameterError("count and horizon must be >= 1")
    log_table = policy.log_prob_table().log_probs
    trajectories = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        states = np.empty(horizon + 1, dtype=np.int64)
        actions = np.empty(horizon, dtype=np.int64)
        rewards = np.empty(horizon)
        log_probs = np.empty(horizon)
        s = start_state
        states[0] = s
        for t in range(horizon):
            a = policy.sample(s, rng)
            actions[t] = a
            rewards[t] = mdp.reward[s, a]
            log_probs[t] = log_table[s, a]
            s = int(rng.choice(mdp.num_states, p=mdp.transition[s, a]))
            states[t + 1] = s
        trajectories.append(Trajectory(states, actions, rewards, log_probs))
    return TrajectoryBatch(tuple(trajectories), mode="sampled", rng_seed=seed)


def enumerate_trajectories(
    mdp: TabularMdp,
    policy,
    horizon: int,
    start_state: int = 0,
    budget: int = ENUMERATION_BUDGET,
) -> TrajectoryBatch:
    """Enumerate every positive-probability path of the given horizon.

    Each path carries its exact probability prod_t pi(a_t|s_t) p(s_{t+1}|s_t, a_t);
    over the full batch these sum to 1. Zero-probability branches are pruned.
    Raises :class:`EnumerationBudgetError` once more than ``budget`` paths
    would be produced.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    log_table = policy.log_prob_table().log_probs
    probs_table = np.exp(log_table)
    trajectories: list[Trajectory] = []

    states = np.empty(horizon + 1, dtype=np.int64)
    actions = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon)
    log_probs = np.empty(horizon)

    def expand(s: int, t: int, prob: float) -> None:
        states[t] = s
        if t == horizon:
            if len(trajectories) >= budget:
                raise EnumerationBudgetError(
                    f"enumeration exceeds the {budget} path budget"
                )
            trajectories.append(
                Trajectory(states.copy(), actions.copy(), rewards.copy(),
                           log_probs.copy(), path_probability=prob)
            )
            return
        for a in range(mdp.num_actions):
            pa = probs_table[s, a]
            if pa == 0.0:
                continue
            actions[t] = a
            rewards[t] = mdp.reward[s, a]
            log_probs[t] = log_table[s, a]
            for s2 in np.flatnonzero(mdp.transition[s, a]):
                expand(int(s2), t + 1, prob * pa * mdp.transition[s, a, s2])

    expand(int(start_state), 0, 1.0)
    return TrajectoryBatch(tuple(trajectories), mode="enumerated")


def soft_return(traj: Trajectory, alpha: float, gamma: float, from_step: int = 0) -> float:
    """Discounted soft return from a step: sum_{t' >= t} gamma^(t'-t) (r - alpha log pi).

    The discount is re-anchored at ``from_step`` (gamma^(t'-t), not gamma^t'),
    matching the reward-to-go weighting the gradient estimators use. At
    alpha = 0 this is the ordinary discounted return.
    """
    if not (0 <= from_step < traj.horizon):
        raise ParameterError(f"from_step {from_step} outside [0, {traj.horizon})")
    r = traj.rewards[from_step:] - alpha * traj.log_probs[from_step:]
    discounts = gamma ** np.arange(len(r))
    return float(np.dot(discounts, r))


REWARD_MODES = ("plain", "spg", "rpg", "kl")


def _modded_rewards(
    traj: Trajectory,
    alpha: float,
    reward_mode: str,
    prior: LogPolicyTable | None,
    omega_prime: float | None,
    alpha_hat: float | None,
) -> np.ndarray:
    """Per-step reformulated reward for one trajectory.

    plain: r
    spg:   r - alpha * log pi_theta
    rpg:   r + omega_prime * log pi_prior - alpha_hat * log pi_theta
    kl:    rpg pinned at omega_prime = alpha_hat
    """
    if reward_mode not in REWARD_MODES:
        raise ParameterError(f"unknown reward_mode {reward_mode!r}")
    if reward_mode == "plain":
        return traj.rewards.copy()
    if reward_mode == "spg":
        return traj.rewards - alpha * traj.log_probs
    if prior is None or alpha_hat is None:
        raise ParameterError(f"reward_mode {reward_mode!r} needs prior and alpha_hat")
    if reward_mode == "kl":
        omega_prime = alpha_hat
    elif omega_prime is None:
        raise ParameterError("reward_mode 'rpg' needs omega_prime")
    prior_logs = prior.log_probs[traj.states[:-1], traj.actions]
    return traj.rewards + omega_prime * prior_logs - alpha_hat * traj.log_probs


def compute_advantages(
    batch: TrajectoryBatch,
    values,
    mdp: TabularMdp,
    alpha: float,
    gamma: float,
    reward_mode: str = "spg",
    prior: LogPolicyTable | None = None,
    omega_prime: float | None = None,
    alpha_hat: float | None = None,
    lam: float = 0.0,
) -> np.ndarray:
    """Per-step advantages, shape [len(batch), horizon].

    The one-step form (lam = 0, the default) is

        A_t = r_mode(s_t, a_t) + gamma * E_{s'|s_t,a_t}[V(s')] - V(s_t),

    with the next-state expectation taken exactly under the kernel. With the
    exact soft value function as baseline, the probability-weighted mean
    advantage at every state is zero over an enumerated batch. lam > 0 blends
    the per-step residuals along the sampled path, GAE-style, up to lam = 1
    (Monte-Carlo); that extension is a practical training option only.
    """
    v = values.v if hasattr(values, "v") else np.asarray(values, dtype=np.float64)
    if v.shape != (mdp.num_states,):
        raise LookupError(
            f"value baseline covers {v.shape} states, mdp has {mdp.num_states}"
        )
    expected_next = mdp.transition @ v  # [S, A]
    out = np.empty((len(batch), batch.horizon))
    for i, traj in enumerate(batch.trajectories):
        r_mod = _modded_rewards(traj, alpha, reward_mode, prior, omega_prime, alpha_hat)
        s, a = traj.states[:-1], traj.actions
        delta = r_mod + gamma * expected_next[s, a] - v[s]
        if lam == 0.0:
            out[i] = delta
        else:
            acc = 0.0
            for t in range(traj.horizon - 1, -1, -1):
                acc = delta[t] + gamma * lam * acc
                out[i, t] = acc
    return out


def batch_to_csv(batch: TrajectoryBatch) -> str:
    """One row per step: episode, t, state, action, reward, log_prob."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["episode", "t", "state", "action", "reward", "log_prob"])
    for i, traj in enumerate(batch.trajectories):
        for t in range(traj.horizon):
            writer.writerow(
                [i, t, int(traj.states[t]), int(traj.actions[t]),
                 repr(float(traj.rewards[t])), repr(float(traj.log_probs[t]))]
            )
    return buf.getvalue()
