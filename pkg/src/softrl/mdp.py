"""Finite tabular MDPs and the augmented-MDP construction for policy customization.

A customization task starts from a prior policy that was trained to solve an
unknown basic reward, plus an add-on reward encoding the new requirement.
Weighting the prior's log-probabilities into the add-on reward produces an
ordinary MDP whose maximum-entropy solution is the customized policy, so the
whole problem reduces to standard soft RL machinery on the augmented reward

    r_aug(s, a) = r_addon(s, a) + omega_prime * log pi_prior(a | s).

All containers here are immutable after construction and safe to share across
workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

ROW_SUM_TOL = 1e-12
LOG_POLICY_ROW_TOL = 1e-9


def _as_readonly(a, shape, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.shape != shape:
        raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TabularMdp:
    """A finite MDP: reward table, transition kernel, discount, terminal flags.

    ``reward`` is [S, A], ``transition`` is [S, A, S] with rows summing to 1,
    ``terminal`` marks absorbing states that self-loop with zero reward.
    Trajectories are never truncated at terminal states; absorption is encoded
    in the kernel itself, so infinite-horizon sums stay well defined.
    """

    num_states: int
    num_actions: int
    reward: np.ndarray
    transition: np.ndarray
    gamma: float
    terminal: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        s, a = self.num_states, self.num_actions
        if s < 1 or a < 1:
            raise DimensionError("num_states and num_actions must be positive")
        object.__setattr__(self, "reward", _as_readonly(self.reward, (s, a), "reward"))
        object.__setattr__(
            self, "transition", _as_readonly(self.transition, (s, a, s), "transition")
        )
        term = self.terminal
        if term is None:
            term = np.zeros(s, dtype=bool)
        term = np.asarray(term, dtype=bool).copy()
        if term.shape != (s,):
            raise DimensionError(f"terminal has shape {term.shape}, expected ({s},)")
        term.setflags(write=False)
        object.__setattr__(self, "terminal", term)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_states, self.num_actions)


def validate_mdp(mdp: TabularMdp) -> list[str]:
    """Return a list of violated invariants; empty means the MDP is valid.

    This is a reporting operation: it never raises on a bad MDP.
    """
    report: list[str] = []
    t = mdp.transition
    row_sums = t.sum(axis=2)
    bad = np.argwhere(np.abs(row_sums - 1.0) > ROW_SUM_TOL)
    for s, a in bad:
        report.append(f"transition row (s={s}, a={a}) sums to {row_sums[s, a]!r}")
    neg = np.argwhere(t < 0.0)
    for s, a, s2 in neg:
        report.append(f"transition (s={s}, a={a}, s'={s2}) is negative: {t[s, a, s2]!r}")
    if not (0.0 <= mdp.gamma <= 1.0):
        report.append(f"gamma {mdp.gamma!r} outside [0, 1]")
    for s in np.flatnonzero(mdp.terminal):
        for a in range(mdp.num_actions):
            if t[s, a, s] != 1.0:
                report.append(
                    f"terminal state {s} does not self-loop under action {a} "
                    f"(p={t[s, a, s]!r})"
                )
            if mdp.reward[s, a] != 0.0:
                report.append(
                    f"terminal reward nonzero at (s={s}, a={a}): {mdp.reward[s, a]!r}"
                )
    return report


@dataclass(frozen=True)
class LogPolicyTable:
    """Log-probabilities of a stochastic tabular policy, one row per state.

    Rows live in log space; ``-inf`` entries mark actions the policy never
    takes. Use :meth:`validate` to check normalization — construction does not
    enforce it, so corrupted tables can be represented and then detected.
    """

    log_probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.log_probs, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise DimensionError("log_probs must be a [num_states, num_actions] table")
        arr.setflags(write=False)
        object.__setattr__(self, "log_probs", arr)

    @property
    def num_states(self) -> int:
        return self.log_probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.log_probs.shape[1]

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def validate(self, tol: float = LOG_POLICY_ROW_TOL) -> list[str]:
        """Rows must exponentiate to probability vectors summing to 1."""
        report = []
        sums = np.exp(self.log_probs).sum(axis=1)
        for s in np.flatnonzero(np.abs(sums - 1.0) > tol):
            report.append(f"policy row {s} sums to {sums[s]!r}")
        return report

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "LogPolicyTable":
        return cls(np.full((num_states, num_actions), -np.log(num_actions)))

    @classmethod
    def from_probs(cls, probs) -> "LogPolicyTable":
        p = np.asarray(probs, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return cls(np.log(p))


def policy_total_variation(a: LogPolicyTable, b: LogPolicyTable) -> np.ndarray:
    """Per-state total-variation distance, 0.5 * L1 between probability rows."""
    if a.log_probs.shape != b.log_probs.shape:
        raise DimensionError("policies have different shapes")
    return 0.5 * np.abs(a.probs() - b.probs()).sum(axis=1)


@dataclass(frozen=True)
class CustomizationSpec:
    """Parameters of a customization task.

    ``addon_reward`` is the new [S, A] requirement on top of the prior task.
    ``prior_weight`` (>= 0) scales how much of the prior's implicit reward is
    retained; ``prior_entropy_coeff`` is the temperature the prior was trained
    at and ``new_entropy_coeff`` the temperature of the customized policy.
    ``augment_coeff`` defaults to prior_weight * prior_entropy_coeff and is the
    single knob that actually enters the augmented reward.
    """

    addon_reward: np.ndarray
    prior_weight: float = 1.0
    prior_entropy_coeff: float = 1.0
    new_entropy_coeff: float = 1.0
    augment_coeff: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.addon_reward, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise DimensionError("addon_reward must be a [num_states, num_actions] table")
        arr.setflags(write=False)
        object.__setattr__(self, "addon_reward", arr)
        if self.prior_weight < 0:
            raise ValueError(f"prior_weight must be >= 0, got {self.prior_weight}")
        if self.prior_entropy_coeff <= 0:
            raise ValueError(
                f"prior_entropy_coeff must be > 0, got {self.prior_entropy_coeff}"
            )
        if self.new_entropy_coeff <= 0:
            raise ValueError(
                f"new_entropy_coeff must be > 0, got {self.new_entropy_coeff}"
            )
        if self.augment_coeff is None:
            object.__setattr__(
                self, "augment_coeff", self.prior_weight * self.prior_entropy_coeff
            )
        else:
            object.__setattr__(self, "augment_coeff", float(self.augment_coeff))


def augment_mdp(
    mdp: TabularMdp, spec: CustomizationSpec, prior: LogPolicyTable
) -> TabularMdp:
    """Build the augmented MDP whose soft solution is the customized policy.

    The returned MDP shares the original kernel and discount bit-for-bit and
    carries reward ``addon + augment_coeff * log pi_prior``. With a zero
    augment coefficient this is exactly the add-on reward (the greedy
    configuration). A ``-inf`` prior log-probability with a positive
    coefficient yields a ``-inf`` augmented reward, which downstream soft
    backups treat as a forbidden action.

    Terminal flags are cleared on the result: the basic task's zero-reward
    terminal convention cannot survive the log-prior term, and absorption is
    already encoded in the copied kernel.
    """
    if spec.addon_reward.shape != mdp.shape:
        raise DimensionError(
            f"addon_reward shape {spec.addon_reward.shape} != mdp shape {mdp.shape}"
        )
    if prior.log_probs.shape != mdp.shape:
        raise DimensionError(
            f"prior shape {prior.log_probs.shape} != mdp shape {mdp.shape}"
        )
    omega_prime = spec.augment_coeff
    with np.errstate(invalid="ignore"):
        reward = spec.addon_reward + omega_prime * prior.log_probs
    if omega_prime == 0.0:
        reward = spec.addon_reward.copy()
    return TabularMdp(
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        reward=reward,
        transition=mdp.transition,
        gamma=mdp.gamma,
        terminal=np.zeros(mdp.num_states, dtype=bool),
    )


# --- JSON round-tripping -----------------------------------------------------
#
# Floats are stored as decimal strings with 17 significant digits, which is
# enough for IEEE-754 doubles to round-trip bit-exactly.


def _f2s(x: float) -> str:
    return format(float(x), ".17g")


def mdp_to_json(mdp: TabularMdp) -> str:
    doc = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "reward": [_f2s(x) for x in mdp.reward.ravel()],
        "transition": [_f2s(x) for x in mdp.transition.ravel()],
        "gamma": _f2s(mdp.gamma),
        "terminal": [bool(t) for t in mdp.terminal],
    }
    return json.dumps(doc, sort_keys=True)


def mdp_from_json(text: str) -> TabularMdp:
    doc = json.loads(text)
    s, a = int(doc["num_states"]), int(doc["num_actions"])
    reward = np.array([float(x) for x in doc["reward"]]).reshape(s, a)
    transition = np.array([float(x) for x in doc["transition"]]).reshape(s, a, s)
    return TabularMdp(
        num_states=s,
        num_actions=a,
        reward=reward,
        transition=transition,
        gamma=float(doc["gamma"]),
        terminal=np.array(doc["terminal"], dtype=bool),
    )
