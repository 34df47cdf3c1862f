"""Small deterministic environments with a basic-vs-add-on reward split.

The gridworld is the workhorse: the basic reward pays for reaching the goal
quickly, while an add-on table layered on top (a bonus lane, a hazard band)
pulls the policy somewhere the basic task does not care about. That conflict
is what the customization trainers have to negotiate. The chain and random
MDPs exist as oracle fodder; the Gaussian bandit exercises the continuous
policy family with a closed-form objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .mdp import TabularMdp
from .policies import DiagonalGaussianPolicy

ADDON_KINDS = ("lane_bonus", "hazard_penalty", "none")

# Actions: up, down, left, right.
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class GridWorldSpec:
    width: int = 5
    height: int = 5
    goal: tuple[int, int] = (4, 4)
    goal_reward: float = 1.0
    step_cost: float = -0.01
    addon_kind: str = "lane_bonus"
    addon_magnitude: float = 0.05
    gamma: float = 0.95

    def __post_init__(self):
        if self.addon_kind not in ADDON_KINDS:
            raise ParameterError(f"unknown addon kind {self.addon_kind!r}")
        r, c = self.goal
        if not (0 <= r < self.height and 0 <= c < self.width):
            raise ParameterError(f"goal {self.goal} outside {self.height}x{self.width} grid")


def make_gridworld(spec: GridWorldSpec) -> tuple[TabularMdp, np.ndarray]:
    """Deterministic gridworld plus its add-on reward table.

    Four wall-clipped moves; entering the goal pays the goal reward, any other
    move pays the step cost; the goal absorbs. The add-on table rewards (or
    penalizes) occupying a row of the grid: ``lane_bonus`` pays on the bottom
    row, ``hazard_penalty`` charges on the middle row. Add-on entries at the
    goal are zero — once the episode is over nothing more accrues.
    """
    h, w = spec.height, spec.width
    n = h * w
    goal = spec.goal[0] * w + spec.goal[1]

    reward = np.zeros((n, 4))
    transition = np.zeros((n, 4, n))
    terminal = np.zeros(n, dtype=bool)
    terminal[goal] = True

    for row in range(h):
        for col in range(w):
            s = row * w + col
            for a, (dr, dc) in enumerate(GRID_MOVES):
                if s == goal:
                    transition[s, a, s] = 1.0
                    continue
                r2 = min(max(row + dr, 0), h - 1)
                c2 = min(max(col + dc, 0), w - 1)
                s2 = r2 * w + c2
                transition[s, a, s2] = 1.0
                reward[s, a] = spec.goal_reward if s2 == goal else spec.step_cost

    addon = np.zeros((n, 4))
    if spec.addon_kind == "lane_bonus":
        lane = h - 1
        for col in range(w):
            addon[lane * w + col, :] = spec.addon_magnitude
    elif spec.addon_kind == "hazard_penalty":
        band = h // 2
        for col in range(w):
            addon[band * w + col, :] = -spec.addon_magnitude
    addon[goal, :] = 0.0

    mdp = TabularMdp(
        num_states=n, num_actions=4, reward=reward, transition=transition,
        gamma=spec.gamma, terminal=terminal,
    )
    return mdp, addon


def grid_state(spec: GridWorldSpec, row: int, col: int) -> int:
    return row * spec.width + col


def make_chain(n: int, slip: float, gamma: float = 0.9) -> TabularMdp:
    """A left/right chain of n states; the rightmost pays 1 and absorbs.

    Action 0 steps left, action 1 steps right (clipped at the ends); with
    probability ``slip`` the move goes the other way. slip = 0 is fully
    deterministic.
    """
    if n < 2:
        raise ParameterError(f"chain needs >= 2 states, got {n}")
    if not (0.0 <= slip < 1.0):
        raise ParameterError(f"slip must be in [0, 1), got {slip}")
    transition = np.zeros((n, 2, n))
    terminal = np.zeros(n, dtype=bool)
    terminal[n - 1] = True
    for s in range(n - 1):
        left, right = max(s - 1, 0), s + 1
        transition[s, 0, left] += 1.0 - slip
        transition[s, 0, right] += slip
        transition[s, 1, right] += 1.0 - slip
        transition[s, 1, left] += slip
    transition[n - 1, :, n - 1] = 1.0
    # expected reward: probability of landing on the absorbing right end
    reward = transition[:, :, n - 1].copy()
    reward[n - 1, :] = 0.0
    return TabularMdp(
        num_states=n, num_actions=2, reward=reward, transition=transition,
        gamma=gamma, terminal=terminal,
    )


def make_random_mdp(
    n_states: int,
    n_actions: int,
    seed: int,
    reward_scale: float = 1.0,
    gamma: float = 0.9,
) -> TabularMdp:
    """Seeded dense random MDP: normalized-uniform kernel rows, uniform rewards."""
    rng = np.random.default_rng(seed)
    raw = rng.uniform(size=(n_states, n_actions, n_states))
    transition = raw / raw.sum(axis=2, keepdims=True)
    reward = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    return TabularMdp(
        num_states=n_states, num_actions=n_actions, reward=reward,
        transition=transition, gamma=gamma,
    )


@dataclass(frozen=True)
class GaussianBanditSpec:
    """Single-state quadratic bandit: r(a) = -penalty * ||a - target||^2."""

    target: np.ndarray
    penalty: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.target, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise ParameterError("target must be a flat action vector")
        arr.setflags(write=False)
        object.__setattr__(self, "target", arr)
        if self.penalty <= 0:
            raise ParameterError(f"penalty must be > 0, got {self.penalty}")

    @property
    def action_dim(self) -> int:
        return len(self.target)

    def reward(self, action) -> float:
        diff = np.asarray(action) - self.target
        return float(-self.penalty * (diff * diff).sum())


def gaussian_bandit_objective(
    policy: DiagonalGaussianPolicy, spec: GaussianBanditSpec, alpha: float
) -> float:
    """Closed-form soft objective of a Gaussian policy on the quadratic bandit.

    E[r(a)] = -penalty * (||mean - target||^2 + sum_i sigma_i^2), plus
    alpha times the policy's differential entropy.
    """
    if policy.num_states != 1:
        raise ParameterError("the bandit is single-state")
    if policy.action_dim != spec.action_dim:
        raise ParameterError("policy and bandit action dimensions differ")
    diff = policy.mean[0] - spec.target
    var = np.exp(2.0 * (policy.log_std if policy.global_std else policy.log_std[0]))
    return float(
        -spec.penalty * ((diff * diff).sum() + var.sum()) + alpha * policy.entropy(0)
    )
