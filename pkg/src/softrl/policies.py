"""Differentiable stochastic policies with closed-form score functions.

No autodiff framework: both policy families expose analytic gradients of
log-probability with respect to a flat parameter vector, which keeps the
gradient estimators exact and finite-difference-checkable at desk scale.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError
from .mdp import LogPolicyTable

LOG_2PI = float(np.log(2.0 * np.pi))


class TabularSoftmaxPolicy:
    """Softmax policy over a finite state/action space, parameterized by logits.

    The temperature is fixed at 1: entropy regulation lives in the learning
    objective, not in the parameterization. Parameters are the flattened
    [S, A] logits.
    """

    def __init__(self, logits):
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 2:
            raise DimensionError("logits must be a [num_states, num_actions] table")
        self.logits = logits.copy()

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "TabularSoftmaxPolicy":
        return cls(np.zeros((num_states, num_actions)))

    @classmethod
    def from_log_policy(cls, table: LogPolicyTable) -> "TabularSoftmaxPolicy":
        return cls(table.log_probs)

    @property
    def num_states(self) -> int:
        return self.logits.shape[0]

    @property
    def num_actions(self) -> int:
        return self.logits.shape[1]

    @property
    def num_params(self) -> int:
        return self.logits.size

    def get_params(self) -> np.ndarray:
        return self.logits.ravel().copy()

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=np.float64)
        if params.size != self.logits.size:
            raise DimensionError("parameter vector has wrong length")
        self.logits = params.reshape(self.logits.shape).copy()

    def log_prob_table(self) -> LogPolicyTable:
        z = self.logits - self.logits.max(axis=1, keepdims=True)
        z = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return LogPolicyTable(z)

    def log_prob(self, state: int, action: int) -> float:
        row = self.logits[state]
        m = row.max()
        return float(row[action] - m - np.log(np.exp(row - m).sum()))

    def action_probs(self, state: int) -> np.ndarray:
        row = self.logits[state]
        p = np.exp(row - row.max())
        return p / p.sum()

    def grad_log_prob(self, state: int, action: int) -> np.ndarray:
        """d log pi(a|s) / d logits, flattened; nonzero only in row s.

        For a softmax row the score is e_a - pi(s, .), so each row of the
        gradient sums to zero.
        """
        grad = np.zeros_like(self.logits)
        grad[state] = -self.action_probs(state)
        grad[state, action] += 1.0
        return grad.ravel()

    def entropy(self, state: int) -> float:
        p = self.action_probs(state)
        mask = p > 0.0
        return float(-(p[mask] * np.log(p[mask])).sum())

    def grad_entropy(self, state: int) -> np.ndarray:
        """d H(pi(.|s)) / d logits, flattened.

        For softmax logits z the closed form is dH/dz_j = -p_j (log p_j + H).
        """
        p = self.action_probs(state)
        h = self.entropy(state)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_row = np.where(p > 0.0, -p * (np.log(p) + h), 0.0)
        grad = np.zeros_like(self.logits)
        grad[state] = g_row
        return grad.ravel()

    def sample(self, state: int, rng: np.random.Generator) -> int:
        p = self.action_probs(state)
        return int(rng.choice(self.num_actions, p=p / p.sum()))

    def copy(self) -> "TabularSoftmaxPolicy":
        return TabularSoftmaxPolicy(self.logits)


class DiagonalGaussianPolicy:
    """Diagonal Gaussian policy with a tabular per-state mean.

    The standard deviation is parameterized in log space and comes in two
    modes: one global vector shared by every state (the default, which is the
    better-performing design in practice), or one vector per state. Parameters
    are [means.ravel(), log_std.ravel()].
    """

    def __init__(self, mean, log_std, global_std: bool = True):
        mean = np.asarray(mean, dtype=np.float64)
        log_std = np.asarray(log_std, dtype=np.float64)
        if mean.ndim != 2:
            raise DimensionError("mean must be [num_states, action_dim]")
        self.global_std = bool(global_std)
        if self.global_std:
            if log_std.shape != (mean.shape[1],):
                raise DimensionError("global log_std must be [action_dim]")
        else:
            if log_std.shape != mean.shape:
                raise DimensionError("per-state log_std must match mean shape")
        self.mean = mean.copy()
        self.log_std = log_std.copy()

    @property
    def num_states(self) -> int:
        return self.mean.shape[0]

    @property
    def action_dim(self) -> int:
        return self.mean.shape[1]

    @property
    def num_params(self) -> int:
        return self.mean.size + self.log_std.size

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.mean.ravel(), self.log_std.ravel()])

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=np.float64)
        if params.size != self.num_params:
            raise DimensionError("parameter vector has wrong length")
        n = self.mean.size
        self.mean = params[:n].reshape(self.mean.shape).copy()
        self.log_std = params[n:].reshape(self.log_std.shape).copy()

    def _std_row(self, state: int) -> np.ndarray:
        return self.log_std if self.global_std else self.log_std[state]

    def log_prob(self, state: int, action) -> float:
        action = np.asarray(action, dtype=np.float64)
        log_std = self._std_row(state)
        z = (action - self.mean[state]) / np.exp(log_std)
        return float(-0.5 * (z * z).sum() - log_std.sum() - 0.5 * self.action_dim * LOG_2PI)

    def grad_log_prob(self, state: int, action) -> np.ndarray:
        action = np.asarray(action, dtype=np.float64)
        log_std = self._std_row(state)
        std = np.exp(log_std)
        z = (action - self.mean[state]) / std
        grad_mean = np.zeros_like(self.mean)
        grad_mean[state] = z / std
        grad_log_std = np.zeros_like(self.log_std)
        if self.global_std:
            grad_log_std[:] = z * z - 1.0
        else:
            grad_log_std[state] = z * z - 1.0
        return np.concatenate([grad_mean.ravel(), grad_log_std.ravel()])

    def entropy(self, state: int) -> float:
        log_std = self._std_row(state)
        return float(log_std.sum() + 0.5 * self.action_dim * (LOG_2PI + 1.0))

    def sample(self, state: int, rng: np.random.Generator) -> np.ndarray:
        log_std = self._std_row(state)
        return self.mean[state] + np.exp(log_std) * rng.standard_normal(self.action_dim)

    def copy(self) -> "DiagonalGaussianPolicy":
        return DiagonalGaussianPolicy(self.mean, self.log_std, self.global_std)


def finite_difference_gradient(fn, params: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of a flat parameter vector."""
    if step <= 0:
        raise ParameterError(f"step must be > 0, got {step}")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for i in range(params.size):
        up = params.copy()
        down = params.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2.0 * step)
    return grad
