"""Preference-learning objectives on policy log-probability ratios.

These are pure scalar functions of the log-probabilities a policy pair
assigns to a preferred completion y_w and a rejected one y_l. The implicit
reward is beta * log(pi_theta / pi_prior); the pairwise loss scores the
preferred-minus-rejected margin of that reward through a logistic link, and
the decomposed variant splits the single beta into separate weights on the
trained-policy ratio and the prior ratio — the same two knobs the residual
reward formulation exposes, so at equal weights it collapses back to the
vanilla pairwise loss.

All values are returned in log-likelihood orientation exactly as defined
(higher is better); a minimizing trainer applies the sign at its own
boundary. log(sigmoid(x)) is computed as -softplus(-x) for stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def log_sigmoid(x: float) -> float:
    return float(-np.logaddexp(0.0, -x))


@dataclass(frozen=True)
class PreferenceExample:
    """Log-probabilities of one preference pair under the trained and prior policies.

    ``label`` is 1.0 when the first completion is the preferred one (the
    cross-entropy variant consumes it). ``alpha_hat`` and ``omega_prime``
    default to ``beta`` so the decomposed loss collapses to the vanilla one
    unless they are set apart deliberately.
    """

    logp_theta_w: float
    logp_theta_l: float
    logp_prior_w: float
    logp_prior_l: float
    label: float = 1.0
    beta: float = 1.0
    alpha_hat: float | None = None
    omega_prime: float | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.label not in (0.0, 1.0):
            raise ParameterError(f"label must be 0 or 1, got {self.label}")
        if self.alpha_hat is None:
            object.__setattr__(self, "alpha_hat", self.beta)
        if self.omega_prime is None:
            object.__setattr__(self, "omega_prime", self.beta)

    @property
    def margin_w(self) -> float:
        """log(pi_theta / pi_prior) of the preferred completion."""
        return self.logp_theta_w - self.logp_prior_w

    @property
    def margin_l(self) -> float:
        return self.logp_theta_l - self.logp_prior_l


def dpo_implicit_reward(logp_theta: float, logp_prior: float, beta: float) -> float:
    """The reparameterized reward beta * log(pi_theta / pi_prior)."""
    if beta <= 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    return beta * (logp_theta - logp_prior)


def dpo_loss(ex: PreferenceExample) -> float:
    """Pairwise preference log-likelihood: log sigmoid(beta * (margin_w - margin_l)).

    Invariant under adding any constant to both trained-policy log-probs —
    only ratios enter.
    """
    return log_sigmoid(ex.beta * (ex.margin_w - ex.margin_l))


def cross_entropy_dpo_loss(ex: PreferenceExample) -> float:
    """Pointwise cross-entropy on the implicit reward:

    label * log sigmoid(beta * margin_w) + (1 - label) * log(1 - sigmoid(beta * margin_l)).
    """
    if ex.label == 1.0:
        return log_sigmoid(ex.beta * ex.margin_w)
    # log(1 - sigmoid(x)) = log sigmoid(-x)
    return log_sigmoid(-ex.beta * ex.margin_l)


def decomposed_dpo_loss(ex: PreferenceExample) -> float:
    """Pairwise loss with the trade-off decoupled:

    log sigmoid(alpha_hat * log(pi_theta(y_w)/pi_theta(y_l))
                - omega_prime * log(pi_prior(y_w)/pi_prior(y_l))).

    At alpha_hat = omega_prime = beta this equals :func:`dpo_loss`; at
    omega_prime = 0 the prior drops out entirely.
    """
    theta_ratio = ex.logp_theta_w - ex.logp_theta_l
    prior_ratio = ex.logp_prior_w - ex.logp_prior_l
    return log_sigmoid(ex.alpha_hat * theta_ratio - ex.omega_prime * prior_ratio)
