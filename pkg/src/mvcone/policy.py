"""Optimal wealth function and efficient portfolio evaluation.

With the bankruptcy floor the optimal wealth at time t is a function of
the state-price density level y:

    f(t, y) = mu N(-d2) e^{-R(t)} - gamma N(-d1) y e^{-(2R(t) - Th(t))}

with tail integrals R(t) = int_t^T r, Th(t) = int_t^T |mpr|^2 and

    d1 = [ln(gamma y / mu) - R(t) + 1.5 Th(t)] / sqrt(Th(t)),
    d2 = d1 - sqrt(Th(t)).

The efficient portfolio is always a nonnegative scalar multiple of the
per-segment cone direction, which is what keeps it inside the cone.  The
gamma = 0 case (target equal to pure bond growth) is deterministic and is
handled explicitly everywhere, as is a risk-free tail segment where the
formulas above degenerate.
"""

import math

import numpy as np
from scipy.special import ndtr

from .errors import DomainError
from .lagrange import CLOSED_FORM, SYSTEM_SOLVE, ZERO_RISK

BANKRUPTCY_PROHIBITED = "bankruptcy_prohibited"
BANKRUPTCY_ALLOWED = "bankruptcy_allowed"


class PolicyContext:
    """Effective market plus a solved Lagrange pair, ready to evaluate."""

    def __init__(self, effective, pair, bankruptcy_prohibited=True):
        if bankruptcy_prohibited and pair.provenance == CLOSED_FORM:
            raise DomainError(
                "floored policies need a system-solved (or zero-risk) pair")
        if not bankruptcy_prohibited and pair.provenance == SYSTEM_SOLVE:
            raise DomainError(
                "linear policies need a closed-form (or zero-risk) pair")
        self.effective = effective
        self.pair = pair
        self.bankruptcy_prohibited = bool(bankruptcy_prohibited)

    @property
    def variant(self):
        return (BANKRUPTCY_PROHIBITED if self.bankruptcy_prohibited
                else BANKRUPTCY_ALLOWED)

    @property
    def horizon(self):
        return self.effective.market.horizon

    def tail_rate(self, t):
        return self.effective.rate_integral(t, self.horizon)

    def tail_mpr_sq(self, t):
        return self.effective.mpr_sq_integral(t, self.horizon)

    def direction(self, t):
        """Cone direction scaled by the policy at (t, .)."""
        return self.effective.direction_at(t)

    # -- evaluation -------------------------------------------------------

    def d1_d2(self, t, y):
        """Truncation arguments of the wealth formula; gamma > 0 only."""
        if self.pair.gamma <= 0.0:
            raise DomainError("d1/d2 undefined when gamma = 0; "
                              "the policy is deterministic")
        tail = self.tail_mpr_sq(t)
        if tail <= 0.0:
            raise DomainError(f"no residual risk on [{t}, T]")
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0.0):
            raise DomainError("density level y must be positive")
        root = math.sqrt(tail)
        d1 = (np.log(self.pair.gamma * y / self.pair.mu)
              + (-self.tail_rate(t) + 1.5 * tail)) / root
        d2 = d1 - root
        return d1, d2

    def _scale(self, t, y):
        """Nonnegative multiplier of the cone direction (floored case)."""
        mu, gamma = self.pair.mu, self.pair.gamma
        y = np.asarray(y, dtype=float)
        if gamma <= 0.0 or self.tail_mpr_sq(t) <= 0.0:
            return np.zeros_like(y)
        d1, _ = self.d1_d2(t, y)
        quad = math.exp(-(2.0 * self.tail_rate(t) - self.tail_mpr_sq(t)))
        return gamma * ndtr(-d1) * y * quad

    def wealth_value(self, t, y):
        """Optimal wealth f(t, y) for the floored variant."""
        if not self.bankruptcy_prohibited:
            raise DomainError("wealth_value is the floored-variant formula; "
                              "use linear_policy")
        mu, gamma = self.pair.mu, self.pair.gamma
        rate = self.tail_rate(t)
        y = np.asarray(y, dtype=float)
        if gamma <= 0.0:
            out = np.full_like(y, mu * math.exp(-rate))
            return out if out.ndim else float(out)
        tail = self.tail_mpr_sq(t)
        if tail <= 0.0:
            # Risk-free tail (t = T included): deterministic continuation
            # of the terminal payoff.
            disc = math.exp(-rate)
            out = disc * np.maximum(mu - gamma * disc * y, 0.0)
            return out if out.ndim else float(out)
        d1, d2 = self.d1_d2(t, y)
        quad = math.exp(-(2.0 * rate - tail))
        out = (mu * ndtr(-d2) * math.exp(-rate)
               - gamma * ndtr(-d1) * y * quad)
        return out if out.ndim else float(out)

    def optimal_portfolio(self, t, y):
        """Efficient portfolio (currency per stock), product form.

        pi = gamma N(-d1) y e^{-(2R - Th)} * direction(t); always a
        nonnegative multiple of the cone direction.
        """
        if not self.bankruptcy_prohibited:
            return self.linear_policy(t, y)[1]
        scale = self._scale(t, y)
        direction = self.direction(t)
        if np.ndim(scale) == 0:
            return float(scale) * direction
        return np.asarray(scale)[..., None] * direction

    def feedback_portfolio(self, t, y, wealth=None):
        """Same portfolio written as a feedback on current wealth.

        pi = -direction(t) * [X - mu N(-d2) e^{-R}] with X = f(t, y).
        Agrees with the product form to rounding; kept separate as an
        internal consistency check.
        """
        mu, gamma = self.pair.mu, self.pair.gamma
        rate = self.tail_rate(t)
        if wealth is None:
            wealth = self.wealth_value(t, y)
        if gamma <= 0.0 or self.tail_mpr_sq(t) <= 0.0:
            # Deterministic branches hold zero risky positions.
            bracket = np.zeros_like(np.asarray(wealth, dtype=float))
        else:
            _, d2 = self.d1_d2(t, y)
            bracket = np.asarray(wealth) - mu * ndtr(-d2) * math.exp(-rate)
        direction = self.direction(t)
        if np.ndim(bracket) == 0:
            return -float(bracket) * direction
        return -np.asarray(bracket)[..., None] * direction

    def terminal_payoff(self, phi_terminal):
        """Optimal terminal wealth (mu - gamma y)+ at density level y."""
        y = np.asarray(phi_terminal, dtype=float)
        out = np.maximum(self.pair.mu - self.pair.gamma * y, 0.0)
        return out if out.ndim else float(out)

    def linear_policy(self, t, y):
        """(wealth, portfolio) for the unfloored variant; wealth can go
        negative."""
        if self.bankruptcy_prohibited:
            raise DomainError("linear_policy applies to the unfloored "
                              "variant only")
        mu, gamma = self.pair.mu, self.pair.gamma
        rate = self.tail_rate(t)
        quad = math.exp(-(2.0 * rate - self.tail_mpr_sq(t)))
        y = np.asarray(y, dtype=float)
        scale = gamma * y * quad
        wealth = mu * math.exp(-rate) - scale
        direction = self.direction(t)
        if np.ndim(scale) == 0:
            return float(wealth), float(scale) * direction
        return wealth, np.asarray(scale)[..., None] * direction
