"""Scalars (mu, gamma) pinning the optimal terminal payoff.

With the floor active the optimal terminal wealth is (mu - gamma*phi(T))+
where phi(T) is lognormal: ln phi(T) ~ Normal(-I_r - I_th/2, I_th) with
I_r = int_0^T r and I_th = int_0^T |market price of risk|^2.  The pair
solves the two truncated-lognormal moment equations

    mu N(a+) - gamma e^{-I_r} N(a-)                         = d
    mu N(a-) - gamma e^{-(I_r - I_th)} N(a- - sqrt(I_th))   = x0 e^{I_r}

with a+- = [ln(mu/gamma) + I_r +- I_th/2] / sqrt(I_th).  The second
equation is the budget constraint E[phi(T) X(T)] = x0 scaled by e^{I_r}.

Without the floor the payoff is linear in phi(T) and (mu, gamma) have a
closed form in the first two lognormal moments; that closed form doubles
as the Newton starting point for the floored system.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import (
    DegenerateMarket,
    DomainError,
    NoConvergence,
    TargetBelowRiskFree,
)

SYSTEM_SOLVE = "system_solve"
CLOSED_FORM = "closed_form"
ZERO_RISK = "zero_risk"

_RESID_TOL = 1e-12
_MAX_NEWTON = 100
_MAX_BISECT = 200


def normal_cdf(y):
    """Standard normal CDF; vectorized, absolute error below 1e-14."""
    return ndtr(y)


@dataclass(frozen=True)
class MomentInputs:
    """Inputs of the moment system: target mean and market aggregates."""

    target_mean: float
    initial_wealth: float
    rate_integral: float
    mpr_sq_integral: float

    @property
    def riskfree_terminal(self):
        """Wealth from parking everything in the bond: x0 e^{I_r}."""
        return self.initial_wealth * math.exp(self.rate_integral)

    @classmethod
    def from_market(cls, effective, target_mean):
        return cls(
            target_mean=float(target_mean),
            initial_wealth=effective.market.initial_wealth,
            rate_integral=effective.total_rate_integral,
            mpr_sq_integral=effective.total_mpr_sq_integral,
        )


@dataclass(frozen=True)
class LagrangePair:
    mu: float
    gamma: float
    provenance: str
    residuals: tuple = (0.0, 0.0)


def _check_target(inputs):
    bond = inputs.riskfree_terminal
    gap = inputs.target_mean - bond
    if gap < -1e-12 * max(1.0, bond):
        raise TargetBelowRiskFree(
            f"target mean {inputs.target_mean} below bond growth {bond}")
    return abs(gap) <= 1e-12 * max(1.0, bond)


def system_lhs(mu, gamma, inputs):
    """Left-hand sides of the two moment equations at (mu, gamma).

    Targets are (d, x0 e^{I_r}).  Requires mu > 0, gamma > 0 and a
    risky market (the arguments blow up otherwise).
    """
    if mu <= 0.0 or gamma <= 0.0:
        raise DomainError(f"need mu > 0 and gamma > 0, got ({mu}, {gamma})")
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    if i_th <= 0.0:
        raise DomainError("moment equations need a positive risk integral")
    s = math.sqrt(i_th)
    ratio = math.log(mu / gamma)
    a_plus = (ratio + i_r + 0.5 * i_th) / s
    a_minus = a_plus - s
    mean_lhs = mu * ndtr(a_plus) - gamma * math.exp(-i_r) * ndtr(a_minus)
    budget_lhs = (mu * ndtr(a_minus)
                  - gamma * math.exp(-(i_r - i_th)) * ndtr(a_minus - s))
    return float(mean_lhs), float(budget_lhs)


def _system_jacobian(mu, gamma, inputs):
    # The normal-density terms cancel pairwise (Black-Scholes style), so
    # the Jacobian is just the matrix of N(.) weights.
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    s = math.sqrt(i_th)
    a_plus = (math.log(mu / gamma) + i_r + 0.5 * i_th) / s
    a_minus = a_plus - s
    return np.array([
        [ndtr(a_plus), -math.exp(-i_r) * ndtr(a_minus)],
        [ndtr(a_minus), -math.exp(-(i_r - i_th)) * ndtr(a_minus - s)],
    ])


def closed_form_mu_gamma(inputs):
    """Linear-payoff pair from the first two lognormal moments."""
    degenerate_target = _check_target(inputs)
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    if i_th <= 0.0:
        if degenerate_target:
            return LagrangePair(inputs.riskfree_terminal, 0.0, ZERO_RISK)
        raise DegenerateMarket(
            "no risk premium: only the bond target is attainable")
    d = inputs.target_mean
    x0 = inputs.initial_wealth
    denom = 1.0 - math.exp(-i_th)
    mu = (d - x0 * math.exp(i_r - i_th)) / denom
    gamma = (d - x0 * math.exp(i_r)) * math.exp(i_r - i_th) / denom
    return LagrangePair(float(mu), float(max(gamma, 0.0)), CLOSED_FORM)


def _bisection_fallback(inputs):
    """Outer bisection on the ratio mu/gamma; the scale is explicit.

    At fixed ratio both equations are linear in gamma, so each pins its
    own gamma; the root in the ratio is where they coincide.
    """
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    s = math.sqrt(i_th)
    d = inputs.target_mean
    bond = inputs.riskfree_terminal

    def gammas(ratio):
        a_plus = (math.log(ratio) + i_r + 0.5 * i_th) / s
        a_minus = a_plus - s
        h1 = ratio * ndtr(a_plus) - math.exp(-i_r) * ndtr(a_minus)
        h2 = (ratio * ndtr(a_minus)
              - math.exp(-(i_r - i_th)) * ndtr(a_minus - s))
        return d / h1, bond / h2

    def gap(ratio):
        g1, g2 = gammas(ratio)
        return g1 - g2

    lo, hi = 1e-8, 1.0
    glo, ghi = gap(lo), gap(hi)
    expand = 0
    while glo * ghi > 0.0 and expand < 200:
        lo, hi = hi, hi * 2.0
        glo, ghi = ghi, gap(hi)
        expand += 1
    if glo * ghi > 0.0:
        raise NoConvergence("bisection could not bracket the ratio")
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        gm = gap(mid)
        if glo * gm <= 0.0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    ratio = 0.5 * (lo + hi)
    gamma = 0.5 * sum(gammas(ratio))
    return ratio * gamma, gamma


def solve_mu_gamma(inputs, resid_tol=_RESID_TOL):
    """Solve the floored moment system for (mu, gamma).

    Damped Newton on (ln mu, ln gamma) started from the linear-payoff
    closed form, with a ratio-bisection fallback.  Residuals are
    relative to the targets (d, x0 e^{I_r}).
    """
    degenerate_target = _check_target(inputs)
    if degenerate_target:
        return LagrangePair(inputs.target_mean, 0.0, ZERO_RISK)
    if inputs.mpr_sq_integral <= 0.0:
        raise DegenerateMarket(
            "no risk premium: only the bond target is attainable")

    targets = np.array([inputs.target_mean, inputs.riskfree_terminal])
    guess = closed_form_mu_gamma(inputs)
    mu, gamma = guess.mu, max(guess.gamma, 1e-12 * guess.mu)

    def residual(m, g):
        return np.array(system_lhs(m, g, inputs)) - targets

    res = residual(mu, gamma)
    for _ in range(_MAX_NEWTON):
        rel = np.abs(res / targets).max()
        if rel < resid_tol:
            return LagrangePair(mu, gamma, SYSTEM_SOLVE,
                                residuals=(float(res[0]), float(res[1])))
        jac = _system_jacobian(mu, gamma, inputs) * np.array([mu, gamma])
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            break
        damp = 1.0
        while damp > 1e-10:
            trial_mu = mu * math.exp(-damp * step[0])
            trial_gamma = gamma * math.exp(-damp * step[1])
            if np.linalg.norm(residual(trial_mu, trial_gamma)) < np.linalg.norm(res):
                break
            damp *= 0.5
        mu = mu * math.exp(-damp * step[0])
        gamma = gamma * math.exp(-damp * step[1])
        res = residual(mu, gamma)

    mu, gamma = _bisection_fallback(inputs)
    res = residual(mu, gamma)
    rel = np.abs(res / targets).max()
    if rel < max(resid_tol, 1e-10):
        return LagrangePair(mu, gamma, SYSTEM_SOLVE,
                            residuals=(float(res[0]), float(res[1])))
    raise NoConvergence(
        f"moment system stalled at relative residual {rel:.3e}",
        last_iterate=(mu, gamma),
        residuals=(float(res[0]), float(res[1])))


# ---------------------------------------------------------------------------
# Terminal variance
# ---------------------------------------------------------------------------

def floored_payoff_moments(mu, gamma, inputs):
    """E[(mu - gamma phi)+] and E[((mu - gamma phi)+)^2] in closed form.

    Truncated lognormal partial moments; every term is a scaled normal
    CDF evaluation.
    """
    if gamma <= 0.0:
        return mu, mu * mu
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    s = math.sqrt(i_th)
    a_plus = (math.log(mu / gamma) + i_r + 0.5 * i_th) / s
    a_minus = a_plus - s
    a_low = a_minus - s
    first = mu * ndtr(a_plus) - gamma * math.exp(-i_r) * ndtr(a_minus)
    second = (mu * mu * ndtr(a_plus)
              - 2.0 * mu * gamma * math.exp(-i_r) * ndtr(a_minus)
              + gamma * gamma * math.exp(-2.0 * i_r + i_th) * ndtr(a_low))
    return float(first), float(second)


def gauss_hermite_payoff_moments(mu, gamma, inputs, nodes=200):
    """Quadrature route to the same payoff moments (cross-check oracle)."""
    x, w = np.polynomial.hermite.hermgauss(nodes)
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    log_phi = (-i_r - 0.5 * i_th) + math.sqrt(2.0 * i_th) * x
    payoff = np.maximum(mu - gamma * np.exp(log_phi), 0.0)
    norm = 1.0 / math.sqrt(math.pi)
    return (float(norm * w @ payoff), float(norm * w @ payoff ** 2))


def terminal_variance(pair, inputs, bankruptcy_prohibited):
    """Variance of the optimal terminal wealth for the given pair."""
    if pair.gamma <= 0.0:
        return 0.0
    i_r = inputs.rate_integral
    i_th = inputs.mpr_sq_integral
    if bankruptcy_prohibited:
        _, second = floored_payoff_moments(pair.mu, pair.gamma, inputs)
        return float(second - inputs.target_mean ** 2)
    # Linear payoff: variance is gamma^2 Var(phi(T)).
    return float(pair.gamma ** 2 * math.exp(-2.0 * i_r)
                 * (math.exp(i_th) - 1.0))
