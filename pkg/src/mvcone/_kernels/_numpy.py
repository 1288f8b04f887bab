"""Pure-NumPy kernel backend.

Implements the same functions as the compiled extension, vectorized over
the paths of one chunk.  Everything is keyed by (seed, path index, step
index) through a stateless splitmix-style hash, so results do not depend
on chunk boundaries, execution order, or thread count.
"""

import math

import numpy as np
from scipy.special import ndtr, ndtri

NAME = "numpy"

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLD = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLD_U = np.uint64(_GOLD)
_INV_2_53 = 2.0 ** -53


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def raw_uint64(seed, path_lo, path_hi, step):
    """Stateless 64-bit word for every (seed, path, step) in the range."""
    paths = np.arange(path_lo, path_hi, dtype=np.uint64)
    z = np.uint64(seed & _MASK) + _GOLD_U * (paths + np.uint64(1))
    z = _mix(z)
    z = z + np.uint64((_GOLD * (step + 1)) & _MASK)
    return _mix(z)


def standard_normals(seed, path_lo, path_hi, step, antithetic=False):
    """Inverse-CDF normals for one step of a path range.

    With antithetic pairing, odd paths return the negated draw of their
    even partner.
    """
    if not antithetic:
        u = ((raw_uint64(seed, path_lo, path_hi, step) >> np.uint64(11))
             .astype(np.float64) + 0.5) * _INV_2_53
        return ndtri(u)
    paths = np.arange(path_lo, path_hi)
    partners = paths - (paths % 2)
    z = np.uint64(seed & _MASK) + _GOLD_U * (partners.astype(np.uint64)
                                             + np.uint64(1))
    z = _mix(z)
    z = z + np.uint64((_GOLD * (step + 1)) & _MASK)
    u = ((_mix(z) >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    draws = ndtri(u)
    draws[paths % 2 == 1] *= -1.0
    return draws


def phi_paths_chunk(seed, path_lo, path_hi, log_drift, vol, antithetic, out):
    """Exact lognormal stepping of the state-price density.

    ``out`` has shape (path_hi - path_lo, n_steps + 1); column 0 is 1.
    """
    n_steps = log_drift.shape[0]
    out[:, 0] = 1.0
    phi = out[:, 0].copy()
    for i in range(n_steps):
        z = standard_normals(seed, path_lo, path_hi, i, antithetic)
        phi = phi * np.exp(log_drift[i] - vol[i] * z)
        out[:, i + 1] = phi


def _wealth_scale(phi, i, mu, gamma, disc_tail, disc_quad, sqrt_tail,
                  dplus_shift, floored):
    """Wealth and the nonnegative policy scale at time index i.

    The scale multiplies the per-segment cone direction to give the
    portfolio; zero on risk-free tails (including the horizon itself).
    """
    if gamma <= 0.0:
        wealth = np.full_like(phi, mu * disc_tail[i])
        return wealth, np.zeros_like(phi)
    if not floored:
        scale = gamma * disc_quad[i] * phi
        return mu * disc_tail[i] - scale, scale
    st = sqrt_tail[i]
    if st <= 0.0:
        wealth = disc_tail[i] * np.maximum(
            mu - gamma * disc_tail[i] * phi, 0.0)
        return wealth, np.zeros_like(phi)
    d1 = (np.log(gamma * phi / mu) + dplus_shift[i]) / st
    d2 = d1 - st
    scale = gamma * ndtr(-d1) * phi * disc_quad[i]
    wealth = mu * ndtr(-d2) * disc_tail[i] - scale
    return wealth, scale


def wealth_paths_chunk(seed, path_lo, path_hi, log_drift, vol,
                       mu, gamma, disc_tail, disc_quad, sqrt_tail,
                       dplus_shift, floored, antithetic,
                       phi_out=None, wealth_out=None, scale_out=None):
    """Simulate one chunk of optimal-wealth paths.

    Returns (power_sums[4] of terminal wealth, min wealth over the chunk,
    number of paths that ever go negative, per-time scale minima, per-time
    scale maxima).  Optional buffers of shape (chunk, n_steps + 1) receive
    the full trajectories.
    """
    n_steps = log_drift.shape[0]
    n = path_hi - path_lo
    phi = np.ones(n)
    sums = np.zeros(4)
    min_wealth = math.inf
    went_negative = np.zeros(n, dtype=bool)
    scale_min = np.empty(n_steps + 1)
    scale_max = np.empty(n_steps + 1)
    for i in range(n_steps + 1):
        wealth, scale = _wealth_scale(
            phi, i, mu, gamma, disc_tail, disc_quad, sqrt_tail,
            dplus_shift, floored)
        if phi_out is not None:
            phi_out[:, i] = phi
            wealth_out[:, i] = wealth
            scale_out[:, i] = scale
        min_wealth = min(min_wealth, float(wealth.min()))
        went_negative |= wealth < 0.0
        scale_min[i] = scale.min()
        scale_max[i] = scale.max()
        if i == n_steps:
            sums[0] = wealth.sum()
            sums[1] = (wealth ** 2).sum()
            sums[2] = (wealth ** 3).sum()
            sums[3] = (wealth ** 4).sum()
        else:
            z = standard_normals(seed, path_lo, path_hi, i, antithetic)
            phi = phi * np.exp(log_drift[i] - vol[i] * z)
    return sums, min_wealth, int(went_negative.sum()), scale_min, scale_max


def euler_chunk(seed, path_lo, path_hi, log_drift, vol, step_growth,
                step_mpr2, mu, gamma, disc_tail, disc_quad, sqrt_tail,
                dplus_shift, antithetic):
    """Euler wealth under the feedback policy vs the exact formula.

    The bond part of the drift uses its exact integrating factor (the
    zero-risk case is then exact); the policy term is explicit Euler.
    Returns the per-time sums of squared discrepancies.
    """
    n_steps = log_drift.shape[0]
    phi = np.ones(path_hi - path_lo)
    sq_err = np.zeros(n_steps + 1)
    euler = None
    for i in range(n_steps + 1):
        st = sqrt_tail[i]
        if gamma <= 0.0:
            exact = np.full_like(phi, mu * disc_tail[i])
            hedge_base = exact
        elif st <= 0.0:
            exact = disc_tail[i] * np.maximum(
                mu - gamma * disc_tail[i] * phi, 0.0)
            hedge_base = None
        else:
            d1 = (np.log(gamma * phi / mu) + dplus_shift[i]) / st
            d2 = d1 - st
            hedge_base = mu * ndtr(-d2) * disc_tail[i]
            exact = hedge_base - gamma * ndtr(-d1) * phi * disc_quad[i]
        if euler is None:
            euler = exact.copy()
        sq_err[i] = ((euler - exact) ** 2).sum()
        if i == n_steps:
            break
        if hedge_base is None or gamma <= 0.0:
            scale = np.zeros_like(phi)
        else:
            scale = -(euler - hedge_base)
        z = standard_normals(seed, path_lo, path_hi, i, antithetic)
        euler = step_growth[i] * (
            euler + scale * (step_mpr2[i] + vol[i] * z))
        phi = phi * np.exp(log_drift[i] - vol[i] * z)
    return sq_err
