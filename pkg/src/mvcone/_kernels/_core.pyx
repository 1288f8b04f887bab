# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Scalar twin of ``_numpy``: same stateless splitmix-style RNG, same
inverse-CDF normals (both route through SciPy's Cephes ndtri/ndtr, so the
special-function bits are identical across backends), same update
formulas.  Loops are fused per path and run without the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log
from libc.stdint cimport uint64_t

from scipy.special.cython_special cimport ndtr, ndtri

cnp.import_array()

NAME = "cython"

cdef uint64_t GOLD = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _raw(uint64_t seed, uint64_t path, uint64_t step) nogil:
    cdef uint64_t z = seed + GOLD * (path + 1)
    z = _mix(z)
    z = z + GOLD * (step + 1)
    return _mix(z)


cdef inline double _normal(uint64_t seed, long path, long step,
                           bint antithetic) nogil:
    cdef long eff = path
    cdef double sign = 1.0
    if antithetic and (path & 1):
        eff = path - 1
        sign = -1.0
    cdef uint64_t word = _raw(seed, <uint64_t> eff, <uint64_t> step)
    cdef double u = ((<double> (word >> 11)) + 0.5) * INV_2_53
    return sign * ndtri(u)


def raw_uint64(seed, long path_lo, long path_hi, long step):
    cdef uint64_t s = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(
        path_hi - path_lo, dtype=np.uint64)
    cdef long p
    for p in range(path_lo, path_hi):
        out[p - path_lo] = _raw(s, <uint64_t> p, <uint64_t> step)
    return out


def standard_normals(seed, long path_lo, long path_hi, long step,
                     bint antithetic=False):
    cdef uint64_t s = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(
        path_hi - path_lo, dtype=np.float64)
    cdef double[::1] view = out
    cdef long p
    with nogil:
        for p in range(path_lo, path_hi):
            view[p - path_lo] = _normal(s, p, step, antithetic)
    return out


def phi_paths_chunk(seed, long path_lo, long path_hi,
                    double[::1] log_drift, double[::1] vol,
                    bint antithetic, double[:, ::1] out):
    cdef uint64_t s = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef long n_steps = log_drift.shape[0]
    cdef long p, i, row
    cdef double phi
    with nogil:
        for p in range(path_lo, path_hi):
            row = p - path_lo
            phi = 1.0
            out[row, 0] = 1.0
            for i in range(n_steps):
                phi = phi * exp(log_drift[i]
                                - vol[i] * _normal(s, p, i, antithetic))
                out[row, i + 1] = phi


cdef inline void _wealth_scale(double phi, long i, double mu, double gamma,
                               double[::1] disc_tail, double[::1] disc_quad,
                               double[::1] sqrt_tail, double[::1] dplus_shift,
                               bint floored, double *wealth,
                               double *scale) nogil:
    cdef double st, d1, d2, pay
    if gamma <= 0.0:
        wealth[0] = mu * disc_tail[i]
        scale[0] = 0.0
        return
    if not floored:
        scale[0] = gamma * disc_quad[i] * phi
        wealth[0] = mu * disc_tail[i] - scale[0]
        return
    st = sqrt_tail[i]
    if st <= 0.0:
        pay = mu - gamma * disc_tail[i] * phi
        if pay < 0.0:
            pay = 0.0
        wealth[0] = disc_tail[i] * pay
        scale[0] = 0.0
        return
    d1 = (log(gamma * phi / mu) + dplus_shift[i]) / st
    d2 = d1 - st
    scale[0] = gamma * ndtr(-d1) * phi * disc_quad[i]
    wealth[0] = mu * ndtr(-d2) * disc_tail[i] - scale[0]


def wealth_paths_chunk(seed, long path_lo, long path_hi,
                       double[::1] log_drift, double[::1] vol,
                       double mu, double gamma,
                       double[::1] disc_tail, double[::1] disc_quad,
                       double[::1] sqrt_tail, double[::1] dplus_shift,
                       bint floored, bint antithetic,
                       phi_out=None, wealth_out=None, scale_out=None):
    cdef uint64_t s = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef long n_steps = log_drift.shape[0]
    cdef long n = path_hi - path_lo
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sums_arr = np.zeros(4)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] smin_arr = np.full(
        n_steps + 1, INFINITY)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] smax_arr = np.full(
        n_steps + 1, -INFINITY)
    cdef double[::1] sums = sums_arr
    cdef double[::1] smin = smin_arr
    cdef double[::1] smax = smax_arr
    cdef bint store = phi_out is not None
    cdef double[:, ::1] phi_buf = phi_out if store else None
    cdef double[:, ::1] wealth_buf = wealth_out if store else None
    cdef double[:, ::1] scale_buf = scale_out if store else None
    cdef double min_wealth = INFINITY
    cdef long went_negative = 0
    cdef long p, i, row
    cdef double phi, wealth, scale, xt
    cdef bint negative
    with nogil:
        for p in range(path_lo, path_hi):
            row = p - path_lo
            phi = 1.0
            negative = False
            xt = 0.0
            for i in range(n_steps + 1):
                _wealth_scale(phi, i, mu, gamma, disc_tail, disc_quad,
                              sqrt_tail, dplus_shift, floored,
                              &wealth, &scale)
                if store:
                    phi_buf[row, i] = phi
                    wealth_buf[row, i] = wealth
                    scale_buf[row, i] = scale
                if wealth < min_wealth:
                    min_wealth = wealth
                if wealth < 0.0:
                    negative = True
                if scale < smin[i]:
                    smin[i] = scale
                if scale > smax[i]:
                    smax[i] = scale
                if i == n_steps:
                    xt = wealth
                else:
                    phi = phi * exp(log_drift[i]
                                    - vol[i] * _normal(s, p, i, antithetic))
            sums[0] += xt
            sums[1] += xt * xt
            sums[2] += xt * xt * xt
            sums[3] += xt * xt * xt * xt
            if negative:
                went_negative += 1
    return sums_arr, min_wealth, went_negative, smin_arr, smax_arr


def euler_chunk(seed, long path_lo, long path_hi,
                double[::1] log_drift, double[::1] vol,
                double[::1] step_growth, double[::1] step_mpr2,
                double mu, double gamma,
                double[::1] disc_tail, double[::1] disc_quad,
                double[::1] sqrt_tail, double[::1] dplus_shift,
                bint antithetic):
    cdef uint64_t s = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef long n_steps = log_drift.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sq_arr = np.zeros(n_steps + 1)
    cdef double[::1] sq_err = sq_arr
    cdef long p, i
    cdef double phi, euler, exact, hedge_base, scale, st, d1, d2, z, diff
    with nogil:
        for p in range(path_lo, path_hi):
            phi = 1.0
            euler = 0.0
            for i in range(n_steps + 1):
                st = sqrt_tail[i]
                if gamma <= 0.0:
                    exact = mu * disc_tail[i]
                    scale = 0.0
                elif st <= 0.0:
                    exact = mu - gamma * disc_tail[i] * phi
                    if exact < 0.0:
                        exact = 0.0
                    exact = disc_tail[i] * exact
                    scale = 0.0
                else:
                    d1 = (log(gamma * phi / mu) + dplus_shift[i]) / st
                    d2 = d1 - st
                    hedge_base = mu * ndtr(-d2) * disc_tail[i]
                    exact = hedge_base - gamma * ndtr(-d1) * phi * disc_quad[i]
                    scale = 0.0  # set below once euler is known
                if i == 0:
                    euler = exact
                diff = euler - exact
                sq_err[i] += diff * diff
                if i == n_steps:
                    break
                if gamma > 0.0 and st > 0.0:
                    scale = -(euler - hedge_base)
                z = _normal(s, p, i, antithetic)
                euler = step_growth[i] * (
                    euler + scale * (step_mpr2[i] + vol[i] * z))
                phi = phi * exp(log_drift[i] - vol[i] * z)
    return sq_arr
