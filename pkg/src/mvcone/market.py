"""Market primitives: piecewise-constant coefficients on [0, T].

A market is a bond with rate r(t) plus m stocks with appreciation vector
b(t) and volatility matrix sigma(t), all constant on each time segment.
Piecewise-constant coefficients keep every time integral exact (a sum of
rate * dt terms), which removes quadrature error from everything built on
top of this module.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadSchedule,
    NonInvertibleVolatility,
    NonPositiveInitialWealth,
    OutOfRange,
)

# Smallest admissible eigenvalue of sigma sigma' on any segment.
EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Segment:
    """One constant-coefficient piece of the market."""

    t_start: float
    t_end: float
    rate: float
    appreciation: np.ndarray  # (m,)
    volatility: np.ndarray    # (m, m)

    @property
    def length(self):
        return self.t_end - self.t_start

    @property
    def excess_return(self):
        """b - r*1, recomputed so it can never drift out of sync."""
        return self.appreciation - self.rate


class MarketModel:
    """Validated market with cached per-segment linear algebra.

    Immutable after construction; safe for unrestricted concurrent reads.
    """

    def __init__(self, horizon, initial_wealth, segments,
                 eig_floor=EIGENVALUE_FLOOR):
        if not np.isfinite(horizon) or horizon <= 0.0:
            raise BadSchedule(f"horizon must be positive, got {horizon}")
        if not np.isfinite(initial_wealth) or initial_wealth <= 0.0:
            raise NonPositiveInitialWealth(
                f"initial wealth must be > 0, got {initial_wealth}")
        if not segments:
            raise BadSchedule("at least one segment is required")

        self.horizon = float(horizon)
        self.initial_wealth = float(initial_wealth)
        self.segments = tuple(segments)
        self.n_assets = self.segments[0].appreciation.shape[0]

        prev = 0.0
        for seg in self.segments:
            if seg.t_start != prev or seg.t_end <= seg.t_start:
                raise BadSchedule(
                    f"segment boundaries must be contiguous and strictly "
                    f"increasing near t={seg.t_start}")
            prev = seg.t_end
            if seg.appreciation.shape != (self.n_assets,):
                raise BadSchedule("appreciation vector has wrong length")
            if seg.volatility.shape != (self.n_assets, self.n_assets):
                raise BadSchedule("volatility matrix has wrong shape")
            if not (np.isfinite(seg.rate)
                    and np.isfinite(seg.appreciation).all()
                    and np.isfinite(seg.volatility).all()):
                raise BadSchedule("all coefficients must be finite")
        if abs(prev - self.horizon) > 1e-12 * max(1.0, self.horizon):
            raise BadSchedule(
                f"segments end at {prev}, horizon is {self.horizon}")

        self.boundaries = np.array(
            [0.0] + [s.t_end for s in self.segments])

        # Non-degeneracy: smallest eigenvalue of sigma sigma' per segment.
        self._grams = []
        self._vol_invs = []
        eig_min = np.inf
        for seg in self.segments:
            gram = seg.volatility @ seg.volatility.T
            lo = float(np.linalg.eigvalsh(gram)[0])
            eig_min = min(eig_min, lo)
            if lo < eig_floor:
                raise NonInvertibleVolatility(
                    f"sigma sigma' eigenvalue {lo:.3e} below floor "
                    f"{eig_floor:.1e} on [{seg.t_start}, {seg.t_end}]")
            np.linalg.cholesky(gram)  # pivot failure would raise LinAlgError
            inv = np.linalg.inv(seg.volatility)
            resid = np.abs(seg.volatility @ inv - np.eye(self.n_assets)).max()
            if resid > 1e-10:
                raise NonInvertibleVolatility(
                    f"sigma inverse residual {resid:.3e} exceeds 1e-10")
            self._grams.append(gram)
            self._vol_invs.append(inv)
        # Reported witness for the ellipticity bound, never user-supplied.
        self.ellipticity = eig_min

    # -- per-segment linear algebra -------------------------------------

    def gram(self, index):
        """sigma sigma' on the given segment (symmetric positive definite)."""
        return self._grams[index]

    def invert_sigma(self, index):
        """Inverse volatility matrix on the given segment."""
        return self._vol_invs[index]

    def excess_return(self, index):
        return self.segments[index].excess_return

    def segment_index(self, t):
        """Segment containing t, right-continuous; t = T maps to the last."""
        if t < 0.0 or t > self.horizon:
            raise OutOfRange(f"t={t} outside [0, {self.horizon}]")
        if t >= self.segments[-1].t_start:
            return len(self.segments) - 1
        return int(np.searchsorted(self.boundaries, t, side="right")) - 1

    # -- integrals -------------------------------------------------------

    def integrate_rate(self, t_a, t_b):
        """Integral of r(s) over [t_a, t_b], exact over the piecewise pieces."""
        if not (0.0 <= t_a <= t_b <= self.horizon):
            raise OutOfRange(
                f"[{t_a}, {t_b}] must lie inside [0, {self.horizon}]")
        total = 0.0
        for seg in self.segments:
            lo = max(t_a, seg.t_start)
            hi = min(t_b, seg.t_end)
            if hi > lo:
                total += seg.rate * (hi - lo)
        return total


def build_market(config, eig_floor=EIGENVALUE_FLOOR):
    """Construct a MarketModel from a scenario-style mapping.

    Expected keys: m, T, x0, segments (list of {t_end, r, b, sigma}).
    """
    required = {"m", "T", "x0", "segments"}
    missing = required - set(config)
    if missing:
        raise BadSchedule(f"market config missing keys: {sorted(missing)}")

    m = int(config["m"])
    if m <= 0:
        raise BadSchedule(f"asset count must be positive, got {m}")

    segments = []
    t_prev = 0.0
    for raw in config["segments"]:
        extra = set(raw) - {"t_end", "r", "b", "sigma"}
        if extra:
            raise BadSchedule(f"unknown segment keys: {sorted(extra)}")
        b = np.asarray(raw["b"], dtype=float)
        sigma = np.asarray(raw["sigma"], dtype=float)
        if b.shape != (m,):
            raise BadSchedule(f"b must have length {m}, got shape {b.shape}")
        if sigma.shape != (m, m):
            raise BadSchedule(f"sigma must be {m}x{m}, got {sigma.shape}")
        b.setflags(write=False)
        sigma.setflags(write=False)
        segments.append(Segment(
            t_start=t_prev,
            t_end=float(raw["t_end"]),
            rate=float(raw["r"]),
            appreciation=b,
            volatility=sigma,
        ))
        t_prev = segments[-1].t_end

    return MarketModel(
        horizon=float(config["T"]),
        initial_wealth=float(config["x0"]),
        segments=segments,
        eig_floor=eig_floor,
    )
