"""Cone projection and the effective (unconstrained) market.

The constrained problem is reduced to an unconstrained one by projecting
the excess return onto the admissible cone {z : C'z >= 0}: per segment we
solve

    minimize  0.5 z' (sigma sigma') z - B'z   subject to  C'z >= 0,

equivalently  minimize ||sigma'z - sigma^{-1}B|| over the cone.  The
minimizer defines the projected drift (sigma sigma') z_bar, the adjusted
market price of risk sigma' z_bar, and the dual drift adjustment
lambda = projected drift - B.  Positive homogeneity of the cone makes the
solution scale linearly in B, which is what lets a single per-segment
projection serve every wealth level.

The projection is a primal active-set QP.  The cone vertex at the origin
is maximally degenerate (every constraint is active there), so constraint
selection uses lowest-index (Bland-style) tie-breaking, which prevents
cycling; a generous iteration guard converts pathological inputs into
QPNotConverged instead of a hang.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BadSchedule, OutOfRange, QPNotConverged

FEASIBILITY_TOL = 1e-10
KKT_TOL = 1e-8


class ConeConstraint:
    """Admissible holdings per segment: {z : C(t)'z >= 0 componentwise}.

    Presets: ``unconstrained`` is the empty constraint list (k = 0) and
    ``no_shorting`` is C = I.  A general cone takes a single m x k matrix,
    or one matrix per market segment.
    """

    def __init__(self, kind, matrices=None):
        if kind not in ("unconstrained", "no_shorting", "general"):
            raise BadSchedule(f"unknown cone kind {kind!r}")
        if kind == "general":
            if matrices is None:
                raise BadSchedule("general cone requires a constraint matrix")
            if isinstance(matrices, np.ndarray) or not isinstance(
                    matrices, (list, tuple)):
                matrices = [matrices]
            mats = []
            for mat in matrices:
                arr = np.atleast_2d(np.asarray(mat, dtype=float))
                if not np.isfinite(arr).all():
                    raise BadSchedule("cone matrix entries must be finite")
                arr.setflags(write=False)
                mats.append(arr)
            self._matrices = tuple(mats)
        else:
            self._matrices = None
        self.kind = kind

    @classmethod
    def unconstrained(cls):
        return cls("unconstrained")

    @classmethod
    def no_shorting(cls):
        return cls("no_shorting")

    @classmethod
    def general(cls, matrices):
        return cls("general", matrices)

    def matrix(self, n_assets, segment_index=0):
        """Constraint matrix (m x k) for one segment; k = 0 when free."""
        if self.kind == "unconstrained":
            return np.zeros((n_assets, 0))
        if self.kind == "no_shorting":
            return np.eye(n_assets)
        mats = self._matrices
        mat = mats[segment_index] if len(mats) > 1 else mats[0]
        if mat.shape[0] != n_assets:
            raise BadSchedule(
                f"cone matrix has {mat.shape[0]} rows, expected {n_assets}")
        return mat

    def num_segments(self):
        """Number of distinct per-segment matrices (1 means time-constant)."""
        return 1 if self._matrices is None else len(self._matrices)

    @classmethod
    def from_config(cls, config):
        extra = set(config) - {"kind", "C"}
        if extra:
            raise BadSchedule(f"unknown cone keys: {sorted(extra)}")
        kind = config.get("kind")
        if kind == "general":
            return cls.general(np.asarray(config["C"], dtype=float))
        if "C" in config:
            raise BadSchedule(f"cone kind {kind!r} does not take a matrix")
        return cls(kind)

    def to_config(self):
        if self.kind == "general":
            return {"kind": "general",
                    "C": [[float(v) for v in row] for row in self._matrices[0]]}
        return {"kind": self.kind}


# ---------------------------------------------------------------------------
# Active-set quadratic program
# ---------------------------------------------------------------------------

def _equality_qp(gram, excess, cone_mat, working):
    """min 0.5 z'Gz - B'z subject to C[:, working]'z = 0.

    Solved on the null space of the active constraints via a complete QR
    factorization, which stays well-behaved when the caller hands us
    (numerically) dependent columns.  Returns the minimizer and the
    least-squares multipliers of the active constraints.
    """
    m = gram.shape[0]
    if not working:
        return np.linalg.solve(gram, excess), np.zeros(0)
    active = cone_mat[:, working]
    q_full, _ = np.linalg.qr(active, mode="complete")
    null_basis = q_full[:, len(working):]
    if null_basis.shape[1] == 0:
        z = np.zeros(m)
    else:
        reduced = null_basis.T @ gram @ null_basis
        z = null_basis @ np.linalg.solve(reduced, null_basis.T @ excess)
    grad = gram @ z - excess
    multipliers = np.linalg.lstsq(active, grad, rcond=None)[0]
    return z, multipliers


def solve_cone_qp(gram, excess, cone_mat,
                  feas_tol=FEASIBILITY_TOL, kkt_tol=KKT_TOL):
    """Active-set solve of min 0.5 z'Gz - B'z over {z : C'z >= 0}.

    Returns ``(z, nu, iterations)`` where ``nu >= 0`` certifies the KKT
    system G z = B + C nu with nu'(C'z) = 0.  Warm-started from the
    unconstrained minimizer; falls back to the (always feasible) origin.
    """
    gram = np.asarray(gram, dtype=float)
    excess = np.asarray(excess, dtype=float)
    cone_mat = np.asarray(cone_mat, dtype=float)
    m = gram.shape[0]
    k = cone_mat.shape[1] if cone_mat.size else 0

    free = np.linalg.solve(gram, excess)
    if k == 0:
        return free, np.zeros(0), 0
    if (cone_mat.T @ free).min() >= -feas_tol:
        return free, np.zeros(k), 0

    z = np.zeros(m)
    working = []
    max_iter = 10 * 2 ** min(k, 20)
    for iteration in range(max_iter):
        candidate, multipliers = _equality_qp(gram, excess, cone_mat, working)
        step = candidate - z
        scale = 1.0 + np.abs(z).max() + np.abs(candidate).max()
        if np.abs(step).max() <= 1e-12 * scale:
            negative = [i for i, v in enumerate(multipliers) if v < -kkt_tol]
            if not negative:
                nu = np.zeros(k)
                for pos, idx in enumerate(working):
                    nu[idx] = multipliers[pos]
                return z, nu, iteration
            # Bland's rule: drop the lowest constraint index.
            working.remove(min(working[i] for i in negative))
            continue
        alpha = 1.0
        blocking = -1
        for j in range(k):
            if j in working:
                continue
            slope = cone_mat[:, j] @ step
            if slope < -1e-13 * scale:
                limit = max(-(cone_mat[:, j] @ z) / slope, 0.0)
                if limit < alpha - 1e-15:
                    alpha = limit
                    blocking = j
        z = z + alpha * step
        if blocking >= 0:
            working.append(blocking)
            working.sort()
    raise QPNotConverged(
        f"active-set cycle guard hit after {max_iter} iterations (k={k})")


def project_cone(gram, excess, cone_mat):
    """Cone-projected portfolio direction z_bar (see module docstring)."""
    z, _, _ = solve_cone_qp(gram, excess, cone_mat)
    return z


def no_shorting_drift_adjustment(gram, excess):
    """Dual form of the adjustment for the no-shorting preset.

    Solves min_{y >= 0} ||sigma^{-1}(y + B)||, an independent route to
    lambda used to cross-check the primal projection.
    """
    gram_inv = np.linalg.inv(gram)
    y, _, _ = solve_cone_qp(gram_inv, -gram_inv @ excess,
                            np.eye(gram.shape[0]))
    return y


@dataclass
class ScalingReport:
    """Result of re-solving the projection at a scaled drift."""

    alpha: float
    solution_residual: float
    value_residual: float
    passed: bool
    scaled_solution: np.ndarray = field(repr=False, default=None)


def lemma_key_check(gram, excess, cone_mat, alpha, tol=1e-8):
    """Verify positive homogeneity of the projection at scale alpha > 0.

    The cone solve at drift alpha*B must return alpha*z_bar with optimal
    value -0.5 alpha^2 z_bar'G z_bar.  Returns residuals; never raises.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    gram = np.asarray(gram, dtype=float)
    excess = np.asarray(excess, dtype=float)
    cone_mat = np.asarray(cone_mat, dtype=float)
    base = project_cone(gram, excess, cone_mat)
    scaled = project_cone(gram, alpha * excess, cone_mat)
    sol_res = float(np.abs(scaled - alpha * base).max())
    value = 0.5 * scaled @ gram @ scaled - alpha * excess @ scaled
    expected = -0.5 * alpha ** 2 * base @ gram @ base
    val_res = float(abs(value - expected))
    norm = 1.0 + abs(expected) + float(np.abs(alpha * base).max())
    return ScalingReport(
        alpha=float(alpha),
        solution_residual=sol_res,
        value_residual=val_res,
        passed=(sol_res <= tol * norm and val_res <= tol * norm),
        scaled_solution=scaled,
    )


# ---------------------------------------------------------------------------
# Effective market
# ---------------------------------------------------------------------------

class EffectiveMarket:
    """Projected per-segment quantities plus exact cumulative integrals.

    Fields per segment: the projection ``direction`` (z_bar), the
    ``projected_excess`` (sigma sigma' z_bar), the ``market_price_of_risk``
    (sigma' z_bar) and the ``drift_adjustment`` (projected excess minus the
    raw excess return).  Cumulative integrals of r and |market price of
    risk|^2 are tabulated at segment boundaries; within a segment both
    integrands are constant, so evaluation anywhere is exact.
    """

    def __init__(self, market, cone):
        self.market = market
        self.cone = cone
        n_seg = len(market.segments)
        m = market.n_assets
        if cone.kind == "general" and cone.num_segments() not in (1, n_seg):
            raise BadSchedule(
                f"cone supplies {cone.num_segments()} matrices for "
                f"{n_seg} market segments")

        self.direction = np.zeros((n_seg, m))
        self.projected_excess = np.zeros((n_seg, m))
        self.drift_adjustment = np.zeros((n_seg, m))
        self.market_price_of_risk = np.zeros((n_seg, m))
        self.mpr_squared = np.zeros(n_seg)
        self.multipliers = []

        for j, seg in enumerate(market.segments):
            gram = market.gram(j)
            excess = seg.excess_return
            cone_mat = cone.matrix(m, j)
            z, nu, _ = solve_cone_qp(gram, excess, cone_mat)
            proj = gram @ z
            mpr = seg.volatility.T @ z
            # Same quantity two ways: sigma' z_bar vs sigma^{-1} projected.
            alt = market.invert_sigma(j) @ proj
            if np.abs(mpr - alt).max() > 1e-10 * (1.0 + np.abs(mpr).max()):
                raise QPNotConverged(
                    f"market price of risk disagrees between routes on "
                    f"segment {j}")
            if cone_mat.size:
                slack = cone_mat.T @ z
                if slack.min() < -FEASIBILITY_TOL:
                    raise QPNotConverged(
                        f"projection infeasible on segment {j}")
                if abs(nu @ slack) > KKT_TOL:
                    raise QPNotConverged(
                        f"complementary slackness violated on segment {j}")
            self.direction[j] = z
            self.projected_excess[j] = proj
            self.drift_adjustment[j] = proj - excess
            self.market_price_of_risk[j] = mpr
            self.mpr_squared[j] = mpr @ mpr
            self.multipliers.append(nu)

        lengths = np.diff(market.boundaries)
        self._seg_rates = np.array([s.rate for s in market.segments])
        self.cum_rate = np.concatenate(
            [[0.0], np.cumsum(self._seg_rates * lengths)])
        self.cum_mpr_sq = np.concatenate(
            [[0.0], np.cumsum(self.mpr_squared * lengths)])
        self.degenerate = bool(self.cum_mpr_sq[-1] <= 0.0)

    # -- integrals -------------------------------------------------------

    def _cumulative(self, table, per_segment, t):
        j = self.market.segment_index(t)
        return table[j] + per_segment[j] * (t - self.market.boundaries[j])

    def _check_interval(self, t_a, t_b):
        if not (0.0 <= t_a <= t_b <= self.market.horizon):
            raise OutOfRange(
                f"[{t_a}, {t_b}] must lie inside [0, {self.market.horizon}]")

    def rate_integral(self, t_a, t_b=None):
        """Integral of r over [t_a, t_b] (or [0, t_a] with one argument)."""
        if t_b is None:
            t_a, t_b = 0.0, t_a
        self._check_interval(t_a, t_b)
        return (self._cumulative(self.cum_rate, self._seg_rates, t_b)
                - self._cumulative(self.cum_rate, self._seg_rates, t_a))

    def mpr_sq_integral(self, t_a, t_b=None):
        """Integral of |market price of risk|^2 over [t_a, t_b]."""
        if t_b is None:
            t_a, t_b = 0.0, t_a
        self._check_interval(t_a, t_b)
        return (self._cumulative(self.cum_mpr_sq, self.mpr_squared, t_b)
                - self._cumulative(self.cum_mpr_sq, self.mpr_squared, t_a))

    def direction_at(self, t):
        return self.direction[self.market.segment_index(t)]

    @property
    def total_rate_integral(self):
        return float(self.cum_rate[-1])

    @property
    def total_mpr_sq_integral(self):
        return float(self.cum_mpr_sq[-1])


def effective_market(market, cone):
    """Project every segment and tabulate the effective market."""
    return EffectiveMarket(market, cone)
