"""Seeded, reproducible simulation of density, wealth, and policy paths.

Determinism contract: (seed, n_paths, n_steps) fully determine every
sample.  The noise for path p at step i is a pure function of
(seed, p, i), so chunk boundaries and thread scheduling cannot change any
path.  Moment accumulators are reduced over chunks with a pairwise tree
ordered by chunk index, which makes the estimates bit-stable across
worker counts (a different chunk_size may still move the last bits of the
*estimates*; the paths themselves never move).

The density is stepped exactly (lognormal increments with exact per-step
integrals), so its law at grid times carries no discretization bias.  The
deliberately-discretized Euler integration lives in ``sde_consistency``
as an independent cross-check of the policy formulas.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError

DEFAULT_CHUNK = 4096
DEFAULT_STORED_PATHS = 100


@dataclass(frozen=True)
class SimulationPlan:
    n_paths: int
    n_steps: int
    seed: int
    chunk_size: int = DEFAULT_CHUNK
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths <= 0 or self.n_steps < 1 or self.chunk_size <= 0:
            raise DomainError("n_paths, n_steps, chunk_size must be positive")
        if self.antithetic and self.n_paths % 2:
            raise DomainError("antithetic pairing needs an even path count")

    def chunks(self):
        edges = list(range(0, self.n_paths, self.chunk_size))
        return [(lo, min(lo + self.chunk_size, self.n_paths))
                for lo in edges]


@dataclass
class WealthPathSet:
    """Simulated paths (thinned) plus exact-population accumulators."""

    times: np.ndarray
    stored_indices: np.ndarray
    phi: np.ndarray        # (n_stored, n_steps+1)
    wealth: np.ndarray     # (n_stored, n_steps+1)
    portfolio: np.ndarray  # (n_stored, n_steps+1, m)
    terminal_mean: float
    terminal_mean_se: float
    terminal_var: float
    terminal_var_se: float
    min_wealth: float
    n_negative_paths: int
    cone_slack_min: np.ndarray  # (k,) min over paths/times of C' pi
    n_paths: int
    n_steps: int
    seed: int
    scale_min: np.ndarray = field(repr=False, default=None)
    scale_max: np.ndarray = field(repr=False, default=None)


@dataclass
class SdeReport:
    """Euler-vs-formula discrepancy, one RMS value per grid time."""

    times: np.ndarray
    rms: np.ndarray
    n_steps: int
    n_paths: int
    seed: int

    @property
    def max_rms(self):
        return float(self.rms.max())

    @property
    def terminal_rms(self):
        return float(self.rms[-1])


# ---------------------------------------------------------------------------
# Step tables
# ---------------------------------------------------------------------------

def _grid(effective, n_steps):
    horizon = effective.market.horizon
    return np.linspace(0.0, horizon, n_steps + 1)


def _step_tables(context, n_steps):
    """Exact per-step and per-time integrals on the uniform grid."""
    eff = context.effective
    times = _grid(eff, n_steps)
    horizon = eff.market.horizon
    tail_rate = np.array([eff.rate_integral(t, horizon) for t in times])
    tail_mpr = np.array([eff.mpr_sq_integral(t, horizon) for t in times])
    tail_mpr[-1] = 0.0
    step_rate = tail_rate[:-1] - tail_rate[1:]
    step_mpr = tail_mpr[:-1] - tail_mpr[1:]
    step_mpr = np.maximum(step_mpr, 0.0)
    tables = {
        "times": times,
        "log_drift": -(step_rate + 0.5 * step_mpr),
        "vol": np.sqrt(step_mpr),
        "step_growth": np.exp(step_rate),
        "step_mpr2": step_mpr,
        "disc_tail": np.exp(-tail_rate),
        "disc_quad": np.exp(-(2.0 * tail_rate - tail_mpr)),
        "sqrt_tail": np.sqrt(tail_mpr),
        "dplus_shift": -tail_rate + 1.5 * tail_mpr,
    }
    return tables


def _direction_by_time(effective, times):
    m = effective.market.n_assets
    out = np.zeros((len(times), m))
    for i, t in enumerate(times):
        out[i] = effective.direction_at(min(t, effective.market.horizon))
    return out


def _tree_reduce(items, combine):
    """Fixed pairwise reduction by index; independent of worker order."""
    level = list(items)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(combine(level[i], level[i + 1]))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _run_chunks(plan, worker, workers):
    chunks = plan.chunks()
    if workers is None:
        workers = 1
    if workers <= 1 or len(chunks) == 1:
        return [worker(lo, hi) for lo, hi in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, lo, hi) for lo, hi in chunks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def simulate_phi(plan, effective, workers=None, backend=None):
    """State-price density paths, shape (n_paths, n_steps + 1)."""
    kern = _kernels.get_backend(backend)
    # A degenerate-pair context is enough to build the step tables.
    tables = _step_tables(_TableShim(effective), plan.n_steps)
    out = np.empty((plan.n_paths, plan.n_steps + 1))

    def worker(lo, hi):
        kern.phi_paths_chunk(plan.seed, lo, hi, tables["log_drift"],
                             tables["vol"], plan.antithetic, out[lo:hi])
        return None

    _run_chunks(plan, worker, workers)
    return out


class _TableShim:
    # Adapts a bare EffectiveMarket to the context shape _step_tables uses.
    def __init__(self, effective):
        self.effective = effective


def simulate_paths(plan, context, workers=None,
                   store_paths=DEFAULT_STORED_PATHS, backend=None):
    """Optimal wealth and policy along simulated density paths.

    Wealth is the exact formula evaluated at the simulated density, so
    floored runs satisfy the floor identically.  The first
    ``store_paths`` paths keep full trajectories; population statistics
    cover every path.
    """
    kern = _kernels.get_backend(backend)
    tables = _step_tables(context, plan.n_steps)
    pair = context.pair
    floored = context.bankruptcy_prohibited
    n_store = min(store_paths, plan.n_paths)

    def worker(lo, hi):
        return kern.wealth_paths_chunk(
            plan.seed, lo, hi, tables["log_drift"], tables["vol"],
            pair.mu, pair.gamma, tables["disc_tail"], tables["disc_quad"],
            tables["sqrt_tail"], tables["dplus_shift"], floored,
            plan.antithetic)

    results = _run_chunks(plan, worker, workers)

    def combine(a, b):
        return (a[0] + b[0], min(a[1], b[1]), a[2] + b[2],
                np.minimum(a[3], b[3]), np.maximum(a[4], b[4]))

    sums, min_wealth, n_negative, scale_min, scale_max = _tree_reduce(
        results, combine)

    n = plan.n_paths
    mean = sums[0] / n
    m2 = sums[1] / n - mean ** 2
    m4 = (sums[3] / n - 4 * mean * sums[2] / n
          + 6 * mean ** 2 * sums[1] / n - 3 * mean ** 4)
    var = m2 * n / (n - 1) if n > 1 else 0.0
    mean_se = math.sqrt(max(var, 0.0) / n)
    var_se = (math.sqrt(max(m4 - (n - 3) / (n - 1) * var ** 2, 0.0) / n)
              if n > 3 else 0.0)

    # Stored trajectories: re-run the leading chunk range with buffers.
    times = tables["times"]
    phi_buf = np.empty((n_store, plan.n_steps + 1))
    wealth_buf = np.empty_like(phi_buf)
    scale_buf = np.empty_like(phi_buf)
    if n_store:
        kern.wealth_paths_chunk(
            plan.seed, 0, n_store, tables["log_drift"], tables["vol"],
            pair.mu, pair.gamma, tables["disc_tail"], tables["disc_quad"],
            tables["sqrt_tail"], tables["dplus_shift"], floored,
            plan.antithetic, phi_out=phi_buf, wealth_out=wealth_buf,
            scale_out=scale_buf)
    directions = _direction_by_time(context.effective, times)
    portfolio = scale_buf[:, :, None] * directions[None, :, :]

    # Cone slack: C' pi = scale * (C' direction); the extreme over all
    # paths/times per component comes from the per-time scale envelope.
    market = context.effective.market
    cone = context.effective.cone
    k = cone.matrix(market.n_assets, 0).shape[1]
    slack_min = np.full(k, np.inf) if k else np.zeros(0)
    for i, t in enumerate(times):
        seg = market.segment_index(min(t, market.horizon))
        cmat = cone.matrix(market.n_assets, seg)
        if not cmat.size:
            continue
        base = cmat.T @ directions[i]
        lo = np.where(base >= 0.0, scale_min[i] * base, scale_max[i] * base)
        slack_min = np.minimum(slack_min, lo)

    return WealthPathSet(
        times=times,
        stored_indices=np.arange(n_store),
        phi=phi_buf,
        wealth=wealth_buf,
        portfolio=portfolio,
        terminal_mean=float(mean),
        terminal_mean_se=float(mean_se),
        terminal_var=float(var),
        terminal_var_se=float(var_se),
        min_wealth=float(min_wealth),
        n_negative_paths=int(n_negative),
        cone_slack_min=slack_min,
        n_paths=plan.n_paths,
        n_steps=plan.n_steps,
        seed=plan.seed,
        scale_min=scale_min,
        scale_max=scale_max,
    )


def sde_consistency(plan, context, workers=None, backend=None):
    """Euler-integrate the effective wealth equation and compare.

    The same per-(path, step) noise drives the exact density and the
    Euler wealth; the report carries the RMS gap per grid time.  Floored
    variant only (the linear variant's wealth is already the SDE's exact
    solution).
    """
    if not context.bankruptcy_prohibited:
        raise DomainError("sde_consistency applies to the floored variant")
    kern = _kernels.get_backend(backend)
    tables = _step_tables(context, plan.n_steps)
    pair = context.pair

    def worker(lo, hi):
        return kern.euler_chunk(
            plan.seed, lo, hi, tables["log_drift"], tables["vol"],
            tables["step_growth"], tables["step_mpr2"], pair.mu, pair.gamma,
            tables["disc_tail"], tables["disc_quad"], tables["sqrt_tail"],
            tables["dplus_shift"], plan.antithetic)

    results = _run_chunks(plan, worker, workers)
    total = _tree_reduce(results, lambda a, b: a + b)
    rms = np.sqrt(total / plan.n_paths)
    return SdeReport(times=tables["times"], rms=rms, n_steps=plan.n_steps,
                     n_paths=plan.n_paths, seed=plan.seed)


def refinement_study(context, n_paths, seed, steps=(64, 128, 256),
                     workers=None, backend=None):
    """sde_consistency at increasing resolutions; returns the reports."""
    reports = []
    for n_steps in steps:
        plan = SimulationPlan(n_paths=n_paths, n_steps=n_steps, seed=seed)
        reports.append(sde_consistency(plan, context, workers=workers,
                                       backend=backend))
    return reports
