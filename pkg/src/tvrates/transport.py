"""Probability metrics: weighted total variation, total variation mass,
q-Wasserstein distances and a Fortet-Mourier upper bound.

Density-based distances (rho_p, tv) are computed by grid quadrature with a
Richardson-style refinement difference as the error estimate.  Wasserstein
distances come in three flavors: the one-dimensional quantile representation
(Gauss-Hermite quadrature after the normal substitution), an exact discrete
solver (LP, equivalent to network simplex), and an annealed Sinkhorn solver
whose reported value is always the cost of a rounded feasible plan, hence an
upper bound on the exact cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.optimize import linprog
from scipy.stats import norm

from .distributions import (
    AtomSet,
    GaussianMixture,
    GridDensity,
    SpaceGrid,
    common_grid,
    discretize,
)
from .errors import ConvergenceError, NumericalError, PreconditionError

__all__ = [
    "DistanceResult",
    "TransportPlan",
    "rho_p",
    "tv_mass",
    "wasserstein_1d",
    "ot_exact",
    "ot_entropic",
    "fm_upper",
]

# Largest cost matrix the exact solver will build.
OT_SIZE_LIMIT = 1_000_000


@dataclass(frozen=True)
class DistanceResult:
    """A computed distance with its method tag and error estimate."""

    value: float
    method: str
    err: float = 0.0

    _METHODS = ("quantile-quadrature", "exact-ot", "entropic-ot", "grid-quadrature")

    def __post_init__(self):
        if self.method not in self._METHODS:
            raise PreconditionError(f"unknown method tag {self.method!r}")
        if self.value < 0 or self.err < 0:
            raise PreconditionError("distance and error estimate must be >= 0")

    def to_json(self) -> dict:
        return {"value": self.value, "method": self.method, "err": self.err}


@dataclass(frozen=True)
class TransportPlan:
    """Coupling matrix between two atom sets; marginals verified to 1e-9."""

    row_marginal: AtomSet
    col_marginal: AtomSet
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.row_marginal), len(self.col_marginal)):
            raise PreconditionError("plan shape does not match marginals")
        if m.min() < -1e-12:
            raise PreconditionError("plan entries must be >= 0")
        if np.abs(m.sum(axis=1) - self.row_marginal.masses).max() > 1e-9:
            raise PreconditionError("row sums do not match the row marginal")
        if np.abs(m.sum(axis=0) - self.col_marginal.masses).max() > 1e-9:
            raise PreconditionError("column sums do not match the column marginal")
        m = np.maximum(m, 0.0)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


# ---------------------------------------------------------------------------
# grid quadrature distances
# ---------------------------------------------------------------------------

def _pair_grids(a, b, grid: SpaceGrid | None):
    if isinstance(a, GridDensity) and isinstance(b, GridDensity):
        if a.grid != b.grid:
            raise PreconditionError("grid densities must share one grid")
        return a, b, None
    if isinstance(a, GaussianMixture) and isinstance(b, GaussianMixture):
        g = grid if grid is not None else common_grid(a, b)
        box = np.stack([g.lo, g.hi], axis=1)
        return discretize(a, box, g.shape), discretize(b, box, g.shape), (a, b)
    raise PreconditionError("inputs must both be mixtures or both be grid densities")


def _weighted_l1(fa: GridDensity, fb: GridDensity, p: float) -> float:
    diff = np.abs(fa.values - fb.values)
    if p > 0:
        diff = diff * (1.0 + fa.grid.radii() ** p)
    return float(diff.sum() * fa.grid.cell_volume)


def _coarsen_value(fa: GridDensity, fb: GridDensity, p: float) -> float:
    """Same quadrature on the 2x coarser grid (block averages)."""
    grid = fa.grid
    shape = tuple(n // 2 for n in grid.shape)
    coarse = SpaceGrid(grid.lo, grid.hi, shape)

    def blocks(v):
        for ax in range(v.ndim):
            n = v.shape[ax]
            v = v.reshape(v.shape[:ax] + (n // 2, 2) + v.shape[ax + 1:]).mean(
                axis=ax + 1
            )
        return v

    diff = np.abs(blocks(fa.values) - blocks(fb.values))
    if p > 0:
        diff = diff * (1.0 + coarse.radii() ** p)
    return float(diff.sum() * coarse.cell_volume)


MAX_REFINEMENTS = {1: 4, 2: 2, 3: 1}


def rho_p(a, b, p: float, tol: float = 1e-4, grid: SpaceGrid | None = None) -> DistanceResult:
    """Weighted total variation int (1 + |x|^p) |f_a - f_b| dx for p > 0.

    The zero-power weight is the constant 1, so rho_p(a, b, 0) equals the
    total variation mass int |f_a - f_b| dx (twice the usual TV probability
    metric).  Mixture inputs are discretized on a shared sigma-box grid and
    refined until the refinement difference drops below ``tol``; grid inputs
    cannot be refined, so their error estimate comes from coarsening and the
    tolerance is enforced as-is.
    """
    if p < 0:
        raise PreconditionError("weight power must be >= 0")
    fa, fb, analytic = _pair_grids(a, b, grid)
    if analytic is None:
        value = _weighted_l1(fa, fb, p)
        err = abs(value - _coarsen_value(fa, fb, p))
        if err > tol:
            raise NumericalError(
                f"grid quadrature error estimate {err:.3e} exceeds tol {tol:.3e}"
            )
        return DistanceResult(value, "grid-quadrature", err)
    dist_a, dist_b = analytic
    g = fa.grid
    value = _weighted_l1(fa, fb, p)
    err = math.inf
    for _ in range(MAX_REFINEMENTS[g.d]):
        g = g.refined()
        box = np.stack([g.lo, g.hi], axis=1)
        fa2 = discretize(dist_a, box, g.shape)
        fb2 = discretize(dist_b, box, g.shape)
        value2 = _weighted_l1(fa2, fb2, p)
        err = abs(value2 - value)
        value = value2
        if err <= tol:
            return DistanceResult(value, "grid-quadrature", err)
    raise NumericalError(
        f"quadrature did not reach tol {tol:.3e} (last estimate {err:.3e}); "
        "the pair is unresolvable at the allowed resolutions"
    )


def tv_mass(a, b, tol: float = 1e-4, grid: SpaceGrid | None = None) -> DistanceResult:
    """Total variation mass int |f_a - f_b| dx."""
    return rho_p(a, b, 0.0, tol=tol, grid=grid)


# ---------------------------------------------------------------------------
# one-dimensional Wasserstein
# ---------------------------------------------------------------------------

def _grid_quantile(f: GridDensity, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of a one-dimensional grid density (piecewise-constant
    density, hence piecewise-linear CDF)."""
    h = float(f.grid.spacings[0])
    masses = f.values * h
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    cum /= cum[-1]
    edges = f.grid.lo[0] + np.arange(f.grid.shape[0] + 1) * h
    idx = np.clip(np.searchsorted(cum, u, side="left"), 1, len(cum) - 1)
    seg = np.maximum(cum[idx] - cum[idx - 1], 1e-300)
    return edges[idx - 1] + (u - cum[idx - 1]) / seg * h


def _quantile_fn(obj):
    if isinstance(obj, GaussianMixture):
        obj._require_1d()
        return obj.quantile
    if isinstance(obj, GridDensity):
        if obj.d != 1:
            raise PreconditionError("quantile quadrature requires dimension one")
        return lambda u: _grid_quantile(obj, u)
    raise PreconditionError("expected a GaussianMixture or 1-D GridDensity")


def _quantile_wq(qa, qb, q: float, n_nodes: int) -> float:
    # int_0^1 |Qa - Qb|^q du with u = Phi(t): Gauss-Hermite after t = sqrt(2) s
    s, w = np.polynomial.hermite.hermgauss(n_nodes)
    u = np.clip(norm.cdf(math.sqrt(2.0) * s), 1e-16, 1.0 - 1e-16)
    g = np.abs(qa(u) - qb(u)) ** q
    return float(np.sum(w * g) / math.sqrt(math.pi)) ** (1.0 / q)


def wasserstein_1d(a, b, q: float, n_nodes: int = 128) -> DistanceResult:
    """W_q via the quantile representation, for q > 1 in dimension one.

    The unit-interval integral is computed under the normal substitution
    u = Phi(t) on a Gauss-Hermite rule, which removes the inverse-CDF blowup
    at the endpoints; the error estimate comes from doubling the order.
    q <= 1 is rejected: the certificate machinery requires q > 1 (use
    :func:`ot_exact` for discrete W_1).
    """
    if q <= 1:
        raise PreconditionError("quantile quadrature requires q > 1")
    qa, qb = _quantile_fn(a), _quantile_fn(b)
    v1 = _quantile_wq(qa, qb, q, n_nodes)
    v2 = _quantile_wq(qa, qb, q, 2 * n_nodes)
    return DistanceResult(v2, "quantile-quadrature", abs(v2 - v1))


def _w1_cdf_1d(a, b, n: int = 16384) -> DistanceResult:
    """W_1 = int |F_a - F_b| dx for one-dimensional inputs, by grid sums."""

    def cdf_on(xs, obj):
        if isinstance(obj, GaussianMixture):
            return obj.cdf(xs)
        h = float(obj.grid.spacings[0])
        cum = np.cumsum(obj.values) * h
        cum /= cum[-1]
        edges = obj.grid.lo[0] + (np.arange(obj.grid.shape[0]) + 1) * h
        idx = np.searchsorted(edges, xs, side="left")
        out = np.where(idx == 0, 0.0, cum[np.maximum(idx - 1, 0)])
        return np.where(idx >= len(cum), 1.0, out)

    lo, hi = [], []
    for obj in (a, b):
        if isinstance(obj, GaussianMixture):
            obj._require_1d()
            s = np.sqrt(obj.covs[:, 0, 0])
            lo.append(float(np.min(obj.means[:, 0] - 12 * s)))
            hi.append(float(np.max(obj.means[:, 0] + 12 * s)))
        else:
            lo.append(obj.grid.lo[0])
            hi.append(obj.grid.hi[0])
    left, right = min(lo), max(hi)

    def value(m):
        xs = np.linspace(left, right, m)
        return float(
            np.trapezoid(np.abs(cdf_on(xs, a) - cdf_on(xs, b)), xs)
        )

    v1, v2 = value(n), value(2 * n)
    return DistanceResult(v2, "grid-quadrature", abs(v2 - v1))


# ---------------------------------------------------------------------------
# discrete optimal transport
# ---------------------------------------------------------------------------

def _cost_matrix(a: AtomSet, b: AtomSet, q: float) -> np.ndarray:
    if a.d != b.d:
        raise PreconditionError("atom sets have different dimensions")
    diff = a.locations[:, None, :] - b.locations[None, :, :]
    return np.linalg.norm(diff, axis=-1) ** q


def ot_exact(a: AtomSet, b: AtomSet, q: float = 2.0):
    """Exact optimal transport for cost |x - y|^q, q >= 1.

    Solved as the transportation LP (HiGHS); small instances use the simplex,
    large ones the interior-point method with crossover, both of which return
    an exact vertex plan.  Returns ``(DistanceResult, TransportPlan)`` with
    the distance ``W_q = cost^{1/q}``.
    """
    if q < 1:
        raise PreconditionError("cost exponent q must be >= 1")
    n, m = len(a), len(b)
    if n * m > OT_SIZE_LIMIT:
        raise PreconditionError(
            f"cost matrix size {n * m} exceeds the limit {OT_SIZE_LIMIT}"
        )
    C = _cost_matrix(a, b, q)
    rows = scipy.sparse.kron(scipy.sparse.eye(n), np.ones((1, m)))
    cols = scipy.sparse.kron(np.ones((1, n)), scipy.sparse.eye(m))
    A_eq = scipy.sparse.vstack([rows, cols]).tocsc()
    b_eq = np.concatenate([a.masses, b.masses])
    method = "highs" if n * m <= 40_000 else "highs-ipm"
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method=method)
    if res.status != 0:
        raise NumericalError(f"LP solver failed: {res.message}")
    plan = np.maximum(res.x.reshape(n, m), 0.0)
    resid = max(
        np.abs(plan.sum(axis=1) - a.masses).max(),
        np.abs(plan.sum(axis=0) - b.masses).max(),
    )
    cost = float(np.sum(plan * C))
    value = cost ** (1.0 / q)
    err = (resid * max(C.max(), 1e-300)) ** (1.0 / q)
    return DistanceResult(value, "exact-ot", err), TransportPlan(a, b, plan)


# Annealing schedule, relative to the cost maximum.  The deep tail costs
# nothing for generic pairs (the duality-gap exit fires early) but lets
# near-identical pairs reach an essentially exact plan.
DEFAULT_REG_SCHEDULE = tuple(0.3 * 0.5**k for k in range(44))


def _logsumexp_rows(M):
    top = M.max(axis=1, keepdims=True)
    out = top + np.log(np.sum(np.exp(M - top), axis=1, keepdims=True))
    return out.ravel()


def _round_to_feasible(plan, ma, mb):
    """Project a nearly feasible plan onto the transport polytope: scale rows
    and columns down to their marginals, then add a rank-one correction."""
    r = np.minimum(1.0, ma / np.maximum(plan.sum(axis=1), 1e-300))
    plan = plan * r[:, None]
    c = np.minimum(1.0, mb / np.maximum(plan.sum(axis=0), 1e-300))
    plan = plan * c[None, :]
    ea = ma - plan.sum(axis=1)
    eb = mb - plan.sum(axis=0)
    gap = ea.sum()
    if gap > 1e-300:
        plan = plan + np.outer(ea, eb) / gap
    return plan


def ot_entropic(
    a: AtomSet,
    b: AtomSet,
    q: float = 2.0,
    reg_schedule=None,
    max_iter: int = 800,
    rtol: float = 5e-3,
):
    """Entropically regularized optimal transport with schedule annealing.

    ``reg_schedule`` lists decreasing regularization weights relative to the
    cost-matrix maximum, ending at the target epsilon.  Iterations run in the
    log domain with warm starts across the schedule.  The plan is periodically
    rounded onto the feasibility polytope, so the reported value is the cost
    of a feasible plan and therefore an upper bound on the exact cost; the
    annealing stops as soon as the gap against the c-transform dual value
    certifies relative accuracy ``rtol``.  The error estimate is that
    duality-gap proxy (in distance units).
    """
    if q < 1:
        raise PreconditionError("cost exponent q must be >= 1")
    if len(a) < 1 or len(b) < 1:
        raise PreconditionError("atom sets must be non-empty")
    schedule = DEFAULT_REG_SCHEDULE if reg_schedule is None else tuple(reg_schedule)
    if any(e <= 0 for e in schedule) or any(
        e2 >= e1 for e1, e2 in zip(schedule, schedule[1:])
    ):
        raise PreconditionError("regularization schedule must be positive, decreasing")
    C = _cost_matrix(a, b, q)
    if C.max() == 0.0:
        return DistanceResult(0.0, "entropic-ot", 0.0)
    scale = float(C.max())
    Cn = C / scale
    la = np.log(a.masses)
    lb = np.log(b.masses)
    f = np.zeros(len(a))
    g = np.zeros(len(b))

    def certified_state():
        plan = _round_to_feasible(
            np.exp((f[:, None] + g[None, :] - Cn) / eps), a.masses, b.masses
        )
        cost = float(np.sum(plan * C))
        u = f * scale
        v = np.min(C - u[:, None], axis=0)
        dual = max(float(a.masses @ u + b.masses @ v), 0.0)
        return plan, cost, cost - dual

    atol = 1e-15 * scale
    for stage, eps in enumerate(schedule):
        cap = 10 * max_iter if stage == len(schedule) - 1 else max_iter
        for it in range(cap):
            f = eps * (la - _logsumexp_rows((g[None, :] - Cn) / eps))
            g = eps * (lb - _logsumexp_rows((f[None, :] - Cn.T) / eps))
            if (it + 1) % 50 == 0 or it == cap - 1:
                plan, cost, gap = certified_state()
                if gap <= rtol * cost + atol:
                    value = cost ** (1.0 / q)
                    err = value - max(cost - gap, 0.0) ** (1.0 / q)
                    return DistanceResult(value, "entropic-ot", max(err, 0.0))
    raise ConvergenceError(
        f"entropic solver left a duality gap of {gap:.3e} "
        f"(target {rtol:.1e} relative) after the full schedule"
    )


# ---------------------------------------------------------------------------
# Fortet-Mourier surrogate
# ---------------------------------------------------------------------------

def fm_upper(a, b) -> DistanceResult:
    """Certified upper bound min(2, W_1) for the bounded-Lipschitz
    (Fortet-Mourier) distance.

    The test class has sup-norm at most 1, which caps the distance at 2;
    the Lipschitz bound gives W_1.  One-dimensional laws use the exact CDF
    representation of W_1; atom sets use the exact discrete solver.
    """
    if isinstance(a, AtomSet) and isinstance(b, AtomSet):
        res, _ = ot_exact(a, b, q=1.0)
    else:
        res = _w1_cdf_1d(a, b)
    if res.value >= 2.0:
        return DistanceResult(2.0, res.method, 0.0)
    return DistanceResult(min(res.value, 2.0), res.method, res.err)
