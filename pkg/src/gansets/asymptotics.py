"""Active sets, directional derivatives of sup / inf-sup / criterion maps, and
simulation of the limiting law of the scaled criterion supremum."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import rng
from .grid import GridFunction, Lattice, ParamSet
from .objective import Dataset, MinimaxProblem, kernel_values

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-12
_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class ActiveSets:
    """Gamma_0(x), Delta_0(gamma, x) and Theta_0(x) of a surface x."""

    gamma0: np.ndarray  # gamma-marginal flat indices
    delta0_by_gamma: dict  # gamma index -> delta-marginal flat indices
    theta0: ParamSet
    tol: float

    def gamma0_points(self) -> np.ndarray:
        return self.theta0.grid.gamma_points[self.gamma0]


def _argmax_within(vals, tol):
    return np.flatnonzero(vals >= vals.max() - tol)


def active_sets(surface: GridFunction, tol: float = ACTIVE_TOL) -> ActiveSets:
    """Near-attainment sets of a surface; ``tol`` is an absolute slack."""
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    grid = surface.grid
    mat = surface.matrix()
    phi = mat.max(axis=1)
    gamma0 = np.flatnonzero(phi <= phi.min() + tol)
    delta0 = {}
    mask = np.zeros(mat.shape, dtype=bool)
    for a in gamma0:
        d = np.flatnonzero(mat[a] >= phi[a] - tol)
        delta0[int(a)] = d
        mask[a, d] = True
    return ActiveSets(gamma0=gamma0, delta0_by_gamma=delta0,
                      theta0=ParamSet(grid, mask.ravel()), tol=tol)


def _infsup_over(act: ActiveSets, hmat) -> float:
    return float(min(hmat[a, d].max() for a, d in act.delta0_by_gamma.items()))


def hadamard_derivative_sup(x: GridFunction, h: GridFunction, tol: float = ACTIVE_TOL) -> float:
    """Derivative of x -> max x in direction h: max of h over the argmax set."""
    _same_grid(x, h)
    return float(h.values[_argmax_within(x.values, tol)].max())


def hadamard_derivative_infsup(x: GridFunction, h: GridFunction,
                               tol: float = ACTIVE_TOL) -> float:
    """Derivative of x -> min_gamma max_delta x in direction h."""
    _same_grid(x, h)
    return _infsup_over(active_sets(x, tol), h.matrix())


def hadamard_derivative_criterion(x0: GridFunction, h: GridFunction,
                                  tol: float = ACTIVE_TOL) -> float:
    """Derivative at x0 of the sup-over-Theta_0(x0) criterion map in direction h."""
    _same_grid(x0, h)
    act = active_sets(x0, tol)
    if act.gamma0.shape[0] == x0.grid.n_gamma:
        log.warning("Gamma_0 is the whole gamma grid; the finiteness condition is not "
                    "meaningful on this surface")
    hmat = h.matrix()
    inner = _infsup_over(act, hmat)
    best = -np.inf
    for a, ds in act.delta0_by_gamma.items():
        top = hmat[a, ds].max()
        for d in ds:
            best = max(best, top - min(hmat[a, d], inner))
    return float(best)


def _infsup_value(mat) -> float:
    return float(mat.max(axis=1).min())


def _criterion_map(mat, act: ActiveSets) -> float:
    inner = _infsup_value(mat)
    best = -np.inf
    for a, ds in act.delta0_by_gamma.items():
        top = mat[a].max()
        for d in ds:
            best = max(best, top - min(mat[a, d], inner))
    return float(best)


def finite_difference_quotient(map_kind: str, x0: GridFunction, h: GridFunction, t: float,
                               tol: float = ACTIVE_TOL) -> float:
    """(phi(x0 + t h) - phi(x0)) / t for phi in {sup, infsup, criterion}.

    For ``criterion`` the active set Theta_0(x0) stays fixed at x0.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    _same_grid(x0, h)
    if map_kind == "sup":
        base = x0.values.max()
        moved = (x0.values + t * h.values).max()
    elif map_kind == "infsup":
        base = _infsup_value(x0.matrix())
        moved = _infsup_value(x0.matrix() + t * h.matrix())
    elif map_kind == "criterion":
        act = active_sets(x0, tol)
        base = _criterion_map(x0.matrix(), act)
        moved = _criterion_map(x0.matrix() + t * h.matrix(), act)
    else:
        raise ValueError(f"unknown map kind {map_kind!r}")
    return float((moved - base) / t)


def _same_grid(a: GridFunction, b: GridFunction):
    if a.grid != b.grid:
        raise ValueError("functions live on different grids")


# ------------------------------------------------------------ limit law


@dataclass(frozen=True, eq=False)
class GaussianLimitModel:
    """Covariance of the limiting Gaussian process at the K solution points."""

    theta0_points: np.ndarray
    covariance: np.ndarray
    structure: str
    d_gamma: int = 1
    _groups: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.theta0_points, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        k = pts.shape[0]
        if k == 0:
            raise ValueError("need at least one solution point")
        if cov.shape != (k, k):
            raise ValueError(f"covariance shape {cov.shape} does not match K={k}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() < -1e-10:
            raise ValueError("covariance is not positive semi-definite")
        if np.any(np.diag(cov) <= 0):
            raise ValueError("covariance has a non-positive diagonal entry")
        if self.structure not in ("distinct_finite", "general_finite"):
            raise ValueError(f"unknown structure {self.structure!r}")
        # points sharing the same gamma coordinates form one Gamma_0 element
        _, groups = np.unique(pts[:, : self.d_gamma], axis=0, return_inverse=True)
        object.__setattr__(self, "theta0_points", pts)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_groups", np.asarray(groups).ravel())

    @property
    def k(self) -> int:
        return self.theta0_points.shape[0]


def solution_structure(points, d_gamma: int) -> str:
    pts = np.atleast_2d(points)
    k = pts.shape[0]
    g = pts[:, :d_gamma]
    d = pts[:, d_gamma:]
    for i in range(k):
        for j in range(i + 1, k):
            if np.array_equal(g[i], g[j]) or np.array_equal(d[i], d[j]):
                return "general_finite"
    return "distinct_finite"


def estimate_limit_covariance(problem: MinimaxProblem, data: Dataset,
                              theta0_points) -> GaussianLimitModel:
    """Sample covariance of F(X_i, Z_i, theta_k) across i at the K solution points."""
    pts = np.atleast_2d(np.asarray(theta0_points, dtype=np.float64))
    if pts.shape[0] == 0 or pts.size == 0:
        raise ValueError("need at least one solution point")
    if data.n < 2:
        raise ValueError("need n >= 2 to estimate a covariance")
    vals = kernel_values(problem, data, pts)
    cov = np.atleast_2d(np.cov(vals, rowvar=False, ddof=1))
    if np.any(np.diag(cov) <= 0):
        raise ValueError("kernel has zero variance at a solution point")
    dg = problem.box.d_gamma
    return GaussianLimitModel(pts, cov, solution_structure(pts, dg), d_gamma=dg)


def _factor(cov, rel_tol=1e-12):
    """Gaussian factor with exact ties for coordinates whose difference has zero variance."""
    k = cov.shape[0]
    scale = float(np.diag(cov).max())
    rep = np.arange(k)
    for j in range(k):
        for i in range(j):
            if rep[i] == i and cov[i, i] + cov[j, j] - 2 * cov[i, j] <= rel_tol * scale:
                rep[j] = i
                break
    keep = np.flatnonzero(rep == np.arange(k))
    sub = np.asfortranarray(cov[np.ix_(keep, keep)])
    c, piv, rank, info = lapack.dpstrf(sub, tol=rel_tol * scale, lower=1)
    if info < 0:
        raise ValueError(f"pivoted Cholesky failed (info={info})")
    low = np.tril(c)[:, :rank]
    fac_keep = np.empty_like(low)
    fac_keep[piv - 1] = low
    pos = {int(i): r for r, i in enumerate(keep)}
    return fac_keep[[pos[int(rep[j])] for j in range(k)]]


def _limit_from_draws(g: np.ndarray, groups: np.ndarray, distinct: bool) -> np.ndarray:
    if distinct:
        return g.max(axis=1) - g.min(axis=1)
    labels = np.unique(groups)
    top = np.stack([g[:, groups == lab].max(axis=1) for lab in labels], axis=1)
    inner = top.min(axis=1)
    top_per_point = top[:, np.searchsorted(labels, groups)]
    return (top_per_point - np.minimum(g, inner[:, None])).max(axis=1)


def simulate_limit_distribution(model: GaussianLimitModel, reps: int, seed: int = 0) -> np.ndarray:
    """Draws of the limiting statistic (max minus min for distinct solutions)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if model.k == 1:
        return np.zeros(reps)
    fac = _factor(model.covariance)
    distinct = model.structure == "distinct_finite"
    out = np.empty(reps)
    for blk, start in enumerate(range(0, reps, _BLOCK)):
        m = min(_BLOCK, reps - start)
        z = rng.normals(rng.stream(int(seed), "limit", blk), m * fac.shape[1])
        g = z.reshape(m, fac.shape[1]) @ fac.T
        out[start:start + m] = _limit_from_draws(g, model._groups, distinct)
    return out


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.abs(fa - fb).max())


def sup_over_solutions(criterion: GridFunction, theta0: ParamSet, n: int) -> float:
    """sqrt(n) * max of the criterion over the solution set."""
    return float(np.sqrt(n) * criterion.values[theta0.mask].max())


def write_sample_csv(values, path, column: str = "value") -> None:
    """One float per row under a single header, repr-formatted for round-tripping."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    with open(path, "w", newline="") as fh:
        fh.write(column + "\n")
        for v in vals:
            fh.write(repr(float(v)) + "\n")


def read_sample_csv(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    return np.array([float(v) for v in lines[1:] if v], dtype=np.float64)
