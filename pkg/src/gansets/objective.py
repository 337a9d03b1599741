"""Minimax kernels, i.i.d. datasets and objective surfaces on a grid."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _accel
from .grid import GridFunction, ParamBox, ParamGrid

log = logging.getLogger(__name__)


class NonFiniteKernelError(ArithmeticError):
    """The kernel produced NaN or +-inf; carries the offending row and point."""

    def __init__(self, message, row=None, index=None, theta=None):
        super().__init__(message)
        self.row = row
        self.index = index
        self.theta = theta


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired samples (X_i, Z_i), i = 1..n, one row per draw."""

    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        z = np.array(self.z, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if z.ndim == 1:
            z = z[:, None]
        if x.ndim != 2 or z.ndim != 2:
            raise ValueError("x and z must be 1-D or 2-D arrays")
        if x.shape[0] != z.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but z has {z.shape[0]}")
        if x.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_z(self) -> int:
        return self.z.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.x[rows], self.z[rows])

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.vstack([self.x, other.x]), np.vstack([self.z, other.z]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def to_csv(self, path) -> None:
        write_dataset_csv(self, path)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        return read_dataset_csv(path)


def write_dataset_csv(data: Dataset, path) -> None:
    """Header ``x_0..x_{dX-1},z_0..z_{dZ-1}``; floats written with repr()."""
    header = [f"x_{j}" for j in range(data.d_x)] + [f"z_{j}" for j in range(data.d_z)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for xr, zr in zip(data.x, data.z):
            w.writerow([repr(float(v)) for v in xr] + [repr(float(v)) for v in zr])


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    zcols = [i for i, h in enumerate(header) if h.startswith("z_")]
    if not xcols or not zcols or len(xcols) + len(zcols) != len(header):
        raise ValueError(f"{path}: header must be x_0..x_k,z_0..z_m, got {header}")
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    if body.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    return Dataset(body[:, xcols], body[:, zcols])


Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class MinimaxProblem:
    """A minimax problem inf_gamma sup_delta E[F(X, Z, gamma, delta)].

    Parameters
    ----------
    name : str
        Short identifier used in reports.
    box : ParamBox
        Compact parameter space Gamma x Delta.
    d_x, d_z : int
        Dimensions of the data and noise vectors.
    kernel : callable
        Vectorized F(x, z, gamma, delta); arguments broadcast over leading
        axes with the coordinate axis last.
    sampler : callable
        ``sampler(n, seed) -> Dataset`` producing i.i.d. paired draws.
    scalar_kernel : numba dispatcher, optional
        Jitted F taking 1-D arrays; enables the compiled surface loop.
    population_oracle : callable, optional
        Vectorized f(gamma, delta) = E[F]; same broadcasting rule as ``kernel``.
    known_solutions : array, optional
        Rows (gamma_0, delta_0) of the population solution set, when known.
    params : dict
        Construction parameters, echoed in reports.
    """

    name: str
    box: ParamBox
    d_x: int
    d_z: int
    kernel: Kernel
    sampler: Callable[[int, int], Dataset]
    scalar_kernel: Optional[Callable] = None
    population_oracle: Optional[Kernel] = None
    known_solutions: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    @property
    def distinct_solutions(self) -> bool:
        """K > 1 known solutions with pairwise distinct gammas and deltas."""
        sols = self.known_solutions
        if sols is None or len(sols) < 2:
            return False
        dg = self.box.d_gamma
        for i in range(len(sols)):
            for j in range(i + 1, len(sols)):
                if np.array_equal(sols[i, :dg], sols[j, :dg]):
                    return False
                if np.array_equal(sols[i, dg:], sols[j, dg:]):
                    return False
        return True


def _split_theta(problem: MinimaxProblem, theta):
    theta = np.asarray(theta, dtype=np.float64)
    dg = problem.box.d_gamma
    return theta[..., :dg], theta[..., dg:]


def eval_kernel(problem: MinimaxProblem, x, z, theta) -> float:
    """F(x, z, gamma, delta) at a single point, checked for finiteness."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if x.shape != (problem.d_x,) or z.shape != (problem.d_z,):
        raise ValueError(
            f"expected x of length {problem.d_x} and z of length {problem.d_z}, "
            f"got {x.shape} and {z.shape}")
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (problem.box.d_gamma + problem.box.d_delta,):
        raise ValueError(f"theta has shape {theta.shape}")
    if np.any(theta < problem.box.lower) or np.any(theta > problem.box.upper):
        raise ValueError(f"theta {theta.tolist()} lies outside the parameter box")
    g, d = _split_theta(problem, theta)
    val = float(problem.kernel(x, z, g, d))
    if not np.isfinite(val):
        raise NonFiniteKernelError(
            f"kernel returned {val} at theta={theta.tolist()}", theta=theta)
    return val


def kernel_values(problem: MinimaxProblem, data: Dataset, points) -> np.ndarray:
    """Matrix of F(X_i, Z_i, theta_k), shape (n, K), for a few parameter points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    g, d = _split_theta(problem, points)
    return np.asarray(problem.kernel(data.x[:, None, :], data.z[:, None, :],
                                     g[None], d[None]), dtype=np.float64)


def _raw_surface(problem: MinimaxProblem, data: Dataset, grid: ParamGrid) -> np.ndarray:
    gp, dp = grid.gamma_points, grid.delta_points
    if _accel.USE_NUMBA and problem.scalar_kernel is not None:
        return _accel.surface_mean_numba(problem.scalar_kernel, data.x, data.z, gp, dp)
    return _accel.surface_mean_numpy(problem.kernel, data.x, data.z, gp, dp)


def _locate_nonfinite(problem, data, grid, surf):
    bad = int(np.flatnonzero(~np.isfinite(surf.ravel()))[0])
    theta = grid.point(bad)
    vals = kernel_values(problem, data, theta[None])[:, 0]
    rows = np.flatnonzero(~np.isfinite(vals))
    row = int(rows[0]) if rows.size else None
    raise NonFiniteKernelError(
        f"non-finite kernel value at row {row}, grid index {bad}, theta={theta.tolist()}",
        row=row, index=bad, theta=theta)


def surface_matrix(problem: MinimaxProblem, data: Dataset, grid: ParamGrid) -> np.ndarray:
    """Sample objective as a raw (n_gamma, n_delta) array (no wrapping)."""
    _check_compat(problem, data, grid)
    surf = _raw_surface(problem, data, grid)
    if not np.all(np.isfinite(surf)):
        _locate_nonfinite(problem, data, grid, surf)
    return surf


def sample_surface(problem: MinimaxProblem, data: Dataset, grid: ParamGrid) -> GridFunction:
    """f_n(theta) = mean over i of F(X_i, Z_i, theta) at every grid point."""
    return GridFunction(grid, surface_matrix(problem, data, grid).ravel())


def _check_compat(problem, data, grid):
    if data.d_x != problem.d_x or data.d_z != problem.d_z:
        raise ValueError(
            f"dataset dims (d_x={data.d_x}, d_z={data.d_z}) do not match problem "
            f"(d_x={problem.d_x}, d_z={problem.d_z})")
    if grid.d_gamma != problem.box.d_gamma or grid.d_delta != problem.box.d_delta:
        raise ValueError("grid and problem disagree on parameter dimensions")


def monte_carlo_values(problem: MinimaxProblem, points, draws: int, seed: int = 0,
                       chunk: int = 100_000):
    """Monte Carlo mean and standard error of F at ``points`` (shape (K, d))."""
    data = problem.sampler(int(draws), seed)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s1 = np.zeros(points.shape[0])
    s2 = np.zeros(points.shape[0])
    for start in range(0, data.n, chunk):
        vals = kernel_values(problem, data.subset(np.arange(start, min(data.n, start + chunk))),
                             points)
        s1 += vals.sum(axis=0)
        s2 += (vals * vals).sum(axis=0)
    n = data.n
    mean = s1 / n
    var = np.maximum(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, np.sqrt(var / n)


def population_surface(problem: MinimaxProblem, grid: ParamGrid,
                       mc_draws: Optional[int] = None, seed: int = 0) -> GridFunction:
    """Population objective f on the grid.

    Uses the analytic oracle when the problem has one; otherwise falls back to
    seeded Monte Carlo with ``mc_draws`` draws (the largest standard error is
    logged).  Raises ``ValueError`` when neither is available.
    """
    if problem.population_oracle is not None:
        gp, dp = grid.gamma_points, grid.delta_points
        vals = problem.population_oracle(gp[:, None, :], dp[None, :, :])
        vals = np.broadcast_to(np.asarray(vals, dtype=np.float64), (gp.shape[0], dp.shape[0]))
        return GridFunction(grid, vals.ravel())
    if mc_draws is None:
        raise ValueError(
            f"problem {problem.name!r} has no population oracle; pass mc_draws for "
            "a Monte Carlo fallback")
    mean, se = monte_carlo_values(problem, grid.points, mc_draws, seed)
    log.info("Monte Carlo population surface: %d draws, max standard error %.3g",
             mc_draws, float(se.max()))
    return GridFunction(grid, mean)


def known_solution_indices(problem: MinimaxProblem, grid: ParamGrid) -> Sequence[int]:
    """Flat indices of the grid points nearest to each known solution."""
    if problem.known_solutions is None:
        raise ValueError(f"problem {problem.name!r} has no known solution set")
    return sorted({grid.nearest_index(p) for p in problem.known_solutions})
