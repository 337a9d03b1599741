"""Max-functions, optimal values, criterion surfaces and solution sets."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _accel
from .grid import GridFunction, ParamGrid, ParamSet

# absorbs floating-point noise when locating population zeros of the criterion
POPULATION_TOL = 1e-12


@dataclass(frozen=True)
class SlacknessRule:
    """tau_n = scale * n**(-exponent) with exponent in (0, 1/2)."""

    scale: float = 1.0
    exponent: float = 0.49

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"slackness scale must be positive, got {self.scale}")
        if not 0 < self.exponent < 0.5:
            raise ValueError(
                f"slackness exponent must lie in (0, 1/2), got {self.exponent}")

    def __call__(self, n: int) -> float:
        return slackness(self, n)


def slackness(rule: SlacknessRule, n: int) -> float:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rule.scale * float(n) ** (-rule.exponent)


@dataclass(frozen=True, eq=False)
class CriterionBundle:
    """A surface together with its max-function, optimal value and criterion."""

    surface: GridFunction
    max_fn: GridFunction
    optimal_value: float
    criterion: GridFunction

    @property
    def grid(self) -> ParamGrid:
        return self.surface.grid

    def to_csv(self, path) -> None:
        write_bundle_csv(self, path)


def max_function(surface: GridFunction) -> GridFunction:
    """phi(gamma) = max over the delta-slice of the surface."""
    grid = surface.grid
    return GridFunction(grid.gamma_grid, surface.matrix().max(axis=1))


def optimal_value(max_fn: GridFunction) -> float:
    """V = min over gamma of phi(gamma)."""
    return float(max_fn.values.min())


def criterion_surface(surface: GridFunction) -> CriterionBundle:
    """Q(gamma, delta) = max{phi(gamma) - f(gamma, delta), phi(gamma) - V}."""
    grid = surface.grid
    phi, v, q = _accel.criterion(surface.matrix()[None])
    return CriterionBundle(
        surface=surface,
        max_fn=GridFunction(grid.gamma_grid, phi[0]),
        optimal_value=float(v[0]),
        criterion=GridFunction(grid, q[0].ravel()),
    )


def criterion_matrices(surfaces: np.ndarray) -> np.ndarray:
    """Criterion for a stack of raw surfaces, shape (m, n_gamma, n_delta)."""
    return _accel.criterion(surfaces)[2]


def solution_set(bundle: CriterionBundle, tau: float) -> ParamSet:
    """Lower contour set {theta : Q(theta) <= tau}; tau = 0 gives exact solutions."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    return ParamSet(bundle.grid, bundle.criterion.values <= tau)


def population_solution_set(bundle: CriterionBundle, tol: float = POPULATION_TOL) -> ParamSet:
    return solution_set(bundle, tol)


def write_bundle_csv(bundle: CriterionBundle, path) -> None:
    """Columns: index, gamma_0.., delta_0.., f, phi, Q."""
    grid = bundle.grid
    header = (["index"] + [f"gamma_{j}" for j in range(grid.d_gamma)]
              + [f"delta_{j}" for j in range(grid.d_delta)] + ["f", "phi", "Q"])
    pts = grid.points
    f = bundle.surface.values
    q = bundle.criterion.values
    phi = bundle.max_fn.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(grid.total_points):
            ig, _ = grid.split_index(i)
            w.writerow([i] + [repr(float(v)) for v in pts[i]]
                       + [repr(float(f[i])), repr(float(phi[ig])), repr(float(q[i]))])


def write_set_csv(s: ParamSet, path) -> None:
    """Member coordinates of a set, one row per point, with its flat index."""
    grid = s.grid
    dg = getattr(grid, "d_gamma", grid.ndim)
    names = [f"gamma_{j}" for j in range(dg)] + [f"delta_{j}" for j in range(grid.ndim - dg)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + names)
        for i in s.indices:
            w.writerow([int(i)] + [repr(float(v)) for v in grid.points[i]])
