"""Compact parameter boxes, their uniform grids, grid subsets and set metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _accel


def _as_vector(v, name):
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64)).copy()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _axis_points(lo: float, hi: float, count: int) -> np.ndarray:
    # ((count-1-k)*lo + k*hi)/(count-1) is exactly mirror-symmetric when lo == -hi
    k = np.arange(count, dtype=np.float64)
    m = count - 1
    pts = ((m - k) * lo + k * hi) / m
    pts[0], pts[-1] = lo, hi
    return pts


@dataclass(frozen=True, eq=False)
class ParamBox:
    """Rectangle Gamma x Delta holding generator and discriminator parameters."""

    gamma_lower: np.ndarray
    gamma_upper: np.ndarray
    delta_lower: np.ndarray
    delta_upper: np.ndarray

    def __post_init__(self):
        for name in ("gamma_lower", "gamma_upper", "delta_lower", "delta_upper"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name))
        if self.gamma_lower.shape != self.gamma_upper.shape:
            raise ValueError("gamma bounds differ in length")
        if self.delta_lower.shape != self.delta_upper.shape:
            raise ValueError("delta bounds differ in length")
        if self.d_gamma < 1 or self.d_delta < 1:
            raise ValueError("both parameter blocks need at least one dimension")
        if not (np.all(self.gamma_lower < self.gamma_upper)
                and np.all(self.delta_lower < self.delta_upper)):
            raise ValueError("every lower bound must be strictly below its upper bound")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("box bounds must be finite")

    @property
    def d_gamma(self) -> int:
        return self.gamma_lower.shape[0]

    @property
    def d_delta(self) -> int:
        return self.delta_lower.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return np.concatenate([self.gamma_lower, self.delta_lower])

    @property
    def upper(self) -> np.ndarray:
        return np.concatenate([self.gamma_upper, self.delta_upper])

    def __eq__(self, other):
        if not isinstance(other, ParamBox):
            return NotImplemented
        return (self.d_gamma == other.d_gamma
                and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        return hash((self.d_gamma, self.lower.tobytes(), self.upper.tobytes()))

    def to_dict(self) -> dict:
        return {
            "gamma_lower": self.gamma_lower.tolist(),
            "gamma_upper": self.gamma_upper.tolist(),
            "delta_lower": self.delta_lower.tolist(),
            "delta_upper": self.delta_upper.tolist(),
        }


class Lattice:
    """Endpoint-inclusive rectangular lattice with C-order flat indexing.

    Used directly for the Gamma-marginal grid; :class:`ParamGrid` adds the
    split between generator and discriminator coordinates.
    """

    def __init__(self, lower, upper, counts):
        lower = _as_vector(lower, "lower")
        upper = _as_vector(upper, "upper")
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if len(counts) != lower.shape[0] or upper.shape != lower.shape:
            raise ValueError(
                f"need one count per dimension: {len(counts)} counts for "
                f"{lower.shape[0]} dimensions")
        if any(c < 2 for c in counts):
            raise ValueError(f"every grid count must be >= 2, got {counts}")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        self.lower = lower
        self.upper = upper
        self.counts = counts
        self.axes = tuple(_axis_points(lo, hi, c) for lo, hi, c in zip(lower, upper, counts))
        for ax in self.axes:
            ax.setflags(write=False)

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def total_points(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([ax[1] - ax[0] for ax in self.axes])

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum((self.upper - self.lower) ** 2)))

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points, shape (total_points, ndim), in flat-index order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    def point(self, index: int) -> np.ndarray:
        return self.points[self._check_index(index)]

    def coords(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(self._check_index(index), self.counts))

    def index(self, coords) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.counts))

    def nearest_index(self, point) -> int:
        """Flat index of the grid point closest to ``point`` (per-axis rounding)."""
        point = np.asarray(point, dtype=np.float64)
        coords = []
        for ax, p in zip(self.axes, point):
            coords.append(int(np.argmin(np.abs(ax - p))))
        return self.index(coords)

    def _check_index(self, index):
        index = int(index)
        if not 0 <= index < self.total_points:
            raise IndexError(f"flat index {index} outside [0, {self.total_points})")
        return index

    def __eq__(self, other):
        if not isinstance(other, Lattice) or type(self) is not type(other):
            return NotImplemented
        return (self.counts == other.counts
                and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper)
                and getattr(self, "d_gamma", None) == getattr(other, "d_gamma", None))

    def __hash__(self):
        return hash((self.counts, self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(counts={self.counts})"


class ParamGrid(Lattice):
    """Finite discretization of Theta = Gamma x Delta.

    The flat index factors as ``i = i_gamma * n_delta + i_delta`` so any
    function on the grid reshapes to a (n_gamma, n_delta) matrix.
    """

    def __init__(self, box: ParamBox, counts):
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if len(counts) != box.d_gamma + box.d_delta:
            raise ValueError(
                f"counts has length {len(counts)}, expected "
                f"d_gamma + d_delta = {box.d_gamma + box.d_delta}")
        super().__init__(box.lower, box.upper, counts)
        self.box = box
        self.d_gamma = box.d_gamma
        self.d_delta = box.d_delta

    @property
    def gamma_counts(self) -> tuple:
        return self.counts[: self.d_gamma]

    @property
    def delta_counts(self) -> tuple:
        return self.counts[self.d_gamma:]

    @property
    def n_gamma(self) -> int:
        return int(np.prod(self.gamma_counts))

    @property
    def n_delta(self) -> int:
        return int(np.prod(self.delta_counts))

    @cached_property
    def gamma_grid(self) -> Lattice:
        return Lattice(self.box.gamma_lower, self.box.gamma_upper, self.gamma_counts)

    @cached_property
    def delta_grid(self) -> Lattice:
        return Lattice(self.box.delta_lower, self.box.delta_upper, self.delta_counts)

    @property
    def gamma_points(self) -> np.ndarray:
        return self.gamma_grid.points

    @property
    def delta_points(self) -> np.ndarray:
        return self.delta_grid.points

    def split_index(self, index: int) -> tuple[int, int]:
        """Flat index -> (gamma-marginal index, delta-marginal index)."""
        return divmod(self._check_index(index), self.n_delta)

    def join_index(self, i_gamma: int, i_delta: int) -> int:
        return int(i_gamma) * self.n_delta + int(i_delta)


def build_grid(box: ParamBox, counts) -> ParamGrid:
    """Uniform endpoint-inclusive grid on ``box`` with ``counts`` points per axis."""
    return ParamGrid(box, counts)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real value at every point of a lattice."""

    grid: Lattice
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != self.grid.total_points:
            raise ValueError(
                f"got {vals.shape[0]} values for {self.grid.total_points} grid points")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"non-finite value at flat index {bad}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def matrix(self) -> np.ndarray:
        """Values as a (n_gamma, n_delta) array; only for ParamGrid functions."""
        return self.values.reshape(self.grid.n_gamma, self.grid.n_delta)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _values_of(other, self.grid))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _values_of(other, self.grid))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def _values_of(other, grid):
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise ValueError("grid functions live on different grids")
        return other.values
    return float(other)


@dataclass(frozen=True, eq=False)
class ParamSet:
    """A subset of grid points, stored as a membership mask."""

    grid: Lattice
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool).reshape(-1)
        if mask.shape[0] != self.grid.total_points:
            raise ValueError(
                f"mask length {mask.shape[0]} != total points {self.grid.total_points}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, grid: Lattice, indices) -> "ParamSet":
        mask = np.zeros(grid.total_points, dtype=bool)
        mask[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(grid, mask)

    @classmethod
    def full(cls, grid: Lattice) -> "ParamSet":
        return cls(grid, np.ones(grid.total_points, dtype=bool))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.mask]

    def is_empty(self) -> bool:
        return not self.mask.any()

    def __len__(self):
        return int(self.mask.sum())

    def __contains__(self, index):
        return bool(self.mask[int(index)])

    def _check(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError("sets live on different grids")
        return other

    def issubset(self, other: "ParamSet") -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)

    def issuperset(self, other: "ParamSet") -> bool:
        return other.issubset(self)

    def __le__(self, other):
        return self.issubset(other)

    def __ge__(self, other):
        return self.issuperset(other)

    def __lt__(self, other):
        return self.issubset(other) and len(self) < len(other)

    def __and__(self, other):
        self._check(other)
        return ParamSet(self.grid, self.mask & other.mask)

    def __or__(self, other):
        self._check(other)
        return ParamSet(self.grid, self.mask | other.mask)

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))


def _require_nonempty(s: ParamSet, what="set"):
    if s.is_empty():
        raise ValueError(f"{what} must be non-empty")


def point_to_set_distance(p, s: ParamSet) -> float:
    """Euclidean distance from the point ``p`` to the nearest member of ``s``."""
    _require_nonempty(s)
    p = np.asarray(p, dtype=np.float64).reshape(1, -1)
    return float(_accel.min_dist(p, s.points)[0])


def directed_hausdorff(a: ParamSet, b: ParamSet) -> float:
    """sup over a of the distance to b."""
    _require_nonempty(a, "first set")
    _require_nonempty(b, "second set")
    if a.grid != b.grid:
        raise ValueError("sets live on different grids")
    return float(_accel.min_dist(a.points, b.points).max())


def hausdorff_distance(a: ParamSet, b: ParamSet) -> float:
    """Hausdorff distance between two non-empty sets on the same grid."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def epsilon_expansion(s: ParamSet, eps: float) -> ParamSet:
    """All grid points within distance ``eps`` of ``s`` (``eps`` >= 0)."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    _require_nonempty(s)
    d = _accel.min_dist(s.grid.points, s.points)
    return ParamSet(s.grid, (d <= eps) | s.mask)
