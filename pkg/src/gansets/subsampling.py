"""Subsampling quantiles and the step-down construction of confidence sets."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, rng
from .estimation import criterion_matrices, criterion_surface
from .grid import ParamGrid, ParamSet
from .objective import Dataset, MinimaxProblem, sample_surface, surface_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubsampleConfig:
    """Subsample size rule b = clamp(round(beta * n**kappa), 2, n - 1), M draws."""

    beta: float = 1.0
    kappa: float = 0.5
    num_subsamples: int = 200
    seed: int = 0
    rounding: str = "floor"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if int(self.num_subsamples) < 1:
            raise ValueError("num_subsamples must be >= 1")
        if self.rounding not in ("floor", "nearest"):
            raise ValueError("rounding must be 'floor' or 'nearest'")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")

    def subsample_size(self, n: int) -> int:
        return self.size_and_clamp(n)[0]

    def size_and_clamp(self, n: int) -> tuple[int, bool]:
        if n < 3:
            raise ValueError(f"subsampling needs n >= 3, got {n}")
        raw = self.beta * float(n) ** self.kappa
        # the small epsilon keeps floor(sqrt(k**2)) == k under rounding noise
        b = math.floor(raw + 1e-9) if self.rounding == "floor" else int(round(raw))
        clamped = min(max(b, 2), n - 1)
        return clamped, clamped != b


@dataclass(frozen=True, eq=False)
class SubsamplePlan:
    n: int
    b: int
    index_sets: np.ndarray = field(repr=False)  # (M, b), each row sorted
    clamped: bool = False

    @property
    def num_subsamples(self) -> int:
        return self.index_sets.shape[0]


def draw_subsamples(n: int, cfg: SubsampleConfig) -> SubsamplePlan:
    """M independent size-b subsets of range(n), each without replacement."""
    b, clamped = cfg.size_and_clamp(n)
    if clamped:
        log.info("subsample size clamped to %d for n=%d", b, n)
    m = int(cfg.num_subsamples)
    bg = rng.stream(int(cfg.seed), "subsamples", n, b)
    u = rng.uniforms(bg, m * b).reshape(m, b)
    out = np.empty((m, b), dtype=np.int64)
    perm = np.arange(n, dtype=np.int64)
    for k in range(m):
        perm[:] = np.arange(n)
        # partial Fisher-Yates: position j swaps with a uniform pick from j..n-1
        picks = np.arange(b) + np.floor(u[k] * (n - np.arange(b))).astype(np.int64)
        for j in range(b):
            p = picks[j]
            perm[j], perm[p] = perm[p], perm[j]
        out[k] = np.sort(perm[:b])
    out.setflags(write=False)
    return SubsamplePlan(n=n, b=b, index_sets=out, clamped=clamped)


def sup_statistic(criterion, s: ParamSet, scale: float) -> float:
    """scale * max of the criterion over the set ``s``."""
    if s.is_empty():
        raise ValueError("sup statistic over an empty set")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    vals = criterion.values if hasattr(criterion, "values") else np.asarray(criterion)
    return float(scale * vals[s.mask].max())


def empirical_cdf(stats, x: float) -> float:
    stats = np.asarray(stats, dtype=np.float64)
    return float(np.count_nonzero(stats <= x)) / stats.shape[0]


def subsample_quantile(stats, alpha: float) -> float:
    """Smallest sample value x with (#stats <= x) / M >= 1 - alpha."""
    stats = np.sort(np.asarray(stats, dtype=np.float64).ravel())
    if stats.size == 0:
        raise ValueError("no subsample statistics")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    cdf = np.searchsorted(stats, stats, side="right") / stats.shape[0]
    return float(stats[np.argmax(cdf >= 1.0 - alpha)])


@dataclass(frozen=True, eq=False)
class StepRecord:
    set: ParamSet
    statistic: float
    quantile: float


@dataclass(frozen=True, eq=False)
class ConfidenceResult:
    final_set: ParamSet
    iterations: list
    alpha: float
    stopped_reason: str
    n: int = 0
    b: int = 0
    num_subsamples: int = 0
    seed: int = 0

    def contains(self, s: ParamSet) -> bool:
        return s.issubset(self.final_set)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "b": self.b,
            "M": self.num_subsamples,
            "seed": self.seed,
            "stopped_reason": self.stopped_reason,
            "iterations": [
                {"j": j + 1, "cardinality": len(r.set), "T": r.statistic, "c": r.quantile}
                for j, r in enumerate(self.iterations)
            ],
            "final_cardinality": len(self.final_set),
            "final_set": [int(i) for i in self.final_set.indices],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def subsample_criteria(problem: MinimaxProblem, data: Dataset, grid: ParamGrid,
                       plan: SubsamplePlan) -> np.ndarray:
    """Criterion surfaces of every subsample, shape (M, total_points)."""
    m = plan.num_subsamples
    surfs = np.empty((m, grid.n_gamma, grid.n_delta))
    for k in range(m):
        surfs[k] = surface_matrix(problem, data.subset(plan.index_sets[k]), grid)
    return criterion_matrices(surfs).reshape(m, -1)


def step_down(q_full: np.ndarray, q_subs: np.ndarray, n: int, b: int, alpha: float,
              grid: ParamGrid) -> tuple[list, ParamSet, str]:
    """Run the step-down loop on precomputed full-sample and subsample criteria."""
    root_n, root_b = math.sqrt(n), math.sqrt(b)
    scaled_full = root_n * q_full
    current = ParamSet.full(grid)
    records = []
    while True:
        t = float(scaled_full[current.mask].max())
        sub = root_b * _accel.masked_row_max(q_subs, current.mask)
        c = subsample_quantile(sub, alpha)
        records.append(StepRecord(current, t, c))
        if t <= c:
            return records, current, "accepted"
        nxt = ParamSet(grid, scaled_full <= c)
        if len(nxt) >= len(current):
            log.warning("step-down failed to shrink the set at j=%d", len(records))
            return records, current, "fixpoint_guard"
        current = nxt


def step_down_confidence_set(problem: MinimaxProblem, data: Dataset, grid: ParamGrid,
                             alpha: float, cfg: SubsampleConfig) -> ConfidenceResult:
    """Subsampling step-down confidence set for the population solution set.

    One subsample plan is drawn and reused at every iteration, which keeps the
    quantiles monotone in the candidate set and the sets nested.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = data.n
    plan = draw_subsamples(n, cfg)
    full = criterion_surface(sample_surface(problem, data, grid)).criterion.values
    subs = subsample_criteria(problem, data, grid, plan)
    records, final, reason = step_down(full, subs, n, plan.b, alpha, grid)
    return ConfidenceResult(final_set=final, iterations=records, alpha=alpha,
                            stopped_reason=reason, n=n, b=plan.b,
                            num_subsamples=plan.num_subsamples, seed=int(cfg.seed))
