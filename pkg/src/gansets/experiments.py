"""Config-driven Monte Carlo studies: consistency, coverage and limit checks.

Every replication is a pure function of the master seed, the sample size and
the replication index, so replications can run on any number of threads and
the reports are assembled in a fixed order.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, rng
from .asymptotics import (estimate_limit_covariance, ks_distance, simulate_limit_distribution,
                          sup_over_solutions, write_sample_csv)
from .estimation import (SlacknessRule, criterion_surface, population_solution_set,
                         slackness, solution_set)
from .grid import ParamGrid, ParamSet, build_grid, directed_hausdorff
from .objective import MinimaxProblem, known_solution_indices, population_surface, sample_surface
from .subsampling import SubsampleConfig, step_down_confidence_set
from .testbed import generate_dataset, problem_from_spec

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class MissingGroundTruthError(ConfigError):
    """The problem has neither a population oracle nor a known solution set."""


_DEFAULT_COUNTS = {"two_point": 41, "single_well": 41, "constant": 21}

_KEYS = {"problem", "grid_counts", "sample_sizes", "replications", "alpha", "slackness",
         "subsampling", "limit", "population_mc_draws", "seed", "out_dir", "tau", "data_csv"}


@dataclass(frozen=True)
class LimitConfig:
    """Sizes for the limit-law check."""

    draws: int = 10_000
    covariance_n: int = 100_000

    def __post_init__(self):
        if int(self.draws) < 1 or int(self.covariance_n) < 2:
            raise ValueError("limit draws must be >= 1 and covariance_n >= 2")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun an experiment bit-for-bit.

    Parameters
    ----------
    problem : dict
        Problem spec with a ``kind`` key, see :func:`gansets.testbed.problem_from_spec`.
    grid_counts : tuple of int
        Points per parameter coordinate, gamma coordinates first.
    sample_sizes : tuple of int
        Strictly increasing sample sizes n.
    replications : int
        Replications R per sample size.
    alpha : float
        Confidence level parameter for coverage studies.
    slackness : SlacknessRule
        tau_n rule for estimated solution sets.
    subsampling : SubsampleConfig
        Subsample size rule and count; its seed is replaced per replication.
    limit : LimitConfig
        Simulation sizes for the limit-law check.
    population_mc_draws : int or None
        Monte Carlo fallback size when the problem has no population oracle.
    seed : int
        Master seed.
    out_dir : str
        Output directory for reports.
    tau : float or None
        Fixed slackness for ``solve`` (defaults to the rule at n).
    data_csv : str or None
        Dataset file for ``solve`` / ``confset`` instead of a generated sample.
    """

    problem: dict
    grid_counts: tuple
    sample_sizes: tuple = (1000,)
    replications: int = 50
    alpha: float = 0.1
    slackness: SlacknessRule = field(default_factory=SlacknessRule)
    subsampling: SubsampleConfig = field(default_factory=SubsampleConfig)
    limit: LimitConfig = field(default_factory=LimitConfig)
    population_mc_draws: int | None = None
    seed: int = 0
    out_dir: str = "results"
    tau: float | None = None
    data_csv: str | None = None

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or any(n < 3 for n in sizes):
            raise ConfigError(f"sample sizes must be >= 3, got {list(sizes)}")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"sample sizes must be strictly increasing, got {list(sizes)}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.seed) < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.tau is not None and self.tau < 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        object.__setattr__(self, "sample_sizes", sizes)
        object.__setattr__(self, "grid_counts", tuple(int(c) for c in self.grid_counts))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "problem" not in raw or not isinstance(raw["problem"], dict):
            raise ConfigError("config needs a 'problem' object with a 'kind' key")
        try:
            problem = dict(raw["problem"])
            counts = raw.get("grid_counts")
            if counts is None:
                kind = problem.get("kind")
                if kind not in _DEFAULT_COUNTS:
                    raise ConfigError(f"grid_counts is required for problem kind {kind!r}")
                counts = (_DEFAULT_COUNTS[kind],) * 2
            sub = dict(raw.get("subsampling", {}))
            sub.pop("seed", None)
            return cls(
                problem=problem,
                grid_counts=tuple(counts),
                sample_sizes=tuple(raw.get("sample_sizes", (1000,))),
                replications=int(raw.get("replications", 50)),
                alpha=float(raw.get("alpha", 0.1)),
                slackness=SlacknessRule(**raw.get("slackness", {})),
                subsampling=SubsampleConfig(**sub),
                limit=LimitConfig(**raw.get("limit", {})),
                population_mc_draws=raw.get("population_mc_draws"),
                seed=int(raw.get("seed", 0)),
                out_dir=str(raw.get("out_dir", "results")),
                tau=None if raw.get("tau") is None else float(raw["tau"]),
                data_csv=raw.get("data_csv"),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        sub = self.subsampling
        return {
            "problem": self.problem,
            "grid_counts": list(self.grid_counts),
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "alpha": self.alpha,
            "slackness": {"scale": self.slackness.scale, "exponent": self.slackness.exponent},
            "subsampling": {"beta": sub.beta, "kappa": sub.kappa,
                            "num_subsamples": sub.num_subsamples, "rounding": sub.rounding},
            "limit": {"draws": self.limit.draws, "covariance_n": self.limit.covariance_n},
            "population_mc_draws": self.population_mc_draws,
            "seed": self.seed,
            "tau": self.tau,
            "data_csv": self.data_csv,
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        from dataclasses import replace
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


@dataclass
class ExperimentReport:
    """Per-replication rows, per-n summaries and a provenance block."""

    kind: str
    columns: list
    rows: list
    summaries: list
    provenance: dict
    samples: dict = field(default_factory=dict)  # file stem -> (column, values)

    def summary_dict(self) -> dict:
        return {"kind": self.kind, "summaries": self.summaries, "provenance": self.provenance}

    def write(self, out_dir) -> list:
        """Write ``<kind>_rows.csv``, ``<kind>_summary.json`` and any sample CSVs."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        rows_path = os.path.join(out_dir, f"{self.kind}_rows.csv")
        with open(rows_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in self.columns])
        paths.append(rows_path)
        js = os.path.join(out_dir, f"{self.kind}_summary.json")
        with open(js, "w") as fh:
            fh.write(json.dumps(self.summary_dict(), indent=2, allow_nan=False) + "\n")
        paths.append(js)
        for stem, (column, values) in sorted(self.samples.items()):
            p = os.path.join(out_dir, f"{stem}.csv")
            write_sample_csv(values, p, column)
            paths.append(p)
        return paths


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------- shared setup


def build_problem(cfg: ExperimentConfig) -> MinimaxProblem:
    try:
        return problem_from_spec(cfg.problem)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem spec: {exc}") from exc


def build_experiment_grid(cfg: ExperimentConfig, problem: MinimaxProblem) -> ParamGrid:
    d = problem.box.d_gamma + problem.box.d_delta
    if len(cfg.grid_counts) != d:
        raise ConfigError(f"grid_counts needs {d} entries for problem {problem.name!r}, "
                          f"got {list(cfg.grid_counts)}")
    try:
        return build_grid(problem.box, cfg.grid_counts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def grid_solution_set(cfg: ExperimentConfig, problem: MinimaxProblem,
                      grid: ParamGrid) -> ParamSet:
    """Grid version of the population solution set used as ground truth."""
    if problem.population_oracle is not None or cfg.population_mc_draws:
        pop = population_surface(problem, grid, cfg.population_mc_draws,
                                 rng.derive_seed(cfg.seed, "population"))
        theta0 = population_solution_set(criterion_surface(pop))
        if problem.known_solutions is not None:
            known = ParamSet.from_indices(grid, known_solution_indices(problem, grid))
            if known != theta0:
                log.warning("grid solution set (%d points) differs from the nearest grid "
                            "points of the known solutions (%d points)", len(theta0), len(known))
        return theta0
    if problem.known_solutions is not None:
        return ParamSet.from_indices(grid, known_solution_indices(problem, grid))
    raise MissingGroundTruthError(
        f"problem {problem.name!r} has no population oracle or known solution set")


def replication_seeds(master: int, n: int, r: int) -> dict:
    """Independent data and subsample seeds for replication r at sample size n."""
    return {"data_seed": rng.derive_seed(master, "data", n, r),
            "subsample_seed": rng.derive_seed(master, "subsample", n, r)}


def _run_ordered(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _quartiles(values) -> dict:
    q1, med, q3 = np.quantile(np.asarray(values, dtype=np.float64), [0.25, 0.5, 0.75])
    return {"q25": float(q1), "median": float(med), "q75": float(q3)}


def _provenance(cfg: ExperimentConfig, problem: MinimaxProblem, grid: ParamGrid,
                theta0: ParamSet) -> dict:
    return {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "problem": problem.name,
        "grid_counts": list(grid.counts),
        "grid_spacing": [float(s) for s in grid.spacing],
        "theta0_indices": [int(i) for i in theta0.indices],
        "seed_rule": "data_seed = derive_seed(seed, 'data', n, r); "
                     "subsample_seed = derive_seed(seed, 'subsample', n, r)",
    }


# ---------------------------------------------------------------- consistency

CONSISTENCY_COLUMNS = [
    "n", "rep", "data_seed", "tau", "card_tau", "dH_tau", "d_est_to_true_tau",
    "d_true_to_est_tau", "card_zero", "dH_zero", "d_est_to_true_zero", "d_true_to_est_zero",
]


def run_consistency_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Hausdorff and one-sided distances of estimated solution sets to the truth."""
    problem = build_problem(cfg)
    grid = build_experiment_grid(cfg, problem)
    theta0 = grid_solution_set(cfg, problem, grid)

    def one(task):
        n, r = task
        seeds = replication_seeds(cfg.seed, n, r)
        data = generate_dataset(problem, n, seeds["data_seed"])
        bundle = criterion_surface(sample_surface(problem, data, grid))
        tau = slackness(cfg.slackness, n)
        row = {"n": n, "rep": r, "data_seed": seeds["data_seed"], "tau": tau}
        for tag, level in (("tau", tau), ("zero", 0.0)):
            est = solution_set(bundle, level)
            fwd = directed_hausdorff(est, theta0)
            back = directed_hausdorff(theta0, est)
            row.update({f"card_{tag}": len(est), f"dH_{tag}": max(fwd, back),
                        f"d_est_to_true_{tag}": fwd, f"d_true_to_est_{tag}": back})
        return row

    tasks = [(n, r) for n in cfg.sample_sizes for r in range(cfg.replications)]
    rows = _run_ordered(one, tasks, threads)
    summaries = []
    for n in cfg.sample_sizes:
        sel = [row for row in rows if row["n"] == n]
        summ = {"n": n, "replications": len(sel), "tau": sel[0]["tau"]}
        for col in CONSISTENCY_COLUMNS[5:8] + CONSISTENCY_COLUMNS[9:]:
            summ[col] = _quartiles([row[col] for row in sel])
        summ["nested_every_rep"] = all(row["card_tau"] >= row["card_zero"] for row in sel)
        summaries.append(summ)
    return ExperimentReport("consistency", CONSISTENCY_COLUMNS, rows, summaries,
                            _provenance(cfg, problem, grid, theta0))


# ------------------------------------------------------------------- coverage

COVERAGE_COLUMNS = [
    "n", "rep", "data_seed", "subsample_seed", "b", "M", "alpha", "covered", "iterations",
    "final_cardinality", "stopped_reason", "strictly_nested",
]


def _strictly_nested(records) -> bool:
    sets = [rec.set for rec in records]
    return all(b < a for a, b in zip(sets, sets[1:]))


def run_coverage_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Empirical frequency of the event {grid solution set inside the confidence set}."""
    problem = build_problem(cfg)
    grid = build_experiment_grid(cfg, problem)
    theta0 = grid_solution_set(cfg, problem, grid)
    from dataclasses import replace

    def one(task):
        n, r = task
        seeds = replication_seeds(cfg.seed, n, r)
        data = generate_dataset(problem, n, seeds["data_seed"])
        sub = replace(cfg.subsampling, seed=seeds["subsample_seed"])
        res = step_down_confidence_set(problem, data, grid, cfg.alpha, sub)
        return {"n": n, "rep": r, **seeds, "b": res.b, "M": res.num_subsamples,
                "alpha": cfg.alpha, "covered": res.contains(theta0),
                "iterations": len(res.iterations), "final_cardinality": len(res.final_set),
                "stopped_reason": res.stopped_reason,
                "strictly_nested": _strictly_nested(res.iterations)}

    tasks = [(n, r) for n in cfg.sample_sizes for r in range(cfg.replications)]
    rows = _run_ordered(one, tasks, threads)
    summaries = []
    for n in cfg.sample_sizes:
        sel = [row for row in rows if row["n"] == n]
        p = sum(bool(row["covered"]) for row in sel) / len(sel)
        summaries.append({
            "n": n, "replications": len(sel), "alpha": cfg.alpha, "b": sel[0]["b"],
            "M": sel[0]["M"], "coverage": p, "binomial_se": math.sqrt(p * (1 - p) / len(sel)),
            "mean_iterations": float(np.mean([row["iterations"] for row in sel])),
            "mean_final_cardinality": float(np.mean([row["final_cardinality"] for row in sel])),
            "all_accepted": all(row["stopped_reason"] == "accepted" for row in sel),
            "all_strictly_nested": all(row["strictly_nested"] for row in sel),
        })
    return ExperimentReport("coverage", COVERAGE_COLUMNS, rows, summaries,
                            _provenance(cfg, problem, grid, theta0))


# ---------------------------------------------------------------- limit check

LIMIT_COLUMNS = ["n", "rep", "data_seed", "statistic"]


def run_limit_check(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Compare sqrt(n) * max over the solution set of the sample criterion with
    draws from the simulated Gaussian limit (KS distance per n)."""
    problem = build_problem(cfg)
    grid = build_experiment_grid(cfg, problem)
    theta0 = grid_solution_set(cfg, problem, grid)
    pts = theta0.points

    def one(task):
        n, r = task
        seed = replication_seeds(cfg.seed, n, r)["data_seed"]
        data = generate_dataset(problem, n, seed)
        crit = criterion_surface(sample_surface(problem, data, grid)).criterion
        return {"n": n, "rep": r, "data_seed": seed,
                "statistic": sup_over_solutions(crit, theta0, n)}

    tasks = [(n, r) for n in cfg.sample_sizes for r in range(cfg.replications)]
    rows = _run_ordered(one, tasks, threads)

    if len(pts) == 1:
        sim = np.zeros(cfg.limit.draws)
        cov, structure = [[None]], "single"
    else:
        big = generate_dataset(problem, cfg.limit.covariance_n,
                               rng.derive_seed(cfg.seed, "covariance"))
        try:
            model = estimate_limit_covariance(problem, big, pts)
        except ValueError as exc:
            raise ArithmeticError(f"limit covariance: {exc}") from exc
        sim = simulate_limit_distribution(model, cfg.limit.draws,
                                          rng.derive_seed(cfg.seed, "limit_draws"))
        cov, structure = model.covariance.tolist(), model.structure

    summaries, samples = [], {"limit_simulated": ("draw", sim)}
    for n in cfg.sample_sizes:
        stats = np.array([row["statistic"] for row in rows if row["n"] == n])
        samples[f"limit_statistics_n{n}"] = ("statistic", stats)
        summaries.append({
            "n": n, "replications": int(stats.size), "K": len(pts), "structure": structure,
            "limit_draws": cfg.limit.draws, "covariance_n": cfg.limit.covariance_n,
            "ks_distance": ks_distance(stats, sim),
            "statistic_mean": float(stats.mean()), "simulated_mean": float(sim.mean()),
            "statistic_quartiles": _quartiles(stats), "simulated_quartiles": _quartiles(sim),
        })
    prov = _provenance(cfg, problem, grid, theta0)
    prov["limit_covariance"] = cov
    return ExperimentReport("limit", LIMIT_COLUMNS, rows, summaries, prov, samples)


EXPERIMENTS = {
    "consistency": run_consistency_experiment,
    "coverage": run_coverage_experiment,
    "limit-check": run_limit_check,
}
