"""Command-line entry point: ``gansets <subcommand> --config cfg.json``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import _accel, rng
from .estimation import criterion_surface, slackness, solution_set, write_bundle_csv, write_set_csv
from .experiments import (COVERAGE_COLUMNS, CONSISTENCY_COLUMNS, EXPERIMENTS, LIMIT_COLUMNS,
                          ConfigError, ExperimentConfig, build_experiment_grid, build_problem)
from .objective import read_dataset_csv, sample_surface, write_dataset_csv
from .subsampling import step_down_confidence_set

log = logging.getLogger("gansets")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CSV_HELP = f"""\
output files (all CSV files have a header row; floats are written with full
round-trip precision):

  dataset.csv          {",".join(["x_0..x_{dX-1}", "z_0..z_{dZ-1}"])}
  bundle.csv           index, gamma_0.., delta_0.., f, phi, Q
                       (flat grid index, coordinates, sample objective,
                       max-function at the point's gamma, criterion)
  solution_set.csv     index, gamma_0.., delta_0..   (members of the set)
  confset.json         alpha, n, b, M, seed, stopped_reason, iterations
                       [j, cardinality, T, c], final_cardinality, final_set
  confset_set.csv      index, gamma_0.., delta_0..
  consistency_rows.csv {", ".join(CONSISTENCY_COLUMNS)}
  coverage_rows.csv    {", ".join(COVERAGE_COLUMNS)}
  limit_rows.csv       {", ".join(LIMIT_COLUMNS)}
  limit_simulated.csv  draw                (one simulated limit draw per row)
  limit_statistics_n<n>.csv  statistic     (one replication statistic per row)
  <kind>_summary.json  per-n summaries and a provenance block

exit codes: 0 success, 2 configuration error, 3 numerical error
"""


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    return cfg.with_overrides(seed=args.seed, out_dir=args.out_dir)


def _dataset(cfg, problem):
    if cfg.data_csv:
        try:
            return read_dataset_csv(cfg.data_csv)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read dataset: {exc}") from exc
    n = cfg.sample_sizes[0]
    return problem.sampler(n, rng.derive_seed(cfg.seed, "data", n, 0))


def cmd_solve(cfg: ExperimentConfig, threads: int) -> dict:
    problem = build_problem(cfg)
    grid = build_experiment_grid(cfg, problem)
    data = _dataset(cfg, problem)
    bundle = criterion_surface(sample_surface(problem, data, grid))
    tau = cfg.tau if cfg.tau is not None else slackness(cfg.slackness, data.n)
    est = solution_set(bundle, tau)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if not cfg.data_csv:
        write_dataset_csv(data, os.path.join(cfg.out_dir, "dataset.csv"))
    write_bundle_csv(bundle, os.path.join(cfg.out_dir, "bundle.csv"))
    write_set_csv(est, os.path.join(cfg.out_dir, "solution_set.csv"))
    return {"n": data.n, "optimal_value": bundle.optimal_value, "tau": tau,
            "cardinality": len(est), "solution_points": est.points.tolist()}


def cmd_confset(cfg: ExperimentConfig, threads: int) -> dict:
    from dataclasses import replace
    problem = build_problem(cfg)
    grid = build_experiment_grid(cfg, problem)
    data = _dataset(cfg, problem)
    sub = replace(cfg.subsampling, seed=rng.derive_seed(cfg.seed, "subsample", data.n, 0))
    res = step_down_confidence_set(problem, data, grid, cfg.alpha, sub)
    os.makedirs(cfg.out_dir, exist_ok=True)
    res.to_json(os.path.join(cfg.out_dir, "confset.json"))
    write_set_csv(res.final_set, os.path.join(cfg.out_dir, "confset_set.csv"))
    out = res.to_dict()
    out.pop("final_set")
    return out


def _experiment(name):
    def run(cfg, threads):
        report = EXPERIMENTS[name](cfg, threads=threads)
        paths = report.write(cfg.out_dir)
        return {"summaries": report.summaries, "files": paths}
    return run


COMMANDS = {
    "solve": (cmd_solve, "estimate the optimal value and the solution set for one dataset"),
    "confset": (cmd_confset, "run the subsampling step-down procedure on one dataset"),
    "consistency": (_experiment("consistency"), "Monte Carlo study of set-estimator distances"),
    "coverage": (_experiment("coverage"), "Monte Carlo coverage of the confidence set"),
    "limit-check": (_experiment("limit-check"),
                    "compare the scaled criterion supremum with its simulated limit"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gansets", description="Set estimation and inference for minimax (GAN) problems.",
        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = subs.add_parser(name, help=text, description=text, epilog=CSV_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="experiment config (JSON object)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out-dir", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for replications (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", _accel.backend())
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = _load_config(args)
        fn = COMMANDS[args.command][0]
        with np.errstate(over="ignore", invalid="ignore"):
            result = fn(cfg, args.threads)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        # NonFiniteKernelError is an ArithmeticError
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # ConfigError and invalid parameter values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
