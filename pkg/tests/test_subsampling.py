import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gansets import testbed
from gansets.estimation import criterion_surface
from gansets.grid import GridFunction, ParamBox, ParamSet, build_grid
from gansets.objective import sample_surface
from gansets.subsampling import (SubsampleConfig, draw_subsamples, empirical_cdf, step_down,
                                 step_down_confidence_set, subsample_criteria, subsample_quantile,
                                 sup_statistic)


def test_config_validation_and_size_rule():
    assert SubsampleConfig().subsample_size(2000) == 44
    assert SubsampleConfig().subsample_size(10_000) == 100
    assert SubsampleConfig(beta=5.0).size_and_clamp(10) == (9, True)
    assert SubsampleConfig(beta=0.1).size_and_clamp(10) == (2, True)
    with pytest.raises(ValueError):
        SubsampleConfig(kappa=1.0)
    with pytest.raises(ValueError):
        SubsampleConfig(num_subsamples=0)
    with pytest.raises(ValueError):
        SubsampleConfig().subsample_size(2)


@given(st.integers(3, 5000), st.floats(0.05, 5), st.floats(0.05, 0.95))
def test_size_rule_bounds(n, beta, kappa):
    b = SubsampleConfig(beta=beta, kappa=kappa).subsample_size(n)
    assert 2 <= b < n


def test_plan_properties():
    cfg = SubsampleConfig(beta=1.0, kappa=0.5, num_subsamples=50, seed=3)
    plan = draw_subsamples(400, cfg)
    assert plan.index_sets.shape == (50, 20)
    for row in plan.index_sets:
        assert len(set(row)) == 20
        assert np.all(np.diff(row) > 0)
        assert row.min() >= 0 and row.max() < 400
    assert np.array_equal(plan.index_sets, draw_subsamples(400, cfg).index_sets)
    one = draw_subsamples(3, SubsampleConfig(num_subsamples=1))
    assert one.b == 2 and one.index_sets.shape == (1, 2)


def test_plan_uniform_over_pairs():
    # n=5, b=2: all C(5,2)=10 subsets should appear roughly equally often
    cfg = SubsampleConfig(beta=0.9, kappa=0.5, num_subsamples=20_000, seed=1)
    plan = draw_subsamples(5, cfg)
    assert plan.b == 2
    keys, counts = np.unique(plan.index_sets[:, 0] * 5 + plan.index_sets[:, 1], return_counts=True)
    assert len(keys) == math.comb(5, 2)
    expected = 20_000 / 10
    assert np.all(np.abs(counts - expected) < 5 * math.sqrt(expected))


def test_quantile_examples():
    assert subsample_quantile([0.1, 0.2, 0.3, 0.4], 0.25) == 0.3
    assert subsample_quantile([1, 2, 3, 4], 0.5) == 2
    assert subsample_quantile([0.7] * 9, 0.01) == 0.7
    with pytest.raises(ValueError):
        subsample_quantile([], 0.1)
    with pytest.raises(ValueError):
        subsample_quantile([1.0], 1.0)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), st.floats(0.01, 0.99))
def test_quantile_definition(stats, alpha):
    c = subsample_quantile(stats, alpha)
    assert c in stats
    assert empirical_cdf(stats, c) >= 1 - alpha
    assert all(empirical_cdf(stats, x) < 1 - alpha for x in stats if x < c)


def test_sup_statistic_properties(rs):
    grid = build_grid(ParamBox([0.0], [1.0], [0.0], [1.0]), (5, 6))
    q = criterion_surface(GridFunction(grid, rs.normal(size=30))).criterion
    zeros = ParamSet(grid, q.values == 0.0)
    assert sup_statistic(q, zeros, 7.0) == 0.0
    small = ParamSet(grid, rs.random(30) < 0.3) | zeros
    big = small | ParamSet(grid, rs.random(30) < 0.3)
    assert sup_statistic(q, small, 1.0) <= sup_statistic(q, big, 1.0)
    assert sup_statistic(q, big, 2.0) == 2 * sup_statistic(q, big, 1.0)
    with pytest.raises(ValueError):
        sup_statistic(q, ParamSet(grid, np.zeros(30, bool)), 1.0)


def test_constant_kernel_accepts_full_grid():
    p = testbed.make_constant_problem(0.0)
    grid = build_grid(p.box, (9, 9))
    data = testbed.generate_dataset(p, 100, 1)
    res = step_down_confidence_set(p, data, grid, 0.1, SubsampleConfig(num_subsamples=20))
    assert len(res.iterations) == 1
    assert res.final_set == ParamSet.full(grid)
    assert res.stopped_reason == "accepted"


def run_two_point(seed, alpha=0.1, n=500, zw=0.0):
    p = testbed.make_two_point_problem(1.0, 0.2, zw)
    grid = testbed.two_point_grid(p, 41)
    data = testbed.generate_dataset(p, n, seed)
    return grid, step_down_confidence_set(p, data, grid, alpha,
                                          SubsampleConfig(num_subsamples=100, seed=seed))


@pytest.mark.parametrize("seed", range(5))
def test_step_down_trace_invariants(seed):
    grid, res = run_two_point(seed, zw=1.0)
    recs = res.iterations
    assert recs[0].set == ParamSet.full(grid)
    for a, b in zip(recs, recs[1:]):
        assert b.set < a.set
        assert b.quantile <= a.quantile
        assert a.statistic > a.quantile
    assert recs[-1].statistic <= recs[-1].quantile
    assert res.stopped_reason == "accepted"
    assert not res.final_set.is_empty()


def test_alpha_monotone_on_shared_seed():
    for seed in range(4):
        _, wide = run_two_point(seed, alpha=0.1, zw=1.0)
        _, narrow = run_two_point(seed, alpha=0.5, zw=1.0)
        assert narrow.final_set <= wide.final_set


def test_set_monotone_quantiles(rs):
    p = testbed.make_two_point_problem(1.0, 0.2, 1.0)
    grid = testbed.two_point_grid(p, 21)
    data = testbed.generate_dataset(p, 300, 2)
    plan = draw_subsamples(300, SubsampleConfig(num_subsamples=50, seed=4))
    subs = subsample_criteria(p, data, grid, plan)
    for _ in range(10):
        s = ParamSet(grid, rs.random(grid.total_points) < 0.2)
        s2 = s | ParamSet(grid, rs.random(grid.total_points) < 0.2)
        if s.is_empty():
            continue
        c1 = subsample_quantile(math.sqrt(plan.b) * subs[:, s.mask].max(axis=1), 0.1)
        c2 = subsample_quantile(math.sqrt(plan.b) * subs[:, s2.mask].max(axis=1), 0.1)
        assert c1 <= c2


def test_subsample_criteria_match_direct():
    p = testbed.make_two_point_problem(1.0, 0.2)
    grid = testbed.two_point_grid(p, 13)
    data = testbed.generate_dataset(p, 120, 5)
    plan = draw_subsamples(120, SubsampleConfig(num_subsamples=4, seed=1))
    subs = subsample_criteria(p, data, grid, plan)
    for k in range(4):
        direct = criterion_surface(sample_surface(p, data.subset(plan.index_sets[k]), grid))
        np.testing.assert_array_equal(subs[k], direct.criterion.values)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 0.99))
def test_step_down_random_inputs_terminate_nested(seed, alpha):
    r = np.random.default_rng(seed)
    grid = build_grid(ParamBox([0.0], [1.0], [0.0], [1.0]), (4, 5))
    q_full = np.abs(r.normal(size=20)) * (r.random(20) < 0.8)
    q_full[r.integers(20)] = 0.0  # a criterion always attains zero
    q_subs = np.abs(r.normal(size=(15, 20)))
    recs, final, reason = step_down(q_full, q_subs, n=100, b=10, alpha=alpha, grid=grid)
    assert reason == "accepted"
    assert ParamSet(grid, q_full == 0.0) <= final
    for a, b in zip(recs, recs[1:]):
        assert b.set < a.set and b.quantile <= a.quantile


def test_result_json(tmp_path):
    grid, res = run_two_point(0)
    d = json.loads(res.to_json(tmp_path / "r.json"))
    assert d["alpha"] == 0.1 and d["b"] == 22 and d["M"] == 100 and d["seed"] == 0
    assert [it["j"] for it in d["iterations"]] == list(range(1, len(res.iterations) + 1))
    assert d["final_set"] == sorted(d["final_set"])
    assert d["iterations"][0]["cardinality"] == grid.total_points
