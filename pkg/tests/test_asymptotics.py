import math

import numpy as np
import pytest

from gansets import testbed
from gansets.asymptotics import (GaussianLimitModel, _limit_from_draws, active_sets,
                                 estimate_limit_covariance, finite_difference_quotient,
                                 hadamard_derivative_criterion, hadamard_derivative_infsup,
                                 hadamard_derivative_sup, ks_distance, read_sample_csv,
                                 simulate_limit_distribution, solution_structure, write_sample_csv)
from gansets.estimation import criterion_surface
from gansets.grid import GridFunction, ParamBox, build_grid
from gansets.objective import kernel_values, population_surface


@pytest.fixture(scope="module")
def zero_noise():
    p = testbed.make_two_point_problem(1.0, 0.0)
    grid = testbed.two_point_grid(p, 41)
    return grid, population_surface(p, grid)


def gamma_direction(grid):
    return GridFunction(grid, grid.points[:, 0].copy())


def test_active_sets_two_point(zero_noise):
    grid, x = zero_noise
    act = active_sets(x, 1e-12)
    assert sorted(act.gamma0_points()[:, 0]) == [-1.0, 1.0]
    g1 = grid.gamma_grid.nearest_index([1.0])
    assert grid.delta_points[act.delta0_by_gamma[g1], 0].tolist() == [1.0]
    assert {tuple(p) for p in act.theta0.points} == {(1.0, 1.0), (-1.0, -1.0)}


def test_active_sets_constant_and_huge_tol(zero_noise):
    grid, x = zero_noise
    const = GridFunction(grid, np.full(grid.total_points, 3.0))
    for surf, tol in ((const, 0.0), (x, 1e9)):
        act = active_sets(surf, tol)
        assert len(act.gamma0) == grid.n_gamma
        assert all(len(d) == grid.n_delta for d in act.delta0_by_gamma.values())
        assert len(act.theta0) == grid.total_points
    with pytest.raises(ValueError):
        active_sets(x, -1.0)


def test_infsup_derivative_examples(zero_noise):
    grid, x = zero_noise
    c = GridFunction(grid, np.full(grid.total_points, 0.7))
    assert hadamard_derivative_infsup(x, c) == 0.7
    assert hadamard_derivative_infsup(x, x) == criterion_surface(x).optimal_value
    assert hadamard_derivative_infsup(x, gamma_direction(grid)) == -1.0


def test_criterion_derivative_examples(zero_noise, caplog):
    grid, x = zero_noise
    c = GridFunction(grid, np.full(grid.total_points, -2.0))
    assert hadamard_derivative_criterion(x, c) == 0.0
    assert hadamard_derivative_criterion(x, gamma_direction(grid)) == 2.0
    flat = GridFunction(grid, np.zeros(grid.total_points))
    with caplog.at_level("WARNING"):
        hadamard_derivative_criterion(flat, c)
    assert "whole gamma grid" in caplog.text


def test_criterion_derivative_zero_for_single_solution(rs):
    p = testbed.make_single_well_problem(0.5, 1.0)
    grid = build_grid(p.box, (21, 21))
    x0 = population_surface(p, grid)
    assert len(active_sets(x0).theta0) == 1
    for _ in range(10):
        h = GridFunction(grid, rs.normal(size=grid.total_points))
        assert hadamard_derivative_criterion(x0, h) == 0.0


def test_finite_difference_examples(zero_noise):
    grid, x = zero_noise
    c = GridFunction(grid, np.full(grid.total_points, 1.5))
    for t in (1e-1, 1e-3):
        assert finite_difference_quotient("sup", x, c, t) == pytest.approx(1.5, abs=1e-9)
        assert finite_difference_quotient("criterion", x, c, t) == pytest.approx(0.0, abs=1e-9)
    h = gamma_direction(grid)
    fd = finite_difference_quotient("infsup", x, h, 1e-3)
    assert abs(fd - hadamard_derivative_infsup(x, h)) < 1e-2
    with pytest.raises(ValueError):
        finite_difference_quotient("sup", x, h, 0.0)
    with pytest.raises(ValueError):
        finite_difference_quotient("nope", x, h, 1e-3)


def smooth_directions(grid):
    g, d = grid.points[:, 0], grid.points[:, 1]
    return [np.sin(g) + 0.3 * d, g * d, np.cos(2 * d) - g ** 2, np.exp(-g * g) * d, g ** 3 - d]


@pytest.mark.parametrize("kind,deriv", [("sup", hadamard_derivative_sup),
                                        ("infsup", hadamard_derivative_infsup)])
def test_fd_error_shrinks(zero_noise, kind, deriv):
    grid, x = zero_noise
    for hv in smooth_directions(grid):
        h = GridFunction(grid, hv)
        target = deriv(x, h)
        errs = [abs(finite_difference_quotient(kind, x, h, 0.1 / 2 ** k) - target)
                for k in range(11)]
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-3


def test_criterion_map_lipschitz(zero_noise, rs):
    grid, x = zero_noise
    for _ in range(30):
        h = GridFunction(grid, rs.normal(size=grid.total_points))
        t = float(rs.uniform(1e-3, 2.0))
        q = finite_difference_quotient("criterion", x, h, t)
        assert abs(q) <= 2 * np.abs(h.values).max() + 1e-9


def test_limit_model_validation():
    pts = np.array([[1.0, 1.0], [-1.0, -1.0]])
    with pytest.raises(ValueError):
        GaussianLimitModel(pts, np.array([[1.0, 2.0], [0.0, 1.0]]), "distinct_finite")
    with pytest.raises(ValueError):
        GaussianLimitModel(pts, np.array([[1.0, 2.0], [2.0, 1.0]]), "distinct_finite")
    with pytest.raises(ValueError):
        GaussianLimitModel(pts, np.array([[0.0, 0.0], [0.0, 1.0]]), "distinct_finite")
    with pytest.raises(ValueError):
        GaussianLimitModel(pts, np.eye(3), "distinct_finite")
    with pytest.raises(ValueError):
        GaussianLimitModel(pts, np.eye(2), "other")


def test_solution_structure():
    assert solution_structure([[1.0, 1.0], [-1.0, -1.0]], 1) == "distinct_finite"
    assert solution_structure([[1.0, 0.0], [-1.0, 0.0]], 1) == "general_finite"
    p = testbed.make_two_point_problem(0.0, 0.0)
    assert not p.distinct_solutions
    assert testbed.make_two_point_problem(1.0, 0.2).distinct_solutions


def test_simulation_k1_and_identity():
    one = GaussianLimitModel([[0.0, 0.0]], [[2.0]], "distinct_finite")
    assert np.all(simulate_limit_distribution(one, 500, 1) == 0.0)
    two = GaussianLimitModel([[1.0, 1.0], [-1.0, -1.0]], np.eye(2), "distinct_finite")
    s = simulate_limit_distribution(two, 20_000, 2)
    assert np.all(s >= 0)
    assert abs(s.mean() - 2 / math.sqrt(math.pi)) < 3 * s.std(ddof=1) / math.sqrt(s.size)


def test_simulation_scaling_and_partition_independence():
    cov = np.array([[1.0, 0.3, 0.1], [0.3, 2.0, -0.4], [0.1, -0.4, 0.5]])
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    a = simulate_limit_distribution(GaussianLimitModel(pts, cov, "distinct_finite"), 9000, 5)
    b = simulate_limit_distribution(GaussianLimitModel(pts, 4 * cov, "distinct_finite"), 9000, 5)
    np.testing.assert_allclose(np.quantile(b, [0.1, 0.5, 0.9]), 2 * np.quantile(a, [0.1, 0.5, 0.9]),
                               rtol=1e-12)
    # the first block of a longer run matches a shorter run
    c = simulate_limit_distribution(GaussianLimitModel(pts, cov, "distinct_finite"), 100, 5)
    assert np.array_equal(a[:100], c)


def test_general_formula_reduces_to_max_minus_min(rs):
    g = rs.normal(size=(500, 4))
    distinct = _limit_from_draws(g, np.arange(4), True)
    general = _limit_from_draws(g, np.arange(4), False)
    np.testing.assert_allclose(general, distinct, rtol=0, atol=1e-15)
    # shared gamma: points 0 and 1 belong to the same gamma
    shared = _limit_from_draws(g, np.array([0, 0, 1, 2]), False)
    top = np.stack([g[:, :2].max(1), g[:, 2], g[:, 3]], 1)
    inner = top.min(1)
    expect = np.max(np.stack([top[:, 0] - np.minimum(g[:, 0], inner),
                              top[:, 0] - np.minimum(g[:, 1], inner),
                              top[:, 1] - np.minimum(g[:, 2], inner),
                              top[:, 2] - np.minimum(g[:, 3], inner)], 1), 1)
    np.testing.assert_allclose(shared, expect, atol=1e-15)


def test_perfectly_correlated_solutions_give_exact_zero():
    cov = np.full((2, 2), 0.0033)
    model = GaussianLimitModel([[1.0, 1.0], [-1.0, -1.0]], cov, "distinct_finite")
    assert np.all(simulate_limit_distribution(model, 1000, 3) == 0.0)


def test_ks_examples():
    x = [0.3, 0.1, 0.7]
    assert ks_distance(x, x) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    assert ks_distance([0.0, 1.0], [0.0, 2.0]) == 0.5
    with pytest.raises(ValueError):
        ks_distance([], [1.0])


def test_ks_matches_scipy(rs):
    from scipy.stats import ks_2samp
    a, b = rs.normal(size=300), rs.normal(0.2, 1.1, size=450)
    assert ks_distance(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-15)


def test_covariance_errors_and_k1():
    p = testbed.make_constant_problem(1.0)
    data = testbed.generate_dataset(p, 50, 1)
    with pytest.raises(ValueError):
        estimate_limit_covariance(p, data, [[0.0, 0.0]])
    q = testbed.make_two_point_problem(1.0, 0.2)
    data = testbed.generate_dataset(q, 200, 1)
    m = estimate_limit_covariance(q, data, [[1.0, 1.0]])
    vals = kernel_values(q, data, [[1.0, 1.0]])[:, 0]
    assert m.covariance.shape == (1, 1)
    assert m.covariance[0, 0] == pytest.approx(vals.var(ddof=1), rel=1e-12)
    with pytest.raises(ValueError):
        estimate_limit_covariance(q, data, np.zeros((0, 2)))


@pytest.mark.parametrize("zw", [0.0, 1.0])
def test_covariance_matches_analytic(zw):
    p = testbed.make_two_point_problem(1.0, 0.2, zw)
    data = testbed.generate_dataset(p, 100_000, 11)
    sols = p.known_solutions
    m = estimate_limit_covariance(p, data, sols)
    truth = testbed.two_point_covariance(1.0, 0.2, zw)
    v = kernel_values(p, data, sols)
    c = v - v.mean(axis=0)
    prods = c[:, :, None] * c[:, None, :]
    se = prods.std(axis=0, ddof=1) / math.sqrt(data.n)
    assert np.all(np.abs(m.covariance - truth) <= 4 * se)
    assert m.structure == "distinct_finite"


def test_sample_csv_roundtrip(tmp_path):
    vals = np.array([0.1, 1 / 3, 2.0])
    write_sample_csv(vals, tmp_path / "s.csv", "draw")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "draw"
    assert np.array_equal(read_sample_csv(tmp_path / "s.csv"), vals)
