"""Toy minimax problems with known population solutions and seeded samplers.

Two-point problem
    F(x, z, gamma, delta) = -(delta - x*gamma)**2 + (gamma**2 - 1)**2, X ~ N(mu, sigma**2).
    The population solution set is {(g, mu*g), (-g, -mu*g)} with
    g = sqrt(1 + sigma**2 / 2) and optimal value -sigma**2 - sigma**4 / 4.
    An optional term ``z_weight * gamma * (z - 1/2)`` with Z ~ U(0, 1) has mean
    zero, so it leaves every population quantity unchanged while making the
    kernel values at the two solutions imperfectly correlated.

Single well
    F = -(delta - x)**2 + gamma**2 with X ~ N(mu, sigma**2); the unique solution
    is (0, mu), so the solution set has K = 1 element.

Logistic GAN
    G(z, gamma) = gamma_1 + gamma_2 z, D(x, delta) = sigmoid(delta_1 + delta_2 x),
    F = ln D(x, delta) + ln(1 - D(G(z, gamma), delta)), X ~ N(m, s**2), Z ~ U(0, 1).
"""
from __future__ import annotations

import functools
import logging
import math

import numpy as np
from ._accel import njit

from . import rng
from .estimation import criterion_surface, population_solution_set
from .grid import ParamBox, ParamGrid, build_grid
from .objective import Dataset, MinimaxProblem, population_surface

log = logging.getLogger(__name__)


def generate_dataset(problem: MinimaxProblem, n: int, seed: int) -> Dataset:
    """n i.i.d. paired draws from the problem's sampler (deterministic per seed)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return problem.sampler(int(n), int(seed))


# ---------------------------------------------------------------- two-point


@njit(nogil=True)
def _two_point_scalar(x, z, g, d):
    r = d[0] - x[0] * g[0]
    s = g[0] * g[0] - 1.0
    return -r * r + s * s


def _two_point_scalar_with_z(weight):
    @njit(nogil=True)
    def kern(x, z, g, d):
        r = d[0] - x[0] * g[0]
        s = g[0] * g[0] - 1.0
        return -r * r + s * s + weight * g[0] * (z[0] - 0.5)

    return kern


def two_point_solution_gamma(sigma: float) -> float:
    return math.sqrt(1.0 + sigma * sigma / 2.0)


def two_point_optimal_value(sigma: float) -> float:
    return -sigma ** 2 - sigma ** 4 / 4.0


def make_two_point_problem(mu: float, sigma: float, z_weight: float = 0.0) -> MinimaxProblem:
    """Two-solution quadratic problem with closed-form population quantities.

    The box is Gamma = [-2g, 2g], Delta = [-2wg, 2wg] with w = |mu| (or 1 when
    mu = 0), so odd grids with (count - 1) divisible by 4 put both solutions
    exactly on grid points.
    """
    mu, sigma, z_weight = float(mu), float(sigma), float(z_weight)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    g = two_point_solution_gamma(sigma)
    if mu == 0:
        log.warning("mu = 0: both solutions share delta = 0, so the distinct-solution "
                    "condition fails")
    w = abs(mu) if mu != 0 else 1.0
    box = ParamBox([-2 * g], [2 * g], [-2 * w * g], [2 * w * g])

    if z_weight == 0.0:
        def kernel(x, z, gamma, delta):
            r = delta[..., 0] - x[..., 0] * gamma[..., 0]
            s = gamma[..., 0] * gamma[..., 0] - 1.0
            return -r * r + s * s

        scalar = _two_point_scalar
    else:
        def kernel(x, z, gamma, delta):
            r = delta[..., 0] - x[..., 0] * gamma[..., 0]
            s = gamma[..., 0] * gamma[..., 0] - 1.0
            return -r * r + s * s + z_weight * gamma[..., 0] * (z[..., 0] - 0.5)

        scalar = _two_point_scalar_with_z(z_weight)

    def oracle(gamma, delta):
        gm, dl = gamma[..., 0], delta[..., 0]
        return -(dl - mu * gm) ** 2 - sigma ** 2 * gm ** 2 + (gm ** 2 - 1.0) ** 2

    def sampler(n, seed):
        x = mu + sigma * rng.normals(rng.stream(seed, "two_point", "x"), n)
        z = rng.uniforms(rng.stream(seed, "two_point", "z"), n)
        return Dataset(x[:, None], z[:, None])

    sols = np.array([[g, mu * g], [-g, -mu * g]])
    return MinimaxProblem(
        name="two_point", box=box, d_x=1, d_z=1, kernel=kernel, sampler=sampler,
        scalar_kernel=scalar, population_oracle=oracle, known_solutions=sols,
        params={"kind": "two_point", "mu": mu, "sigma": sigma, "z_weight": z_weight},
    )


def two_point_grid(problem: MinimaxProblem, count: int = 41) -> ParamGrid:
    """Square grid on the two-point box; count - 1 must be divisible by 4."""
    if (count - 1) % 4:
        raise ValueError(f"count - 1 must be divisible by 4 to hit the solutions, got {count}")
    return build_grid(problem.box, (count, count))


def two_point_covariance(mu: float, sigma: float, z_weight: float = 0.0) -> np.ndarray:
    """Exact covariance of F(X, Z, theta_k) at the two population solutions."""
    g = two_point_solution_gamma(sigma)
    gammas = np.array([g, -g])
    a = sigma ** 2 * gammas ** 2
    # F_k = -a_k * eps**2 + const + w * gamma_k * (Z - 1/2); Var(eps**2) = 2, Var(Z) = 1/12
    return 2.0 * np.outer(a, a) + z_weight ** 2 * np.outer(gammas, gammas) / 12.0


# -------------------------------------------------------------- single well


@njit(nogil=True)
def _single_well_scalar(x, z, g, d):
    r = d[0] - x[0]
    return -r * r + g[0] * g[0]


def make_single_well_problem(mu: float = 0.0, sigma: float = 1.0) -> MinimaxProblem:
    """Unique-solution problem on Gamma = [-1, 1], Delta = [mu - 1, mu + 1].

    Odd grid counts put the solution (0, mu) on a grid point.
    """
    mu, sigma = float(mu), float(sigma)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")

    def kernel(x, z, gamma, delta):
        r = delta[..., 0] - x[..., 0]
        return -r * r + gamma[..., 0] * gamma[..., 0]

    def oracle(gamma, delta):
        return -(delta[..., 0] - mu) ** 2 - sigma ** 2 + gamma[..., 0] ** 2

    def sampler(n, seed):
        x = mu + sigma * rng.normals(rng.stream(seed, "single_well", "x"), n)
        z = rng.uniforms(rng.stream(seed, "single_well", "z"), n)
        return Dataset(x[:, None], z[:, None])

    return MinimaxProblem(
        name="single_well", box=ParamBox([-1.0], [1.0], [mu - 1.0], [mu + 1.0]), d_x=1,
        d_z=1, kernel=kernel, sampler=sampler, scalar_kernel=_single_well_scalar,
        population_oracle=oracle, known_solutions=np.array([[0.0, mu]]),
        params={"kind": "single_well", "mu": mu, "sigma": sigma},
    )


# ------------------------------------------------------------- logistic GAN


@njit(nogil=True)
def _log_sigmoid(a):
    if a >= 0:
        return -math.log1p(math.exp(-a))
    return a - math.log1p(math.exp(a))


@njit(nogil=True)
def _logistic_scalar(x, z, g, d):
    fake = g[0] + g[1] * z[0]
    return _log_sigmoid(d[0] + d[1] * x[0]) + _log_sigmoid(-(d[0] + d[1] * fake))


def _np_log_sigmoid(a):
    return -np.logaddexp(0.0, -a)


def _logistic_kernel(x, z, gamma, delta):
    fake = gamma[..., 0] + gamma[..., 1] * z[..., 0]
    return (_np_log_sigmoid(delta[..., 0] + delta[..., 1] * x[..., 0])
            + _np_log_sigmoid(-(delta[..., 0] + delta[..., 1] * fake)))


def _quadrature_oracle(m, s, nodes=64, chunk=4096):
    hx, hw = np.polynomial.hermite_e.hermegauss(nodes)
    xs = m + s * hx
    xw = hw / math.sqrt(2.0 * math.pi)
    lz, lw = np.polynomial.legendre.leggauss(nodes)
    zs = 0.5 * (lz + 1.0)
    zw = 0.5 * lw

    def oracle(gamma, delta):
        gamma, delta = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(delta, float))
        shape = gamma.shape[:-1]
        gf = gamma.reshape(-1, 2)
        df = delta.reshape(-1, 2)
        out = np.empty(gf.shape[0])
        for a in range(0, gf.shape[0], chunk):
            g = gf[a:a + chunk]
            d = df[a:a + chunk]
            real = _np_log_sigmoid(d[:, :1] + d[:, 1:] * xs) @ xw
            fake = g[:, :1] + g[:, 1:] * zs
            out[a:a + chunk] = real + _np_log_sigmoid(-(d[:, :1] + d[:, 1:] * fake)) @ zw
        return out.reshape(shape)

    return oracle


def make_logistic_gan_problem(m: float = 0.0, s: float = 1.0, box: ParamBox | None = None,
                              solution_counts=None) -> MinimaxProblem:
    """Logistic-discriminator / affine-generator GAN with a quadrature oracle.

    With ``solution_counts`` the population solution set is located by brute
    force on that grid and stored as ``known_solutions``.
    """
    m, s = float(m), float(s)
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if box is None:
        box = ParamBox([-3.0, -3.0], [3.0, 3.0], [-3.0, -3.0], [3.0, 3.0])
    if box.d_gamma != 2 or box.d_delta != 2:
        raise ValueError("the logistic GAN needs a 2-D gamma block and a 2-D delta block")

    def sampler(n, seed):
        x = m + s * rng.normals(rng.stream(seed, "logistic", "x"), n)
        z = rng.uniforms(rng.stream(seed, "logistic", "z"), n)
        return Dataset(x[:, None], z[:, None])

    problem = MinimaxProblem(
        name="logistic_gan", box=box, d_x=1, d_z=1, kernel=_logistic_kernel,
        sampler=sampler, scalar_kernel=_logistic_scalar,
        population_oracle=_quadrature_oracle(m, s),
        params={"kind": "logistic_gan", "m": m, "s": s, "box": box.to_dict()},
    )
    if solution_counts is not None:
        sols = logistic_population_solutions(m, s, box, tuple(solution_counts))
        problem = _replace_solutions(problem, sols)
    return problem


def _replace_solutions(problem, sols):
    from dataclasses import replace
    return replace(problem, known_solutions=np.asarray(sols))


@functools.lru_cache(maxsize=16)
def _logistic_solutions_cached(m, s, box_key, counts):
    box = ParamBox(*[np.array(v) for v in box_key])
    problem = make_logistic_gan_problem(m, s, box)
    grid = build_grid(box, counts)
    theta0 = population_solution_set(criterion_surface(population_surface(problem, grid)))
    pts = theta0.points.copy()
    pts.setflags(write=False)
    return pts


def logistic_population_solutions(m, s, box: ParamBox, counts) -> np.ndarray:
    """Population solution points on a brute-force grid (cached per arguments)."""
    key = tuple(tuple(v.tolist()) for v in
                (box.gamma_lower, box.gamma_upper, box.delta_lower, box.delta_upper))
    return _logistic_solutions_cached(float(m), float(s), key, tuple(int(c) for c in counts))


# ----------------------------------------------------------------- constant


def make_constant_problem(value: float = 0.0) -> MinimaxProblem:
    """F identically equal to ``value``; every grid point solves the problem."""
    value = float(value)

    @njit(nogil=True)
    def scalar(x, z, g, d):
        return value

    def kernel(x, z, gamma, delta):
        shape = np.broadcast_shapes(x.shape[:-1], z.shape[:-1], gamma.shape[:-1],
                                    delta.shape[:-1])
        return np.full(shape, value)

    def oracle(gamma, delta):
        return np.full(np.broadcast_shapes(gamma.shape[:-1], delta.shape[:-1]), value)

    def sampler(n, seed):
        x = rng.uniforms(rng.stream(seed, "constant", "x"), n)
        z = rng.uniforms(rng.stream(seed, "constant", "z"), n)
        return Dataset(x[:, None], z[:, None])

    return MinimaxProblem(
        name="constant", box=ParamBox([-1.0], [1.0], [-1.0], [1.0]), d_x=1, d_z=1,
        kernel=kernel, sampler=sampler, scalar_kernel=scalar, population_oracle=oracle,
        params={"kind": "constant", "value": value},
    )


def problem_from_spec(spec: dict) -> MinimaxProblem:
    """Build a problem from a config mapping with a ``kind`` key."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "two_point":
        return make_two_point_problem(spec.pop("mu", 1.0), spec.pop("sigma", 0.2),
                                      spec.pop("z_weight", 0.0), **_no_extra(spec))
    if kind == "logistic_gan":
        box = spec.pop("box", None)
        if box is not None:
            box = ParamBox(**box)
        counts = spec.pop("solution_counts", None)
        return make_logistic_gan_problem(spec.pop("m", 0.0), spec.pop("s", 1.0), box,
                                         counts, **_no_extra(spec))
    if kind == "single_well":
        return make_single_well_problem(spec.pop("mu", 0.0), spec.pop("sigma", 1.0),
                                        **_no_extra(spec))
    if kind == "constant":
        return make_constant_problem(spec.pop("value", 0.0), **_no_extra(spec))
    raise ValueError(f"unknown problem kind {kind!r}")


def _no_extra(spec):
    if spec:
        raise ValueError(f"unexpected problem parameters: {sorted(spec)}")
    return {}
