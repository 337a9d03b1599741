"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``GANSETS_DISABLE_NUMBA`` is unset (or ``0``/``false``).  Both paths
are always importable so they can be compared against each other.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("GANSETS_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

# elements per block in the numpy fallback (rows x grid points)
_BLOCK = 1 << 21


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- surfaces


# no on-disk cache: the kernel argument is a dispatcher type, and cached index
# entries keyed on closure kernels cannot be pickled once those kernels die
@njit(nogil=True)
def _surface_mean_nb(kernel, xs, zs, gammas, deltas):
    n = xs.shape[0]
    ng = gammas.shape[0]
    nd = deltas.shape[0]
    out = np.empty((ng, nd))
    for a in range(ng):
        g = gammas[a]
        for c in range(nd):
            d = deltas[c]
            acc = 0.0
            for i in range(n):
                acc += kernel(xs[i], zs[i], g, d)
            out[a, c] = acc / n
    return out


def surface_mean_numba(scalar_kernel, xs, zs, gammas, deltas):
    """Mean of a jitted scalar kernel over rows at every (gamma, delta) pair."""
    return _surface_mean_nb(scalar_kernel, xs, zs, gammas, deltas)


def surface_mean_numpy(kernel, xs, zs, gammas, deltas):
    """Same as :func:`surface_mean_numba` using a broadcasting numpy kernel."""
    n = xs.shape[0]
    ng, nd = gammas.shape[0], deltas.shape[0]
    g_all = np.repeat(gammas, nd, axis=0)
    d_all = np.tile(deltas, (ng, 1))
    total = ng * nd
    out = np.empty(total)
    step = max(1, _BLOCK // max(n, 1))
    x3, z3 = xs[:, None, :], zs[:, None, :]
    for start in range(0, total, step):
        stop = min(total, start + step)
        vals = kernel(x3, z3, g_all[None, start:stop], d_all[None, start:stop])
        out[start:stop] = vals.sum(axis=0) / n
    return out.reshape(ng, nd)


# --------------------------------------------------------------- criterion


@njit(cache=True, nogil=True)
def _criterion_nb(surf):
    m, ng, nd = surf.shape
    q = np.empty_like(surf)
    phi = np.empty((m, ng))
    v = np.empty(m)
    for k in range(m):
        best = np.inf
        for a in range(ng):
            mx = surf[k, a, 0]
            for c in range(1, nd):
                if surf[k, a, c] > mx:
                    mx = surf[k, a, c]
            phi[k, a] = mx
            if mx < best:
                best = mx
        v[k] = best
        for a in range(ng):
            p = phi[k, a]
            outer = p - best
            for c in range(nd):
                inner = p - surf[k, a, c]
                q[k, a, c] = inner if inner > outer else outer
    return phi, v, q


def criterion_numba(surf):
    """Batched criterion: ``surf`` has shape (m, n_gamma, n_delta)."""
    return _criterion_nb(np.ascontiguousarray(surf, dtype=np.float64))


def criterion_numpy(surf):
    phi = surf.max(axis=2)
    v = phi.min(axis=1)
    inner = phi[:, :, None] - surf
    outer = (phi - v[:, None])[:, :, None]
    return phi, v, np.maximum(inner, outer)


# --------------------------------------------------------------- distances


@njit(cache=True, nogil=True)
def _min_dist_nb(a, b):
    out = np.empty(a.shape[0])
    d = a.shape[1]
    for i in range(a.shape[0]):
        best = np.inf
        for j in range(b.shape[0]):
            s = 0.0
            for k in range(d):
                t = a[i, k] - b[j, k]
                s += t * t
            if s < best:
                best = s
        out[i] = np.sqrt(best)
    return out


def min_dist_numba(a, b):
    """Distance from each row of ``a`` to the nearest row of ``b``."""
    return _min_dist_nb(np.ascontiguousarray(a, dtype=np.float64),
                        np.ascontiguousarray(b, dtype=np.float64))


def min_dist_numpy(a, b):
    out = np.empty(a.shape[0])
    step = max(1, _BLOCK // max(b.shape[0], 1))
    for start in range(0, a.shape[0], step):
        diff = a[start:start + step, None, :] - b[None, :, :]
        out[start:start + step] = np.sqrt((diff * diff).sum(axis=2).min(axis=1))
    return out


# ------------------------------------------------------------ set suprema


@njit(cache=True, nogil=True)
def _masked_row_max_nb(values, idx):
    m = values.shape[0]
    out = np.empty(m)
    for k in range(m):
        mx = -np.inf
        for j in idx:
            if values[k, j] > mx:
                mx = values[k, j]
        out[k] = mx
    return out


def masked_row_max_numba(values, mask):
    """Row-wise max of ``values`` (m, G) restricted to columns in ``mask``."""
    return _masked_row_max_nb(values, np.flatnonzero(mask))


def masked_row_max_numpy(values, mask):
    return values[:, mask].max(axis=1)


# ------------------------------------------------------------- dispatchers


def min_dist(a, b):
    return min_dist_numba(a, b) if USE_NUMBA else min_dist_numpy(a, b)


def criterion(surf):
    return criterion_numba(surf) if USE_NUMBA else criterion_numpy(surf)


def masked_row_max(values, mask):
    if USE_NUMBA:
        return masked_row_max_numba(values, mask)
    return masked_row_max_numpy(values, mask)
