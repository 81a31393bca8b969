"""Hot inner loops, each with a numba kernel and an equivalent numpy path.

Which path runs is decided once by :mod:`modlab._accel`. Both paths share
the exact same contract so tests can exercise either one explicitly.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

EPS = float(np.finfo(np.float64).eps)
LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# batched Cholesky: log det(A) and 1' A^{-1} 1 for a stack of k x k matrices
# --------------------------------------------------------------------------


@njit(cache=True)
def _gram_stats_numba(a):
    n, k, _ = a.shape
    logdet = np.empty(n)
    quad = np.empty(n)
    failed = np.full(n, -1, dtype=np.int64)
    L = np.zeros((k, k))
    z = np.zeros(k)
    for m in range(n):
        maxdiag = a[m, 0, 0]
        for i in range(1, k):
            if a[m, i, i] > maxdiag:
                maxdiag = a[m, i, i]
        tol = k * EPS * maxdiag
        ld = 0.0
        ok = True
        for j in range(k):
            s = a[m, j, j]
            for p in range(j):
                s -= L[j, p] * L[j, p]
            if not s > tol:
                failed[m] = j
                ok = False
                break
            L[j, j] = math.sqrt(s)
            ld += math.log(L[j, j])
            for i in range(j + 1, k):
                s = a[m, i, j]
                for p in range(j):
                    s -= L[i, p] * L[j, p]
                L[i, j] = s / L[j, j]
        if not ok:
            logdet[m] = np.nan
            quad[m] = np.nan
            continue
        q = 0.0
        for i in range(k):
            s = 1.0
            for p in range(i):
                s -= L[i, p] * z[p]
            z[i] = s / L[i, i]
            q += z[i] * z[i]
        logdet[m] = 2.0 * ld
        quad[m] = q
    return logdet, quad, failed


def _gram_stats_numpy(a):
    n, k, _ = a.shape
    L = np.zeros_like(a)
    tol = k * EPS * np.max(np.diagonal(a, axis1=1, axis2=2), axis=1)
    failed = np.full(n, -1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    for j in range(k):
        s = a[:, j, j] - np.einsum("np,np->n", L[:, j, :j], L[:, j, :j])
        bad = alive & ~(s > tol)
        failed[bad] = j
        alive &= ~bad
        L[:, j, j] = np.sqrt(np.where(alive, s, 1.0))
        for i in range(j + 1, k):
            L[:, i, j] = (a[:, i, j] - np.einsum("np,np->n", L[:, i, :j], L[:, j, :j])) / L[:, j, j]
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    z = np.zeros((n, k))
    for i in range(k):
        z[:, i] = (1.0 - np.einsum("np,np->n", L[:, i, :i], z[:, :i])) / L[:, i, i]
    quad = np.einsum("nk,nk->n", z, z)
    logdet[~alive] = np.nan
    quad[~alive] = np.nan
    return logdet, quad, failed


def gram_stats(a, use_numba=None):
    """Return ``(logdet, quad_inv_ones, failed_pivot)`` for a stack ``a`` of shape (n, k, k).

    ``failed_pivot`` is -1 where the factorization succeeded, otherwise the
    zero-based pivot index that fell below ``k * eps * max diag``; the other
    two outputs are NaN there.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected shape (n, k, k), got {a.shape}")
    if use_numba is None:
        use_numba = HAVE_NUMBA
    return _gram_stats_numba(a) if use_numba else _gram_stats_numpy(a)


# --------------------------------------------------------------------------
# density-power terms over a y-grid, reduced to per-y sums
# --------------------------------------------------------------------------


def _density_ref(logdet, quad, v, y, k):
    base = -0.5 * k * LOG_2PI - k * math.log(v[0]) - 0.5 * logdet[0]
    return np.exp(base - quad[0] / (2.0 * v[0] * v[0]) * y * y)


@njit(cache=True)
def _density_grid_numba(logdet, quad, v, y, k, ref):
    n = logdet.shape[0]
    m = y.shape[0]
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    for r in range(n):
        base = -0.5 * k * LOG_2PI - k * math.log(v[r]) - 0.5 * logdet[r]
        c = quad[r] / (2.0 * v[r] * v[r])
        for i in range(m):
            dev = math.exp(base - c * y[i] * y[i]) - ref[i]
            s1[i] += dev
            s2[i] += dev * dev
    return s1, s2


def _density_grid_numpy(logdet, quad, v, y, k, ref, block=4096):
    m = y.shape[0]
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    y2 = y * y
    for start in range(0, logdet.shape[0], block):
        sl = slice(start, start + block)
        base = -0.5 * k * LOG_2PI - k * np.log(v[sl]) - 0.5 * logdet[sl]
        c = quad[sl] / (2.0 * v[sl] * v[sl])
        dev = np.exp(base[:, None] - c[:, None] * y2[None, :]) - ref[None, :]
        s1 += dev.sum(axis=0)
        s2 += (dev * dev).sum(axis=0)
    return s1, s2


def density_grid_moments(logdet, quad, v, y, k, use_numba=None):
    """Per-y count, mean and centered sum of squares of ``f_{N_k(0, v^2 A)}(y 1_k)``.

    Each replicate is described by ``log det A``, ``1'A^{-1}1`` and the mixing
    scale ``v``. Sums are shifted by the first replicate's values, so a
    constant integrand yields a centered sum of squares of exactly zero.
    """
    logdet = np.ascontiguousarray(logdet, dtype=np.float64)
    quad = np.ascontiguousarray(quad, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = logdet.shape[0]
    if n == 0:
        raise ValueError("no replicates")
    if use_numba is None:
        use_numba = HAVE_NUMBA
    ref = _density_ref(logdet, quad, v, y, int(k))
    kernel = _density_grid_numba if use_numba else _density_grid_numpy
    s1, s2 = kernel(logdet, quad, v, y, int(k), ref)
    mean = ref + s1 / n
    m2 = np.maximum(s2 - s1 * s1 / n, 0.0)
    return n, mean, m2
