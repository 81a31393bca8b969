"""Gram matrices A_{n,k} of independent data draws and the identities built on them."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import datamodels as dm
from . import kernels
from .modulators import ModulatorSpec, psi
from .numerics import (
    CholeskyFactor,
    EstimateReport,
    NotPositiveDefinite,
    RngStream,
    StreamingMoments,
    cholesky,
    log_gamma,
    split_reps,
)

LOG_2PI = math.log(2.0 * math.pi)
BLOCK = 8192


def block_for(d: int, per_rep: int = 1) -> int:
    """Replicates per block so one block holds about 4M doubles."""
    return max(256, min(BLOCK, (1 << 22) // max(1, d * per_rep)))


class SingularGram(ArithmeticError):
    pass


@dataclass(frozen=True)
class GramMatrix:
    k: int
    matrix: np.ndarray
    factor: Optional[CholeskyFactor]
    logdet: float
    quad_inv_ones: float

    @property
    def singular(self) -> bool:
        return self.factor is None


def build_gram(columns, norm2: Optional[Sequence[float]] = None) -> GramMatrix:
    """Gram matrix of ``k`` vectors of length ``d`` (rows of ``columns``).

    ``norm2`` optionally supplies the exact squared norms for the diagonal.
    Singularity (``d < k`` or a failed pivot) is recorded, not raised.
    """
    x = np.atleast_2d(np.asarray(columns, dtype=np.float64))
    k, d = x.shape
    a = x @ x.T
    if norm2 is not None:
        a[np.diag_indices(k)] = norm2
    a = 0.5 * (a + a.T)
    a.setflags(write=False)
    if d < k:
        return GramMatrix(k, a, None, float("-inf"), float("nan"))
    try:
        f = cholesky(a)
    except NotPositiveDefinite:
        return GramMatrix(k, a, None, float("-inf"), float("nan"))
    return GramMatrix(k, a, f, f.logdet(), f.quad_inv_ones())


def density_power_term(g: GramMatrix, v: float, y: float) -> float:
    """``f_{N_k(0, v^2 A)}(y 1_k)``."""
    if g.singular:
        raise SingularGram("density term needs a nonsingular Gram matrix")
    k = g.k
    return math.exp(-0.5 * k * LOG_2PI - k * math.log(v) - 0.5 * g.logdet - y * y * g.quad_inv_ones / (2.0 * v * v))


# --------------------------------------------------------------------------
# replicate machinery
# --------------------------------------------------------------------------


def run_blocks(
    reps: int,
    stream: RngStream,
    workers: int,
    body: Callable[[np.random.Generator, int], object],
    merge: Callable[[list], object],
    block: int = BLOCK,
):
    """Split ``reps`` over workers (stream path ``.../w``) and blocks of at most ``block``.

    ``body(gen, n)`` returns a partial result for ``n`` replicates; ``merge``
    folds the list of partials, always in worker-then-block order.
    """
    if reps < 1:
        raise ValueError("reps must be positive")

    def work(w: int, n_w: int):
        gen = stream.child(w).generator()
        parts = []
        for start in range(0, n_w, block):
            parts.append(body(gen, min(block, n_w - start)))
        return parts

    sizes = split_reps(reps, workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(work, range(workers), sizes))
    else:
        chunks = [work(0, sizes[0])]
    return merge([p for chunk in chunks for p in chunk])


def merge_moments(parts) -> StreamingMoments:
    acc = StreamingMoments()
    for p in parts:
        acc.merge(p)
    return acc


def moments_body(values_fn):
    def body(gen, n):
        return StreamingMoments.of(values_fn(gen, n))

    return body


def gram_batch(draws: Sequence[dm.Draws]) -> np.ndarray:
    """Stack of Gram matrices, shape (n, k, k), from ``k`` independent batches of draws.

    The diagonal comes from the exact squared norms carried by the draws.
    """
    x = np.stack([dr.x for dr in draws], axis=1)  # (n, k, d)
    a = np.einsum("nid,njd->nij", x, x)
    k = len(draws)
    for i in range(k):
        a[:, i, i] = draws[i].norm2
    return a


def sample_gram_stats(model: dm.DataModelSpec, d: int, k: int, n: int, gen: np.random.Generator):
    """Draw ``n`` Gram matrices A_{n,k}; return ``(A, logdet, quad_inv_ones, failed_pivot)``."""
    draws = [dm.sample_batch(model, d, n, gen) for _ in range(k)]
    a = gram_batch(draws)
    if d < k:
        nan = np.full(n, np.nan)
        return a, nan, nan.copy(), np.zeros(n, dtype=np.int64)
    logdet, quad, failed = kernels.gram_stats(a)
    return a, logdet, quad, failed


# --------------------------------------------------------------------------
# collapsed characteristic-function moments
# --------------------------------------------------------------------------


def collapsed_cf_mean(model, mod: ModulatorSpec, d: int, t: float, reps: int, rng: RngStream, workers: int = 1):
    """Monte Carlo of ``E_X psi(t^2 ||X||^2)``, which equals ``E_Xi phi_{Y|Xi}(t)``."""
    if reps < 2:
        raise ValueError("reps must be at least 2")

    def values(gen, n):
        return np.asarray(psi(mod, t * t * dm.sample_batch(model, d, n, gen).norm2))

    m = run_blocks(reps, rng, workers, moments_body(values), merge_moments)
    return EstimateReport.from_moments(m, rng, workers=workers)


def collapsed_cf_sqmean(model, mod: ModulatorSpec, d: int, t: float, reps: int, rng: RngStream, workers: int = 1):
    """Monte Carlo of ``E psi(t^2 ||X - X~||^2)``, which equals ``E_Xi |phi_{Y|Xi}(t)|^2``."""
    if reps < 2:
        raise ValueError("reps must be at least 2")

    def values(gen, n):
        a = dm.sample_batch(model, d, n, gen)
        b = dm.sample_batch(model, d, n, gen)
        dist2 = np.maximum(a.norm2 + b.norm2 - 2.0 * np.einsum("nd,nd->n", a.x, b.x), 0.0)
        return np.asarray(psi(mod, t * t * dist2))

    m = run_blocks(reps, rng, workers, moments_body(values), merge_moments)
    return EstimateReport.from_moments(m, rng, workers=workers)


# --------------------------------------------------------------------------
# Frobenius concentration rate
# --------------------------------------------------------------------------


def _mc_moment_terms(model, d, reps, rng: RngStream, workers=1):
    sigma2 = model.sigma**2

    def body(gen, n):
        a = dm.sample_batch(model, d, n, gen)
        b = dm.sample_batch(model, d, n, gen)
        return (
            StreamingMoments.of((a.norm2 - sigma2) ** 2),
            StreamingMoments.of(np.einsum("nd,nd->n", a.x, b.x) ** 2),
        )

    def merge(parts):
        return merge_moments([p[0] for p in parts]), merge_moments([p[1] for p in parts])

    return run_blocks(reps, rng, workers, body, merge)


def gram_rate(model, d: int, j: int, reps: Optional[int] = None, rng: Optional[RngStream] = None) -> float:
    """``E ||A_{n,j} - sigma^2 I_j||_F^2 = j E(||X||^2 - sigma^2)^2 + j(j-1) E[(X'X~)^2]``.

    Uses the closed-form moment sheet when it is complete, otherwise a Monte
    Carlo estimate of the two moment terms (needs ``reps`` and ``rng``).
    """
    sheet = dm.moments(model, d)
    msd = sheet.mean_sq_dev(model.sigma)
    cross = sheet.e_cross2
    if msd is None or cross is None:
        if reps is None or rng is None:
            raise ValueError(f"no closed form for {model.family!r} moments; pass reps and rng")
        m_dev, m_cross = _mc_moment_terms(model, d, reps, rng)
        msd = m_dev.mean if msd is None else msd
        cross = m_cross.mean if cross is None else cross
    return j * msd + j * (j - 1) * cross


def gram_rate_literal(model, d: int, j: int) -> float:
    """The rate with ``[E(X'X~)]^2`` in the cross term; zero-mean data makes that term vanish."""
    msd = dm.moments(model, d).mean_sq_dev(model.sigma)
    if msd is None:
        raise ValueError(f"no closed form for {model.family!r} moments")
    return j * msd + j * (j - 1) * 0.0


def frobenius_gap_mc(model, d: int, j: int, reps: int, rng: RngStream, workers: int = 1) -> EstimateReport:
    """Brute-force Monte Carlo of ``E ||A_{n,j} - sigma^2 I_j||_F^2``."""
    s2 = model.sigma**2
    eye = np.eye(j)

    def values(gen, n):
        a = gram_batch([dm.sample_batch(model, d, n, gen) for _ in range(j)])
        diff = a - s2 * eye
        return np.einsum("nij,nij->n", diff, diff)

    m = run_blocks(reps, rng, workers, moments_body(values), merge_moments)
    return EstimateReport.from_moments(m, rng, workers=workers)


# --------------------------------------------------------------------------
# (det A)^{-1/2}
# --------------------------------------------------------------------------


def det_invsqrt_moment(model, d: int, k: int, reps: int, rng: RngStream, workers: int = 1) -> EstimateReport:
    """Monte Carlo of ``E (det A_{n,k})^{-1/2}``; singular draws are excluded and counted."""
    if d < k:
        raise ValueError(f"E (det A)^-1/2 is infinite for d={d} < k={k}")

    def body(gen, n):
        _, logdet, _, failed = sample_gram_stats(model, d, k, n, gen)
        ok = failed < 0
        return StreamingMoments.of(np.exp(-0.5 * logdet[ok])), int((~ok).sum())

    def merge(parts):
        return merge_moments([p[0] for p in parts]), sum(p[1] for p in parts)

    m, singular = run_blocks(reps, rng, workers, body, merge)
    return EstimateReport.from_moments(m, rng, singular=singular, workers=workers)


def wishart_det_invsqrt_exact(d: int, k: int, sigma: float = 1.0) -> float:
    """``E (det A)^{-1/2}`` for ``A ~ W_k(d, sigma^2 / d I)`` (isotropic Gaussian data)."""
    if d < k + 1:
        raise ValueError(f"closed form needs d >= k + 1, got d={d}, k={k}")
    log_val = -0.5 * k * math.log(2.0) + 0.5 * k * math.log(d) - k * math.log(sigma)
    for j in range(1, k + 1):
        log_val += log_gamma(0.5 * (d - j)) - log_gamma(0.5 * (d - j + 1))
    return math.exp(log_val)
