"""Small dense linear algebra, special functions, RNG streams and streaming moments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EPS = np.finfo(np.float64).eps


class NotPositiveDefinite(ArithmeticError):
    """Raised when a Cholesky pivot falls below the positive-definiteness threshold."""

    def __init__(self, pivot: int, value: float = float("nan")):
        super().__init__(f"matrix is not positive definite (pivot {pivot}, value {value:.3e})")
        self.pivot = pivot
        self.value = value


def sym_matrix(entries, *, atol: float = 0.0) -> np.ndarray:
    """Validate and return a read-only symmetric ``k x k`` float array."""
    a = np.array(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.abs(a - a.T) <= atol):
        raise ValueError("matrix is not symmetric")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def order(self) -> int:
        return self.lower.shape[0]

    def logdet(self) -> float:
        return logdet(self)

    def quad_inv_ones(self) -> float:
        return quad_inv_ones(self)


def pd_threshold(k: int, max_diag: float) -> float:
    return k * EPS * max_diag


def cholesky(a) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric matrix.

    Succeeds iff every pivot exceeds ``k * eps * max(diag(a))``. No jitter is
    ever added; a failing pivot raises :class:`NotPositiveDefinite` carrying
    its (zero-based) index.
    """
    a = sym_matrix(a)
    k = a.shape[0]
    tol = pd_threshold(k, float(np.max(np.diag(a))))
    L = np.zeros_like(a)
    for j in range(k):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NotPositiveDefinite(j, float(pivot))
        L[j, j] = math.sqrt(pivot)
        for i in range(j + 1, k):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    L.setflags(write=False)
    return CholeskyFactor(L)


def logdet(f: CholeskyFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def _forward_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = L.shape[0]
    z = np.zeros(k)
    for i in range(k):
        z[i] = (b[i] - L[i, :i] @ z[:i]) / L[i, i]
    return z


def quad_inv_ones(f: CholeskyFactor) -> float:
    """``1' A^{-1} 1`` for ``A = L L'``.

    Solving ``L z = 1`` gives ``1' A^{-1} 1 = z' z``; the back substitution
    with ``L'`` is unnecessary for the quadratic form.
    """
    z = _forward_solve(f.lower, np.ones(f.order))
    return float(z @ z)


def frob_dist_to_scaled_identity(a, s: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.linalg.norm(a - s * np.eye(a.shape[0]), "fro"))


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma domain error: x = {x!r} must be positive")
    return math.lgamma(x)


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(root, path)``.

    The generator is PCG64 seeded by ``numpy.random.SeedSequence(root,
    spawn_key=path)``. SeedSequence hashes the spawn key together with the
    entropy, so distinct paths give distinct, independent streams.
    """

    root: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.root < 2**64:
            raise ValueError("root seed must be a 64-bit unsigned integer")
        if any(int(p) < 0 for p in self.path):
            raise ValueError("stream path labels must be nonnegative integers")
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.root, spawn_key=self.path)))

    def child(self, *labels: int) -> "RngStream":
        return derive_stream(self, labels)

    def lineage(self) -> str:
        return f"{self.root}:" + "/".join(str(p) for p in self.path)


def derive_stream(root: RngStream, label: Iterable[int]) -> RngStream:
    return RngStream(root.root, root.path + tuple(int(x) for x in label))


# --------------------------------------------------------------------------
# Streaming moments
# --------------------------------------------------------------------------


class StreamingMoments:
    """Mergeable running mean / centered second moment (Welford, Chan et al.)."""

    __slots__ = ("count", "mean", "m2")

    def __init__(self, count: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def update(self, values) -> "StreamingMoments":
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size:
            # shifting by the first value keeps a constant sample exactly constant
            shift = values[0]
            dev = values - shift
            mean = float(shift + np.mean(dev))
            dev = values - mean
            self.merge(StreamingMoments(values.size, mean, float(dev @ dev)))
        return self

    def merge(self, other: "StreamingMoments") -> "StreamingMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / n)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        self.count = n
        return self

    def variance(self) -> float:
        if self.count < 2:
            return float("nan")
        return self.m2 / (self.count - 1)

    def se(self) -> float:
        """Standard error of the mean."""
        if self.count < 2:
            return float("nan")
        return math.sqrt(self.variance() / self.count)

    @classmethod
    def of(cls, values) -> "StreamingMoments":
        return cls().update(values)

    def __repr__(self):
        return f"StreamingMoments(count={self.count}, mean={self.mean!r}, m2={self.m2!r})"


@dataclass
class EstimateReport:
    """A Monte Carlo estimate with its standard error and seed lineage."""

    estimate: float
    se: float
    reps: int
    seed: int
    path: tuple[int, ...] = ()
    singular: int = 0
    workers: int = 1
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_moments(cls, m: StreamingMoments, stream: RngStream, **kw) -> "EstimateReport":
        return cls(m.mean, m.se(), m.count, stream.root, stream.path, **kw)

    def within(self, target: float, nse: float = 3.0, margin: float = 0.0) -> bool:
        return abs(self.estimate - target) <= nse * self.se + margin


def combine_se(*ses: float) -> float:
    return math.sqrt(sum(s * s for s in ses))


def sample_variance_report(values: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its large-sample standard error.

    The SE uses ``sqrt((m4 - s^4) / n)`` with ``m4`` the fourth central
    moment, which is exact to first order for any distribution with a finite
    fourth moment.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    dev = values - values.mean()
    d2 = dev * dev
    s2 = float(d2.sum() / (n - 1))
    m4 = float(np.mean(d2 * d2))
    return s2, math.sqrt(max(m4 - s2 * s2, 0.0) / n)


def split_reps(reps: int, workers: int) -> list[int]:
    """Partition ``reps`` into ``workers`` contiguous block sizes."""
    base, extra = divmod(reps, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def as_int_path(labels: Sequence) -> tuple[int, ...]:
    return tuple(int(x) for x in labels)
