"""Data-vector families X_n: exact samplers and closed-form moment sheets.

Every family is zero-mean. Families whose radial part is drawn explicitly
(sphere, ball, dilated Bingham) report ``||X||^2`` from the radial draw
rather than recomputing it from the coordinates, so sphere data has
``||X||^2 == r^2`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from .numerics import RngStream

SPHERE = "sphere"
BALL = "ball"
DILATED_BINGHAM = "dilated-bingham"
HYPERCUBE = "hypercube"
GAUSSIAN = "gaussian"
STUDENT_T = "student-t"
LAPLACE = "laplace"
FAMILIES = (SPHERE, BALL, DILATED_BINGHAM, HYPERCUBE, GAUSSIAN, STUDENT_T, LAPLACE)

ISOTROPIC = "isotropic"
LOG_HARMONIC = "log-harmonic"
POWER = "power"
PROFILES = (ISOTROPIC, LOG_HARMONIC, POWER)

CONSTANT = "constant"
UNIFORM = "uniform"
DETERMINISTIC = "deterministic"


class UnsupportedModel(ValueError):
    pass


class BinghamSamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class DataModelSpec:
    """Parameters of one data family.

    ``radius_shift`` selects the radius sequence ``r_n = sigma * (1 +
    radius_shift / d)`` for sphere and ball data (0 gives ``r_n = sigma``).
    ``bingham_c`` and ``beta`` set the Bingham matrix rule
    ``diag(+c, -c, +c, ...) * d**((beta - 1) / 2)``; ``bingham_c = 0`` is the
    uniform distribution on the sphere.
    """

    family: str = SPHERE
    sigma: float = 1.0
    radius_shift: float = 0.0
    bingham_c: float = 0.0
    beta: float = 0.0
    radial: str = CONSTANT  # dilated Bingham: constant | uniform
    side: str = DETERMINISTIC  # hypercube: deterministic | uniform
    profile: str = ISOTROPIC
    r: float = 0.0
    nu: float = 6.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedModel(f"unknown data family {self.family!r}; expected one of {FAMILIES}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.radial not in (CONSTANT, UNIFORM):
            raise ValueError(f"unknown radial law {self.radial!r}")
        if self.side not in (DETERMINISTIC, UNIFORM):
            raise ValueError(f"unknown side-length law {self.side!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown eigenvalue profile {self.profile!r}")
        if self.profile == POWER and not self.r > -0.5:
            raise ValueError("power profile requires r > -1/2")
        if self.family == STUDENT_T and not self.nu > 4:
            raise ValueError("student-t data requires nu > 4")
        if self.family == LAPLACE and not self.nu > 0:
            raise ValueError("laplace data requires nu > 0")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_(self, **kw) -> "DataModelSpec":
        return replace(self, **kw)

    @property
    def is_bingham(self) -> bool:
        return self.family in (SPHERE, DILATED_BINGHAM) and self.bingham_c != 0.0


@dataclass(frozen=True)
class MomentSheet:
    """Closed-form moments of one family at dimension ``d``; ``None`` marks unavailable."""

    d: int
    e_norm2: Optional[float]
    var_norm2: Optional[float]
    e_cross2: Optional[float]
    var_norm2_lower: Optional[float] = None

    def available(self) -> dict[str, bool]:
        return {
            name: getattr(self, name) is not None
            for name in ("e_norm2", "var_norm2", "e_cross2", "var_norm2_lower")
        }

    def mean_sq_dev(self, sigma: float) -> Optional[float]:
        """``E(||X||^2 - sigma^2)^2 = Var + bias^2``."""
        if self.e_norm2 is None or self.var_norm2 is None:
            return None
        return self.var_norm2 + (self.e_norm2 - sigma**2) ** 2


class Draws(NamedTuple):
    x: np.ndarray  # (n, d)
    norm2: np.ndarray  # (n,)


# --------------------------------------------------------------------------
# deterministic ingredients
# --------------------------------------------------------------------------


def eigen_profile(profile: str, d: int, sigma: float, r: float = 0.0) -> np.ndarray:
    """Eigenvalues ``lambda_{n;1..d}`` of a Gaussian covariance profile with trace -> sigma^2."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    j = np.arange(1, d + 1, dtype=np.float64)
    s2 = sigma * sigma
    if profile == ISOTROPIC:
        return np.full(d, s2 / d)
    if profile == LOG_HARMONIC:
        if d < 3:
            raise ValueError("log-harmonic profile requires d >= 3")
        return s2 / (math.log(d) * j)
    if profile == POWER:
        if not r > -0.5:
            raise ValueError("power profile requires r > -1/2")
        return (r + 1.0) * s2 * np.exp(r * np.log(j) - (r + 1.0) * math.log(d))
    raise ValueError(f"unknown eigenvalue profile {profile!r}")


def bingham_diag(c: float, beta: float, d: int) -> np.ndarray:
    """Trace-zero diagonal Bingham matrix ``+-c d^{(beta-1)/2}`` (last entry 0 when d is odd)."""
    diag = np.empty(d)
    diag[0::2] = 1.0
    diag[1::2] = -1.0
    if d % 2:
        diag[-1] = 0.0
    return c * d ** ((beta - 1.0) / 2.0) * diag


def radius(spec: DataModelSpec, d: int) -> float:
    return spec.sigma * (1.0 + spec.radius_shift / d)


def hypercube_side_range(spec: DataModelSpec, d: int) -> tuple[float, float]:
    mid = spec.sigma * math.sqrt(12.0 / d)
    if spec.side == DETERMINISTIC:
        return mid, mid
    half = mid / math.sqrt(d)
    return mid - half, mid + half


def dilated_radius_range(spec: DataModelSpec, d: int) -> tuple[float, float]:
    if spec.radial == CONSTANT:
        return spec.sigma, spec.sigma
    delta = spec.sigma / math.sqrt(d)
    return spec.sigma - delta, spec.sigma + delta


def covariance_eigs(spec: DataModelSpec, d: int) -> np.ndarray:
    """Eigenvalues of the Gaussian factor ``Sigma_n`` for gaussian / t / laplace data."""
    lam = eigen_profile(spec.profile, d, spec.sigma, spec.r)
    if spec.family == STUDENT_T:
        return lam * (spec.nu - 2.0) / spec.nu
    if spec.family == LAPLACE:
        return lam / spec.nu
    return lam


def _uniform_moment(a: float, b: float, m: int) -> float:
    """``E U^m`` for U uniform on [a, b]."""
    if a == b:
        return a**m
    return (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a))


# --------------------------------------------------------------------------
# Bingham sampling: rejection from an angular central Gaussian envelope
# --------------------------------------------------------------------------


class BinghamSampler:
    """Exact sampler for the density proportional to ``exp(theta' S theta)`` on the unit sphere.

    Works in the eigenbasis of ``S``. With ``A = lambda_max I - S`` (PSD with
    smallest eigenvalue 0) the target is ``exp(-theta' A theta)``; proposals
    come from the angular central Gaussian with ``Omega = I + 2A/b`` where
    ``b`` solves ``sum 1/(b + 2 a_i) = 1`` (Kent, Ganeiber and Mardia, 2013).
    """

    def __init__(self, sigma_matrix):
        s = np.asarray(sigma_matrix, dtype=np.float64)
        if s.ndim == 1:
            evals, self.basis = s.copy(), None
        else:
            if s.shape[0] != s.shape[1] or not np.allclose(s, s.T, atol=1e-12, rtol=0):
                raise ValueError("Bingham matrix must be symmetric")
            if np.count_nonzero(s - np.diag(np.diag(s))) == 0:
                evals, self.basis = np.diag(s).copy(), None
            else:
                evals, self.basis = np.linalg.eigh(s)
        self.d = q = evals.size
        self.a = evals.max() - evals
        if np.all(self.a == 0):
            self.b = float(q)
        else:
            self.b = optimize.brentq(lambda b: np.sum(1.0 / (b + 2.0 * self.a)) - 1.0, 0.5, float(q), xtol=1e-14)
        self.omega = 1.0 + 2.0 * self.a / self.b
        self.log_m = -(q - self.b) / 2.0 + (q / 2.0) * math.log(q / self.b)
        self.proposed = 0
        self.accepted = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def sample(self, n: int, rng: np.random.Generator, *, min_rate: float = 1e-4, budget: int = 10**6) -> np.ndarray:
        q = self.d
        out = np.empty((n, q))
        filled = 0
        batch = max(16, n)
        while filled < n:
            if self.proposed >= budget and self.acceptance_rate < min_rate:
                raise BinghamSamplerError(
                    f"Bingham acceptance rate {self.acceptance_rate:.2e} below {min_rate:g} after "
                    f"{self.proposed} proposals (d={q}, b={self.b:.6g}, max a={self.a.max():.6g})"
                )
            y = rng.standard_normal((batch, q)) / np.sqrt(self.omega)
            x = y / np.linalg.norm(y, axis=1, keepdims=True)
            x2 = x * x
            log_ratio = -(x2 @ self.a) + (q / 2.0) * np.log(x2 @ self.omega) - self.log_m
            keep = np.log(rng.random(batch)) < log_ratio
            self.proposed += batch
            got = x[keep][: n - filled]
            self.accepted += int(keep.sum())
            out[filled : filled + got.shape[0]] = got
            filled += got.shape[0]
        if self.basis is not None:
            out = out @ self.basis.T
        return out


def sample_bingham(sigma_matrix, d: int, rng, n: Optional[int] = None):
    """Unit vector(s) with density proportional to ``exp(theta' Sigma theta)``.

    ``rng`` is an :class:`RngStream` or a numpy Generator. Returns a single
    vector when ``n`` is None, otherwise an ``(n, d)`` array; the sampler's
    acceptance rate is attached as ``sample_bingham.last_acceptance_rate``.
    """
    sampler = BinghamSampler(sigma_matrix)
    if sampler.d != d:
        raise ValueError(f"matrix order {sampler.d} does not match d={d}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    out = sampler.sample(1 if n is None else n, gen)
    sample_bingham.last_acceptance_rate = sampler.acceptance_rate
    return out[0] if n is None else out


sample_bingham.last_acceptance_rate = float("nan")


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _uniform_directions(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _directions(spec: DataModelSpec, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if spec.bingham_c == 0.0:
        return _uniform_directions(n, d, rng)
    return BinghamSampler(bingham_diag(spec.bingham_c, spec.beta, d)).sample(n, rng)


def sample_batch(spec: DataModelSpec, d: int, n: int, rng: np.random.Generator) -> Draws:
    """``n`` independent exact draws of X_n at dimension ``d``."""
    if d < 1:
        raise UnsupportedModel(f"dimension must be positive, got {d}")
    if d < 2 and spec.family != HYPERCUBE:
        raise UnsupportedModel(f"family {spec.family!r} needs d >= 2")
    fam = spec.family
    if fam == SPHERE:
        rad = radius(spec, d)
        return Draws(rad * _directions(spec, n, d, rng), np.full(n, rad * rad))
    if fam == BALL:
        theta = _uniform_directions(n, d, rng)
        rad = radius(spec, d) * rng.random(n) ** (1.0 / d)
        return Draws(rad[:, None] * theta, rad * rad)
    if fam == DILATED_BINGHAM:
        lo, hi = dilated_radius_range(spec, d)
        theta = _directions(spec, n, d, rng)
        rad = np.full(n, lo) if lo == hi else rng.uniform(lo, hi, n)
        return Draws(rad[:, None] * theta, rad * rad)
    if fam == HYPERCUBE:
        lo, hi = hypercube_side_range(spec, d)
        side = np.full(n, lo) if lo == hi else rng.uniform(lo, hi, n)
        x = side[:, None] * (rng.random((n, d)) - 0.5)
        return Draws(x, np.einsum("nd,nd->n", x, x))
    lam = covariance_eigs(spec, d)
    x = rng.standard_normal((n, d)) * np.sqrt(lam)
    if fam == STUDENT_T:
        x *= np.sqrt(spec.nu / rng.chisquare(spec.nu, n))[:, None]
    elif fam == LAPLACE:
        x *= np.sqrt(rng.chisquare(spec.nu, n))[:, None]
    return Draws(x, np.einsum("nd,nd->n", x, x))


def sample(spec: DataModelSpec, d: int, rng) -> np.ndarray:
    """One exact draw; ``rng`` is an :class:`RngStream` or a numpy Generator."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return sample_batch(spec, d, 1, gen).x[0]


# --------------------------------------------------------------------------
# closed-form moments
# --------------------------------------------------------------------------


def moments(spec: DataModelSpec, d: int) -> MomentSheet:
    fam = spec.family
    if fam in (SPHERE, BALL, DILATED_BINGHAM):
        if fam == SPHERE:
            rad = radius(spec, d)
            er2, er4 = rad**2, rad**4
        elif fam == BALL:
            rad = radius(spec, d)
            er2, er4 = rad**2 * d / (d + 2.0), rad**4 * d / (d + 4.0)
        else:
            lo, hi = dilated_radius_range(spec, d)
            er2, er4 = _uniform_moment(lo, hi, 2), _uniform_moment(lo, hi, 4)
        var = 0.0 if fam == SPHERE or (fam == DILATED_BINGHAM and spec.radial == CONSTANT) else er4 - er2**2
        # Cov(R Theta) = E(R^2)/d I holds only for the uniform direction law
        cross = er2**2 / d if spec.bingham_c == 0.0 else None
        return MomentSheet(d, er2, var, cross)
    if fam == HYPERCUBE:
        lo, hi = hypercube_side_range(spec, d)
        el2, el4 = _uniform_moment(lo, hi, 2), _uniform_moment(lo, hi, 4)
        e = d * el2 / 12.0
        var = d * el4 / 180.0 + (d / 12.0) ** 2 * (el4 - el2**2)
        return MomentSheet(d, e, var, d * (el2 / 12.0) ** 2)
    lam = covariance_eigs(spec, d)
    tr, tr2 = float(lam.sum()), float(lam @ lam)
    if fam == GAUSSIAN:
        return MomentSheet(d, tr, 2.0 * tr2, tr2)
    nu = spec.nu
    if fam == STUDENT_T:
        inv1 = 1.0 / (nu - 2.0)  # E Q^-1
        inv2 = 1.0 / ((nu - 2.0) * (nu - 4.0))  # E Q^-2
        var = nu**2 * (inv2 * (2.0 * tr2 + tr**2) - inv1**2 * tr**2)
        lower = nu * tr**2 / ((nu - 4.0) * (nu - 2.0) ** 2)
        return MomentSheet(d, nu * tr * inv1, var, nu**2 * tr2 * inv1**2, lower)
    # laplace: X = Q^{1/2} Z
    var = (nu**2 + 2.0 * nu) * (2.0 * tr2 + tr**2) - nu**2 * tr**2
    return MomentSheet(d, nu * tr, var, nu**2 * tr2)
