"""Spherically symmetric modulators Xi_n = V Z_n and their Gaussian-mixture limit laws.

A modulator is described by its Schoenberg mixing variable V: the
characteristic function of Xi_n is ``psi(||u||^2)`` with
``psi(s) = E exp(-s V^2 / 2)``.

Families and their mixing variables (Q ~ chi^2_nu):

* ``gaussian``  V = 1
* ``student-t`` V = (Q / nu)^{-1/2}
* ``laplace``   V = (Q / nu)^{1/2}
* ``stable``    V = (2 S)^{1/2} with S positive stable of index
  ``cf_index / 2``, giving ``psi(s) = exp(-s^{cf_index / 2})``; i.e. the
  characteristic function ``exp(-||u||^{cf_index})``.

Expectations over V are computed by adaptive quadrature. For the stable
family the quadrature runs over Kanter's representation
``S = (A(U) / E)^{(1 - a) / a}``, U ~ Uniform(0, pi), E ~ Exp(1), which
turns every expectation into a smooth two-dimensional integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .numerics import log_gamma

GAUSSIAN = "gaussian"
STUDENT_T = "student-t"
LAPLACE = "laplace"
STABLE = "stable"
FAMILIES = (GAUSSIAN, STUDENT_T, LAPLACE, STABLE)

QUAD_TOL = 1e-10


class MomentDivergence(ValueError):
    pass


@dataclass(frozen=True)
class ModulatorSpec:
    family: str = GAUSSIAN
    nu: Optional[float] = None
    cf_index: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown modulator family {self.family!r}; expected one of {FAMILIES}")
        if self.family == STUDENT_T and not (self.nu is not None and self.nu > 0):
            raise ValueError("student-t modulator requires nu > 0")
        if self.family == LAPLACE and not (self.nu is not None and self.nu >= 2):
            raise ValueError("laplace modulator requires nu >= 2")
        if self.family == STABLE and not (self.cf_index is not None and 0 < self.cf_index < 2):
            raise ValueError("stable modulator requires 0 < cf_index < 2")

    @classmethod
    def gaussian(cls) -> "ModulatorSpec":
        return cls(GAUSSIAN)

    @classmethod
    def student_t(cls, nu: float) -> "ModulatorSpec":
        return cls(STUDENT_T, nu=nu)

    @classmethod
    def laplace(cls, nu: float) -> "ModulatorSpec":
        return cls(LAPLACE, nu=nu)

    @classmethod
    def stable(cls, cf_index: float) -> "ModulatorSpec":
        return cls(STABLE, cf_index=cf_index)

    @property
    def mixing_alpha(self) -> float:
        """Index of the positive stable law behind V^2 (``cf_index / 2``)."""
        return self.cf_index / 2.0


@dataclass(frozen=True)
class MixtureLimit:
    modulator: ModulatorSpec
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


# --------------------------------------------------------------------------
# expectations over the mixing variable
# --------------------------------------------------------------------------


def _kanter_a(u, alpha: float):
    return (np.sin(alpha * u) ** (alpha / (1.0 - alpha)) * np.sin((1.0 - alpha) * u)) / np.sin(u) ** (1.0 / (1.0 - alpha))


def expect_over_w(spec: ModulatorSpec, h: Callable[[float], np.ndarray]) -> np.ndarray:
    """``E h(W)`` where ``W = V^{-2}``; ``h`` maps a positive scalar to an array.

    The integrand is kept in terms of ``V^{-2}`` because every limit-law
    integrand is smooth in it (and the chi-square families are linear in Q
    there).
    """
    fam = spec.family
    if fam == GAUSSIAN:
        return np.asarray(h(1.0), dtype=np.float64)
    if fam in (STUDENT_T, LAPLACE):
        nu = spec.nu
        dist = stats.chi2(nu)
        if fam == STUDENT_T:
            def integrand(q):
                return h(q / nu) * dist.pdf(q)
        else:
            def integrand(q):
                return h(nu / q) * dist.pdf(q) if q > 0 else 0.0 * h(1.0)
        # split at the mode region so the adaptive rule sees the bulk
        lo, hi = dist.ppf(1e-12), dist.ppf(1 - 1e-12)
        total = 0.0
        for a, b in ((0.0, lo), (lo, nu), (nu, hi), (hi, np.inf)):
            if b > a:
                total = total + integrate.quad_vec(integrand, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL)[0]
        return np.asarray(total, dtype=np.float64)
    alpha = spec.mixing_alpha
    kappa = (1.0 - alpha) / alpha

    def inner(u):
        au = float(_kanter_a(u, alpha))

        def f(e):
            # 1/V^2 = 1/(2S) = (e / A)^kappa / 2
            return math.exp(-e) * h(0.5 * (e / au) ** kappa) if e > 0 else 0.0 * h(1.0)

        return integrate.quad_vec(f, 0.0, np.inf, epsabs=QUAD_TOL, epsrel=QUAD_TOL)[0]

    eps = 1e-12
    val = integrate.quad_vec(inner, eps, math.pi - eps, epsabs=QUAD_TOL, epsrel=QUAD_TOL)[0]
    return np.asarray(val / math.pi, dtype=np.float64)


def psi(spec: ModulatorSpec, s):
    """Schoenberg function ``psi(s) = E exp(-s V^2 / 2)`` for ``s >= 0``."""
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr < 0):
        raise ValueError("psi is defined for s >= 0")
    fam = spec.family
    if fam == GAUSSIAN:
        out = np.exp(-s_arr / 2.0)
    elif fam == LAPLACE:
        out = (1.0 + s_arr / spec.nu) ** (-spec.nu / 2.0)
    elif fam == STABLE:
        out = np.exp(-(s_arr ** (spec.cf_index / 2.0)))
    else:
        flat = s_arr.ravel()
        vals = expect_over_w(spec, lambda w: np.exp(-flat / (2.0 * w)))
        out = np.where(flat == 0.0, 1.0, vals).reshape(s_arr.shape)
    return float(out) if out.ndim == 0 else out


def psi_student_t_bessel(nu: float, s):
    """Closed form of the Student-t psi via the modified Bessel function K (test oracle)."""
    s = np.asarray(s, dtype=np.float64)
    x = np.sqrt(nu * s)
    with np.errstate(invalid="ignore"):
        val = x ** (nu / 2.0) * special.kv(nu / 2.0, x) / (2.0 ** (nu / 2.0 - 1.0) * special.gamma(nu / 2.0))
    return np.where(s == 0, 1.0, val)


# --------------------------------------------------------------------------
# sampling V
# --------------------------------------------------------------------------


def sample_positive_stable(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Kanter / Chambers-Mallows-Stuck draws with ``E exp(-t S) = exp(-t^alpha)``, 0 < alpha < 1."""
    u = rng.uniform(0.0, math.pi, n)
    e = rng.standard_exponential(n)
    return (_kanter_a(u, alpha) / e) ** ((1.0 - alpha) / alpha)


def sample_v_batch(spec: ModulatorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    fam = spec.family
    if fam == GAUSSIAN:
        return np.ones(n)
    if fam == STUDENT_T:
        return np.sqrt(spec.nu / rng.chisquare(spec.nu, n))
    if fam == LAPLACE:
        return np.sqrt(rng.chisquare(spec.nu, n) / spec.nu)
    return np.sqrt(2.0 * sample_positive_stable(spec.mixing_alpha, n, rng))


def sample_v(spec: ModulatorSpec, rng) -> float:
    """One draw of the mixing variable; ``rng`` is an RngStream or numpy Generator."""
    gen = rng.generator() if hasattr(rng, "generator") else rng
    return float(sample_v_batch(spec, 1, gen)[0])


def sample_xi_batch(spec: ModulatorSpec, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` modulator vectors ``V Z`` of dimension ``d``."""
    v = sample_v_batch(spec, n, rng)
    return v[:, None] * rng.standard_normal((n, d))


def v_inverse_moment(spec: ModulatorSpec, k: int) -> float:
    """Exact ``E V^{-k}``."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    fam = spec.family
    if fam == GAUSSIAN:
        return 1.0
    if fam == STUDENT_T:
        nu = spec.nu
        return math.exp(-(k / 2.0) * math.log(nu / 2.0) + log_gamma((nu + k) / 2.0) - log_gamma(nu / 2.0))
    if fam == LAPLACE:
        nu = spec.nu
        if k >= nu:
            raise MomentDivergence(f"E V^-{k} diverges for the laplace modulator with nu={nu} (needs k < nu)")
        return math.exp((k / 2.0) * math.log(nu / 2.0) + log_gamma((nu - k) / 2.0) - log_gamma(nu / 2.0))
    alpha = spec.mixing_alpha
    return math.exp(-(k / 2.0) * math.log(2.0) + log_gamma(1.0 + k / (2.0 * alpha)) - log_gamma(1.0 + k / 2.0))


# --------------------------------------------------------------------------
# limit laws
# --------------------------------------------------------------------------


def _check_power(lim: MixtureLimit, j: int) -> None:
    if j < 1:
        raise ValueError("power j must be >= 1")
    if lim.modulator.family == LAPLACE and j >= lim.modulator.nu:
        raise MomentDivergence(f"j={j} >= nu={lim.modulator.nu}: E V^-j diverges")


def limit_density_power(lim: MixtureLimit, j: int, y):
    """``E_V [f_{N(0, sigma^2 V^2)}(y)]^j``."""
    _check_power(lim, j)
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    s2 = lim.sigma**2
    scale = (2.0 * math.pi * s2) ** (-j / 2.0)
    y2 = y_arr * y_arr
    if lim.modulator.family == GAUSSIAN:
        out = scale * np.exp(-j * y2 / (2.0 * s2))
    else:
        out = scale * expect_over_w(lim.modulator, lambda w: w ** (j / 2.0) * np.exp(-j * y2 * w / (2.0 * s2)))
    return float(out[0]) if np.ndim(y) == 0 else out


def limit_cdf_power(lim: MixtureLimit, j: int, y):
    """``E_V [Phi(y / (sigma V))]^j``."""
    if j < 1:
        raise ValueError("power j must be >= 1")
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if lim.modulator.family == GAUSSIAN:
        out = special.ndtr(y_arr / lim.sigma) ** j
    else:
        out = expect_over_w(lim.modulator, lambda w: special.ndtr(y_arr * math.sqrt(w) / lim.sigma) ** j)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(y) == 0 else out


def limit_cdf_increment_power(lim: MixtureLimit, j: int, a, y):
    """``E_V [Phi(y / (sigma V)) - Phi(a / (sigma V))]^j`` for ``a <= y``."""
    a_arr = np.atleast_1d(np.asarray(a, dtype=np.float64))
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if np.any(y_arr < a_arr):
        raise ValueError("increments need a <= y")

    def h(w):
        r = math.sqrt(w) / lim.sigma
        return (special.ndtr(y_arr * r) - special.ndtr(a_arr * r)) ** j

    out = expect_over_w(lim.modulator, h)
    return float(out[0]) if np.ndim(y) == 0 and np.ndim(a) == 0 else out


def limit_density_power_mc(lim: MixtureLimit, j: int, y, n: int, rng: np.random.Generator):
    """Monte Carlo version of :func:`limit_density_power`; returns (estimate, se) arrays."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    v = sample_v_batch(lim.modulator, n, rng)
    s2 = lim.sigma**2
    vals = (2.0 * math.pi * s2 * v[:, None] ** 2) ** (-j / 2.0) * np.exp(-j * y_arr**2 / (2.0 * s2 * v[:, None] ** 2))
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(n)


def v_quantile(spec: ModulatorSpec, q: float, rng: Optional[np.random.Generator] = None, n: int = 10**6) -> float:
    """Quantile of V: exact for the chi-square families, Monte Carlo for the stable one."""
    fam = spec.family
    if fam == GAUSSIAN:
        return 1.0
    if fam == STUDENT_T:
        return math.sqrt(spec.nu / stats.chi2.ppf(1.0 - q, spec.nu))
    if fam == LAPLACE:
        return math.sqrt(stats.chi2.ppf(q, spec.nu) / spec.nu)
    if rng is None:
        rng = np.random.default_rng(0)
    return float(np.quantile(sample_v_batch(spec, n, rng), q))


# --------------------------------------------------------------------------
# Polya functional equation
# --------------------------------------------------------------------------


def polya_residual(spec: ModulatorSpec, t_grid) -> tuple[float, float]:
    """Max over the grid of ``|psi(t^2) - psi(t^2 / 2)^2|`` and the ``t`` where it occurs."""
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValueError("t grid is empty")
    t2 = t * t
    res = np.abs(np.asarray(psi(spec, t2)) - np.asarray(psi(spec, t2 / 2.0)) ** 2)
    i = int(np.argmax(res))
    return float(res[i]), float(t[i])
