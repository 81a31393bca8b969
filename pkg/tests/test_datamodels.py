import math

import numpy as np
import pytest
from scipy import stats

from modlab import datamodels as dm
from modlab.numerics import RngStream, StreamingMoments, sample_variance_report


def test_spec_validation():
    with pytest.raises(dm.UnsupportedModel):
        dm.DataModelSpec(family="cauchy")
    with pytest.raises(ValueError):
        dm.DataModelSpec(sigma=0.0)
    with pytest.raises(ValueError):
        dm.DataModelSpec(beta=1.0)
    with pytest.raises(ValueError):
        dm.DataModelSpec(family=dm.STUDENT_T, nu=4.0)
    with pytest.raises(ValueError):
        dm.DataModelSpec(family=dm.GAUSSIAN, profile=dm.POWER, r=-0.5)


def test_sphere_draw_has_exact_radius():
    x = dm.sample(dm.DataModelSpec(), 5, RngStream(1))
    assert abs(np.linalg.norm(x) - 1.0) <= 1e-12
    draws = dm.sample_batch(dm.DataModelSpec(sigma=2.0, radius_shift=3.0), 10, 100, np.random.default_rng(0))
    r = 2.0 * (1 + 3.0 / 10)
    assert np.all(draws.norm2 == r * r)
    np.testing.assert_allclose(np.linalg.norm(draws.x, axis=1), r, rtol=1e-12)


def test_hypercube_components_bounded(gen):
    spec = dm.DataModelSpec(family=dm.HYPERCUBE, side=dm.UNIFORM)
    lo, hi = dm.hypercube_side_range(spec, 50)
    assert (lo + hi) / 2 == pytest.approx(math.sqrt(12 / 50))
    x = dm.sample_batch(spec, 50, 1000, gen).x
    assert np.all(np.abs(x) <= hi / 2)


def test_single_draw_helpers(gen):
    assert dm.sample(dm.DataModelSpec(family=dm.GAUSSIAN), 7, gen).shape == (7,)
    with pytest.raises(dm.UnsupportedModel):
        dm.sample(dm.DataModelSpec(), 1, gen)


# --- eigenvalue profiles ----------------------------------------------------


def test_profiles():
    np.testing.assert_allclose(dm.eigen_profile(dm.POWER, 4, 1.0, 0.0), 0.25)
    assert dm.eigen_profile(dm.POWER, 100, 1.0, 1.0).sum() == pytest.approx(1.01, abs=1e-13)
    lam = dm.eigen_profile(dm.LOG_HARMONIC, 10_000, 1.0)
    assert np.all(lam > 0) and np.all(np.diff(lam) < 0)
    assert abs(lam.sum() - (0.5772156649 + math.log(1e4)) / math.log(1e4)) <= 1e-4
    with pytest.raises(ValueError):
        dm.eigen_profile(dm.LOG_HARMONIC, 2, 1.0)
    with pytest.raises(ValueError):
        dm.eigen_profile(dm.POWER, 10, 1.0, -0.6)


def test_bingham_rule_is_trace_free():
    for d in (7, 8, 101):
        s = dm.bingham_diag(2.0, 0.5, d)
        assert abs(s.sum()) <= 1e-12 * np.linalg.norm(s)
        assert np.linalg.norm(s) == pytest.approx(2.0 * d ** 0.25 * math.sqrt((d // 2 * 2) / d), rel=1e-12)


# --- moment sheets ----------------------------------------------------------


def test_sphere_sheet():
    m = dm.moments(dm.DataModelSpec(), 10)
    assert (m.e_norm2, m.var_norm2, m.e_cross2) == (1.0, 0.0, 0.1)
    assert dm.moments(dm.DataModelSpec(bingham_c=1.0), 10).e_cross2 is None
    assert not dm.moments(dm.DataModelSpec(bingham_c=1.0), 10).available()["e_cross2"]


def test_gaussian_power_sheet():
    m = dm.moments(dm.DataModelSpec(family=dm.GAUSSIAN, profile=dm.POWER, r=0.0), 100)
    assert m.e_norm2 == pytest.approx(1.0, abs=1e-14)
    assert m.var_norm2 == pytest.approx(0.02, abs=1e-15)
    assert m.e_cross2 == pytest.approx(0.01, abs=1e-15)


def test_student_t_lower_bound_limit():
    spec = dm.DataModelSpec(family=dm.STUDENT_T, nu=6.0)
    m = dm.moments(spec, 100_000)
    assert m.var_norm2_lower == pytest.approx(1.0 / 12.0, rel=1e-12)
    # the exact variance tends to 2 sigma^4 / (nu - 4)
    assert m.var_norm2 == pytest.approx(1.0, rel=1e-4)


def test_hypercube_deterministic_sheet():
    m = dm.moments(dm.DataModelSpec(family=dm.HYPERCUBE), 12)
    assert m.e_norm2 == pytest.approx(1.0, rel=1e-14)
    assert m.var_norm2 == pytest.approx(1.0 / 15.0, rel=1e-14)
    assert m.e_cross2 == pytest.approx(1.0 / 12.0, rel=1e-14)


def test_mean_sq_dev():
    m = dm.MomentSheet(4, 1.5, 0.25, 0.1)
    assert m.mean_sq_dev(1.0) == pytest.approx(0.5)
    assert dm.MomentSheet(4, None, 0.25, 0.1).mean_sq_dev(1.0) is None


MC_MODELS = [
    dm.DataModelSpec(),
    dm.DataModelSpec(family=dm.BALL, sigma=1.5),
    dm.DataModelSpec(family=dm.DILATED_BINGHAM, radial=dm.UNIFORM),
    dm.DataModelSpec(family=dm.HYPERCUBE),
    dm.DataModelSpec(family=dm.HYPERCUBE, side=dm.UNIFORM),
    dm.DataModelSpec(family=dm.GAUSSIAN),
    dm.DataModelSpec(family=dm.GAUSSIAN, profile=dm.LOG_HARMONIC),
    dm.DataModelSpec(family=dm.GAUSSIAN, profile=dm.POWER, r=1.0),
    dm.DataModelSpec(family=dm.STUDENT_T, nu=12.0),
    dm.DataModelSpec(family=dm.LAPLACE, nu=3.0),
]


@pytest.mark.parametrize("spec", MC_MODELS, ids=lambda s: f"{s.family}-{s.profile}-{s.side}")
def test_sheet_matches_monte_carlo(spec):
    d, n = 12, 100_000
    g = RngStream(77).generator()
    a = dm.sample_batch(spec, d, n, g)
    b = dm.sample_batch(spec, d, n, g)
    sheet = dm.moments(spec, d)
    m = StreamingMoments.of(a.norm2)
    assert abs(m.mean - sheet.e_norm2) <= 3 * m.se() + 1e-12
    v, v_se = sample_variance_report(a.norm2)
    assert abs(v - sheet.var_norm2) <= 3 * v_se + 1e-12
    c = StreamingMoments.of(np.einsum("nd,nd->n", a.x, b.x) ** 2)
    assert abs(c.mean - sheet.e_cross2) <= 3 * c.se()


def test_exact_norm_matches_draws(gen):
    for spec in MC_MODELS[:3]:
        dr = dm.sample_batch(spec, 9, 50, gen)
        np.testing.assert_allclose(np.einsum("nd,nd->n", dr.x, dr.x), dr.norm2, rtol=1e-12)


def test_isotropic_gaussian_example():
    g = RngStream(5).generator()
    x = dm.sample_batch(dm.DataModelSpec(family=dm.GAUSSIAN), 1000, 10_000, g).norm2
    m = StreamingMoments.of(x)
    v, v_se = sample_variance_report(x)
    assert abs(m.mean - 1.0) <= 3 * m.se()
    assert abs(v - 0.002) <= 3 * v_se


def test_var_norm2_nonincreasing_under_doubling():
    for spec in (dm.DataModelSpec(family=dm.BALL), dm.DataModelSpec(family=dm.GAUSSIAN), dm.DataModelSpec()):
        vals = [dm.moments(spec, d).var_norm2 for d in (16, 32, 64, 128, 256, 512, 1024)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


# --- Bingham ----------------------------------------------------------------


def test_bingham_zero_matrix_is_uniform():
    g = RngStream(3).generator()
    x = dm.sample_bingham(np.zeros((8, 8)), 8, g, n=100_000)
    assert dm.sample_bingham.last_acceptance_rate == 1.0
    m = StreamingMoments.of(x[:, 0] ** 2)
    assert abs(m.mean - 0.125) <= 3 * m.se()
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, rtol=1e-12)


def _sphere_quadrature_mean(sig, f, n=800):
    # midpoint rule on (polar, azimuth) for d = 3
    th = (np.arange(n) + 0.5) * math.pi / n
    ph = (np.arange(2 * n) + 0.5) * math.pi / n
    T, P = np.meshgrid(th, ph, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    w = np.sin(T) * np.exp(np.einsum("...i,i->...", pts * pts, sig))
    return float((w * f(pts)).sum() / w.sum())


def test_bingham_matches_quadrature_oracle():
    sig = np.array([0.8, -0.8, 0.0])
    oracle = _sphere_quadrature_mean(sig, lambda p: np.einsum("...i,i->...", p * p, sig))
    assert oracle > 0
    g = RngStream(11).generator()
    x = dm.sample_bingham(np.diag(sig), 3, g, n=200_000)
    m = StreamingMoments.of((x * x) @ sig)
    assert abs(m.mean - oracle) <= 3 * m.se()
    assert 0 < dm.sample_bingham.last_acceptance_rate <= 1


def test_bingham_shift_invariance_and_antipodal_symmetry():
    sig = dm.bingham_diag(1.5, 0.0, 6)
    a = dm.sample_bingham(np.diag(sig), 6, RngStream(1).generator(), n=10_000)
    b = dm.sample_bingham(np.diag(sig - 5.0), 6, RngStream(2).generator(), n=10_000)
    assert stats.ks_2samp(a[:, 0], b[:, 0]).pvalue > 0.01
    m = StreamingMoments.of(a[:, 0])
    assert abs(m.mean) <= 3 * m.se()


def test_bingham_rotated_matrix():
    rng = np.random.default_rng(4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    sig = q @ np.diag([1.0, -1.0, 0.5, -0.5]) @ q.T
    x = dm.sample_bingham(sig, 4, rng, n=50_000)
    # E(theta' S theta) is basis-free: compare with the diagonal sampler
    y = dm.sample_bingham(np.diag([1.0, -1.0, 0.5, -0.5]), 4, np.random.default_rng(5), n=50_000)
    mx = StreamingMoments.of(np.einsum("ni,ij,nj->n", x, sig, x))
    my = StreamingMoments.of((y * y) @ np.array([1.0, -1.0, 0.5, -0.5]))
    assert abs(mx.mean - my.mean) <= 3 * math.hypot(mx.se(), my.se())


def test_bingham_failure_is_diagnosed():
    sampler = dm.BinghamSampler(np.array([400.0, -400.0, 0.0, 0.0]))
    with pytest.raises(dm.BinghamSamplerError, match="acceptance rate"):
        sampler.sample(10**6, np.random.default_rng(0), min_rate=1.0, budget=100)


def test_bingham_validation():
    with pytest.raises(ValueError):
        dm.BinghamSampler(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        dm.sample_bingham(np.zeros(3), 4, np.random.default_rng(0))
