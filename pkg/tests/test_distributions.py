import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from oracles import f_pdf_direct, ig2_pdf_direct, integrate_positive, mc_mean_check, mc_var_check
from svarmsh import distributions as d
from svarmsh.errors import DomainError, MomentExistenceError, NotPositiveDefiniteError

positive = st.floats(min_value=0.2, max_value=30.0, allow_nan=False)


# --- inverse gamma 2 -------------------------------------------------------


def test_ig2_density_at_one_matches_closed_form():
    expected = (1.5) ** 0.5 * math.exp(-1.5) / math.gamma(0.5)
    assert expected == pytest.approx(0.15418, abs=1e-5)
    assert d.ig2_pdf(1.0, 1, 3) == pytest.approx(expected, rel=1e-13)
    assert d.ig2_log_pdf(1.0, 1, 3) == pytest.approx(math.log(expected), rel=1e-13)


def test_ig2_normalises():
    assert integrate_positive(lambda x: d.ig2_pdf(x, 3, 2)) == pytest.approx(1.0, abs=1e-8)


def test_ig2_matches_direct_formula_on_grid():
    for x in (0.05, 0.3, 1.0, 4.0, 20.0):
        assert d.ig2_pdf(x, 2.5, 1.7) == pytest.approx(ig2_pdf_direct(x, 2.5, 1.7), rel=1e-12)


def test_ig2_mode_by_grid_search():
    grid = np.linspace(0.5, 1.5, 100001)
    assert grid[np.argmax(d.ig2_log_pdf(grid, 4, 6))] == pytest.approx(1.0, abs=1e-4)
    assert d.IG2Params(4, 6).mode == 1.0


def test_ig2_sample_mean():
    x = d.ig2_sample(6, 4, np.random.default_rng(0), size=1_000_000)
    assert mc_mean_check(x, 1.0)


def test_ig2_sample_against_quadrature_cdf():
    x = np.sort(d.ig2_sample(1, 3, np.random.default_rng(1), size=100_000))
    grid = np.quantile(x, np.linspace(0.02, 0.98, 49))
    cdf = np.array([integrate.quad(lambda v: ig2_pdf_direct(v, 1, 3), 0, g, limit=200)[0] for g in grid])
    ecdf = np.searchsorted(x, grid, side="right") / x.size
    assert np.max(np.abs(cdf - ecdf)) < 0.005


def test_ig2_sampler_is_deterministic():
    a = d.ig2_sample(2, 3, np.random.default_rng(5), size=10)
    b = d.ig2_sample(2, 3, np.random.default_rng(5), size=10)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("x,a,b", [(0.0, 1, 1), (-1.0, 1, 1), (1.0, 0, 1), (1.0, 1, -2)])
def test_ig2_domain_errors(x, a, b):
    with pytest.raises(DomainError):
        d.ig2_log_pdf(x, a, b)


def test_ig2_large_shape_stays_finite():
    v = d.ig2_log_pdf(0.9, 400.0, 380.0)
    assert np.isfinite(v)


# --- inverse gamma 1 -------------------------------------------------------


def test_ig1_normalises():
    assert integrate_positive(lambda x: d.ig1_pdf(x, 2, 1)) == pytest.approx(1.0, abs=1e-8)


def test_ig1_density_at_one():
    expected = 2 / math.gamma(0.5) * math.sqrt(0.5) * math.exp(-0.5)
    assert expected == pytest.approx(0.483941, abs=1e-6)
    assert d.ig1_pdf(1.0, 1, 1) == pytest.approx(expected, rel=1e-13)


def test_ig1_is_square_root_of_ig2():
    rng = np.random.default_rng(2)
    v = np.sqrt(d.ig2_sample(3, 2, rng, size=100_000))
    grid = np.quantile(v, np.linspace(0.02, 0.98, 49))
    cdf = np.array([integrate.quad(lambda s: d.ig1_pdf(s, 3, 2), 0, g)[0] for g in grid])
    ecdf = np.searchsorted(np.sort(v), grid, side="right") / v.size
    assert np.max(np.abs(cdf - ecdf)) < 0.005


# --- inverse gamma 2 ratio -------------------------------------------------


def test_ig2r_at_one_with_default_prior():
    assert d.ig2r_pdf(1.0, 1, 1, 3, 3) == pytest.approx(1 / (2 * math.pi), rel=1e-12)


def test_ig2r_equals_f22_at_one():
    assert d.ig2r_pdf(1.0, 2, 2, 2, 2) == pytest.approx(0.25, rel=1e-12)


@pytest.mark.parametrize("z", [0.1, 0.5, 1.0, 2.0, 10.0])
@pytest.mark.parametrize("a1,a2", [(3.0, 5.0), (7.0, 2.0), (12.0, 9.0)])
def test_ig2r_is_f_distribution(z, a1, a2):
    assert d.ig2r_pdf(z, a1, a2, a1, a2) == pytest.approx(f_pdf_direct(z, a2, a1), rel=1e-10)


def test_ig2r_normalises():
    assert integrate_positive(lambda z: d.ig2r_pdf(z, 3, 5, 2, 7)) == pytest.approx(1.0, abs=1e-8)


def test_ig2r_density_of_simulated_ratio():
    rng = np.random.default_rng(3)
    x = d.ig2_sample(1, 3, rng, size=400_000)
    y = d.ig2_sample(1, 3, rng, size=400_000)
    z = x / y
    h = 0.05
    empirical = np.mean(np.abs(z - 1.0) < h) / (2 * h)
    assert empirical == pytest.approx(1 / (2 * math.pi), rel=0.03)


def test_ig2r_mean_formula_and_monte_carlo():
    assert d.ig2r_moment(1, 4, 2, 3, 3) == pytest.approx(1.0, rel=1e-12)
    assert d.ig2r_mean(4, 2, 3, 3) == pytest.approx(1.0, rel=1e-12)


def test_ig2r_variance_formula():
    assert d.ig2r_var(6, 2, 1, 1) == pytest.approx(0.75, rel=1e-12)
    m1, m2 = d.ig2r_moment(1, 6, 2, 1, 1), d.ig2r_moment(2, 6, 2, 1, 1)
    assert m2 - m1**2 == pytest.approx(0.75, rel=1e-12)


def test_ig2r_moment_existence_error_is_structured():
    with pytest.raises(MomentExistenceError) as info:
        d.ig2r_moment(3, 6, 2, 1, 1)
    assert info.value.moment == 3
    assert info.value.condition == {"parameter": "a1", "relation": ">", "bound": 6.0, "value": 6.0}


@pytest.mark.parametrize("k", [1, 2, 3])
def test_ig2r_moment_matches_quadrature(k):
    a1, a2, b1, b2 = 2 * k + 2.5, 3.0, 2.0, 5.0
    num = integrate_positive(lambda z: z**k * d.ig2r_pdf(z, a1, a2, b1, b2))
    assert d.ig2r_moment(k, a1, a2, b1, b2) == pytest.approx(num, rel=1e-6)


def test_ig2r_extreme_scales_finite():
    for b in (1e-8, 1e8):
        v = d.ig2r_pdf(1.0, 3.0, 4.0, b, 1.0 / b)
        assert np.isfinite(v)


# --- inverse gamma 1 ratio -------------------------------------------------


def test_ig1r_normalises():
    assert integrate_positive(lambda z: d.ig1r_pdf(z, 3, 5, 2, 7)) == pytest.approx(1.0, abs=1e-8)


def test_ig1r_square_transform_identity():
    z = np.linspace(0.05, 6, 200)
    lhs = d.ig1r_pdf(z, 3, 5, 2, 7)
    rhs = 2 * z * d.ig2r_pdf(z**2, 3, 5, 2, 7)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@given(a1=positive, a2=positive, b1=positive, b2=positive, z=st.floats(0.01, 50.0))
@settings(max_examples=60, deadline=None)
def test_ig1r_square_transform_property(a1, a2, b1, b2, z):
    lhs = d.ig1r_log_pdf(z, a1, a2, b1, b2)
    rhs = math.log(2 * z) + d.ig2r_log_pdf(z * z, a1, a2, b1, b2)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_ig1r_first_moment():
    assert d.ig1r_moment(1, 4, 2, 1, 1) == pytest.approx(math.pi / 4, rel=1e-12)


def test_ig1r_second_moment_equals_ig2r_mean():
    assert d.ig1r_moment(2, 6, 2, 1, 1) == pytest.approx(0.5, rel=1e-12)
    assert d.ig1r_moment(2, 6, 2, 1, 1) == pytest.approx(d.ig2r_moment(1, 6, 2, 1, 1), rel=1e-12)


def test_ig1r_existence_condition_as_documented():
    with pytest.raises(MomentExistenceError):
        d.ig1r_moment(4, 6, 2, 1, 1)


def test_ig1r_variance_is_second_minus_squared_first():
    a1, a2, b1, b2 = 9.0, 3.0, 2.0, 1.5
    m1, m2 = d.ig1r_moment(1, a1, a2, b1, b2), d.ig1r_moment(2, a1, a2, b1, b2)
    assert d.ig1r_var(a1, a2, b1, b2) == pytest.approx(m2 - m1**2, rel=1e-10)


# --- Monte Carlo moment oracles -------------------------------------------


def test_ratio_moments_against_simulation():
    rng = np.random.default_rng(11)
    a1, a2, b1, b2 = 12.0, 5.0, 3.0, 2.0
    x = d.ig2_sample(a1, b1, rng, size=1_000_000)
    y = d.ig2_sample(a2, b2, rng, size=1_000_000)
    z = x / y
    assert mc_mean_check(z, d.ig2r_mean(a1, a2, b1, b2))
    assert mc_var_check(z, d.ig2r_var(a1, a2, b1, b2))
    assert mc_mean_check(z**3, d.ig2r_moment(3, a1, a2, b1, b2))
    r = np.sqrt(z)
    assert mc_mean_check(r, d.ig1r_mean(a1, a2, b1, b2))
    assert mc_var_check(r, d.ig1r_var(a1, a2, b1, b2))
    assert mc_mean_check(r**3, d.ig1r_moment(3, a1, a2, b1, b2))


def test_param_objects_delegate():
    p = d.IG2RParams(12.0, 5.0, 3.0, 2.0)
    assert p.mean() == d.ig2r_mean(12.0, 5.0, 3.0, 2.0)
    assert p.pdf(1.3) == d.ig2r_pdf(1.3, 12.0, 5.0, 3.0, 2.0)
    with pytest.raises(DomainError):
        d.IG2RParams(0.0, 1.0, 1.0, 1.0)


# --- Dirichlet, multivariate normal and t ----------------------------------


@pytest.mark.parametrize("e", [(1.0, 1.0), (10.0, 1.0)])
def test_dirichlet_means(e):
    x = d.dirichlet_sample(np.array(e), np.random.default_rng(4), size=1_000_000)
    assert np.allclose(x.sum(axis=1), 1.0, atol=1e-12)
    assert mc_mean_check(x[:, 0], e[0] / sum(e))


def test_dirichlet_log_pdf_matches_scipy():
    e = np.array([3.0, 1.5, 2.0])
    x = np.array([0.2, 0.5, 0.3])
    assert d.dirichlet_log_pdf(x, e) == pytest.approx(stats.dirichlet(e).logpdf(x), rel=1e-12)


def test_mvt_covariance():
    rng = np.random.default_rng(6)
    scale = np.array([[2.0, 0.5], [0.5, 1.0]])
    draws = np.array([d.mvt_sample(np.zeros(2), scale, 5.0, rng) for _ in range(200_000)])
    expected = scale * 5 / 3
    assert np.allclose(np.cov(draws.T), expected, rtol=0.05)


def test_mvt_large_dof_is_normal():
    rng = np.random.default_rng(7)
    draws = np.array([d.mvt_sample(np.zeros(2), np.eye(2), 1e6, rng) for _ in range(100_000)])
    assert np.allclose(np.cov(draws.T), np.eye(2), atol=0.02)


def test_mvt_rejects_non_pd_scale():
    with pytest.raises(NotPositiveDefiniteError):
        d.mvt_sample(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 5.0, np.random.default_rng(0))


def test_mvn_log_pdf_matches_scipy():
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    x = np.array([0.4, -1.2])
    L = np.linalg.cholesky(cov)
    assert d.mvn_log_pdf(x, np.zeros(2), L) == pytest.approx(stats.multivariate_normal(np.zeros(2), cov).logpdf(x))
