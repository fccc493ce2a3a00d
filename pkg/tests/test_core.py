import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from _oracles import cdf_by_quadrature, mc_mean_se, normal_pdf, student_t_pdf, total_mass
from skegtd import (
    SGNParams,
    SkeGTDParams,
    limiting_case_check,
    shape_moments,
    skegtd_cdf,
    skegtd_logpdf,
    skegtd_moment,
    skegtd_pdf,
    skegtd_quantile,
    skegtd_sample,
    skegtd_sf,
    skegtd_summary,
)
from skegtd.core import sgn_cdf, sgn_logpdf, sgn_pdf, sgn_sample, shape_skew_kurt
from skegtd.errors import DomainError, MomentNotFiniteError
from skegtd.specfun import RngStream

params = st.builds(
    SkeGTDParams,
    mu=st.floats(-5, 5),
    sigma=st.floats(0.1, 5),
    r=st.floats(-0.99, 0.99),
    alpha=st.floats(0.3, 30),
    beta=st.floats(0.3, 10),
)


@pytest.mark.parametrize(
    "kw",
    [dict(sigma=0.0), dict(sigma=-1.0), dict(r=1.5), dict(alpha=0.0), dict(beta=-2.0), dict(mu=math.nan)],
)
def test_parameter_validation(kw):
    with pytest.raises(DomainError):
        SkeGTDParams(**kw)


def test_cauchy_point_and_mode_constant():
    assert skegtd_logpdf(SkeGTDParams(0, 1, 0, 0.5, 2), 0.0) == pytest.approx(-math.log(math.pi), abs=1e-12)
    p = SkeGTDParams(1.3, 0.7, -0.4, 3.5, 1.7)
    expected = math.log(p.beta / (2 * p.sigma * (2 * p.alpha) ** (1 / p.beta) * math.exp(math.lgamma(p.alpha) + math.lgamma(1 / p.beta) - math.lgamma(p.alpha + 1 / p.beta))))
    assert skegtd_logpdf(p, p.mu) == pytest.approx(expected, abs=1e-12)


def test_student_t4_density():
    x = np.linspace(-15, 15, 301)
    assert np.max(np.abs(skegtd_pdf(SkeGTDParams(0, 1, 0, 2, 2), x) - student_t_pdf(x, 4))) <= 1e-12


@given(params, st.floats(-20, 20))
def test_mirror_symmetry(p, x):
    q = SkeGTDParams(p.mu, p.sigma, -p.r, p.alpha, p.beta)
    a, b = skegtd_logpdf(p, x), skegtd_logpdf(q, 2 * p.mu - x)
    assert a == pytest.approx(b, abs=1e-10, rel=1e-12)


@given(params)
def test_cdf_at_location(p):
    assert skegtd_cdf(p, p.mu) == pytest.approx((1 - p.r) / 2, abs=1e-14)
    assert skegtd_quantile(p, (1 - p.r) / 2) == pytest.approx(p.mu, abs=1e-9 * max(1.0, p.sigma))


@given(params, st.floats(0.0, 10.0))
def test_symmetric_cdf(p, t):
    p = SkeGTDParams(p.mu, p.sigma, 0.0, p.alpha, p.beta)
    assert skegtd_cdf(p, p.mu - t) + skegtd_cdf(p, p.mu + t) == pytest.approx(1.0, abs=1e-12)
    assert skegtd_quantile(p, 0.5) == pytest.approx(p.mu, abs=1e-9)


@given(params, st.floats(-30, 30))
def test_cdf_sf_complement_and_monotone(p, x):
    assert skegtd_cdf(p, x) + skegtd_sf(p, x) == pytest.approx(1.0, abs=1e-12)
    assert skegtd_cdf(p, x) <= skegtd_cdf(p, x + 0.1) + 1e-15


def test_cdf_against_quadrature():
    p = SkeGTDParams(0, 1, 0.5, 3, 2)
    for x in (-2.0, -1.0, 0.0, 1.0, 2.0):
        assert abs(skegtd_cdf(p, x) - cdf_by_quadrature(p, x)) <= 1e-8


@pytest.mark.parametrize("p", [SkeGTDParams(0, 1, 0.5, 3, 2), SkeGTDParams(2, 3, -0.9, 0.5, 0.5), SkeGTDParams(0, 1, 1.0, 2, 1)])
def test_density_integrates_to_one(p):
    assert abs(total_mass(p) - 1.0) <= 1e-8


@given(params, st.floats(1e-6, 1 - 1e-6))
def test_quantile_inverts_cdf(p, q):
    x = skegtd_quantile(p, q)
    assert skegtd_cdf(p, x) == pytest.approx(q, abs=1e-10)


def test_quantile_round_trip_examples():
    p = SkeGTDParams(0, 1, 0.5, 3, 2)
    for x in (-1.0, 0.3, 4.0):
        assert abs(skegtd_quantile(p, skegtd_cdf(p, x)) - x) <= 1e-7
    with pytest.raises(DomainError):
        skegtd_quantile(p, 1.0)


def test_one_sided_law():
    p = SkeGTDParams(2.0, 1.0, 1.0, 3.0, 1.5)
    x = skegtd_sample(p, 10_000, RngStream(0))
    assert np.all(x >= p.mu)
    assert skegtd_pdf(p, 1.5) == 0.0
    assert skegtd_cdf(p, 1.5) == 0.0


def test_sampler_reproducible():
    p = SkeGTDParams(0, 1, 0.3, 2, 2)
    assert np.array_equal(skegtd_sample(p, 50, RngStream(9)), skegtd_sample(p, 50, RngStream(9)))
    assert skegtd_sample(p, 0, RngStream(9)).size == 0


def test_sample_moments_match_analytic():
    n = 200_000
    x = skegtd_sample(SkeGTDParams(0, 1, 0, 4, 2), n, RngStream(11))
    m, se = mc_mean_se(x)
    assert abs(m) < 5 * se
    p = SkeGTDParams(0, 1, 0.7, 3, 2.5)
    x = skegtd_sample(p, n, RngStream(12))
    s = skegtd_summary(p)
    m, se = mc_mean_se(x)
    assert abs(m - s.mean) < 5 * se
    v, se_v = mc_mean_se((x - s.mean) ** 2)
    assert abs(v - s.variance) < 5 * se_v


@pytest.mark.parametrize("p", [SkeGTDParams(0, 1, 0.9, 0.5, 2), SkeGTDParams(0, 1, -0.5, 2, 0.7), SkeGTDParams(1, 2, 0.3, 5, 8)])
def test_sampler_law_ks(p):
    x = skegtd_sample(p, 100_000, RngStream(5))
    res = stats.kstest(x, lambda v: skegtd_cdf(p, v))
    assert res.pvalue > 0.01


def test_first_moment_formula():
    p = SkeGTDParams(1.5, 2.0, 0.4, 3.0, 2.0)
    B = lambda a, b: math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))  # noqa: E731
    expected = p.mu + 2 * (2 * p.alpha) ** (1 / p.beta) * p.sigma * p.r * B(p.alpha - 1 / p.beta, 2 / p.beta) / B(p.alpha, 1 / p.beta)
    assert skegtd_moment(p, 1) == pytest.approx(expected, rel=1e-12)
    assert skegtd_moment(SkeGTDParams(2.0, 1.0, 0.0, 3.0, 2.0), 1) == pytest.approx(2.0, abs=1e-12)


def test_moment_existence_is_strict():
    p = SkeGTDParams(0, 1, 0.2, 1.0, 2.0)  # alpha * beta = 2
    skegtd_moment(p, 1)
    with pytest.raises(MomentNotFiniteError):
        skegtd_moment(p, 2)
    s = skegtd_summary(p)
    assert s.variance is None and s.mean is not None


@pytest.mark.parametrize("r, alpha, beta", [(0.5, 3, 2), (-0.3, 4, 1.5), (0.0, 6, 1.0)])
def test_moments_against_quadrature(r, alpha, beta):
    p = SkeGTDParams(0, 1, r, alpha, beta)
    for k in (1, 2, 3, 4):
        if not p.moment_exists(k):
            continue
        f = lambda x: x**k * skegtd_pdf(p, x)  # noqa: E731
        q = integrate.quad(f, -np.inf, 0, epsabs=1e-13, limit=400)[0] + integrate.quad(f, 0, np.inf, epsabs=1e-13, limit=400)[0]
        assert skegtd_moment(p, k) == pytest.approx(q, rel=1e-7, abs=1e-9)


def test_second_moment_monte_carlo():
    p = SkeGTDParams(0, 1, 0.5, 3, 2)
    x = skegtd_sample(p, 1_000_000, RngStream(21))
    m, se = mc_mean_se(x**2)
    assert abs(m - skegtd_moment(p, 2)) < 5 * se


@given(st.floats(-0.95, 0.95), st.floats(1.0, 20.0), st.floats(1.0, 8.0))
def test_skew_antisymmetry_and_summary_consistency(r, alpha, beta):
    if alpha * beta <= 4.5:
        return
    a = skegtd_summary(SkeGTDParams(0, 1, r, alpha, beta))
    b = skegtd_summary(SkeGTDParams(0, 1, -r, alpha, beta))
    assert a.skewness == -b.skewness
    assert a.kurtosis == pytest.approx(b.kurtosis, rel=1e-12, abs=1e-12)
    p = SkeGTDParams(0.5, 1.5, r, alpha, beta)
    s = skegtd_summary(p)
    m1, m2 = skegtd_moment(p, 1), skegtd_moment(p, 2)
    assert s.mean == pytest.approx(m1, rel=1e-10, abs=1e-10)
    assert s.variance == pytest.approx(m2 - m1 * m1, rel=1e-9, abs=1e-10)
    g1, g2 = shape_skew_kurt(r, alpha, beta)
    assert g1 == pytest.approx(s.skewness, rel=1e-9, abs=1e-12)
    assert g2 == pytest.approx(s.kurtosis, rel=1e-9, abs=1e-12)


def test_shape_moments_vectorised():
    r = np.array([0.1, -0.4])
    out = shape_moments(r, np.array([3.0, 5.0]), np.array([2.0, 1.5]))
    single = shape_moments(0.1, 3.0, 2.0)
    assert all(o[0] == pytest.approx(float(s)) for o, s in zip(out, single))
    assert skegtd_summary(SkeGTDParams(0, 1, 0, 3, 2)).skewness == 0.0


def test_kurtosis_uniform_limit():
    assert abs(skegtd_summary(SkeGTDParams(0, 1, 0, 5, 200)).kurtosis + 1.2) <= 0.02


def test_sgn_normal_case_and_cdf():
    x = np.linspace(-6, 6, 121)
    assert np.max(np.abs(sgn_pdf(SGNParams(0.5, 1.3, 0, 2), x) - normal_pdf(x, 0.5, 1.3))) <= 1e-12
    p = SGNParams(0.0, 1.0, 0.4, 1.3)
    assert sgn_cdf(p, 0.0) == pytest.approx(0.3, abs=1e-14)
    for v in (-3.0, -0.4, 0.7, 2.5):
        q = integrate.quad(lambda t: math.exp(sgn_logpdf(p, t)), -np.inf, v, epsabs=1e-13)[0]
        assert abs(sgn_cdf(p, v) - q) <= 1e-8
    s = sgn_sample(p, 50_000, RngStream(1))
    assert stats.kstest(s, lambda v: sgn_cdf(p, v)).pvalue > 0.01


def test_large_alpha_approaches_sgn():
    x = np.linspace(-6, 6, 241)
    for r, beta in [(0.0, 2.0), (0.5, 1.5), (-0.8, 0.7)]:
        a = skegtd_pdf(SkeGTDParams(0, 1, r, 1e6, beta), x)
        b = sgn_pdf(SGNParams(0, 1, r, beta), x)
        assert np.max(np.abs(a - b)) < 1e-4


def test_limiting_case_labels():
    assert limiting_case_check(SkeGTDParams(0, 1, 0, 2.5, 2)).name == "StudentT"
    assert limiting_case_check(SkeGTDParams(0, 1, 0, 2.5, 2)).params["df"] == 5
    c = limiting_case_check(SkeGTDParams(1, 2, 0, 0.5, 2))
    assert (c.name, c.params) == ("Cauchy", {"loc": 1, "scale": 2})
    lo = limiting_case_check(SkeGTDParams(1, 2, 1, 3, 1))
    assert lo.name == "ParetoII" and lo.params["scale"] == 4 * 2 * 3
    assert limiting_case_check(SkeGTDParams(0, 1, 0.3, 3, 2)) is None
    assert limiting_case_check(SkeGTDParams(0, 1, 0, 1e5, 2)).name == "Normal"
