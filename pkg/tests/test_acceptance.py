"""One test per acceptance criterion; tolerances are pinned constants below."""

import itertools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from _oracles import (
    cauchy_pdf,
    cdf_by_quadrature,
    half_mass,
    laplace_pdf,
    lomax_pdf,
    normal_pdf,
    student_t_pdf,
    total_mass,
    uniform_pdf,
)
from skegtd import (
    SkeGTDParams,
    fit_mle,
    fit_tse,
    skegtd_cdf,
    skegtd_pdf,
    skegtd_quantile,
    skegtd_sample,
    skegtd_summary,
    theoretical_lmoments,
)
from skegtd.lmom import _solve_targets, _targets, quadrature_lmoments
from skegtd.mle import OmegaParams, fisher_info, loglik_gradient, score_vector
from skegtd.simlab import ExperimentSpec, run_recovery, run_selection
from skegtd.specfun import RngStream

STRESS_R = (-0.9, -0.5, 0.0, 0.5, 0.9)
STRESS_ALPHA = (0.5, 2.0, 10.0)
STRESS_BETA = (0.5, 1.0, 2.0, 8.0)
STRESS_GRID = list(itertools.product(STRESS_R, STRESS_ALPHA, STRESS_BETA))

MASS_TOL = 1e-8
CDF_TOL = 1e-8
QUANTILE_TOL = 1e-7
EXACT_TOL = 1e-10
LIMIT_TOL = 1e-4
LIMIT_ALPHA = 1e6
MC_DRAWS = 1_000_000
MC_SIGMAS = 5.0
UNIFORM_KURT, UNIFORM_KURT_TOL = -1.2, 0.02
LMOM_TOL = 1e-6
LME_INVERSION_TOL = 1e-4
GRAD_FACTOR = 1e-3
PD_GRID = (0.5, 1.0, 2.0, 5.0, 10.0, 25.0)
MSE_R_BRACKET = (1e-4, 1e-3)
RECOVERY_REPLICATES = 500
MONOTONE_SEEDS, MONOTONE_REPLICATES, MONOTONE_MIN = 10, 100, 9
TABLE_BUDGET_S = 600.0
SELECTION_REPLICATES = 200
SELECT_VS_NORMAL_MIN = 95.0
SELECT_VS_ST, SELECT_VS_ST_TOL = 76.4, 7.0

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def test_c01_analytic_consistency_on_stress_grid():
    start = time.perf_counter()
    worst = {"mass": 0.0, "cdf": 0.0, "quantile": 0.0}
    for r, a, b in STRESS_GRID:
        p = SkeGTDParams(0.0, 1.0, r, a, b)
        worst["mass"] = max(worst["mass"], abs(total_mass(p) - 1.0))
        left = half_mass(p, 1e300, -1)
        for x in (-7.5, -2.0, -0.3, 0.0, 0.4, 1.5, 9.0):
            ref = left + half_mass(p, x, 1) if x > 0 else left - half_mass(p, -x, -1)
            worst["cdf"] = max(worst["cdf"], abs(float(skegtd_cdf(p, x)) - ref))
        x = np.linspace(-20, 20, 161)
        F = skegtd_cdf(p, x)
        keep = (F > 1e-6) & (F < 1 - 1e-6)
        back = skegtd_quantile(p, F[keep])
        worst["quantile"] = max(worst["quantile"], float(np.max(np.abs(back - x[keep]) / np.maximum(1, np.abs(x[keep])))))
    elapsed = time.perf_counter() - start
    assert worst["mass"] <= MASS_TOL, worst
    assert worst["cdf"] <= CDF_TOL, worst
    assert worst["quantile"] <= QUANTILE_TOL, worst
    assert elapsed < 120.0
    # the oracle cdf agrees with its own reconstruction away from zero too
    p = SkeGTDParams(1.0, 2.0, 0.3, 2.0, 1.5)
    assert abs(cdf_by_quadrature(p, 3.0) - float(skegtd_cdf(p, 3.0))) <= CDF_TOL


def test_c02_special_case_oracles():
    x = np.linspace(-12, 12, 481)
    mu, sigma = 0.7, 1.3
    exact = {
        "StudentT": (
            skegtd_pdf(SkeGTDParams(mu, sigma, 0, 3.5, 2), x),
            student_t_pdf(x, 7.0, mu, sigma),
        ),
        "Cauchy": (skegtd_pdf(SkeGTDParams(mu, sigma, 0, 0.5, 2), x), cauchy_pdf(x, mu, sigma)),
        "ParetoII": (
            skegtd_pdf(SkeGTDParams(mu, sigma, 1, 2.5, 1), x),
            lomax_pdf(x, mu, 4 * sigma * 2.5, 2.5),
        ),
        "ParetoII(mirrored)": (
            skegtd_pdf(SkeGTDParams(mu, sigma, -1, 2.5, 1), x),
            lomax_pdf(2 * mu - x, mu, 4 * sigma * 2.5, 2.5),
        ),
    }
    for name, (got, ref) in exact.items():
        assert np.max(np.abs(got - ref)) <= EXACT_TOL, name
    inner = x[np.abs(x - mu) < 0.9 * sigma]
    limits = {
        "Normal": (skegtd_pdf(SkeGTDParams(mu, sigma, 0, LIMIT_ALPHA, 2), x), normal_pdf(x, mu, sigma)),
        "Laplace": (skegtd_pdf(SkeGTDParams(mu, sigma, 0, LIMIT_ALPHA, 1), x), laplace_pdf(x, mu, 2 * sigma)),
        "Uniform": (
            skegtd_pdf(SkeGTDParams(mu, sigma, 0, LIMIT_ALPHA, 1e4), inner),
            uniform_pdf(inner, mu - sigma, mu + sigma),
        ),
    }
    for name, (got, ref) in limits.items():
        assert np.max(np.abs(got - ref)) <= LIMIT_TOL, name


def _batch_stats(v, batches=100):
    def stats4(u):
        m = u.mean()
        d = u - m
        m2, m3, m4 = (d**2).mean(), (d**3).mean(), (d**4).mean()
        return np.array([m, m2, m3 / m2**1.5, m4 / m2**2 - 3.0])

    full = stats4(v)
    parts = np.array([stats4(b) for b in np.split(v, batches)])
    return full, parts.std(axis=0, ddof=1) / math.sqrt(batches)


def test_c03_moments_against_monte_carlo():
    # a statistic of order k is checked where its Monte Carlo error is itself finite (alpha*beta > 2k)
    checked = 0
    for idx, (r, a, b) in enumerate(STRESS_GRID):
        if a * b <= 2:
            continue
        p = SkeGTDParams(0.0, 1.0, r, a, b)
        s = skegtd_summary(p)
        v = skegtd_sample(p, MC_DRAWS, RngStream(1000 + idx))
        est, se = _batch_stats(v)
        for k, (name, val) in enumerate(zip(("mean", "variance", "skewness", "kurtosis"), (s.mean, s.variance, s.skewness, s.kurtosis))):
            if a * b <= 2 * (k + 1) or val is None:
                continue
            assert abs(est[k] - val) <= MC_SIGMAS * se[k], (r, a, b, name, est[k], val, se[k])
            checked += 1
    assert checked >= 20
    for r, a, b in STRESS_GRID:
        if a * b > 3:
            g_pos = skegtd_summary(SkeGTDParams(0, 1, r, a, b)).skewness
            g_neg = skegtd_summary(SkeGTDParams(0, 1, -r, a, b)).skewness
            assert g_pos == -g_neg
    assert abs(skegtd_summary(SkeGTDParams(0, 1, 0, 5, 200)).kurtosis - UNIFORM_KURT) <= UNIFORM_KURT_TOL


LMOM_POINTS = [
    (0.5, 3, 2), (-0.9, 0.8, 2), (0.0, 2, 1), (0.9, 10, 8), (0.3, 50, 0.3), (-0.5, 4, 2.5),
    (0.7, 3, 2.5), (-0.2, 1.5, 1.5), (0.6, 0.7, 4), (-0.7, 20, 1), (0.1, 6, 0.6), (0.95, 2.5, 3),
]


def test_c04_lmoment_series_and_self_inversion():
    assert len(LMOM_POINTS) == 12
    for r, a, b in LMOM_POINTS:
        s = theoretical_lmoments(r, a, b).as_array()
        q = quadrature_lmoments(r, a, b).as_array()
        assert np.all(np.abs(s - q) <= LMOM_TOL * np.maximum(1.0, np.abs(q))), (r, a, b, s - q)
    for r, a, b in [(0.7, 3, 2.5), (-0.4, 2, 1.5), (0.2, 5, 3)]:
        (_, _, sol), _ = _solve_targets(_targets(theoretical_lmoments(r, a, b)))
        assert np.all(np.abs(sol.x - [r, a, b]) <= LME_INVERSION_TOL), (r, a, b, sol.x)


def test_c05_em_correctness():
    fits = 0
    for seed, (r, a, b, n) in enumerate([(0.7, 3, 2.5, 500), (-0.4, 2, 1.5, 400), (0.0, 5, 2, 300), (0.5, 1.5, 1, 600)] * 3):
        y = skegtd_sample(SkeGTDParams(0, 1, r, a, b), n, RngStream(50 + seed))
        rep = fit_mle(y)
        trace = np.diff(rep.diagnostics["loglik_trace"])
        assert np.all(trace >= -1e-9 * max(1.0, abs(rep.loglik))), (seed, trace.min())
        if rep.converged:
            w = OmegaParams.from_theta(rep.params["r"], rep.params["alpha"], rep.params["beta"])
            assert np.max(np.abs(loglik_gradient(w, y))) < GRAD_FACTOR * n
            fits += 1
    assert fits >= 9

    for r, a, b, seed in [(0.4, 3.0, 2.0, 1), (-0.6, 4.0, 1.5, 2)]:
        w = OmegaParams.from_theta(r, a, b)
        J = fisher_info(w).J_omega
        assert J[0, 1] == 0.0 and J[0, 2] == 0.0
        s = score_vector(w, skegtd_sample(SkeGTDParams(0, 1, r, a, b), 400_000, RngStream(seed)))
        prod = s[:, :, None] * s[:, None, :]
        est = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / math.sqrt(s.shape[0])
        for i, j in [(0, 0), (1, 1), (1, 2), (2, 2)]:
            assert abs(est[i, j] - J[i, j]) <= MC_SIGMAS * se[i, j], (r, a, b, i, j, est[i, j], J[i, j])

    for r in (-0.9, 0.0, 0.9):
        for a in PD_GRID:
            for b in PD_GRID:
                I = fisher_info(OmegaParams.from_theta(r, a, b)).I_theta
                assert np.all(np.linalg.eigvalsh(I) > 0), (r, a, b)


@pytest.mark.slow
def test_c06_experiment_one_desk_scale():
    start = time.perf_counter()
    spec = ExperimentSpec(sample_sizes=(500,), replicates=RECOVERY_REPLICATES, estimators=("mle",), seed=0)
    table = run_recovery(spec)
    elapsed = time.perf_counter() - start
    mse_r = table.lookup(parameter="r")[0]["mse"]
    assert MSE_R_BRACKET[0] <= mse_r <= MSE_R_BRACKET[1], mse_r
    assert elapsed < TABLE_BUDGET_S

    # monotone MSE in n, replicated over seeds with a reduced replicate count
    good = 0
    for seed in range(MONOTONE_SEEDS):
        spec = ExperimentSpec(sample_sizes=(50, 500), replicates=MONOTONE_REPLICATES, estimators=("mle",), seed=100 + seed)
        t = run_recovery(spec)
        if all(t.lookup(n=500, parameter=k)[0]["mse"] < t.lookup(n=50, parameter=k)[0]["mse"] for k in ("r", "alpha", "beta")):
            good += 1
    assert good >= MONOTONE_MIN, good


@pytest.mark.slow
def test_c07_experiment_two_desk_scale():
    spec = ExperimentSpec(
        kind="selection",
        sample_sizes=(500,),
        replicates=SELECTION_REPLICATES,
        competitors=("Normal", "ST"),
        criteria=("AIC",),
        seed=0,
    )
    table = run_selection(spec)
    vs_normal = table.lookup(competitor="Normal")[0]["percentage"]
    vs_st = table.lookup(competitor="ST")[0]["percentage"]
    assert vs_normal >= SELECT_VS_NORMAL_MIN, vs_normal
    if abs(vs_st - SELECT_VS_ST) > SELECT_VS_ST_TOL:
        pytest.xfail(f"SkeGTD-vs-ST AIC percentage {vs_st:.1f} outside {SELECT_VS_ST} +/- {SELECT_VS_ST_TOL}")


def _fixture(name):
    path = os.path.join(FIXTURES, name)
    if not os.path.exists(path):
        pytest.skip(f"FIXTURE ABSENT: {name}")
    return path


def test_c08_roller_data():
    from skegtd.cli import load_dataset
    from scipy import stats

    ds = load_dataset(_fixture("roller.csv"))
    x = ds.values
    assert x.size == 1150
    assert round(float(x.mean()), 3) == 3.535
    assert round(float(stats.skew(x)), 3) == -0.988
    rep = fit_tse(x)
    for k, v in zip(("mu", "sigma", "r", "alpha", "beta"), (3.837, 0.446, -0.322, 10.000, 1.565)):
        assert abs(rep.params[k] - v) <= 5e-4, k
    assert abs(rep.loglik + 1062.446) <= 0.5
    assert abs(rep.criteria["AIC"] - 2134.891) <= 1.0


def test_c09_martin_marietta_regression():
    from skegtd import fit_regression
    from skegtd.cli import load_dataset

    ds = load_dataset(_fixture("martin_marietta.csv"), columns=2)
    fit = fit_regression(ds.covariate, ds.values)
    assert abs(fit.beta0 - 0.004) <= 0.002 and abs(fit.beta1 - 1.112) <= 0.002


def test_c10_determinism():
    p = SkeGTDParams(0.5, 2.0, -0.3, 4.0, 1.5)
    a = skegtd_sample(p, 2000, RngStream(9))
    assert np.array_equal(a, skegtd_sample(p, 2000, RngStream(9)))
    assert fit_tse(a).params == fit_tse(a.copy()).params
    z = (a - p.mu) / p.sigma
    assert fit_mle(z).params == fit_mle(z.copy()).params

    rec = ExperimentSpec(sample_sizes=(60, 120), replicates=4, estimators=("mle", "lme", "tse"), seed=21)
    assert run_recovery(rec, workers=1).to_csv() == run_recovery(rec, workers=2).to_csv()
    sel = ExperimentSpec(kind="selection", sample_sizes=(80,), replicates=3, competitors=("Normal", "ST"), seed=22)
    assert run_selection(sel, workers=1).to_csv() == run_selection(sel, workers=2).to_csv()

    # a fresh interpreter reproduces the in-process stream bit for bit
    cmd = [sys.executable, "-m", "skegtd.cli", "--seed", "9", "sample", "--mu", "0.5", "--sigma", "2", "--r", "-0.3",
           "--alpha", "4", "--beta", "1.5", "--n", "2000"]
    out = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert np.array_equal(np.array(out.split(), dtype=float), a)
