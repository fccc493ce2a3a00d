"""Simple linear regression with SkeGTD errors.

y_i = b0 + b1 x_i + e_i with e_i ~ SkeGTD(0, sigma, r, alpha, beta), so the
fitted line tracks the mode of y given x.  The mean line is recovered by
adding E(e) = sigma * mean0(r, alpha, beta) when alpha*beta > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .core import SkeGTDParams, shape_moments, skegtd_logpdf, skegtd_pdf
from .errors import DomainError, FitError
from .tse import fit_tse

__all__ = ["RegressionFit", "fit_regression", "residual_report", "PARAM_NAMES"]

PARAM_NAMES = ("beta0", "beta1", "sigma", "r", "alpha", "beta")
R_BOUND = 0.999
ALPHA_BOUNDS = (0.05, 500.0)
BETA_BOUNDS = (0.1, 50.0)


@dataclass
class RegressionFit:
    beta0: float
    beta1: float
    sigma: float
    r: float
    alpha: float
    beta: float
    loglik: float
    n: int
    standard_errors: Optional[np.ndarray] = None
    converged: bool = True
    flags: list = field(default_factory=list)
    trace: list = field(default_factory=list, repr=False)

    @property
    def error_law(self):
        return SkeGTDParams(0.0, self.sigma, self.r, self.alpha, self.beta)

    @property
    def error_mean(self):
        if not self.alpha * self.beta > 1.0:
            return None
        return float(self.sigma * shape_moments(self.r, self.alpha, self.beta)[0])

    @property
    def adjusted_intercept(self):
        m = self.error_mean
        return None if m is None else self.beta0 + m

    def as_vector(self):
        return np.array([self.beta0, self.beta1, self.sigma, self.r, self.alpha, self.beta])

    def to_dict(self):
        out = dict(zip(PARAM_NAMES, map(float, self.as_vector())))
        out.update(
            loglik=self.loglik,
            n=self.n,
            standard_errors=None
            if self.standard_errors is None
            else dict(zip(PARAM_NAMES, map(float, self.standard_errors))),
            adjusted_intercept=self.adjusted_intercept,
            converged=self.converged,
            flags=list(self.flags),
        )
        return out


def _pointwise_loglik(theta, x, y):
    b0, b1, sigma, r, alpha, beta = theta
    return skegtd_logpdf(SkeGTDParams(0.0, sigma, r, alpha, beta), y - b0 - b1 * x)


def _to_natural(v, fix_r):
    r = 0.0 if fix_r else v[3]
    return (v[0], v[1], math.exp(v[2]), r, math.exp(v[4]), math.exp(v[5]))


def _empirical_se(theta, x, y):
    """Standard errors from the outer-product-of-scores information."""
    theta = np.asarray(theta, dtype=float)
    n = y.size
    scores = np.empty((n, 6))
    for k in range(6):
        # sigma, alpha and beta are positive: step relative to their size
        h = 1e-6 * (theta[k] if k in (2, 4, 5) else max(1.0, abs(theta[k])))
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        if k == 3:
            up[k] = min(up[k], R_BOUND)
            dn[k] = max(dn[k], -R_BOUND)
        scores[:, k] = (_pointwise_loglik(up, x, y) - _pointwise_loglik(dn, x, y)) / (up[k] - dn[k])
    info = scores.T @ scores
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(cov)
    return np.sqrt(d) if np.all(d > 0) else None


def fit_regression(x, y, fix_r=False, tse_start=True):
    """Maximum likelihood of (b0, b1, sigma, r, alpha, beta).

    Starts: OLS line with the two-step estimate of the residual law, plus
    two generic error laws.  ``fix_r=True`` fits the symmetric submodel.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DomainError("x and y must have equal length")
    if x.size < 10:
        raise DomainError("fit_regression needs n >= 10")
    if np.ptp(x) == 0:
        raise DomainError("x is constant")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("data contain non-finite values")

    b1_ols, b0_ols = np.polyfit(x, y, 1)
    resid = y - b0_ols - b1_ols * x
    mad = float(np.median(np.abs(resid - np.median(resid)))) * 1.4826
    scale0 = max(mad, 1e-8 * (np.std(y) + 1e-300), 1e-300)

    starts = []
    if tse_start and x.size >= 20:
        try:
            t = fit_tse(resid).params
            starts.append((b0_ols + t["mu"], b1_ols, t["sigma"], 0.0 if fix_r else t["r"], t["alpha"], t["beta"]))
        except (DomainError, FitError, ValueError):
            pass
    med = float(np.median(resid))
    starts.append((b0_ols + med, b1_ols, scale0, 0.0, 2.0, 2.0))
    starts.append((b0_ols + med, b1_ols, scale0, 0.0, 0.8, 2.0))

    bounds = [
        (None, None),
        (None, None),
        (None, None),
        (-R_BOUND, R_BOUND),
        tuple(map(math.log, ALPHA_BOUNDS)),
        tuple(map(math.log, BETA_BOUNDS)),
    ]
    if fix_r:
        bounds[3] = (0.0, 0.0)

    def nll(v):
        try:
            val = -float(np.sum(_pointwise_loglik(_to_natural(v, fix_r), x, y)))
        except (DomainError, OverflowError):
            return 1e300
        return val if np.isfinite(val) else 1e300

    trace = []
    best = None
    for idx, (b0, b1, s, r, a, b) in enumerate(starts):
        v0 = np.array([
            b0,
            b1,
            math.log(s),
            float(np.clip(r, -R_BOUND, R_BOUND)),
            math.log(float(np.clip(a, *ALPHA_BOUNDS))),
            math.log(float(np.clip(b, *BETA_BOUNDS))),
        ])
        res = optimize.minimize(nll, v0, method="L-BFGS-B", bounds=bounds, options={"maxiter": 2000})
        trace.append({"start": idx, "nll": float(res.fun), "success": bool(res.success), "message": str(res.message)})
        if np.isfinite(res.fun) and res.fun < 1e299 and (best is None or res.fun < best.fun - 1e-12):
            best = res
    if best is None:
        raise FitError(f"regression fit failed from every start: {trace}")

    theta = _to_natural(best.x, fix_r)
    flags = []
    if abs(theta[3]) >= R_BOUND - 1e-9:
        flags.append("r_boundary")
    if theta[4] <= ALPHA_BOUNDS[0] * (1 + 1e-9) or theta[4] >= ALPHA_BOUNDS[1] * (1 - 1e-9):
        flags.append("alpha_boundary")
    se = None if flags else _empirical_se(theta, x, y)
    if fix_r and se is not None:
        se[3] = 0.0
    return RegressionFit(
        *map(float, theta),
        loglik=-float(best.fun),
        n=int(x.size),
        standard_errors=se,
        converged=bool(best.success),
        flags=flags,
        trace=trace,
    )


def residual_report(fit: RegressionFit, x, y, points=512):
    """Residuals and the fitted error density on a grid for a histogram overlay."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    resid = y - fit.beta0 - fit.beta1 * x
    lo, hi = float(resid.min()), float(resid.max())
    pad = 0.1 * (hi - lo) if hi > lo else 0.1 * max(fit.sigma, 1e-12)
    grid = np.linspace(lo - pad, hi + pad, points)
    return {
        "residuals": resid,
        "grid": grid,
        "density": skegtd_pdf(fit.error_law, grid),
        "error_mean": fit.error_mean,
    }
