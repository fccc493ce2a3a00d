"""Competitor families, their ML fits, and information-criterion comparison.

Every family is fitted with a location and a scale, so the parameter counts
are Normal 2, t 3, SN 3, SC 3, ST 4 and SkeGTD 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .core import SkeGTDParams, skegtd_logpdf
from .errors import DomainError, FitError
from .report import information_criteria
from .specfun import as_generator

__all__ = [
    "FAMILIES",
    "N_PARAMS",
    "CandidateModel",
    "sc_logpdf",
    "sc_pdf",
    "sc_cdf",
    "sc_sample",
    "st_logpdf",
    "sn_logpdf",
    "family_logpdf",
    "fit_candidate",
    "criteria",
    "compare",
]

FAMILIES = ("Normal", "StudentT", "SN", "ST", "SC", "SkeGTD")
N_PARAMS = {"Normal": 2, "StudentT": 3, "SN": 3, "ST": 4, "SC": 3, "SkeGTD": 5}
SN_SHAPE_CAP = 50.0


# --- densities -----------------------------------------------------------------


def _std(x, loc, scale):
    if not scale > 0:
        raise DomainError(f"scale must be > 0, got {scale!r}")
    return (np.asarray(x, dtype=float) - loc) / scale


def sc_logpdf(xi, omega, alpha, x):
    """Skew-Cauchy log density (the nu = 1 member of the Azzalini-Capitanio skew-t)."""
    z = _std(x, xi, omega)
    skew = 1.0 + alpha * z / np.sqrt(1.0 + z * z * (1.0 + alpha * alpha))
    with np.errstate(divide="ignore"):
        return -math.log(math.pi * omega) - np.log1p(z * z) + np.log(skew)


def sc_pdf(xi, omega, alpha, x):
    return np.exp(sc_logpdf(xi, omega, alpha, x))


def sc_cdf(xi, omega, alpha, x):
    """Closed form: 1/2 + [arctan z + arctan(s/alpha) - sign(alpha) pi/2] / pi,
    with s = sqrt(1 + (1 + alpha^2) z^2)."""
    z = _std(x, xi, omega)
    if alpha == 0:
        return 0.5 + np.arctan(z) / math.pi
    s = np.sqrt(1.0 + (1.0 + alpha * alpha) * z * z)
    return 0.5 + (np.arctan(z) + np.arctan(s / alpha) - math.copysign(math.pi / 2, alpha)) / math.pi


def sc_sample(xi, omega, alpha, n, rng=None):
    """Z = (delta |U0| + sqrt(1 - delta^2) U1) / |V| with U0, U1, V iid N(0, 1)."""
    g = as_generator(rng)
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    u0 = np.abs(g.standard_normal(n))
    u1 = g.standard_normal(n)
    v = np.abs(g.standard_normal(n))
    return xi + omega * (delta * u0 + math.sqrt(1.0 - delta * delta) * u1) / v


def st_logpdf(nu, gamma, x, loc=0.0, scale=1.0):
    """Fernandez-Steel two-piece skew-t: t(gamma z) for z <= 0, t(z/gamma) for z > 0."""
    if not (nu > 0 and gamma > 0):
        raise DomainError("nu and gamma must be positive")
    z = _std(x, loc, scale)
    arg = np.where(z <= 0, z * gamma, z / gamma)
    return math.log(2.0 / (gamma + 1.0 / gamma)) + stats.t.logpdf(arg, nu) - math.log(scale)


def sn_logpdf(xi, omega, lam, x):
    """Azzalini skew-normal: 2/omega phi(z) Phi(lam z)."""
    z = _std(x, xi, omega)
    return math.log(2.0 / omega) + stats.norm.logpdf(z) + special.log_ndtr(lam * z)


def family_logpdf(name, params, x):
    """Log density of a named family at a parameter dict."""
    p = params
    if name == "Normal":
        return stats.norm.logpdf(x, p["mu"], p["sigma"])
    if name == "StudentT":
        return stats.t.logpdf(x, p["nu"], p["mu"], p["sigma"])
    if name == "SN":
        return sn_logpdf(p["xi"], p["omega"], p["lambda"], x)
    if name == "ST":
        return st_logpdf(p["nu"], p["gamma"], x, p["mu"], p["sigma"])
    if name == "SC":
        return sc_logpdf(p["xi"], p["omega"], p["alpha"], x)
    if name == "SkeGTD":
        return skegtd_logpdf(SkeGTDParams(p["mu"], p["sigma"], p["r"], p["alpha"], p["beta"]), x)
    raise DomainError(f"unknown family {name!r}")


# --- fitting ---------------------------------------------------------------------


@dataclass
class CandidateModel:
    name: str
    params: dict
    loglik: float
    rho: int
    n: int
    converged: bool = True
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.rho != N_PARAMS.get(self.name):
            raise DomainError(f"{self.name} has {N_PARAMS.get(self.name)} parameters, got rho={self.rho}")

    @property
    def criteria(self):
        return information_criteria(self.loglik, self.rho, self.n)


def criteria(m: CandidateModel, n=None):
    """AIC, BIC and EDC of a fitted candidate."""
    return information_criteria(m.loglik, m.rho, m.n if n is None else n)


# each family: (unpack free vector -> params dict, bounds, starts(data) -> list of free vectors)


def _robust_loc_scale(y):
    med = float(np.median(y))
    iqr = float(np.subtract(*np.percentile(y, [75, 25])))
    return med, max(iqr / 2.0, 1e-3 * (np.std(y) + 1e-12), 1e-12)


def _t_spec(y):
    m, s = _robust_loc_scale(y)
    unpack = lambda v: {"mu": v[0], "sigma": math.exp(v[1]), "nu": math.exp(v[2])}  # noqa: E731
    bounds = [(None, None), (None, None), (math.log(0.05), math.log(500.0))]
    starts = [(m, math.log(s), math.log(nu)) for nu in (1.0, 3.0, 10.0, 30.0)]
    return unpack, bounds, starts


def _sn_spec(y):
    m, s = _robust_loc_scale(y)
    sd = float(np.std(y))
    g1 = float(stats.skew(y))
    unpack = lambda v: {"xi": v[0], "omega": math.exp(v[1]), "lambda": v[2]}  # noqa: E731
    bounds = [(None, None), (None, None), (-SN_SHAPE_CAP, SN_SHAPE_CAP)]
    sgn = 1.0 if g1 >= 0 else -1.0
    mean = float(np.mean(y))
    starts = [
        (mean, math.log(sd), 0.0),
        (mean - sgn * 0.8 * sd, math.log(1.3 * sd), sgn * 3.0),
        (m - sgn * 0.5 * s, math.log(1.5 * sd), sgn * 1.0),
        (mean - sgn * sd, math.log(1.6 * sd), sgn * 10.0),
    ]
    return unpack, bounds, starts


def _st_spec(y):
    m, s = _robust_loc_scale(y)
    g = 1.0 if np.mean(y > m) >= 0.5 else -1.0
    unpack = lambda v: {"mu": v[0], "sigma": math.exp(v[1]), "nu": math.exp(v[2]), "gamma": math.exp(v[3])}  # noqa: E731
    bounds = [(None, None), (None, None), (math.log(0.05), math.log(500.0)), (math.log(0.02), math.log(50.0))]
    starts = [
        (m, math.log(s), math.log(3.0), 0.0),
        (m, math.log(s), math.log(1.0), g * 0.7),
        (m, math.log(s), math.log(10.0), g * 0.3),
        (m, math.log(s), math.log(2.0), g * 1.5),
    ]
    return unpack, bounds, starts


def _sc_spec(y):
    m, s = _robust_loc_scale(y)
    g = 1.0 if np.mean(y > m) >= 0.5 else -1.0
    unpack = lambda v: {"xi": v[0], "omega": math.exp(v[1]), "alpha": v[2]}  # noqa: E731
    bounds = [(None, None), (None, None), (-200.0, 200.0)]
    lo = float(np.percentile(y, 5 if g > 0 else 95))
    starts = [
        (m, math.log(s), 0.0),
        (m - g * s, math.log(s), g * 2.0),
        (lo, math.log(s), g * 10.0),
        (m, math.log(2 * s), g * 0.5),
    ]
    return unpack, bounds, starts


_SPECS = {"StudentT": _t_spec, "SN": _sn_spec, "ST": _st_spec, "SC": _sc_spec}


def _minimize_family(name, y, unpack, bounds, starts):
    def nll(v):
        try:
            val = -float(np.sum(family_logpdf(name, unpack(v), y)))
        except (DomainError, OverflowError, ValueError):
            return 1e300
        return val if np.isfinite(val) else 1e300

    best = None
    for idx, x0 in enumerate(starts):
        try:
            res = optimize.minimize(nll, np.asarray(x0, dtype=float), method="L-BFGS-B", bounds=bounds)
        except (ValueError, FloatingPointError):
            continue
        if not np.isfinite(res.fun) or res.fun >= 1e299:
            continue
        if best is None or res.fun < best[0].fun - 1e-12:
            best = (res, idx)
    if best is None:
        raise FitError(f"{name}: every start diverged")
    res, idx = best
    params = {k: float(v) for k, v in unpack(res.x).items()}
    return params, -float(res.fun), bool(res.success), idx


def _skegtd_starts(y, tse_fit, st_params, t_params):
    starts = []
    if tse_fit is not None:
        p = tse_fit.params
        starts.append((p["mu"], p["sigma"], p["r"], p["alpha"], p["beta"]))
    if st_params is not None:
        # beta = 2 embeds the two-piece skew-t: nu = 2 alpha, gamma^2 = (1+r)/(1-r)
        g = st_params["gamma"]
        r = (g * g - 1.0) / (g * g + 1.0)
        sigma = st_params["sigma"] * (g + 1.0 / g) / 2.0
        starts.append((st_params["mu"], sigma, r, st_params["nu"] / 2.0, 2.0))
    if t_params is not None:
        starts.append((t_params["mu"], t_params["sigma"], 0.0, t_params["nu"] / 2.0, 2.0))
    m, s = _robust_loc_scale(y)
    starts.append((m, s, 0.0, 2.0, 2.0))
    return starts


SKEGTD_BOUNDS = ((-0.999, 0.999), (0.05, 500.0), (0.2, 50.0))


def _fit_skegtd_ml(y, starts):
    rb, ab, bb = SKEGTD_BOUNDS
    bounds = [(None, None), (None, None), rb, (math.log(ab[0]), math.log(ab[1])), (math.log(bb[0]), math.log(bb[1]))]

    def nll(v):
        try:
            p = SkeGTDParams(v[0], math.exp(v[1]), v[2], math.exp(v[3]), math.exp(v[4]))
        except (DomainError, OverflowError):
            return 1e300
        val = -float(np.sum(skegtd_logpdf(p, y)))
        return val if np.isfinite(val) else 1e300

    best = None
    for idx, (mu, sigma, r, alpha, beta) in enumerate(starts):
        x0 = np.array([
            mu,
            math.log(sigma),
            float(np.clip(r, *rb)),
            math.log(float(np.clip(alpha, *ab))),
            math.log(float(np.clip(beta, *bb))),
        ])
        res = optimize.minimize(nll, x0, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and res.fun < 1e299 and (best is None or res.fun < best[0].fun - 1e-12):
            best = (res, idx)
    if best is None:
        raise FitError("SkeGTD: every start diverged")
    res, idx = best
    v = res.x
    params = {"mu": v[0], "sigma": math.exp(v[1]), "r": v[2], "alpha": math.exp(v[3]), "beta": math.exp(v[4])}
    return {k: float(x) for k, x in params.items()}, -float(res.fun), bool(res.success), idx


def fit_candidate(name, data, method="ml", context=None):
    """Maximum likelihood fit of one family.

    For SkeGTD, ``method="tse"`` returns the two-step estimate itself while
    ``method="ml"`` (default) maximises the five-parameter likelihood from
    the two-step estimate and from the embeddings of already fitted ST and
    t models (passed through ``context``, a dict of CandidateModel by name).
    """
    y = np.asarray(data, dtype=float).ravel()
    if y.size < 10:
        raise DomainError("fit_candidate needs n >= 10")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contain non-finite values")
    n = int(y.size)
    flags = []
    if name == "Normal":
        mu = float(y.mean())
        sigma = float(math.sqrt(np.mean((y - mu) ** 2)))
        params = {"mu": mu, "sigma": sigma}
        ll = float(np.sum(stats.norm.logpdf(y, mu, sigma)))
        return CandidateModel(name, params, ll, 2, n)
    if name in _SPECS:
        params, ll, ok, idx = _minimize_family(name, y, *_SPECS[name](y))
        if name == "SN" and abs(params["lambda"]) >= SN_SHAPE_CAP - 1e-6:
            flags.append("sn_shape_capped")
        return CandidateModel(name, params, ll, N_PARAMS[name], n, converged=ok, flags=flags)
    if name == "SkeGTD":
        from .tse import fit_tse

        try:
            tse = fit_tse(y) if y.size >= 20 else None
        except (DomainError, FitError):
            tse = None
            flags.append("tse_failed")
        if method == "tse":
            if tse is None:
                raise FitError("SkeGTD: two-step estimation failed")
            return CandidateModel(name, dict(tse.params), tse.loglik, 5, n, converged=tse.converged, flags=list(tse.flags))
        context = context or {}
        st = context.get("ST")
        tt = context.get("StudentT")
        starts = _skegtd_starts(y, tse, st.params if st else None, tt.params if tt else None)
        params, ll, ok, idx = _fit_skegtd_ml(y, starts)
        return CandidateModel(name, params, ll, 5, n, converged=ok, flags=flags + [f"start_{idx}"])
    raise DomainError(f"unknown family {name!r}")


def compare(data, families=FAMILIES, skegtd_method="ml"):
    """Fit every family; failures are recorded as None with the error text."""
    fitted, failures = {}, {}
    order = [f for f in FAMILIES if f in families]
    for name in order:
        try:
            fitted[name] = fit_candidate(name, data, method=skegtd_method, context=fitted)
        except (FitError, DomainError) as exc:
            failures[name] = str(exc)
    return fitted, failures
