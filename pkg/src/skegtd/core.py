"""SkeGTD and SGN distributions: density, cdf, quantile, sampling, moments.

Parameterisation: location ``mu``, scale ``sigma > 0``, skewness
``|r| <= 1``, tail shape ``alpha > 0`` and peak shape ``beta > 0``.  The
normalized law has ``mu = 0`` and ``sigma = 1``.

Everything is computed in log space where it matters and all public
functions broadcast over numpy arrays in ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError, MomentNotFiniteError
from .specfun import _log_beta, as_generator

__all__ = [
    "SkeGTDParams",
    "SGNParams",
    "Summary",
    "LimitingCase",
    "skegtd_logpdf",
    "skegtd_pdf",
    "skegtd_cdf",
    "skegtd_sf",
    "skegtd_quantile",
    "skegtd_sample",
    "skegtd_moment",
    "normalized_raw_moment",
    "skegtd_summary",
    "shape_moments",
    "shape_skew_kurt",
    "sgn_logpdf",
    "sgn_pdf",
    "sgn_cdf",
    "sgn_sample",
    "limiting_case_check",
    "LARGE_ALPHA",
]

# alpha at or above which the SGN limit is reported as reached
LARGE_ALPHA = 1e4
# beta at or above which the uniform limit is reported
LARGE_BETA = 1e3


def _check_common(mu, sigma, r, beta):
    if not np.isfinite(mu):
        raise DomainError(f"mu must be finite, got {mu!r}")
    if not (sigma > 0 and np.isfinite(sigma)):
        raise DomainError(f"sigma must be > 0, got {sigma!r}")
    if not (-1.0 <= r <= 1.0):
        raise DomainError(f"r must lie in [-1, 1], got {r!r}")
    if not (beta > 0 and np.isfinite(beta)):
        raise DomainError(f"beta must be > 0, got {beta!r}")


@dataclass(frozen=True)
class SkeGTDParams:
    mu: float = 0.0
    sigma: float = 1.0
    r: float = 0.0
    alpha: float = 2.0
    beta: float = 2.0

    def __post_init__(self):
        _check_common(self.mu, self.sigma, self.r, self.beta)
        if not (self.alpha > 0):
            raise DomainError(f"alpha must be > 0, got {self.alpha!r}")

    @property
    def shape(self):
        """The normalized slice (r, alpha, beta)."""
        return (self.r, self.alpha, self.beta)

    def as_tuple(self):
        return (self.mu, self.sigma, self.r, self.alpha, self.beta)

    def moment_exists(self, k):
        return k < self.alpha * self.beta

    def logpdf(self, x):
        return skegtd_logpdf(self, x)

    def pdf(self, x):
        return skegtd_pdf(self, x)

    def cdf(self, x):
        return skegtd_cdf(self, x)

    def sf(self, x):
        return skegtd_sf(self, x)

    def ppf(self, q):
        return skegtd_quantile(self, q)

    def rvs(self, n, rng=None):
        return skegtd_sample(self, n, rng)


@dataclass(frozen=True)
class SGNParams:
    mu: float = 0.0
    sigma: float = 1.0
    r: float = 0.0
    beta: float = 2.0

    def __post_init__(self):
        _check_common(self.mu, self.sigma, self.r, self.beta)


def _sign(z):
    return np.sign(z)  # sign(0) == 0


def _log_ratio_term(z, r, beta):
    """log(|z|^beta / (1 + r sign z)^beta); -inf at z = 0, +inf on a vanished side."""
    s = _sign(z)
    side = 1.0 + r * s
    with np.errstate(divide="ignore"):
        out = beta * (np.log(np.abs(z)) - np.log(side))
    # vanished side (|r| = 1) with z != 0 carries no mass
    out = np.where((side == 0) & (z != 0), np.inf, out)
    return out


def _log_norm_const(sigma, alpha, beta):
    return (
        math.log(beta)
        - math.log(2.0 * sigma)
        - math.log(2.0 * alpha) / beta
        - float(_log_beta(alpha, 1.0 / beta))
    )


def _log_m(z, r, alpha, beta):
    """log M with M = 1 + |z|^beta / (2 alpha (1 + r sign z)^beta)."""
    logt = _log_ratio_term(z, r, beta) - math.log(2.0 * alpha)
    return np.logaddexp(0.0, logt)


def skegtd_logpdf(p: SkeGTDParams, x):
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    out = _log_norm_const(p.sigma, p.alpha, p.beta) - (p.alpha + 1.0 / p.beta) * _log_m(
        z, p.r, p.alpha, p.beta
    )
    return out.item() if out.ndim == 0 else out


def skegtd_pdf(p: SkeGTDParams, x):
    return np.exp(skegtd_logpdf(p, x))


def _tail_mass(z, r, alpha, beta):
    """I_u(alpha, 1/beta) with u = 1/M, evaluated without cancellation near u = 1."""
    b = 1.0 / beta
    logt = _log_ratio_term(z, r, beta) - math.log(2.0 * alpha)
    # u = 1/(1+t), w = 1 - u = t/(1+t)
    log_u = -np.logaddexp(0.0, logt)
    log_w = -np.logaddexp(0.0, -logt)
    u = np.exp(log_u)
    w = np.exp(log_w)
    near_one = u > 0.5
    return np.where(near_one, special.betaincc(b, alpha, w), special.betainc(alpha, b, u))


def skegtd_cdf(p: SkeGTDParams, x):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    tail = _tail_mass(z, p.r, p.alpha, p.beta)
    out = np.where(z <= 0, 0.5 * (1.0 - p.r) * tail, 1.0 - 0.5 * (1.0 + p.r) * tail)
    return out.item() if out.ndim == 0 else out


def skegtd_sf(p: SkeGTDParams, x):
    """Survival function 1 - F, accurate in the upper tail."""
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    tail = _tail_mass(z, p.r, p.alpha, p.beta)
    out = np.where(z > 0, 0.5 * (1.0 + p.r) * tail, 1.0 - 0.5 * (1.0 - p.r) * tail)
    return out.item() if out.ndim == 0 else out


def _invert_tail(prob, comp, alpha, beta):
    """Solve I_u(alpha, 1/beta) = prob for (u, 1 - u); ``comp`` is 1 - prob."""
    b = 1.0 / beta
    u_direct = special.betaincinv(alpha, b, prob)
    w_direct = special.betaincinv(b, alpha, comp)
    use_direct = prob <= 0.5
    u = np.where(use_direct, u_direct, 1.0 - w_direct)
    w = np.where(use_direct, 1.0 - u_direct, w_direct)
    return u, w


def skegtd_quantile(p: SkeGTDParams, q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError(f"quantile level must lie in (0, 1), got {q!r}")
    r, alpha, beta = p.r, p.alpha, p.beta
    split = 0.5 * (1.0 - r)
    lower = q <= split
    with np.errstate(divide="ignore", invalid="ignore"):
        # lower branch: (1 - r)/2 * I_u = q
        lo_prob = np.where(lower, q / np.where(split > 0, split, 1.0), 0.5)
        lo_comp = np.where(lower, (split - q) / np.where(split > 0, split, 1.0), 0.5)
        # upper branch: (1 + r)/2 * I_u = 1 - q
        up_split = 0.5 * (1.0 + r)
        up_prob = np.where(lower, 0.5, (1.0 - q) / np.where(up_split > 0, up_split, 1.0))
        up_comp = np.where(lower, 0.5, (q - split) / np.where(up_split > 0, up_split, 1.0))
        prob = np.clip(np.where(lower, lo_prob, up_prob), 0.0, 1.0)
        comp = np.clip(np.where(lower, lo_comp, up_comp), 0.0, 1.0)
        u, w = _invert_tail(prob, comp, alpha, beta)
        side = np.where(lower, 1.0 - r, 1.0 + r)
        mag = side * np.exp((math.log(2.0 * alpha) + np.log(w) - np.log(u)) / beta)
    z = np.where(lower, -mag, mag)
    out = p.mu + p.sigma * z
    return out.item() if out.ndim == 0 else out


def skegtd_sample(p: SkeGTDParams, n, rng=None):
    """Draw n variates through the W * Y^(1/beta) * Z^(1/beta) representation.

    W takes r + 1 with probability (r + 1)/2 and r - 1 otherwise,
    Y ~ Gamma(1/beta, 1) and Z ~ InvGamma(alpha, alpha).
    """
    gen = as_generator(rng)
    n = int(n)
    r, alpha, beta = p.r, p.alpha, p.beta
    w = np.where(gen.random(n) < 0.5 * (r + 1.0), r + 1.0, r - 1.0)
    y = gen.gamma(1.0 / beta, 1.0, size=n)
    z = 1.0 / gen.gamma(alpha, 1.0 / alpha, size=n)
    return p.mu + p.sigma * 2.0 ** (1.0 / beta) * w * (y * z) ** (1.0 / beta)


def normalized_raw_moment(i, r, alpha, beta):
    """E(X0^i) of the normalized law; requires i < alpha * beta."""
    if i == 0:
        return 1.0
    if not i < alpha * beta:
        raise MomentNotFiniteError(i, alpha, beta)
    b = 1.0 / beta
    logc = (
        (i * b) * math.log(2.0 * alpha)
        + special.gammaln(alpha - i * b)
        + special.gammaln((i + 1) * b)
        - special.gammaln(alpha)
        - special.gammaln(b)
    )
    return 0.5 * math.exp(logc) * ((r + 1.0) ** (i + 1) - (r - 1.0) ** (i + 1))


def skegtd_moment(p: SkeGTDParams, k: int):
    """Raw moment E(X^k) by binomial expansion over the normalized moments."""
    k = int(k)
    if k < 1:
        raise DomainError(f"moment order must be a positive integer, got {k}")
    if not p.moment_exists(k):
        raise MomentNotFiniteError(k, p.alpha, p.beta)
    return sum(
        math.comb(k, i) * p.sigma**i * p.mu ** (k - i) * normalized_raw_moment(i, *p.shape)
        for i in range(k + 1)
    )


@dataclass(frozen=True)
class Summary:
    """Mean, variance, skewness and excess kurtosis; ``None`` where undefined."""

    mean: Optional[float]
    variance: Optional[float]
    skewness: Optional[float]
    kurtosis: Optional[float]

    @property
    def available(self):
        return {
            "mean": self.mean is not None,
            "variance": self.variance is not None,
            "skewness": self.skewness is not None,
            "kurtosis": self.kurtosis is not None,
        }


def _beta_terms(alpha, beta):
    """B0 = B(alpha, 1/beta) and b_k = B(alpha - k/beta, (k+1)/beta), k = 1..4.

    Entries whose first argument is not positive are returned as nan.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    b = 1.0 / beta
    out = [special.beta(alpha, b)]
    for k in range(1, 5):
        a_k = alpha - k * b
        with np.errstate(invalid="ignore"):
            out.append(np.where(a_k > 0, special.beta(np.where(a_k > 0, a_k, 1.0), (k + 1) * b), np.nan))
    return out


def shape_moments(r, alpha, beta):
    """Closed-form (H-function) standardized moments of the normalized law.

    Returns ``(mean0, var0, gamma1, gamma2)`` for the normalized law; all
    arguments broadcast, and entries are nan where the moment does not exist.
    Useful for vectorised moment matching over (alpha, beta) grids.
    """
    r = np.asarray(r, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    B0, b1, b2, b3, b4 = _beta_terms(alpha, beta)
    c = (2.0 * alpha) ** (1.0 / beta)
    ab = alpha * beta
    r2 = r * r
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        H = (3 * r2 + 1) * b2 - 4 * r2 * b1**2 / B0
        H1 = 2 * b3 - 9 * b1 * b2 / B0 + 8 * b1**3 / B0**2
        H2 = 2 * b3 - 3 * b1 * b2 / B0
        H3 = 5 * b4 - 32 * b1 * b3 / B0 + 72 * b1**2 * b2 / B0**2 - 48 * b1**4 / B0**3
        H4 = 10 * b4 - 32 * b1 * b3 / B0 + 24 * b1**2 * b2 / B0**2
        mean0 = np.where(ab > 1, 2 * c * r * b1 / B0, np.nan)
        var0 = np.where(ab > 2, c**2 * H / B0, np.nan)
        g1 = np.where(ab > 3, 2 * r * np.sqrt(B0) * (r2 * H1 + H2) / H**1.5, np.nan)
        g2 = np.where(ab > 4, B0 / H**2 * (r2 * r2 * H3 + r2 * H4 + b4) - 3.0, np.nan)
    return mean0, var0, g1, g2


def _beta_scalar(x, y):
    return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def shape_skew_kurt(r, alpha, beta):
    """Scalar (gamma1, excess gamma2) of the normalized law; nan where absent.

    Same closed forms as :func:`shape_moments` without numpy overhead, for
    use inside scalar optimisers.
    """
    b = 1.0 / beta
    if alpha * beta <= 3.0:
        return math.nan, math.nan
    B0 = _beta_scalar(alpha, b)
    b1, b2, b3 = (_beta_scalar(alpha - k * b, (k + 1) * b) for k in (1, 2, 3))
    r2 = r * r
    H = (3 * r2 + 1) * b2 - 4 * r2 * b1**2 / B0
    H1 = 2 * b3 - 9 * b1 * b2 / B0 + 8 * b1**3 / B0**2
    H2 = 2 * b3 - 3 * b1 * b2 / B0
    g1 = 2 * r * math.sqrt(B0) * (r2 * H1 + H2) / H**1.5
    if alpha * beta <= 4.0:
        return g1, math.nan
    b4 = _beta_scalar(alpha - 4 * b, 5 * b)
    H3 = 5 * b4 - 32 * b1 * b3 / B0 + 72 * b1**2 * b2 / B0**2 - 48 * b1**4 / B0**3
    H4 = 10 * b4 - 32 * b1 * b3 / B0 + 24 * b1**2 * b2 / B0**2
    g2 = B0 / H**2 * (r2 * r2 * H3 + r2 * H4 + b4) - 3.0
    return g1, g2


def skegtd_summary(p: SkeGTDParams) -> Summary:
    m0, v0, g1, g2 = (float(v) for v in shape_moments(p.r, p.alpha, p.beta))
    ab = p.alpha * p.beta
    return Summary(
        mean=p.mu + p.sigma * m0 if ab > 1 else None,
        variance=p.sigma**2 * v0 if ab > 2 else None,
        skewness=g1 if ab > 3 else None,
        kurtosis=g2 if ab > 4 else None,
    )


# --- skewed generalized normal -------------------------------------------


def sgn_logpdf(p: SGNParams, x):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    b = 1.0 / p.beta
    const = math.log(p.beta) - (1.0 + b) * math.log(2.0) - special.gammaln(b) - math.log(p.sigma)
    out = const - 0.5 * np.exp(_log_ratio_term(z, p.r, p.beta))
    return out.item() if out.ndim == 0 else out


def sgn_pdf(p: SGNParams, x):
    return np.exp(sgn_logpdf(p, x))


def sgn_cdf(p: SGNParams, x):
    """(1-r)/2 + (1+r)/2 P(1/beta, t) above mu, mirrored below; t = |z|^beta / (2 (1 + r s)^beta)."""
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    b = 1.0 / p.beta
    t = 0.5 * np.exp(_log_ratio_term(z, p.r, p.beta))
    upper_tail = special.gammaincc(b, t)
    out = np.where(z > 0, 1.0 - 0.5 * (1.0 + p.r) * upper_tail, 0.5 * (1.0 - p.r) * upper_tail)
    return out.item() if out.ndim == 0 else out


def sgn_sample(p: SGNParams, n, rng=None):
    gen = as_generator(rng)
    n = int(n)
    w = np.where(gen.random(n) < 0.5 * (p.r + 1.0), p.r + 1.0, p.r - 1.0)
    y = gen.gamma(1.0 / p.beta, 1.0, size=n)
    return p.mu + p.sigma * 2.0 ** (1.0 / p.beta) * w * y ** (1.0 / p.beta)


# --- special and limiting cases ------------------------------------------


@dataclass(frozen=True)
class LimitingCase:
    """A classical law identified inside the family.

    ``exact`` distinguishes identities from large-parameter approximations.
    ``params`` holds the classical law's own parameters.
    """

    name: str
    params: dict
    exact: bool


def limiting_case_check(p: SkeGTDParams) -> Optional[LimitingCase]:
    mu, sigma, r, alpha, beta = p.as_tuple()
    if r == 0 and beta == 2 and alpha == 0.5:
        return LimitingCase("Cauchy", {"loc": mu, "scale": sigma}, True)
    if r == 0 and beta == 2 and alpha < LARGE_ALPHA:
        return LimitingCase("StudentT", {"df": 2 * alpha, "loc": mu, "scale": sigma}, True)
    if abs(r) == 1 and beta == 1:
        # one-sided Lomax law; for r = -1 it is mirrored about mu
        name = "ParetoII" if r == 1 else "ParetoII(mirrored)"
        return LimitingCase(name, {"loc": mu, "scale": 4 * sigma * alpha, "shape": alpha}, True)
    if alpha >= LARGE_ALPHA:
        if r == 0 and beta == 2:
            return LimitingCase("Normal", {"loc": mu, "scale": sigma}, False)
        if r == 0 and beta == 1:
            return LimitingCase("Laplace", {"loc": mu, "scale": 2 * sigma}, False)
        if r == 0 and beta >= LARGE_BETA:
            return LimitingCase("Uniform", {"low": mu - sigma, "high": mu + sigma}, False)
        return LimitingCase("SGN", {"mu": mu, "sigma": sigma, "r": r, "beta": beta}, False)
    return None
