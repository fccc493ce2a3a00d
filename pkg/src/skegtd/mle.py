"""EM maximum likelihood for the normalized SkeGTD and its Fisher information.

The EM works with omega = (r, alpha, eta) where eta = 1/beta > 0.  Each
observation is augmented with a latent precision z_i ~ Gamma(alpha, alpha);
given y_i the latent variable is Gamma(a, b_i) with

    a   = alpha + eta
    b_i = alpha + |y_i|^beta / (2 (1 + r sign y_i)^beta)  (= alpha * M_i)

The M-step splits into a one-dimensional root for alpha and a concave-in-r
two-dimensional maximisation for (r, eta), solved by damped Newton steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import DomainError, FitError, NotPositiveDefiniteError
from .report import FitReport
from .specfun import _log_beta

__all__ = [
    "OmegaParams",
    "EMState",
    "InfoMatrices",
    "observed_loglik",
    "make_state",
    "e_step",
    "q_function",
    "m_step",
    "stationarity_residuals",
    "loglik_gradient",
    "fit_mle",
    "fisher_info",
    "score_vector",
    "DEFAULT_STARTS",
    "R_BOUND",
    "ETA_BOUNDS",
]

R_BOUND = 0.999
ETA_BOUNDS = (0.04, 5.0)
ALPHA_BRACKET = (1e-3, 1e3)


@dataclass(frozen=True)
class OmegaParams:
    r: float
    alpha: float
    eta: float

    def __post_init__(self):
        if not -1.0 < self.r < 1.0:
            raise DomainError(f"r must lie in (-1, 1), got {self.r!r}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha!r}")
        if not self.eta > 0:
            raise DomainError(f"eta must be > 0, got {self.eta!r}")

    @property
    def beta(self):
        return 1.0 / self.eta

    @classmethod
    def from_theta(cls, r, alpha, beta):
        return cls(r, alpha, 1.0 / beta)

    def theta(self):
        return (self.r, self.alpha, 1.0 / self.eta)

    def as_array(self):
        return np.array([self.r, self.alpha, self.eta])


def _loglik_terms(r, alpha, eta, y):
    """Per-observation log density of the normalized law (vectorised)."""
    y = np.asarray(y, dtype=float)
    beta = 1.0 / eta
    s = np.sign(y)
    side = 1.0 + r * s
    with np.errstate(divide="ignore"):
        logt = beta * (np.log(np.abs(y)) - np.log(side)) - math.log(2.0 * alpha)
    log_m = np.logaddexp(0.0, logt)
    const = math.log(beta) - math.log(2.0) - eta * math.log(2.0 * alpha) - float(_log_beta(alpha, eta))
    return const - (alpha + eta) * log_m


def observed_loglik(omega: OmegaParams, data):
    """Sum of normalized log densities at omega."""
    return float(np.sum(_loglik_terms(omega.r, omega.alpha, omega.eta, data)))


@dataclass
class EMState:
    """Current iterate plus the posterior Gamma(a, b_i) parameters it implies."""

    omega: OmegaParams
    iteration: int
    loglik: float
    a_t: float
    b_t: np.ndarray


def _posterior_rate(omega, y):
    beta = 1.0 / omega.eta
    s = np.sign(y)
    side = 1.0 + omega.r * s
    with np.errstate(divide="ignore"):
        t = 0.5 * np.exp(beta * (np.log(np.abs(y)) - np.log(side)))
    return omega.alpha + t


def make_state(omega: OmegaParams, data, iteration=0):
    y = np.asarray(data, dtype=float)
    return EMState(
        omega=omega,
        iteration=iteration,
        loglik=observed_loglik(omega, y),
        a_t=omega.alpha + omega.eta,
        b_t=_posterior_rate(omega, y),
    )


def e_step(state: EMState, data=None):
    """Conditional expectations (E z_i, E log z_i) under Gamma(a, b_i)."""
    ez = state.a_t / state.b_t
    elz = special.psi(state.a_t) - np.log(state.b_t)
    return ez, elz


def _rn_parts(r, eta, y, ez):
    """Shared pieces of Q in (r, eta): s, d = 1 + r s, L = log A, P = Ez A^(1/eta)."""
    s = np.sign(y)
    d = 1.0 + r * s
    nz = y != 0
    L = np.zeros_like(y)
    L[nz] = np.log(np.abs(y[nz])) - np.log(d[nz])
    P = np.where(nz, ez * np.exp(L / eta), 0.0)
    return s, d, L, P


def _q_rn(r, eta, y, ez, elz_sum):
    """Q restricted to the (r, eta)-dependent terms, with gradient and Hessian."""
    n = y.size
    s, d, L, P = _rn_parts(r, eta, y, ez)
    q = n * (-math.log(eta) - eta * math.log(2.0) - special.gammaln(eta)) + eta * elz_sum - 0.5 * P.sum()
    Ps_d = P * s / d
    PL = P * L
    g_r = Ps_d.sum() / (2.0 * eta)
    g_e = n * (-1.0 / eta - math.log(2.0) - special.psi(eta)) + elz_sum + PL.sum() / (2.0 * eta**2)
    h_rr = -(1.0 + 1.0 / eta) / (2.0 * eta) * np.sum(P * s * s / (d * d))
    h_ee = n * (1.0 / eta**2 - special.polygamma(1, eta)) - PL.sum() / eta**3 - np.sum(PL * L) / (2.0 * eta**4)
    h_re = -np.sum(Ps_d * (1.0 + L / eta)) / (2.0 * eta**2)
    return q, np.array([g_r, g_e]), np.array([[h_rr, h_re], [h_re, h_ee]])


def q_function(omega: OmegaParams, state: EMState, data):
    """Expected complete-data log-likelihood Q(omega | omega_t, y)."""
    y = np.asarray(data, dtype=float)
    ez, elz = e_step(state, y)
    n = y.size
    r, alpha, eta = omega.r, omega.alpha, omega.eta
    _, _, _, P = _rn_parts(r, eta, y, ez)
    const = alpha * math.log(alpha) - math.log(eta) - (1.0 + eta) * math.log(2.0)
    const -= special.gammaln(alpha) + special.gammaln(eta)
    return n * const + (alpha + eta - 1.0) * elz.sum() - alpha * ez.sum() - 0.5 * P.sum()


def _alpha_equation(alpha, c):
    return math.log(alpha) + 1.0 - special.psi(alpha) + c


def _solve_alpha(c):
    lo, hi = ALPHA_BRACKET
    f_lo, f_hi = _alpha_equation(lo, c), _alpha_equation(hi, c)
    if f_lo * f_hi > 0:
        lo, hi = lo * 1e-3, hi * 1e3
        f_lo, f_hi = _alpha_equation(lo, c), _alpha_equation(hi, c)
        if f_lo * f_hi > 0:
            raise FitError(
                f"alpha update has no root in [{lo:g}, {hi:g}]: "
                f"f(lo)={f_lo:.3g}, f(hi)={f_hi:.3g}, c={c:.6g}"
            )
    return optimize.brentq(_alpha_equation, lo, hi, args=(c,), xtol=1e-12, rtol=1e-10)


def _maximize_rn(r, eta, y, ez, elz_sum, max_newton=20, tol=1e-9):
    """Damped Newton ascent on Q(r, eta) inside the box, warm-started."""
    lo_e, hi_e = ETA_BOUNDS
    x = np.array([np.clip(r, -R_BOUND, R_BOUND), np.clip(eta, lo_e, hi_e)])
    q, g, h = _q_rn(x[0], x[1], y, ez, elz_sum)
    for _ in range(max_newton):
        try:
            step = -np.linalg.solve(h, g)
            if not np.all(np.isfinite(step)) or step @ g <= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            # fall back to a diagonally scaled gradient step
            step = g / np.maximum(np.abs(np.diag(h)), 1e-8)
        t = 1.0
        while True:
            cand = x + t * step
            cand[0] = np.clip(cand[0], -R_BOUND, R_BOUND)
            cand[1] = np.clip(cand[1], lo_e, hi_e)
            q_new, g_new, h_new = _q_rn(cand[0], cand[1], y, ez, elz_sum)
            if q_new >= q - 1e-12 * abs(q) or t < 1e-10:
                break
            t *= 0.5
        moved = np.max(np.abs(cand - x))
        x, q, g, h = cand, q_new, g_new, h_new
        if moved < tol:
            break
    return float(x[0]), float(x[1])


def m_step(state: EMState, data):
    """One M-step: alpha from its score equation, then (r, eta) maximising Q."""
    y = np.asarray(data, dtype=float)
    ez, elz = e_step(state, y)
    alpha_new = _solve_alpha(elz.mean() - ez.mean())
    r_new, eta_new = _maximize_rn(state.omega.r, state.omega.eta, y, ez, elz.sum())
    return OmegaParams(r_new, alpha_new, eta_new)


def stationarity_residuals(omega: OmegaParams, state: EMState, data):
    """The three M-step score equations evaluated at omega given the E-step of ``state``.

    Each residual is divided by n so it is on a per-observation scale.
    """
    y = np.asarray(data, dtype=float)
    n = y.size
    ez, elz = e_step(state, y)
    a = state.a_t
    b = state.b_t
    eta = omega.eta
    s, d, L, P = _rn_parts(omega.r, eta, y, np.ones_like(y))
    res_r = np.sum(P * s / (b * d)) / n
    res_a = math.log(omega.alpha) + 1.0 - special.psi(omega.alpha) + elz.mean() - ez.mean()
    res_e = (
        1.0 / eta
        + math.log(2.0)
        + special.psi(eta)
        - special.psi(a)
        + np.mean(np.log(b))
        - a / (2.0 * n * eta**2) * np.sum(P * L / b)
    )
    return np.array([res_r, res_a, res_e])


def loglik_gradient(omega: OmegaParams, data, step=1e-5):
    """Central-difference gradient of the observed log-likelihood in omega."""
    x0 = omega.as_array()
    grad = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        hi = OmegaParams(*(x0 + e))
        lo = OmegaParams(*(x0 - e))
        grad[i] = (observed_loglik(hi, data) - observed_loglik(lo, data)) / (2 * step)
    return grad


# (r, alpha, eta) starting points; r = None means "use the sign-balance estimate"
DEFAULT_STARTS = (
    (None, 2.0, 0.5),
    (None, 1.0, 0.5),
    (None, 5.0, 0.4),
    (None, 2.0, 1.0),
    (0.0, 2.0, 0.5),
    (None, 10.0, 0.25),
)


def _sign_balance_r(y):
    # the mode sits at 0, so P(Y <= 0) = (1 - r)/2
    r = 1.0 - 2.0 * np.mean(y <= 0)
    return float(np.clip(r, -0.9, 0.9))


def _em_map(y, state):
    new = m_step(state, y)
    return make_state(new, y, iteration=state.iteration + 1)


def _to_free(omega):
    return np.array([math.atanh(omega.r), math.log(omega.alpha), math.log(omega.eta)])


def _from_free(x):
    r = float(np.clip(math.tanh(x[0]), -R_BOUND, R_BOUND))
    eta = float(np.clip(math.exp(x[2]), *ETA_BOUNDS))
    return OmegaParams(r, float(math.exp(np.clip(x[1], -30.0, 30.0))), eta)


def _squarem_cycle(y, state):
    """One SQUAREM cycle built from three EM maps; never returns a worse point.

    The extrapolation runs in unconstrained coordinates (atanh r, log alpha,
    log eta).  If the stabilised extrapolated point does not improve on two
    plain EM steps, the plain point is returned, so the observed
    log-likelihood is nondecreasing across cycles.
    """
    s1 = _em_map(y, state)
    s2 = _em_map(y, s1)
    x0, x1, x2 = _to_free(state.omega), _to_free(s1.omega), _to_free(s2.omega)
    dr = x1 - x0
    dv = x2 - x1 - dr
    nv = np.linalg.norm(dv)
    if nv == 0 or not np.isfinite(nv):
        return s2, 2
    step = min(-np.linalg.norm(dr) / nv, -1.0)
    try:
        cand = make_state(_from_free(x0 - 2.0 * step * dr + step * step * dv), y)
        cand = _em_map(y, cand)
    except (FitError, DomainError, FloatingPointError, OverflowError, ValueError):
        return s2, 2
    if np.isfinite(cand.loglik) and cand.loglik >= s2.loglik:
        cand.iteration = state.iteration + 3
        return cand, 3
    return s2, 2


def _run_em(y, omega, max_iter, tol, trace, accelerate=True, state=None):
    """Iterate until max |omega_{t+1} - omega_t| <= tol or ``max_iter`` EM maps."""
    state = make_state(omega, y) if state is None else state
    start_iter = state.iteration
    trace.append(state.loglik)
    converged = False
    while state.iteration - start_iter < max_iter:
        prev = state.omega.as_array()
        if accelerate:
            state, _ = _squarem_cycle(y, state)
        else:
            state = _em_map(y, state)
        trace.append(state.loglik)
        if np.max(np.abs(state.omega.as_array() - prev)) <= tol:
            if not accelerate:
                converged = True
                break
            # confirm with a plain EM step so the stopping rule applies to the EM map itself
            nxt = _em_map(y, state)
            trace.append(nxt.loglik)
            done = np.max(np.abs(nxt.omega.as_array() - state.omega.as_array())) <= tol
            state = nxt
            if done:
                converged = True
                break
    return state, converged


def fit_mle(data, init=None, max_iter=500, tol=1e-4, starts=None, screen_iter=15, accelerate=True):
    """EM maximum likelihood of (r, alpha, beta) for the normalized SkeGTD.

    Without ``init`` the EM is started from each point in ``starts``
    (default :data:`DEFAULT_STARTS`), each run for ``screen_iter`` iterations;
    the start with the highest observed log-likelihood is then iterated to
    convergence (max |omega_{t+1} - omega_t| <= tol).

    ``accelerate`` wraps the EM map in SQUAREM extrapolation with a
    monotone safeguard; ``accelerate=False`` runs the bare EM iteration.
    ``max_iter`` counts EM maps, not extrapolation cycles.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 1 or y.size < 10:
        raise DomainError("fit_mle needs a one-dimensional sample with n >= 10")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contain non-finite values")

    if init is not None:
        if not isinstance(init, OmegaParams):
            init = OmegaParams.from_theta(*init)
        candidates = [init]
    else:
        r0 = _sign_balance_r(y)
        candidates = [
            OmegaParams(r0 if r is None else r, a, e) for r, a, e in (starts or DEFAULT_STARTS)
        ]

    screened = []
    for idx, omega in enumerate(candidates):
        trace = []
        budget = max_iter if len(candidates) == 1 else screen_iter
        try:
            state, conv = _run_em(y, omega, budget, tol, trace, accelerate)
        except (FitError, FloatingPointError, ValueError):
            continue
        if np.isfinite(state.loglik):
            screened.append((state.loglik, -idx, state, conv, trace))
    if not screened:
        raise FitError("EM failed from every starting point")
    screened.sort(key=lambda t: (t[0], t[1]), reverse=True)
    _, neg_idx, state, conv, trace = screened[0]
    if not conv:
        more = []
        state, conv = _run_em(y, None, max_iter - state.iteration, tol, more, accelerate, state=state)
        trace = trace + more[1:]
    iterations = state.iteration
    residuals = stationarity_residuals(state.omega, make_state(state.omega, y), y)
    omega = state.omega
    boundary = abs(omega.r) >= R_BOUND - 1e-9 or not (ETA_BOUNDS[0] < omega.eta < ETA_BOUNDS[1])
    se = None
    info = None
    if not boundary:
        try:
            info = fisher_info(omega)
            se = info.standard_errors / math.sqrt(y.size)
        except NotPositiveDefiniteError:
            info = None
    return FitReport(
        method="mle",
        params={"r": omega.r, "alpha": omega.alpha, "beta": omega.beta},
        loglik=state.loglik,
        n=int(y.size),
        n_params=3,
        standard_errors=None if se is None else dict(zip(("r", "alpha", "beta"), map(float, se))),
        converged=conv,
        iterations=iterations,
        diagnostics={
            "start_index": -neg_idx,
            "stationarity_residuals": residuals.tolist(),
            "loglik_trace": trace,
            "boundary": boundary,
            "eta": omega.eta,
        },
    )


# --- Fisher information --------------------------------------------------


@dataclass
class InfoMatrices:
    """Per-observation information in omega = (r, alpha, eta) and theta = (r, alpha, beta)."""

    J_omega: np.ndarray
    I_theta: np.ndarray
    standard_errors: np.ndarray = field(repr=False)


def _closed_form_j(r, alpha, eta):
    a, e = alpha, eta
    s = a + e
    tg = lambda v: special.polygamma(1, v)  # noqa: E731
    dg = special.psi
    l2a = math.log(2.0 * a)
    j11 = (1.0 + a / (a * e + e * e + e)) / (1.0 - r * r)
    j22 = tg(a) - tg(s) - e * (s + 2.0) / (a * s * (s + 1.0))
    # with V = t/(1+t) ~ Beta(eta, alpha) and L = log(2 alpha t), the expectations
    # of L and L^2 under Beta(eta+1, alpha) and Beta(eta+1, alpha+1) close the block
    e1 = l2a + dg(e + 1.0) - dg(a)
    e2 = l2a + dg(e + 1.0) - dg(a + 1.0)
    j23 = 1.0 / s - tg(s) - e1 / s + e2 / (s + 1.0)
    j33 = (
        tg(e)
        - tg(s)
        - 1.0 / e**2
        + 2.0 * a / (e * s) * e1
        + a / (e * (s + 1.0)) * (e2 * e2 + tg(e + 1.0) + tg(a + 1.0))
    )
    return np.array([[j11, 0.0, 0.0], [0.0, j22, j23], [0.0, j23, j33]])


def fisher_info(omega: OmegaParams) -> InfoMatrices:
    """Expected per-observation information J(omega) and its image I(theta).

    The (r, alpha) and (r, eta) entries vanish identically.  I(theta) follows
    from I^{-1}(theta) = D J^{-1}(omega) D with D = diag(1, 1, -eta^-2).
    Standard errors are the square roots of diag(I^{-1}(theta)) for a single
    observation; divide by sqrt(n) for a sample of size n.
    """
    J = _closed_form_j(omega.r, omega.alpha, omega.eta)
    # d beta / d eta = -eta^-2
    D = np.diag([1.0, 1.0, -omega.eta**-2])
    Dinv = np.diag([1.0, 1.0, -omega.eta**2])
    I_theta = Dinv @ J @ Dinv
    eig = np.linalg.eigvalsh(I_theta)
    if not np.all(eig > 0):
        raise NotPositiveDefiniteError(eig)
    cov = D @ np.linalg.inv(J) @ D
    return InfoMatrices(J_omega=J, I_theta=I_theta, standard_errors=np.sqrt(np.diag(cov)))


def score_vector(omega: OmegaParams, y):
    """Per-observation score d log f / d(r, alpha, eta), shape (n, 3)."""
    y = np.asarray(y, dtype=float)
    r, a, e = omega.r, omega.alpha, omega.eta
    beta = 1.0 / e
    s = np.sign(y)
    d = 1.0 + r * s
    nz = y != 0
    logA = np.where(nz, np.log(np.where(nz, np.abs(y), 1.0)) - np.log(d), 0.0)
    logt = np.where(nz, beta * logA - math.log(2.0 * a), -np.inf)
    log_m = np.logaddexp(0.0, logt)
    frac = np.exp(logt - log_m)  # (M - 1)/M
    s_r = (a * beta + 1.0) * s / d * frac
    s_a = special.psi(a + e) - special.psi(a) - e / a - log_m + (a + e) / a * frac
    s_e = (
        special.psi(a + e)
        - special.psi(e)
        - 1.0 / e
        - math.log(2.0 * a)
        - log_m
        + logA * (a + e) / e**2 * frac
    )
    return np.column_stack([s_r, s_a, s_e])
