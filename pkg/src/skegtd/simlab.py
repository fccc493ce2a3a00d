"""Monte Carlo harness for parameter-recovery and model-selection studies.

Replicate ``i`` at sample-size index ``a`` always draws from
``RngStream(seed).split(a, i)``, so tables do not depend on how replicates
are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import SkeGTDParams, skegtd_sample
from .errors import DomainError, SkeGTDError
from .specfun import RngStream

__all__ = [
    "ExperimentSpec",
    "ExperimentTable",
    "run_recovery",
    "run_selection",
    "run_experiment",
    "load_spec",
    "parse_spec",
    "recovery_estimates",
]

ESTIMATORS = ("mle", "lme", "tse")
CRITERIA = ("AIC", "BIC", "EDC")
COMPETITORS = ("Normal", "StudentT", "SN", "ST")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "recovery"
    mu: float = 0.0
    sigma: float = 1.0
    r: float = 0.7
    alpha: float = 3.0
    beta: float = 2.5
    sample_sizes: tuple = (50, 500)
    replicates: int = 500
    estimators: tuple = ("mle",)
    seed: int = 0
    # selection study: skew-Cauchy truth and comparison set
    sc_xi: float = -1.8
    sc_omega: float = 0.8
    sc_alpha: float = 18.0
    competitors: tuple = COMPETITORS
    criteria: tuple = CRITERIA
    skegtd_method: str = "ml"

    def __post_init__(self):
        if self.kind not in ("recovery", "selection"):
            raise DomainError(f"kind must be recovery or selection, got {self.kind!r}")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not self.sample_sizes or any(int(n) <= 0 for n in self.sample_sizes):
            raise DomainError("sample sizes must be positive")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise DomainError(f"unknown estimators {bad}")
        bad = [c for c in self.criteria if c not in CRITERIA]
        if bad:
            raise DomainError(f"unknown criteria {bad}")
        if self.kind == "recovery":
            SkeGTDParams(self.mu, self.sigma, self.r, self.alpha, self.beta)

    @property
    def truth(self):
        return SkeGTDParams(self.mu, self.sigma, self.r, self.alpha, self.beta)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


_TUPLE_FIELDS = {"sample_sizes": int, "estimators": str, "competitors": str, "criteria": str}


def parse_spec(text):
    """Parse ``key = value`` lines (``#`` comments, comma-separated lists)."""
    types = {f.name: f.type for f in fields(ExperimentSpec)}
    defaults = ExperimentSpec()
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise DomainError(f"line {lineno}: unknown key {key!r}")
        if key in _TUPLE_FIELDS:
            conv = _TUPLE_FIELDS[key]
            items = [v.strip() for v in value.split(",") if v.strip()]
            if conv is str and key == "estimators":
                items = [v.lower() for v in items]
            if conv is str and key == "criteria":
                items = [v.upper() for v in items]
            kw[key] = tuple(conv(v) for v in items)
        else:
            cur = getattr(defaults, key)
            kw[key] = type(cur)(value) if not isinstance(cur, bool) else value.lower() in ("1", "true", "yes")
    return ExperimentSpec(**kw)


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


@dataclass
class ExperimentTable:
    kind: str
    rows: list
    spec: dict = field(default_factory=dict)

    def columns(self):
        cols = []
        for row in self.rows:
            for k in row:
                if k not in cols:
                    cols.append(k)
        return cols

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"schema": f"skegtd.{self.kind}.v1", "spec": self.spec, "rows": self.rows}, indent=2, default=float)

    def lookup(self, **match):
        return [row for row in self.rows if all(row.get(k) == v for k, v in match.items())]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


# --- recovery -------------------------------------------------------------------


def recovery_estimates(estimator, x, truth: SkeGTDParams):
    """One estimator applied to one replicate; returns a parameter dict.

    MLE and LME work on the normalized law, so the data are standardised with
    the known mu and sigma first; TSE estimates all five parameters.
    """
    if estimator in ("mle", "lme"):
        z = (x - truth.mu) / truth.sigma
        if estimator == "mle":
            from .mle import fit_mle

            rep = fit_mle(z)
        else:
            from .lmom import fit_lme

            rep = fit_lme(z)
        return dict(rep.params), rep.converged
    if estimator == "tse":
        from .tse import fit_tse

        rep = fit_tse(x)
        return dict(rep.params), rep.converged
    raise DomainError(f"unknown estimator {estimator!r}")


def _recovery_task(args):
    spec_dict, a, i = args
    spec = ExperimentSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec_dict.items()})
    n = int(spec.sample_sizes[a])
    stream = RngStream(spec.seed).split(a, i)
    x = skegtd_sample(spec.truth, n, stream)
    out = {}
    for est in spec.estimators:
        try:
            params, conv = recovery_estimates(est, x, spec.truth)
            out[est] = (params, conv, None)
        except (SkeGTDError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            out[est] = (None, False, type(exc).__name__)
    return a, i, out


def _selection_task(args):
    spec_dict, a, i = args
    from .models import compare, criteria, sc_sample

    spec = ExperimentSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec_dict.items()})
    n = int(spec.sample_sizes[a])
    stream = RngStream(spec.seed).split(a, i)
    x = sc_sample(spec.sc_xi, spec.sc_omega, spec.sc_alpha, n, stream)
    wanted = set(spec.competitors) | {"SkeGTD"}
    fitted, failures = compare(x, families=wanted, skegtd_method=spec.skegtd_method)
    crit = {name: criteria(m) for name, m in fitted.items()}
    return a, i, {"criteria": crit, "failures": failures}


def _run_tasks(fn, tasks, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [fn(t) for t in tasks]
    results.sort(key=lambda t: (t[0], t[1]))
    return results


def _param_names(estimator):
    return ("mu", "sigma", "r", "alpha", "beta") if estimator == "tse" else ("r", "alpha", "beta")


def run_recovery(spec: ExperimentSpec, workers=1, keep_estimates=False):
    """Average estimate, Rbias and MSE per (n, estimator, parameter)."""
    if spec.kind != "recovery":
        raise DomainError("run_recovery needs a recovery spec")
    tasks = [(spec.to_dict(), a, i) for a in range(len(spec.sample_sizes)) for i in range(spec.replicates)]
    results = _run_tasks(_recovery_task, tasks, workers)
    truth = spec.truth
    rows = []
    raw = {}
    for a, n in enumerate(spec.sample_sizes):
        block = [out for aa, _, out in results if aa == a]
        for est in spec.estimators:
            ok = [out[est] for out in block if out[est][0] is not None]
            failed = len(block) - len(ok)
            nonconv = sum(1 for _, conv, _ in ok if not conv)
            raw[(int(n), est)] = ok
            for name in _param_names(est):
                true = getattr(truth, name)
                vals = np.array([p[name] for p, _, _ in ok], dtype=float)
                row = {
                    "n": int(n),
                    "estimator": est,
                    "parameter": name,
                    "true": float(true),
                    "mean": float(vals.mean()) if vals.size else math.nan,
                    "rbias": float(np.mean(np.abs((vals - true) / true))) if vals.size and true != 0 else math.nan,
                    "mse": float(np.mean((vals - true) ** 2)) if vals.size else math.nan,
                    "replicates": len(block),
                    "failed": failed,
                    "nonconverged": nonconv,
                }
                rows.append(row)
    table = ExperimentTable("recovery", rows, spec.to_dict())
    if keep_estimates:
        table.estimates = raw
    return table


def run_selection(spec: ExperimentSpec, workers=1):
    """Percentage of replicates in which SkeGTD beats each competitor (strictly)."""
    if spec.kind != "selection":
        raise DomainError("run_selection needs a selection spec")
    tasks = [(spec.to_dict(), a, i) for a in range(len(spec.sample_sizes)) for i in range(spec.replicates)]
    results = _run_tasks(_selection_task, tasks, workers)
    rows = []
    for a, n in enumerate(spec.sample_sizes):
        block = [out for aa, _, out in results if aa == a]
        for cname in spec.criteria:
            for comp in spec.competitors:
                wins = valid = 0
                for out in block:
                    crit = out["criteria"]
                    if "SkeGTD" not in crit or comp not in crit:
                        continue
                    valid += 1
                    if crit["SkeGTD"][cname] < crit[comp][cname]:
                        wins += 1
                rows.append({
                    "n": int(n),
                    "criterion": cname,
                    "competitor": comp,
                    "percentage": 100.0 * wins / valid if valid else math.nan,
                    "wins": wins,
                    "valid": valid,
                    "failed": len(block) - valid,
                })
    return ExperimentTable("selection", rows, spec.to_dict())


def run_experiment(spec: ExperimentSpec, workers=1):
    return run_recovery(spec, workers) if spec.kind == "recovery" else run_selection(spec, workers)
