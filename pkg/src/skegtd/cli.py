"""Command-line interface: ``skegtd {eval,fit,sample,experiment,compare,regress}``.

Exit codes: 0 success, 2 usage or parameter-domain error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import SkeGTDParams, skegtd_cdf, skegtd_logpdf, skegtd_pdf, skegtd_sample
from .errors import DomainError, FitError, NotPositiveDefiniteError, SeriesNonConvergence
from .specfun import RngStream

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
REPORT_SCHEMA = "skegtd.report.v1"
_SPLIT = re.compile(r"[,;\s]+")


class DataError(Exception):
    """Input data could not be used."""


class UsageError(Exception):
    pass


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # pragma: no cover - only when not installed
        return "unknown"


# --- data ingestion ------------------------------------------------------------


@dataclass
class Dataset:
    values: np.ndarray
    covariate: Optional[np.ndarray] = None
    source: str = ""
    skipped: list = field(default_factory=list)  # (line number, reason)
    header: Optional[list] = None
    digest: str = ""

    @property
    def n(self):
        return int(self.values.size)


def parse_dataset(text, columns=1, source="<string>"):
    """Parse one- or two-column numeric text; bad rows are skipped and recorded.

    With ``columns=2`` the first column is the covariate and the second the
    response.  A non-numeric first content row is taken as a header.
    """
    rows, skipped, header = [], [], None
    seen_content = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            skipped.append((lineno, "blank"))
            continue
        if line.startswith("#"):
            skipped.append((lineno, "comment"))
            continue
        fields_ = [f for f in _SPLIT.split(line) if f]
        try:
            nums = [float(f) for f in fields_]
        except ValueError:
            if not seen_content and header is None:
                header = fields_
                seen_content = True
                continue
            skipped.append((lineno, "unparsable"))
            continue
        seen_content = True
        if len(nums) < columns:
            skipped.append((lineno, f"expected {columns} columns"))
            continue
        nums = nums[:columns] if columns == 2 else nums[-1:] if len(nums) > 1 else nums
        if not all(math.isfinite(v) for v in nums):
            skipped.append((lineno, "non-finite"))
            continue
        rows.append(nums)
    if not rows:
        raise DataError(f"{source}: no usable rows ({len(skipped)} skipped)")
    arr = np.array(rows, dtype=float)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    if columns == 2:
        return Dataset(arr[:, 1], arr[:, 0], source, skipped, header, digest)
    return Dataset(arr[:, 0], None, source, skipped, header, digest)


def load_dataset(path, columns=1):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_dataset(text, columns, source=str(path))


# --- output ------------------------------------------------------------------


def _num(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def table_to_csv(rows):
    cols = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _num(v) for k, v in row.items()})
    return buf.getvalue()


def read_csv_table(text):
    """Inverse of :func:`table_to_csv` for numeric columns."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v)
            except (TypeError, ValueError):
                parsed[k] = v
        out.append(parsed)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def make_report(argv, seed, result, digest=None, started=None):
    return {
        "schema": REPORT_SCHEMA,
        "command": list(argv),
        "input_digest": digest,
        "seed": seed,
        "version": _version(),
        "wall_time": None if started is None else time.perf_counter() - started,
        "result": _jsonable(result),
    }


def _emit(args, text):
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _emit_result(args, argv, rows, result, digest=None, started=None):
    if args.format == "json":
        _emit(args, json.dumps(make_report(argv, args.seed, result, digest, started), indent=2) + "\n")
    else:
        _emit(args, table_to_csv(rows))


# --- commands ------------------------------------------------------------------


def _params(args):
    try:
        return SkeGTDParams(args.mu, args.sigma, args.r, args.alpha, args.beta)
    except DomainError as exc:
        msg = str(exc)
        flag = next((f"--{k}" for k in ("sigma", "r", "alpha", "beta", "mu") if msg.startswith(k)), "")
        raise UsageError(f"{flag}: {msg}" if flag else msg) from exc


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_eval(args, argv):
    p = _params(args)
    if args.x:
        xs = np.array(_float_list(args.x))
    elif args.range:
        lo, hi, num = _float_list(args.range)
        xs = np.linspace(lo, hi, int(num))
    else:
        xs = np.linspace(p.mu - 10 * p.sigma, p.mu + 10 * p.sigma, 512)
    rows = [
        {"x": float(x), "pdf": float(f), "logpdf": float(lf), "cdf": float(c)}
        for x, f, lf, c in zip(xs, skegtd_pdf(p, xs), skegtd_logpdf(p, xs), skegtd_cdf(p, xs))
    ]
    _emit_result(args, argv, rows, {"params": p.__dict__, "rows": rows})


def _fit_once(method, y):
    if method == "mle":
        from .mle import fit_mle

        return fit_mle(y)
    if method == "lme":
        from .lmom import fit_lme

        return fit_lme(y)
    from .tse import fit_tse

    return fit_tse(y)


def bootstrap(method, y, B, seed):
    """Nonparametric bootstrap of a fit: SEs and 95% percentile intervals."""
    names, draws, failed = None, [], 0
    root = RngStream(seed)
    for b in range(B):
        g = root.split(b).gen
        yb = y[g.integers(0, y.size, y.size)]
        try:
            rep = _fit_once(method, yb)
        except (DomainError, FitError, SeriesNonConvergence, ValueError):
            failed += 1
            continue
        names = names or list(rep.params)
        draws.append([rep.params[k] for k in names])
    if not draws:
        raise FitError("every bootstrap refit failed")
    arr = np.array(draws)
    lo, hi = np.percentile(arr, [2.5, 97.5], axis=0)
    se = arr.std(axis=0, ddof=1) if len(draws) > 1 else np.full(arr.shape[1], math.nan)
    return {
        name: {"se": float(s), "ci_low": float(a), "ci_high": float(c)} for name, s, a, c in zip(names, se, lo, hi)
    } | {"_replicates": len(draws), "_failed": failed}


def cmd_fit(args, argv):
    started = time.perf_counter()
    ds = load_dataset(args.data)
    rep = _fit_once(args.method, ds.values)
    boot = bootstrap(args.method, ds.values, args.boot, args.seed) if args.boot else None
    rows = []
    for k, v in rep.params.items():
        row = {"parameter": k, "estimate": float(v)}
        se = (rep.standard_errors or {}).get(k)
        row["se"] = float(se) if se is not None else math.nan
        if boot:
            row.update(boot_se=boot[k]["se"], ci_low=boot[k]["ci_low"], ci_high=boot[k]["ci_high"])
        rows.append(row)
    for k, v in [("loglik", rep.loglik), *rep.criteria.items()]:
        rows.append({"parameter": k, "estimate": float(v)})
    result = rep.to_dict()
    result["bootstrap"] = boot
    result["skipped_rows"] = ds.skipped
    _emit_result(args, argv, rows, result, ds.digest, started)


def cmd_sample(args, argv):
    p = _params(args)
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    x = skegtd_sample(p, args.n, RngStream(args.seed)) if args.n else np.empty(0)
    _emit(args, "".join(f"{v!r}\n" for v in map(float, x)))


def cmd_experiment(args, argv):
    from .simlab import load_spec, run_experiment

    started = time.perf_counter()
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise DataError(f"cannot read {args.spec}: {exc}") from exc
    if args.seed_given:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    table = run_experiment(spec, workers=args.threads)
    if args.format == "json":
        _emit(args, json.dumps(make_report(argv, spec.seed, {"spec": spec.to_dict(), "rows": table.rows}, None, started), indent=2) + "\n")
    else:
        _emit(args, table.to_csv())


def cmd_compare(args, argv):
    from .models import compare

    started = time.perf_counter()
    ds = load_dataset(args.data)
    fitted, failures = compare(ds.values)
    rows = []
    for crit in ("AIC", "BIC", "EDC"):
        ranked = sorted(fitted.values(), key=lambda m: (m.criteria[crit], m.name))
        for rank, m in enumerate(ranked, 1):
            rows.append({"criterion": crit, "rank": rank, "model": m.name, "value": float(m.criteria[crit]),
                         "loglik": float(m.loglik), "rho": m.rho})
    result = {
        "models": {k: {"params": m.params, "loglik": m.loglik, "rho": m.rho, "criteria": m.criteria, "flags": m.flags}
                   for k, m in fitted.items()},
        "failures": failures,
        "ranking": rows,
    }
    _emit_result(args, argv, rows, result, ds.digest, started)


def cmd_regress(args, argv):
    from .regress import PARAM_NAMES, fit_regression, residual_report

    started = time.perf_counter()
    ds = load_dataset(args.data, columns=2)
    fit = fit_regression(ds.covariate, ds.values)
    rr = residual_report(fit, ds.covariate, ds.values)
    se = fit.standard_errors
    rows = [
        {"parameter": k, "estimate": float(v), "se": float(se[i]) if se is not None else math.nan}
        for i, (k, v) in enumerate(zip(PARAM_NAMES, fit.as_vector()))
    ]
    rows.append({"parameter": "loglik", "estimate": fit.loglik})
    if fit.adjusted_intercept is not None:
        rows.append({"parameter": "adjusted_intercept", "estimate": fit.adjusted_intercept})
    result = fit.to_dict() | {"residual_grid": rr["grid"], "residual_density": rr["density"], "residuals": rr["residuals"]}
    _emit_result(args, argv, rows, result, ds.digest, started)


# --- parser --------------------------------------------------------------------


def _add_params(p, required=True):
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--r", type=float, required=required)
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--beta", type=float, required=required)


def build_parser():
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="default csv")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    parser = argparse.ArgumentParser(
        prog="skegtd", description="Skewed generalized t distribution toolkit", parents=[common]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _orig = sub.add_parser

    def add_parser(name, **kw):
        return _orig(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("eval", help="pdf, logpdf and cdf at points or on a grid")
    _add_params(p)
    p.add_argument("--x", help="comma-separated points")
    p.add_argument("--range", help="lo,hi,num")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit", help="fit one sample")
    p.add_argument("data")
    p.add_argument("--method", choices=("mle", "lme", "tse"), default="tse")
    p.add_argument("--boot", type=int, default=0, help="bootstrap replicates")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw random variates")
    _add_params(p)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("experiment", help="run a simulation spec file")
    p.add_argument("spec")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("compare", help="fit all candidate families and rank them")
    p.add_argument("data")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("regress", help="linear regression with SkeGTD errors (columns x, y)")
    p.add_argument("data")
    p.set_defaults(func=cmd_regress)
    return parser


_NEG_LIST = re.compile(r"^-[\d.]")


def _attach_negative_lists(argv):
    """Join --x/--range with a value such as -1,0,1 that argparse would read as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--x", "--range") and i + 1 < len(argv) and _NEG_LIST.match(argv[i + 1]):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_attach_negative_lists(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    args.seed_given = hasattr(args, "seed")
    for name, default in (("seed", 0), ("out", None), ("format", "csv"), ("threads", 1)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.threads < 1:
        print("skegtd: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args, argv)
    except UsageError as exc:
        print(f"skegtd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"skegtd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"skegtd: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, SeriesNonConvergence, NotPositiveDefiniteError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"skegtd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
