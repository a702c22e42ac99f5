"""Command line interface: ``rkhs-ame {estimate,test,ci,cv,simulate}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time

import numpy as np

from . import __version__
from .exceptions import ConfigError, DataError, NumericError
from .inference import result_from_draws
from .regressor import AMERegressor
from .selection import DEFAULT_GRID, geometric_grid
from .simulation import DgpSpec, run_power_curve

log = logging.getLogger("rkhs_ame")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

KERNELS = {"gaussian": ("gaussian", 2), "sobolev1": ("sobolev", 1), "sobolev2": ("sobolev", 2)}


def load_csv(path, columns):
    """Read the named numeric columns from a CSV file with a header row.

    Rows with a missing or non-numeric value in any requested column are
    dropped; the number dropped is logged as a warning. Returns a dict
    mapping column name to a float array.
    """
    try:
        fh = sys.stdin if path == "-" else open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise ConfigError(f"columns not found in input: {', '.join(missing)}")
        kept, dropped = [], 0
        for row in reader:
            try:
                values = [float(row[c]) for c in columns]
            except (TypeError, ValueError):
                dropped += 1
                continue
            if all(math.isfinite(v) for v in values):
                kept.append(values)
            else:
                dropped += 1
    if dropped:
        log.warning("dropped %d row(s) with missing or non-numeric values", dropped)
    if not kept:
        raise DataError("no usable rows in input")
    arr = np.asarray(kept, dtype=float)
    return {c: arr[:, k] for k, c in enumerate(columns)}


def _names(spec):
    return [s.strip() for s in spec.split(",") if s.strip()] if spec else []


def _float_list(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what} must be a comma-separated list of numbers") from exc


def _grid(text):
    if text is None:
        return DEFAULT_GRID
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--lambda-grid expects min,max,count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError("--lambda-grid expects min,max,count") from exc
    try:
        return geometric_grid(lo, hi, count)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _regressor(args, lam):
    family, order = KERNELS[args.kernel]
    return AMERegressor(
        kernel=family,
        sobolev_order=order,
        mu=args.mu,
        lam=lam,
        lambda_grid=_grid(args.lambda_grid),
        standardize=args.standardize == "on",
        conditioning=args.conditioning,
        fit_intercept=args.intercept == "on",
        n_bootstrap=args.B,
        level=args.alpha[0],
        random_state=args.seed,
        n_jobs=args.workers,
    )


def _fit(args):
    if not args.input or not args.y or not args.z or not args.w:
        raise ConfigError("--input, --y, --z and --w are required")
    if args.lam is not None and args.lambda_grid is not None:
        raise ConfigError("--lambda and --lambda-grid are mutually exclusive")
    x_names, w_names = _names(args.x), _names(args.w)
    cols = load_csv(args.input, [args.y, args.z, *x_names, *w_names])
    X = np.column_stack([cols[c] for c in x_names]) if x_names else None
    W = np.column_stack([cols[c] for c in w_names])
    est = _regressor(args, args.lam).fit(cols[args.z], cols[args.y], W=W, X=X)
    return est, x_names


def _num(x):
    return float(f"{float(x):.10g}")


def _estimate_record(est, x_names):
    rec = {"n": est.fit_.n, "lambda": _num(est.lambda_), "theta_hat": _num(est.ame_)}
    names = list(x_names) + (["intercept"] if est.fit_intercept else [])
    for name, b in zip(names, est.beta_):
        rec[f"beta_{name}"] = _num(b)
    rec["effective_rank"] = int(est.fit_.effective_rank)
    rec["foc_residual"] = _num(est.fit_.foc_residual)
    return rec


def _levels(text):
    levels = _float_list(text, "--alpha")
    if not levels or any(not 0.0 < a < 1.0 for a in levels):
        raise ConfigError("--alpha levels must lie in (0, 1)")
    return levels


def cmd_estimate(args):
    est, x_names = _fit(args)
    return [_estimate_record(est, x_names)]


def cmd_test(args):
    est, x_names = _fit(args)
    draws = est.bootstrap_draws()
    rec = _estimate_record(est, x_names)
    rec.update(theta0=_num(args.theta0), B=args.B)
    for level in args.alpha:
        res = result_from_draws(est.ame_, draws, args.theta0, level, est.fit_.n)
        rec[f"q_hat@{level}"] = _num(res.q_hat)
        rec[f"c_hat@{level}"] = _num(res.c_hat)
        rec[f"reject@{level}"] = res.reject
        rec[f"ci_lower@{level}"] = _num(res.ci[0])
        rec[f"ci_upper@{level}"] = _num(res.ci[1])
    rec["p_value"] = _num(res.p_value)
    if res.small_B:
        log.warning("B=%d is small; the critical value is unreliable", args.B)
    return [rec]


def cmd_ci(args):
    est, _ = _fit(args)
    rec = {"theta_hat": _num(est.ame_), "B": args.B}
    for level in args.alpha:
        lo, hi = est.confidence_interval(level)
        rec[f"ci_lower@{level}"] = _num(lo)
        rec[f"ci_upper@{level}"] = _num(hi)
    return [rec]


def cmd_cv(args):
    if args.lam is not None:
        raise ConfigError("cv selects the penalty; drop --lambda")
    est, _ = _fit(args)
    res = est.cv_results_
    return [
        {"lambda": _num(lam), "criterion": _num(c), "selected": bool(lam == est.lambda_)}
        for lam, c in zip(res["lambda"], res["criterion"])
    ]


def cmd_simulate(args):
    gammas = _float_list(args.gammas, "--gammas") if args.gammas else [0.0]
    levels = _float_list(args.levels, "--levels")
    if args.R < 1:
        raise ConfigError("--R must be positive")
    if args.R < 100:
        log.warning("R=%d replications: rejection rates are very noisy", args.R)
    spec = DgpSpec(design=args.design, h0=args.h0, rho_eps_v=args.rho, n=args.n)
    grid = _grid(args.lambda_grid)
    rep = run_power_curve(spec, gammas, levels, args.R, args.seed, args.B_per_rep, grid=grid, workers=args.workers)
    return rep.power_csv() if args.gammas else rep.size_csv()


def _config_echo(args):
    skip = {"handler", "out", "format", "timing"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _render(records, fmt, args, elapsed):
    if fmt == "report":
        doc = {"version": __version__, "command": args.command, "config": _config_echo(args)}
        doc["result"] = records[0] if len(records) == 1 else records
        if args.timing:
            doc["elapsed_seconds"] = round(elapsed, 3)
        return json.dumps(doc, indent=2) + "\n"
    keys = list(records[0])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in records:
            w.writerow([r[k] for k in keys])
        return buf.getvalue()
    if len(records) == 1:
        width = max(len(k) for k in keys)
        return "".join(f"{k:<{width}}  {records[0][k]}\n" for k in keys)
    cells = [keys] + [[str(r[k]) for k in keys] for r in records]
    widths = [max(len(row[j]) for row in cells) for j in range(len(keys))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) + "\n" for row in cells)


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-", help="output file (default: stdout)")
    p.add_argument("--lambda-grid", dest="lambda_grid", help="min,max,count for a log-spaced grid")


def build_parser():
    parser = argparse.ArgumentParser(prog="rkhs-ame", description="Kernel IV estimation and inference for average marginal effects.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("estimate", "fit and report the average marginal effect"),
        ("test", "bootstrap test of AME = theta0"),
        ("ci", "bootstrap confidence interval"),
        ("cv", "cross-validation criterion over the penalty grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", help="CSV file with a header row ('-' for stdin)")
        p.add_argument("--y")
        p.add_argument("--z")
        p.add_argument("--x", help="comma-separated covariate columns")
        p.add_argument("--w", help="comma-separated instrument columns")
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--B", type=int, default=499)
        p.add_argument("--alpha", type=_levels, default=[0.05, 0.10], help="comma-separated levels")
        p.add_argument("--theta0", type=float, default=0.0)
        p.add_argument("--standardize", choices=("on", "off"), default="on")
        p.add_argument("--intercept", choices=("on", "off"), default="off")
        p.add_argument("--conditioning", choices=("xw", "w"), default="xw")
        p.add_argument("--kernel", choices=tuple(KERNELS), default="gaussian")
        p.add_argument("--mu", choices=("laplace", "gaussian"), default="laplace")
        p.add_argument("--format", choices=("table", "csv", "report"), default="table")
        p.add_argument("--timing", action="store_true", help="add wall time to the report")
        _common(p)
        p.set_defaults(handler=globals()[f"cmd_{name}"])
    p = sub.add_parser("simulate", help="Monte Carlo size or power experiment (CSV output)")
    p.add_argument("--design", choices=("nonparametric", "partially_linear"), default="nonparametric")
    p.add_argument("--h0", choices=("quadratic", "nonpolynomial"), default="quadratic")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--R", type=int, default=1000)
    p.add_argument("--gammas", help="comma-separated departures; gives a power curve")
    p.add_argument("--levels", default="0.05,0.10")
    p.add_argument("--B-per-rep", dest="B_per_rep", type=int, default=1)
    _common(p)
    p.set_defaults(handler=cmd_simulate)
    return parser


def _write(text, dest):
    if dest == "-":
        sys.stdout.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers must be positive")
        start = time.perf_counter()
        out = args.handler(args)
        elapsed = time.perf_counter() - start
        text = out if isinstance(out, str) else _render(out, args.format, args, elapsed)
        _write(text, args.out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
