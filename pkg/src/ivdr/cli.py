"""Command-line interface.

Subcommands: fit (CDF curves), quantiles, bands (bootstrap, single curve or
difference), simulate (Monte Carlo study), linear (OLS/2SLS summary). Every
run echoes its fully resolved options to <out>.config; re-running with
--config <that file> reproduces the outputs exactly.

Exit codes: 2 for usage errors, 1 for data or computation errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import __version__
from .dataio import Dataset, load_csv, parse_colspec_file, write_curves
from .driver import ThresholdGrid, fit_curve, quantiles_from_curve
from .errors import IvdrError
from .inference import Recipe, bootstrap_bands, difference_bands
from .linear import ols_outcome, predict_with_se, tsls_outcome
from .monotone import monotonize
from .simulation import run_study
from .three_step import first_stage

log = logging.getLogger(__name__)

_ESTIMATOR_NAMES = {
    "probit": "probit",
    "three-step": "three_step",
    "three_step": "three_step",
    "iv-ml": "iv_ml",
    "iv_ml": "iv_ml",
}


class UsageError(Exception):
    """Malformed flag values; mapped to exit code 2."""


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    config = _preload_config(argv)
    parser = _build_parser(config)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (IvdrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _preload_config(argv: list[str]) -> dict[str, str]:
    """Read key=value defaults from a --config file, if one is given."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return {}
    config: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, eq, value = line.partition("=")
                if not eq:
                    raise SystemExit(f"config {path}:{lineno}: expected key=value")
                config[key.strip()] = value.strip()
    except OSError as exc:
        print(f"usage error: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(2) from None
    return config


def _build_parser(config: dict[str, str]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivdr",
        description="Distribution regression with an endogenous regressor.",
    )
    parser.add_argument("--version", action="version", version=f"ivdr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def arg(p, name, *, required=False, default=None, **kw):
        key = name.lstrip("-").replace("-", "_")
        if key in config:
            default = config[key]
            if kw.get("action") == "append":
                default = [default]
            required = False
        p.add_argument(name, required=required, default=default, **kw)

    def common(p, *, data=True):
        p.add_argument("--config", default=None, help="key=value file with defaults for any flag")
        if data:
            arg(p, "--data", required=True, help="CSV file with the estimation sample")
            arg(p, "--spec", required=True, help="column specification file")
        arg(p, "--out", required=True, help="output CSV path (a .config echo is written beside it)")

    p_fit = sub.add_parser("fit", help="estimate CDF curves over a threshold grid")
    common(p_fit)
    arg(p_fit, "--estimator", default="three-step",
        help="comma list of probit|three-step|iv-ml")
    arg(p_fit, "--monotonize", default="isotonic", help="isotonic|rearrange|none")
    arg(p_fit, "--at", action="append", default=None,
        help="evaluation point 'x=v1[:v2...],y2=w' in raw column units; repeatable")
    arg(p_fit, "--grid", default="observed", help="observed | linspace:a:b:m")
    arg(p_fit, "--levels", default=None,
        help="a:b:m quantile levels; adds a quantile output file")
    arg(p_fit, "--rearrange-levels", default=None, help="a:b:m levels for rearrangement")
    p_fit.set_defaults(handler=_cmd_fit)

    p_q = sub.add_parser("quantiles", help="quantiles of a monotonized CDF curve")
    common(p_q)
    arg(p_q, "--estimator", default="three-step")
    arg(p_q, "--monotonize", default="isotonic", help="isotonic|rearrange")
    arg(p_q, "--at", action="append", default=None, help="evaluation point (exactly one)")
    arg(p_q, "--grid", default="observed")
    arg(p_q, "--levels", default="0.1:0.9:9", help="a:b:m quantile levels")
    arg(p_q, "--rearrange-levels", default=None)
    p_q.set_defaults(handler=_cmd_quantiles)

    p_b = sub.add_parser("bands", help="bootstrap bands for a curve or a difference")
    common(p_b)
    arg(p_b, "--estimator", default="three-step",
        help="one estimator for a curve band, two (comma) for a difference band")
    arg(p_b, "--monotonize", default="isotonic")
    arg(p_b, "--at", action="append", default=None, help="evaluation point (exactly one)")
    arg(p_b, "--grid", default="observed")
    arg(p_b, "--B", dest="replications", default="200", help="bootstrap replications")
    arg(p_b, "--level", default="0.90", help="band coverage level")
    arg(p_b, "--seed", default="0")
    arg(p_b, "--rearrange-levels", default=None)
    p_b.set_defaults(handler=_cmd_bands)

    p_s = sub.add_parser("simulate", help="Monte Carlo study of estimator accuracy")
    common(p_s, data=False)
    arg(p_s, "--n", default="100,200,400", help="comma list of sample sizes")
    arg(p_s, "--rho", default="0.7", help="error correlation of the design")
    arg(p_s, "--reps", default="200", help="Monte Carlo replications")
    arg(p_s, "--scenarios", default="1,1;2,2", help="semicolon list of x,y2 pairs")
    arg(p_s, "--grid", default="linspace:1:5:50")
    arg(p_s, "--estimator", default="probit,three-step")
    arg(p_s, "--monotonize", default="rearrange,isotonic")
    arg(p_s, "--rearrange-levels", default=None)
    arg(p_s, "--seed", default="0")
    p_s.set_defaults(handler=_cmd_simulate)

    p_l = sub.add_parser("linear", help="OLS and 2SLS summary of the outcome equation")
    common(p_l)
    arg(p_l, "--at", action="append", default=None,
        help="prediction points; default: 10/50/90 percent quantiles of the data")
    p_l.set_defaults(handler=_cmd_linear)
    return parser


# --- flag parsing helpers -----------------------------------------------------


def _parse_float(text, name: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise UsageError(f"--{name} expects a number, got {text!r}") from None


def _parse_int(text, name: str) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise UsageError(f"--{name} expects an integer, got {text!r}") from None


def _parse_estimators(text: str, *, maximum: int) -> list[str]:
    names = [t.strip() for t in str(text).split(",") if t.strip()]
    if not 1 <= len(names) <= maximum:
        raise UsageError(f"--estimator expects 1..{maximum} names, got {text!r}")
    try:
        return [_ESTIMATOR_NAMES[n] for n in names]
    except KeyError as exc:
        raise UsageError(f"unknown estimator {exc.args[0]!r}") from None


def _parse_grid(text: str, data: Dataset | None) -> ThresholdGrid:
    text = str(text).strip()
    if text == "observed":
        if data is None:
            raise UsageError("--grid observed needs a dataset")
        return ThresholdGrid.from_observed(data.outcome)
    if text.startswith("linspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise UsageError(f"--grid expects linspace:a:b:m, got {text!r}")
        lo, hi = _parse_float(parts[1], "grid"), _parse_float(parts[2], "grid")
        m = _parse_int(parts[3], "grid")
        if not lo < hi or m < 2:
            raise UsageError(f"--grid linspace needs a < b and m >= 2, got {text!r}")
        return ThresholdGrid.linspace(lo, hi, m)
    raise UsageError(f"--grid expects 'observed' or 'linspace:a:b:m', got {text!r}")


def _parse_levels(text: str, name: str = "levels") -> np.ndarray:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"--{name} expects a:b:m, got {text!r}")
    lo, hi = _parse_float(parts[0], name), _parse_float(parts[1], name)
    m = _parse_int(parts[2], name)
    if not (0.0 < lo <= hi < 1.0) or m < 1:
        raise UsageError(f"--{name} needs 0 < a <= b < 1 and m >= 1, got {text!r}")
    return np.linspace(lo, hi, m)


def _split_at_specs(values) -> list[str]:
    # repeated --at flags, or one config line with semicolon separators
    if values is None:
        return []
    if isinstance(values, str):
        values = [values]
    out = []
    for value in values:
        out.extend(s.strip() for s in str(value).split(";") if s.strip())
    return out


class _AtPoint:
    """Evaluation point parsed from 'x=v1[:v2...],y2=w' in raw column units."""

    def __init__(self, text: str, spec):
        self.text = text.strip()
        fields = dict(_split_kv(self.text))
        if set(fields) != {"x", "y2"}:
            raise UsageError(f"--at expects 'x=...,y2=...', got {text!r}")
        base_cols = []
        for col, _ in spec.exogenous:
            if col not in base_cols:
                base_cols.append(col)
        raw = [s for s in fields["x"].split(":") if s]
        if len(raw) != len(base_cols):
            raise UsageError(
                f"--at x= expects {len(base_cols)} value(s) for columns "
                f"{':'.join(base_cols)}, got {fields['x']!r}"
            )
        base = {c: _parse_float(v, "at") for c, v in zip(base_cols, raw)}
        row = [1.0]
        for col, tf in spec.exogenous:
            row.append(_apply_transform(base[col], col, tf))
        self.x = np.array(row)
        self.y2 = _apply_transform(_parse_float(fields["y2"], "at"),
                                   spec.endogenous[0], spec.endogenous[1])

    @property
    def label(self) -> str:
        return self.text.replace(" ", "")


def _split_kv(text: str):
    for part in text.split(","):
        key, eq, value = part.partition("=")
        if not eq:
            raise UsageError(f"--at expects comma-separated key=value parts, got {text!r}")
        yield key.strip(), value.strip()


def _apply_transform(value: float, col: str, tf: str) -> float:
    if tf == "identity":
        return value
    if tf == "square":
        return value * value
    if value <= 0.0:
        raise UsageError(f"--at value for log column {col!r} must be positive")
    return float(np.log(value))


def _load(args) -> tuple[Dataset, object]:
    spec = parse_colspec_file(args.spec)
    return load_csv(args.data, spec), spec


def _at_points(args, spec, *, exactly_one: bool) -> list[_AtPoint]:
    specs = _split_at_specs(args.at)
    if not specs:
        raise UsageError("at least one --at evaluation point is required")
    if exactly_one and len(specs) != 1:
        raise UsageError(f"exactly one --at point is required, got {len(specs)}")
    return [_AtPoint(s, spec) for s in specs]


def _write_config(args, path: str, entries: dict) -> None:
    with open(f"{path}.config", "w", encoding="utf-8") as fh:
        fh.write(f"# resolved configuration; re-run with: ivdr {args.command} --config {path}.config\n")
        fh.write(f"command = {args.command}\n")
        for key, value in entries.items():
            if value is not None:
                fh.write(f"{key} = {value}\n")


def _check_command(args):
    # a config echo records its command; refuse to run it under another one
    if args.config:
        declared = _preload_config(["--config", args.config]).get("command")
        if declared and declared != args.command:
            raise UsageError(
                f"config was written by 'ivdr {declared}', not 'ivdr {args.command}'"
            )


# --- subcommand handlers -------------------------------------------------------


def _cmd_fit(args) -> int:
    _check_command(args)
    data, spec = _load(args)
    estimators = _parse_estimators(args.estimator, maximum=3)
    if args.monotonize not in ("isotonic", "rearrange", "none"):
        raise UsageError(f"unknown monotonization {args.monotonize!r}")
    points = _at_points(args, spec, exactly_one=False)
    grid = _parse_grid(args.grid, data)
    rearrange_levels = (_parse_levels(args.rearrange_levels, "rearrange-levels")
                        if args.rearrange_levels else None)
    quantile_levels = _parse_levels(args.levels) if args.levels else None

    curves: dict[str, object] = {}
    quantile_rows = []
    fs = first_stage(data)
    for est in estimators:
        for pt in points:
            curve = fit_curve(data, est, grid, pt.x, pt.y2, first_stage_fit=fs)
            curves[f"{est}|raw|{pt.label}"] = curve
            if args.monotonize != "none":
                corrected = monotonize(curve, args.monotonize, rearrange_levels)
                curves[f"{est}|{args.monotonize}|{pt.label}"] = corrected
                source = corrected
            else:
                source = curve
            if quantile_levels is not None:
                qc = quantiles_from_curve(source, quantile_levels)
                quantile_rows.append((f"{est}|{pt.label}", qc))
    write_curves(curves, args.out)
    if quantile_levels is not None:
        _write_quantiles(quantile_rows, f"{args.out}.quantiles.csv")
        log.info("wrote %s and %s.quantiles.csv", args.out, args.out)
    else:
        log.info("wrote %s", args.out)
    _write_config(args, args.out, {
        "data": args.data, "spec": args.spec, "estimator": args.estimator,
        "monotonize": args.monotonize, "at": "; ".join(p.text for p in points),
        "grid": args.grid, "levels": args.levels,
        "rearrange_levels": args.rearrange_levels, "out": args.out,
    })
    return 0


def _cmd_quantiles(args) -> int:
    _check_command(args)
    data, spec = _load(args)
    est = _parse_estimators(args.estimator, maximum=1)[0]
    if args.monotonize not in ("isotonic", "rearrange", "none"):
        raise UsageError(f"unknown monotonization {args.monotonize!r}")
    pt = _at_points(args, spec, exactly_one=True)[0]
    grid = _parse_grid(args.grid, data)
    levels = _parse_levels(args.levels)
    rearrange_levels = (_parse_levels(args.rearrange_levels, "rearrange-levels")
                        if args.rearrange_levels else None)
    curve = fit_curve(data, est, grid, pt.x, pt.y2)
    corrected = monotonize(curve, args.monotonize, rearrange_levels)
    qc = quantiles_from_curve(corrected, levels)
    _write_quantiles([(f"{est}|{pt.label}", qc)], args.out)
    log.info("wrote %s", args.out)
    _write_config(args, args.out, {
        "data": args.data, "spec": args.spec, "estimator": args.estimator,
        "monotonize": args.monotonize, "at": pt.text, "grid": args.grid,
        "levels": args.levels, "rearrange_levels": args.rearrange_levels,
        "out": args.out,
    })
    return 0


def _cmd_bands(args) -> int:
    _check_command(args)
    data, spec = _load(args)
    estimators = _parse_estimators(args.estimator, maximum=2)
    if args.monotonize not in ("isotonic", "rearrange", "none"):
        raise UsageError(f"unknown monotonization {args.monotonize!r}")
    pt = _at_points(args, spec, exactly_one=True)[0]
    grid = _parse_grid(args.grid, data)
    replications = _parse_int(args.replications, "B")
    level = _parse_float(args.level, "level")
    if not 0.0 < level < 1.0:
        raise UsageError("--level must lie strictly inside (0, 1)")
    seed = _parse_int(args.seed, "seed")
    rearrange_levels = (_parse_levels(args.rearrange_levels, "rearrange-levels")
                        if args.rearrange_levels else None)

    recipes = [Recipe(estimator=e, monotonize=args.monotonize, x=pt.x, y2=pt.y2,
                      grid=grid, quantile_levels=rearrange_levels)
               for e in estimators]
    if len(recipes) == 1:
        band = bootstrap_bands(data, recipes[0], replications=replications,
                               level=level, seed=seed)
        name = f"{estimators[0]}|{args.monotonize}|{pt.label}"
    else:
        band = difference_bands(data, recipes[0], recipes[1],
                                replications=replications, level=level, seed=seed)
        name = f"{estimators[0]}-minus-{estimators[1]}|{args.monotonize}|{pt.label}"
    if band.failures:
        log.info("%d of %d bootstrap replicates failed and were dropped",
                 band.failures, band.replications)
    write_curves({name: band}, args.out)
    log.info("wrote %s", args.out)
    _write_config(args, args.out, {
        "data": args.data, "spec": args.spec, "estimator": args.estimator,
        "monotonize": args.monotonize, "at": pt.text, "grid": args.grid,
        "B": str(replications), "level": repr(level), "seed": str(seed),
        "rearrange_levels": args.rearrange_levels, "out": args.out,
    })
    return 0


def _cmd_simulate(args) -> int:
    _check_command(args)
    sizes = [_parse_int(s, "n") for s in str(args.n).split(",") if s.strip()]
    if not sizes:
        raise UsageError("--n expects at least one sample size")
    rho = _parse_float(args.rho, "rho")
    reps = _parse_int(args.reps, "reps")
    scenarios = []
    for part in str(args.scenarios).split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(",")
        if len(pieces) != 2:
            raise UsageError(f"--scenarios expects 'x,y2' pairs, got {part!r}")
        scenarios.append((_parse_float(pieces[0], "scenarios"),
                          _parse_float(pieces[1], "scenarios")))
    if not scenarios:
        raise UsageError("--scenarios expects at least one x,y2 pair")
    grid = _parse_grid(args.grid, None)
    estimators = _parse_estimators(args.estimator, maximum=3)
    monotonizers = [m.strip() for m in str(args.monotonize).split(",") if m.strip()]
    for m in monotonizers:
        if m not in ("isotonic", "rearrange", "none"):
            raise UsageError(f"unknown monotonization {m!r}")
    rearrange_levels = (_parse_levels(args.rearrange_levels, "rearrange-levels")
                        if args.rearrange_levels else None)
    seed = _parse_int(args.seed, "seed")

    report = run_study(sizes, scenarios, replications=reps, grid=grid, rho=rho,
                       estimators=estimators, monotonizers=monotonizers,
                       quantile_levels=rearrange_levels, seed=seed)
    report.to_frame().to_csv(args.out, index=False)
    log.info("wrote %s", args.out)
    _write_config(args, args.out, {
        "n": args.n, "rho": args.rho, "reps": args.reps, "scenarios": args.scenarios,
        "grid": args.grid, "estimator": args.estimator, "monotonize": args.monotonize,
        "rearrange_levels": args.rearrange_levels, "seed": str(seed), "out": args.out,
    })
    return 0


def _cmd_linear(args) -> int:
    _check_command(args)
    data, spec = _load(args)
    labels = spec.exogenous_labels
    fits = [ols_outcome(data, labels), tsls_outcome(data, labels)]
    fs = first_stage(data)

    at_specs = _split_at_specs(args.at)
    if at_specs:
        points = [(_AtPoint(s, spec)) for s in at_specs]
        rows = np.array([np.append(p.x, p.y2) for p in points])
        row_labels = [p.label for p in points]
    else:
        rows, row_labels = _default_prediction_rows(data)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "method", "name", "estimate", "se"])
        for fit in fits:
            for lab, (coef, se) in fit.named().items():
                writer.writerow(["coefficient", fit.method, lab, repr(coef), repr(se)])
        writer.writerow(["diagnostic", "first-stage", "F", repr(float(fs.fstat)), ""])
        for fit in fits:
            values, ses = predict_with_se(fit, rows)
            for lab, value, se in zip(row_labels, values, ses):
                # delta-method standard errors for the fitted conditional expectation
                writer.writerow(["prediction", fit.method, lab, repr(float(value)),
                                 repr(float(se))])
    log.info("wrote %s", args.out)
    _write_config(args, args.out, {
        "data": args.data, "spec": args.spec,
        "at": "; ".join(at_specs) if at_specs else None, "out": args.out,
    })
    return 0


def _default_prediction_rows(data: Dataset) -> tuple[np.ndarray, list[str]]:
    """Design rows at the 10/50/90 percent quantiles of each regressor."""
    rows = []
    labels = []
    for q in (0.10, 0.50, 0.90):
        row = [np.quantile(data.exogenous[:, j], q, method="inverted_cdf")
               for j in range(data.k)]
        row.append(np.quantile(data.endogenous, q, method="inverted_cdf"))
        rows.append(row)
        labels.append(f"q{int(round(q * 100))}")
    return np.array(rows, dtype=float), labels


def _write_quantiles(named_curves, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "level", "value", "flag"])
        for name, qc in named_curves:
            for level, value, flag in zip(qc.levels, qc.values, qc.flags):
                writer.writerow([name, repr(float(level)), repr(float(value)), flag])


if __name__ == "__main__":
    sys.exit(main())
