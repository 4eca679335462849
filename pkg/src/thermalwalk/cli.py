"""Command-line runner: ``check``, ``converge``, ``thermal`` and ``dump-generator``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for an invalid
configuration or unusable output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, Experiment, load_config
from .generators import HP, ModelHypothesisError, hp_G, thermal_drift
from .suites import limit_data, run_checks, run_converge, thermal_report

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
FLOAT_FMT = "%.16e"


def fmt(x) -> str:
    """Numeric CSV field: 17 significant digits, booleans as 0/1, missing as empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return FLOAT_FMT % x


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _load(path) -> Experiment:
    cfg = load_config(path)
    try:
        return Experiment(cfg)
    except ModelHypothesisError as exc:
        raise ConfigError(f"model: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_check(args) -> int:
    exp = _load(args.config)
    rows, code = run_checks(exp)
    body = [[r.suite, r.identity, fmt(r.residual), fmt(r.tolerance), "ge" if r.lower_bound else "le",
             "pass" if r.passed else "FAIL", r.detail] for r in rows]
    sys.stdout.write(_csv_text(["suite", "identity", "residual", "tolerance", "comparison", "status", "detail"], body))
    failed = sum(not r.passed for r in rows)
    print(f"# {len(rows) - failed}/{len(rows)} checks passed", file=sys.stderr)
    return code


def _complex_cols(z):
    return (None, None) if z is None else (z.real, z.imag)


CONVERGENCE_HEADER = [
    "experiment", "tau", "t", "walk_re", "walk_im", "cocycle_re", "cocycle_im", "abs_error",
    "generator_distance", "fitted_order", "noise_count", "gauge_residual", "error_tolerance",
    "gauge_tolerance", "error_pass", "gauge_pass", "status",
]


def convergence_csv(rows) -> str:
    body = []
    for r in rows:
        wr, wi = _complex_cols(r.walk)
        cr, ci = _complex_cols(r.cocycle)
        body.append([r.experiment, fmt(r.tau), fmt(r.t), fmt(wr), fmt(wi), fmt(cr), fmt(ci), fmt(r.error),
                     fmt(r.generator_distance), fmt(r.fitted_order), fmt(r.noise_count), fmt(r.gauge_residual),
                     fmt(r.error_tolerance), fmt(r.gauge_tolerance), fmt(r.error_pass), fmt(r.gauge_pass), r.status])
    return _csv_text(CONVERGENCE_HEADER, body)


def rates_csv(rates) -> str:
    body = [[r.quantity, fmt(r.order), fmt(r.log_constant), fmt(r.points), fmt(r.low), fmt(r.high), r.status]
            for r in rates]
    return _csv_text(["quantity", "order", "log_constant", "points", "order_low", "order_high", "status"], body)


def summary_csv(summary: dict) -> str:
    body = [[k, v if isinstance(v, str) else fmt(v)] for k, v in summary.items()]
    return _csv_text(["key", "value"], body)


def cmd_converge(args) -> int:
    exp = _load(args.config)
    if not exp.config.tau_grid or not exp.config.t_grid:
        raise ConfigError("tau_grid/t_grid: converge needs nonempty grids")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable ({exc.strerror})", file=sys.stderr)
        return EXIT_CONFIG
    rows, rates, summary, code = run_converge(exp)
    texts = {"convergence.csv": convergence_csv(rows), "rates.csv": rates_csv(rates), "summary.csv": summary_csv(summary)}
    for name, text in texts.items():
        (out / name).write_text(text, encoding="utf-8")
    print(f"# wrote {', '.join(texts)} to {out}; passed={summary['passed']}", file=sys.stderr)
    return code


def cmd_thermal(args) -> int:
    rep = thermal_report(_load(args.config))
    print(f"flavor,{rep['flavor']}")
    print(f"noise_count,{rep['noise_count']}")
    print(f"bound,{rep['bound']}")
    print(f"gauge_residual,{fmt(rep['gauge_residual'])}")
    return EXIT_PASS if rep["passed"] else EXIT_FAIL


def matrix_csv(M) -> str:
    M = np.asarray(M)
    body = [[i, j, fmt(float(M[i, j].real)), fmt(float(M[i, j].imag))]
            for i in range(M.shape[0]) for j in range(M.shape[1])]
    return _csv_text(["row", "col", "re", "im"], body)


def cmd_dump(args) -> int:
    exp = _load(args.config)
    data = limit_data(exp)
    if args.which == "Psi":
        M = data.Psi.matrix
    elif args.which == "psi":
        M = data.psi.matrix
    elif args.which == "F":
        M = thermal_drift(exp.model, data.lift)
    else:
        if exp.config.flavor != HP:
            print("error: G is defined for the HP flavor only", file=sys.stderr)
            return EXIT_FAIL
        M = hp_G(thermal_drift(exp.model, data.lift), data.lift, exp.gns, data.split)
    sys.stdout.write(matrix_csv(M))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermalwalk", description="Thermal quantum random walks and their limit cocycles.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="run all invariant suites")
    c.add_argument("config")
    c.set_defaults(func=cmd_check)
    c = sub.add_parser("converge", help="walk-to-cocycle convergence sweep, writes CSV files")
    c.add_argument("config")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_converge)
    c = sub.add_parser("thermal", help="noise count and gauge-block residual")
    c.add_argument("config")
    c.set_defaults(func=cmd_thermal)
    c = sub.add_parser("dump-generator", help="print a generator matrix as CSV")
    c.add_argument("config")
    c.add_argument("--which", choices=["Psi", "psi", "F", "G"], required=True)
    c.set_defaults(func=cmd_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
