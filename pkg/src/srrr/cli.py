"""Command-line front end: ``srrr {select,simulate,identity,audit,bootstrap}``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 64 usage.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import (
    DegenerateDesignError,
    DimensionError,
    EmptyModelError,
    InfeasibleConfigError,
    ParameterError,
    PreconditionError,
    SrrrError,
)
from .identity_lab import IdentityConfig, verify_identity
from .path_solver import PathConfig
from .resampling import SCV_ALPHA1, SCV_ALPHA2
from .sim_harness import (
    LOG_COLUMNS,
    METHODS,
    PATH_METHODS,
    RegressionData,
    SelectionSettings,
    SimConfig,
    bootstrap_stability,
    canonical_method,
    default_audit_grid,
    generate_instance,
    inconsistency_audit,
    run_experiment,
    score_table,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64

log = logging.getLogger("srrr")


class InputError(Exception):
    """Unreadable or inconsistent input files."""


class UsageError(Exception):
    pass


# -- CSV and JSON ----------------------------------------------------------------


def read_matrix_csv(path, name=None):
    """Numeric CSV with one header row; returns ``(header, matrix)``."""
    name = name or str(path)
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{name}: file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{name}: empty file") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{name}: row {line_no} has {len(row)} fields, header has {len(header)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{name}: row {line_no}, column {col}: cannot parse {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{name}: row {line_no}, column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputError(f"{name}: no data rows")
    return [h.strip() for h in header], np.array(rows, dtype=float)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_matrix_csv(path, M, header):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in M:
            w.writerow([_fmt(v) for v in row])


def write_rows_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            # strict JSON has no infinities
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _metadata(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"command": args.command, "config": cfg, "seed": args.seed, "version": __version__}


# -- argument parsing ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
    return v


def _folds(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError("K must be >= 2")
    return v


def parse_grid(s):
    """``"1-50"``, ``"1,2,5"`` or a mix such as ``"1-5,10"``."""
    out = set()
    try:
        for part in s.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                out.update(range(int(a), int(b) + 1))
            elif part:
                out.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {s!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"grid values must be positive integers: {s!r}")
    return sorted(out)


def _method_list(s):
    try:
        return [canonical_method(m) for m in s.split(",") if m.strip()]
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _index_list(s):
    """Zero-based row indices, comma separated."""
    try:
        return tuple(sorted({int(v) for v in s.split(",") if v.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index list {s!r}") from None


def _common(p, data=True):
    if data:
        p.add_argument("--x", help="design matrix CSV (n x p, header row)")
        p.add_argument("--y", help="response matrix CSV (n x m, header row)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--k-folds", type=_folds, default=5)
    p.add_argument("--alpha1", type=_positive_float, default=SCV_ALPHA1)
    p.add_argument("--alpha2", type=_positive_float, default=SCV_ALPHA2)
    p.add_argument("--pic-a", type=_positive_float, default=2.0)
    p.add_argument("--grid-j", type=parse_grid, default=None)
    p.add_argument("--grid-r", type=parse_grid, default=None)


def _sim_flags(p, reps_default):
    p.add_argument("--reps", type=int, default=reps_default)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=60)
    p.add_argument("--m", type=int, default=15)
    p.add_argument("--j-true", type=int, default=30)
    p.add_argument("--r-true", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--b", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)


def build_parser():
    parser = _Parser(prog="srrr", description="Model selection for row-sparse reduced-rank regression.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("select", help="select a model for the given data")
    _common(p)
    p.add_argument("--methods", type=_method_list, default=list(PATH_METHODS))
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="run the synthetic method comparison")
    _common(p, data=False)
    _sim_flags(p, 50)
    p.add_argument("--methods", type=_method_list, default=list(METHODS))
    p.add_argument("--no-timing", action="store_true", help="write zero runtimes for reproducible logs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identity", help="Monte Carlo check of the CV error identity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--k-folds", type=_folds, default=5)
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sigma", type=_positive_float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--truth-rows", type=_index_list, default=(0,))
    p.add_argument("--pattern-rows", type=_index_list, default=(0, 1, 2))
    p.set_defaults(func=cmd_identity)

    p = sub.add_parser("audit", help="fold-wise cardinality ranges of a fixed-lambda lasso path")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--k-folds", type=_folds, default=5)
    p.add_argument("--n-lambda", type=int, default=30)
    _sim_flags(p, 1)
    p.set_defaults(func=cmd_audit, j_true=5, n=50, p=20, rho=0.5, b=0.5)

    p = sub.add_parser("bootstrap", help="selection stability over row resamples")
    _common(p)
    p.add_argument("--methods", type=_method_list, default=["5-SCV", "5-CV"])
    p.add_argument("--reps", type=int, default=50)
    p.set_defaults(func=cmd_bootstrap)
    return parser


# -- commands -----------------------------------------------------------------


def _load_data(args):
    if not args.x or not args.y:
        raise UsageError("--x and --y are required")
    _, X = read_matrix_csv(args.x, "X")
    y_header, Y = read_matrix_csv(args.y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InputError(f"dimension mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    return RegressionData(X, Y), y_header


def _path_cfg(args):
    return PathConfig(J_grid=args.grid_j, r_grid=args.grid_r)


def _settings(args):
    return SelectionSettings(scv_folds=args.k_folds, alpha1=args.alpha1, alpha2=args.alpha2, pic_A=args.pic_a)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_select(args) -> int:
    data, y_header = _load_data(args)
    cfg = _path_cfg(args)
    cfg.resolve(data.n, data.p, data.m)
    selections, table = score_table(data, args.methods, cfg, _settings(args), args.seed)
    out = _out_dir(args)
    chosen, failed = {}, {}
    for method, sel in selections.items():
        if isinstance(sel, Exception):
            failed[method] = str(sel)
            continue
        coef_path = out / f"coef_{method}.csv"
        write_matrix_csv(coef_path, sel.B, y_header)
        chosen[method] = {
            "candidate_id": sel.detail.get("candidate"),
            "support": list(sel.support),
            "J": sel.J,
            "r": sel.r,
            "r_bar": sel.detail.get("pattern_rank"),
            "score": sel.detail.get("score"),
            "coefficients": coef_path.name,
        }
    report = {
        "metadata": _metadata(args),
        "data": {"n": data.n, "p": data.p, "m": data.m},
        "chosen": chosen,
        "failed": failed,
        "candidates": table,
    }
    write_json(out / "select_report.json", report)
    for method, reason in failed.items():
        print(f"{method}: no admissible candidate ({reason})", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = SimConfig(
        n=args.n, p=args.p, m=args.m, J_true=args.j_true, r_true=args.r_true,
        rho=args.rho, b=args.b, sigma=args.sigma, reps=args.reps, seed=args.seed,
    )
    report = run_experiment(cfg, args.methods, _path_cfg(args), _settings(args), record_timing=not args.no_timing)
    out = _out_dir(args)
    write_rows_csv(out / "simulate_log.csv", report.rows, LOG_COLUMNS)
    write_json(out / "simulate_report.json", {"metadata": _metadata(args), **report.to_dict()})
    return EXIT_OK


def cmd_identity(args) -> int:
    cfg = IdentityConfig(
        n=args.n, K=args.k_folds, p=args.p, m=args.m, sigma=args.sigma, rho=args.rho,
        truth_rows=args.truth_rows, pattern_rows=args.pattern_rows, beta=args.beta, seed=args.seed,
    )
    report = verify_identity(cfg, reps=args.reps)
    out = _out_dir(args)
    write_json(out / "identity_report.json", {"metadata": _metadata(args), **report.as_dict()})
    print(f"gap={report.empirical_gap:.6g} D+U={report.D_formula + report.U_formula:.6g} "
          f"se={report.mc_std_err:.3g} {'pass' if report.passed else 'fail'}")
    return EXIT_OK


def cmd_audit(args) -> int:
    if args.x or args.y:
        data, _ = _load_data(args)
    else:
        cfg = SimConfig(n=args.n, p=args.p, m=1, J_true=args.j_true, r_true=1, rho=args.rho,
                        b=args.b, sigma=args.sigma, reps=1, seed=args.seed)
        data = generate_instance(cfg).data
    grid = default_audit_grid(data.X, data.Y, args.n_lambda)
    rep = inconsistency_audit(data, grid, args.k_folds, args.seed)
    out = _out_dir(args)
    write_rows_csv(out / "audit.csv", rep.rows(), ("lambda", "min_card", "med_card", "max_card"))
    write_json(
        out / "audit_report.json",
        {
            "metadata": _metadata(args),
            "rows": rep.rows(),
            "fold_cards": rep.fold_cards,
            "inconsistent_points": rep.inconsistent_points(),
            "scv_consistent": rep.scv_consistent,
        },
    )
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    data, _ = _load_data(args)
    out = _out_dir(args)
    reports = {}
    for method in args.methods:
        rep = bootstrap_stability(data, method, args.reps, args.seed, _path_cfg(args), _settings(args))
        reports[method] = rep.to_dict()
    write_json(out / "bootstrap_report.json", {"metadata": _metadata(args), "methods": reports})
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"srrr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, DimensionError, OSError) as exc:
        print(f"srrr: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParameterError, PreconditionError, InfeasibleConfigError) as exc:
        print(f"srrr: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateDesignError, EmptyModelError, SrrrError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"srrr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
