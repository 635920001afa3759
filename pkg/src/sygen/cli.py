"""Command-line interface: ``sygen {solve,expected-cost,estimate,simulate,sweep}``.

All results go to standard output (or ``--out``) as CSV at full round-trip
precision.  Exit status is 0 on success, 1 for usage or input errors and 2 when
a numerical step (root finding, estimation, quadrature) fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .core import CostParams, expected_cost, expected_cost_quadrature
from .demand import Exponential, Uniform
from .estimators import BrokenSample, EstimatorKind, FullSample, estimate
from .exceptions import DomainError, NumericalError
from .simulation import (
    SimulationConfig,
    format_sweep_csv,
    render_tables,
    run_experiment,
    sweep_qstar,
)
from .solver import optimal_q

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2

FIGURE_M_LIST = (2, 3, 4, 5, 10, 20, 30, 40, 50, 100)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _positive_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("expected one or more positive integers")
    return values


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cs", type=float, required=True, help="shortage cost multiplier")
    p.add_argument("--ce", type=float, required=True, help="excess cost multiplier")
    p.add_argument("--m", type=int, required=True, help="loss degree (positive integer)")


def _add_dist_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dist", choices=("exp", "unif"), required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="exponential mean")
    p.add_argument("--b", type=float, help="uniform upper limit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sygen", description="Newsvendor with symmetric power losses.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="optimal order quantity for known demand")
    _add_dist_flags(p)
    _add_cost_flags(p)

    p = sub.add_parser("expected-cost", help="expected cost of an order quantity")
    _add_dist_flags(p)
    _add_cost_flags(p)
    p.add_argument("--q", type=float, required=True, help="order quantity")
    p.add_argument("--quadrature", action="store_true", help="integrate numerically instead")

    p = sub.add_parser("estimate", help="estimate the optimal order quantity from data")
    _add_dist_flags(p)
    _add_cost_flags(p)
    p.add_argument("--data", type=Path, help="single-column CSV of observed demands")
    p.add_argument("--order-stat-rank", type=int, help="rank of the observed order statistic")
    p.add_argument("--order-stat-value", type=float, help="its observed value")
    p.add_argument("--sample-size", type=int, help="size of the sample it came from")
    p.add_argument("--estimator", help=", ".join(k.value for k in EstimatorKind))

    p = sub.add_parser("simulate", help="Monte Carlo bias/MSE comparison")
    p.add_argument("--config", type=Path, help="JSON config; defaults to the published grid")
    p.add_argument("--reps", type=int, help="override the replication count")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", type=Path, help="CSV report path (default: standard output)")
    p.add_argument("--table", type=Path, help="also write bias/MSE text tables here")
    p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = all cores")

    p = sub.add_parser("sweep", help="optimal q/lambda over cost ratios, per loss degree")
    p.add_argument("--m-list", type=_positive_int_list, default=list(FIGURE_M_LIST))
    p.add_argument("--rho-min", type=float, default=0.05)
    p.add_argument("--rho-max", type=float, default=0.95)
    p.add_argument("--rho-steps", type=int, default=19)
    p.add_argument("--out", type=Path, help="CSV path (default: standard output)")
    return parser


# -- helpers -------------------------------------------------------------------


def _cost_params(args) -> CostParams:
    return CostParams(args.cs, args.ce, args.m)


def _demand_model(args):
    if args.dist == "exp":
        if args.lam is None:
            raise UsageError("--dist exp requires --lambda")
        if args.b is not None:
            raise UsageError("--b only applies to --dist unif")
        return Exponential(args.lam)
    if args.b is None:
        raise UsageError("--dist unif requires --b")
    if args.lam is not None:
        raise UsageError("--lambda only applies to --dist exp")
    return Uniform(args.b)


def read_demand_file(path) -> np.ndarray:
    """Read a single-column CSV of positive demands, with optional ``demand`` header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    values = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if lineno == 1 and len(row) == 1 and row[0].strip().lower() == "demand":
            continue
        if len(row) != 1:
            raise UsageError(f"{path}:{lineno}: expected exactly one column, got {len(row)}")
        try:
            x = float(row[0])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: not a number: {row[0]!r}") from None
        if not (x > 0 and math.isfinite(x)):
            raise UsageError(f"{path}:{lineno}: demand must be positive and finite, got {row[0]!r}")
        values.append(x)
    if not values:
        raise UsageError(f"{path}: no demand values")
    return np.asarray(values)


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out, text)


def _check_out_dir(path) -> None:
    if path is not None and not Path(path).parent.is_dir():
        raise UsageError(f"output directory does not exist: {Path(path).parent}")


# -- subcommands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    model = _demand_model(args)
    sol = optimal_q(model, _cost_params(args))
    _emit(
        _csv_text(
            ("q_star", "u_star", "expected_cost", "residual"),
            [(_fmt(sol.q_star), _fmt(sol.u_star), _fmt(sol.expected_cost_at_q), _fmt(sol.residual))],
        ),
        None,
    )
    return EXIT_OK


def cmd_expected_cost(args) -> int:
    model = _demand_model(args)
    p = _cost_params(args)
    if not (args.q >= 0 and math.isfinite(args.q)):
        raise UsageError("--q must be nonnegative and finite")
    fn = expected_cost_quadrature if args.quadrature else expected_cost
    _emit(_csv_text(("q", "expected_cost"), [(_fmt(args.q), _fmt(fn(model, args.q, p)))]), None)
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.lam is not None or args.b is not None:
        raise UsageError("estimate infers the demand parameter; drop --lambda/--b")
    p = _cost_params(args)
    os_flags = (args.order_stat_rank, args.order_stat_value, args.sample_size)
    have_os = [v is not None for v in os_flags]
    if args.data is not None and any(have_os):
        raise UsageError("give either --data or the order-statistic flags, not both")
    if args.data is None and not all(have_os):
        raise UsageError(
            "estimate needs --data, or all of --order-stat-rank, --order-stat-value, --sample-size"
        )

    if args.estimator is None:
        if args.data is None:
            kind = EstimatorKind.EXP_OS1
        else:
            kind = EstimatorKind.EXP_EEQ1 if args.dist == "exp" else EstimatorKind.UNIF_UMVUE
    else:
        kind = EstimatorKind.parse(args.estimator)
    if kind.is_uniform != (args.dist == "unif"):
        raise UsageError(f"estimator {kind.value} does not apply to --dist {args.dist}")

    if args.data is not None:
        if kind.needs_broken_sample:
            raise UsageError(f"{kind.value} works from one order statistic; use the order-stat flags")
        sample = FullSample(read_demand_file(args.data))
    else:
        if not kind.needs_broken_sample:
            raise UsageError(f"{kind.value} needs the full sample via --data")
        sample = BrokenSample(args.order_stat_rank, args.sample_size, args.order_stat_value)

    q = estimate(sample, p, kind)
    _emit(_csv_text(("estimator", "estimate"), [(kind.value, _fmt(q))]), None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.threads < 0:
        raise UsageError("--threads must be nonnegative")
    _check_out_dir(args.out)
    _check_out_dir(args.table)
    if args.config is not None:
        try:
            cfg = SimulationConfig.from_json(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc.strerror or exc}") from None
    else:
        cfg = SimulationConfig.published_grid()
    overrides = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides:
        fields = {
            "m_list": cfg.m_list,
            "ratio_list": cfg.ratio_list,
            "n_list": cfg.n_list,
            "reps": cfg.reps,
            "master_seed": cfg.master_seed,
            "estimators": cfg.estimators,
            "lam": cfg.lam,
            "broken_rank": cfg.broken_rank,
        }
        fields.update(overrides)
        cfg = SimulationConfig(**fields)

    report = run_experiment(cfg, threads=args.threads)
    _emit(report.to_csv(), args.out)
    if args.table is not None:
        _write_atomic(args.table, render_tables(report))
    for err in report.errors:
        print(f"sygen: cell failed: {err}", file=sys.stderr)
    return EXIT_NUMERIC if report.errors else EXIT_OK


def cmd_sweep(args) -> int:
    if args.rho_steps < 1:
        raise UsageError("--rho-steps must be positive")
    if not (0 < args.rho_min <= args.rho_max and math.isfinite(args.rho_max)):
        raise UsageError("need 0 < --rho-min <= --rho-max")
    if args.rho_steps == 1 and args.rho_min != args.rho_max:
        raise UsageError("--rho-steps 1 needs --rho-min equal to --rho-max")
    _check_out_dir(args.out)
    # round away linspace noise such as 0.49999999999999994
    grid = [float(f"{v:.12g}") for v in np.linspace(args.rho_min, args.rho_max, args.rho_steps)]
    rows = sweep_qstar(args.m_list, grid)
    _emit(format_sweep_csv(rows), args.out)
    missing = sum(u is None for _, _, u in rows)
    if missing:
        print(f"sygen: solver failed at {missing} sweep point(s)", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "expected-cost": cmd_expected_cost,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"sygen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"sygen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
