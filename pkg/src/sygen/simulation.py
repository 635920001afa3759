"""Seeded Monte Carlo comparison of order-quantity estimators.

Each grid cell ``(estimator, m, ratio, n)`` draws ``reps`` samples from the
demand model, estimates the optimal order quantity from each, and reduces the
errors against the true optimum to bias and MSE.

Seeds are derived by hashing, not by advancing a shared generator: the cell
seed is ``stable_hash(master_seed, estimator, m, ratio, n)`` and replication
``r`` uses ``stable_hash(cell_seed, r)``.  Cells can therefore run in any order
on any number of workers and still produce identical rows.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CostParams
from .demand import DemandModel, Exponential, Uniform
from .estimators import (
    EstimatorKind,
    FullSample,
    eeq2_root,
    estimate_uniform,
    order_stat_weight,
    os2_root,
)
from .exceptions import DomainError, EstimationFailure, SygenError
from .solver import optimal_q, solve_dimensionless

__all__ = [
    "SimulationConfig",
    "ReportRow",
    "SimulationReport",
    "stable_hash",
    "run_cell",
    "run_experiment",
    "sweep_qstar",
    "REPORT_HEADER",
    "format_report_csv",
    "format_sweep_csv",
    "render_tables",
]

REPORT_HEADER = (
    "estimator",
    "m",
    "ratio",
    "n",
    "bias",
    "mse",
    "reps_attempted",
    "reps_failed",
    "q_star_true",
    "master_seed",
)

_U64 = (1 << 64) - 1


def stable_hash(*parts) -> int:
    """64-bit hash of ints, floats and strings that is stable across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, EstimatorKind):
            part = part.value
        if isinstance(part, bool):
            raise TypeError("booleans are not hashable seed parts")
        if isinstance(part, (int, np.integer)):
            value = int(part)
            if not 0 <= value <= _U64:
                raise DomainError(f"integer seed part out of 64-bit range: {value}")
            h.update(b"i" + value.to_bytes(8, "little"))
        elif isinstance(part, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(part)))
        elif isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s" + len(data).to_bytes(4, "little") + data)
        else:
            raise TypeError(f"unsupported seed part {part!r}")
    return int.from_bytes(h.digest(), "little")


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    m_list: tuple[int, ...]
    ratio_list: tuple[float, ...]
    n_list: tuple[int, ...]
    reps: int
    master_seed: int
    estimators: tuple[EstimatorKind, ...]
    lam: float = 1.0
    broken_rank: int = 2

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)
        set_("m_list", tuple(_as_int(v, "m") for v in self.m_list))
        set_("ratio_list", tuple(float(v) for v in self.ratio_list))
        set_("n_list", tuple(_as_int(v, "n") for v in self.n_list))
        set_("estimators", tuple(EstimatorKind.parse(k) for k in self.estimators))
        for name in ("m_list", "ratio_list", "n_list", "estimators"):
            if not getattr(self, name):
                raise DomainError(f"{name} must not be empty")
        if any(m < 1 for m in self.m_list):
            raise DomainError("loss degrees must be positive")
        if any(not (r > 0 and math.isfinite(r)) for r in self.ratio_list):
            raise DomainError("cost ratios must be positive and finite")
        if any(n < 1 for n in self.n_list):
            raise DomainError("sample sizes must be positive")
        if _as_int(self.reps, "reps") < 1:
            raise DomainError("reps must be at least 1")
        set_("reps", int(self.reps))
        seed = _as_int(self.master_seed, "master_seed")
        if not 0 <= seed <= _U64:
            raise DomainError("master_seed must be an unsigned 64-bit integer")
        set_("master_seed", seed)
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError("lambda must be positive")
        set_("lam", float(self.lam))
        if _as_int(self.broken_rank, "broken_rank") < 1:
            raise DomainError("broken_rank must be at least 1")
        set_("broken_rank", int(self.broken_rank))

    @classmethod
    def published_grid(cls, reps: int = 1000, master_seed: int = 20240101) -> "SimulationConfig":
        """The published grid: standard exponential demand, rank-2 broken samples."""
        return cls(
            m_list=(2, 3, 4, 5, 10, 20, 50),
            ratio_list=(2.0, 1.0, 0.5),
            n_list=(10, 50, 100, 500, 1000, 5000, 10000),
            reps=reps,
            master_seed=master_seed,
            estimators=("eeq1", "eeq2", "os1", "os2"),
        )

    @classmethod
    def from_mapping(cls, data: dict) -> "SimulationConfig":
        known = {
            "lambda": "lam",
            "lam": "lam",
            "m_list": "m_list",
            "ratio_list": "ratio_list",
            "n_list": "n_list",
            "reps": "reps",
            "master_seed": "master_seed",
            "estimators": "estimators",
            "broken_rank": "broken_rank",
        }
        unknown = set(data) - set(known)
        if unknown:
            raise DomainError(f"unknown config keys: {', '.join(sorted(unknown))}")
        base = cls.published_grid()
        kwargs = {
            "m_list": base.m_list,
            "ratio_list": base.ratio_list,
            "n_list": base.n_list,
            "reps": base.reps,
            "master_seed": base.master_seed,
            "estimators": base.estimators,
        }
        for key, value in data.items():
            kwargs[known[key]] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "SimulationConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DomainError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        return cls.from_mapping(data)

    def cells(self):
        for kind in self.estimators:
            for m in self.m_list:
                for ratio in self.ratio_list:
                    for n in self.n_list:
                        yield kind, m, ratio, n


def _as_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise DomainError(f"{name} must be an integer")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise DomainError(f"{name} must be an integer, got {value!r}")


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    estimator: EstimatorKind
    m: int
    ratio: float
    n: int
    bias: float
    mse: float
    reps_attempted: int
    reps_failed: int
    q_star_true: float
    master_seed: int

    def as_record(self) -> list[str]:
        return [
            self.estimator.value,
            str(self.m),
            repr(float(self.ratio)),
            str(self.n),
            repr(float(self.bias)),
            repr(float(self.mse)),
            str(self.reps_attempted),
            str(self.reps_failed),
            repr(float(self.q_star_true)),
            str(self.master_seed),
        ]


@dataclass
class SimulationReport:
    rows: list[ReportRow] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        return format_report_csv(self.rows)

    def write_csv(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))


def format_report_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for row in rows:
        writer.writerow(row.as_record())
    return buf.getvalue()


# -- one cell ----------------------------------------------------------------


def _true_optimum(model: DemandModel, p: CostParams) -> float:
    return optimal_q(model, p).q_star


def _replicate_statistics(model: DemandModel, n: int, reps: int, cell_seed: int, reducer):
    out = np.empty(reps)
    for r in range(reps):
        out[r] = reducer(model.sample(stable_hash(cell_seed, r), n))
    return out


def _estimates(model, p, n, reps, kind, cell_seed, broken_rank) -> np.ndarray:
    """Estimates per replication; NaN marks a failed replication."""
    if kind.is_uniform:
        if not isinstance(model, Uniform):
            raise DomainError(f"{kind.value} needs uniform demand")
        return _replicate_statistics(
            model, n, reps, cell_seed, lambda x: estimate_uniform(FullSample(x), p, kind)
        )
    if not isinstance(model, Exponential):
        raise DomainError(f"{kind.value} needs exponential demand")

    # every exponential estimator is a scale statistic times a sample-free constant
    if kind.needs_broken_sample:
        if broken_rank > n:
            raise DomainError(f"broken_rank {broken_rank} exceeds sample size {n}")
        k = broken_rank - 1
        stats = _replicate_statistics(
            model, n, reps, cell_seed, lambda x: np.partition(x, k)[k]
        )
        stats = stats / order_stat_weight(broken_rank, n)
        try:
            if kind is EstimatorKind.EXP_OS1:
                const = solve_dimensionless(p)
            else:
                const = os2_root(broken_rank, n, p)
        except EstimationFailure:
            return np.full(reps, np.nan)
    else:
        if kind is EstimatorKind.EXP_EEQ2 and n < 2:
            raise DomainError("eeq2 needs sample size at least 2")
        # numpy's pairwise sum: accurate to a few ulps and far cheaper than fsum here
        stats = _replicate_statistics(model, n, reps, cell_seed, lambda x: float(np.sum(x)))
        try:
            if kind is EstimatorKind.EXP_EEQ1:
                const = solve_dimensionless(p) / n
            else:
                const = eeq2_root(n, p)
        except EstimationFailure:
            return np.full(reps, np.nan)
    return stats * const


def run_cell(
    model: DemandModel,
    p: CostParams,
    n: int,
    reps: int,
    kind,
    cell_seed: int,
    broken_rank: int = 2,
    master_seed: int = 0,
) -> ReportRow:
    """Bias and MSE of one estimator on one grid cell."""
    kind = EstimatorKind.parse(kind)
    if reps < 1:
        raise DomainError("reps must be at least 1")
    if n < 1:
        raise DomainError("sample size must be positive")
    q_star = _true_optimum(model, p)
    est = _estimates(model, p, int(n), int(reps), kind, int(cell_seed), int(broken_rank))
    ok = est[np.isfinite(est)]
    failed = reps - ok.size
    if ok.size:
        err = ok - q_star
        bias = math.fsum(err) / ok.size
        # second pass on centred errors keeps near-cancelling sums accurate
        var = math.fsum((err - bias) ** 2) / ok.size
        mse = var + bias * bias
    else:
        bias = mse = math.nan
    return ReportRow(
        estimator=kind,
        m=p.m,
        ratio=p.ratio,
        n=int(n),
        bias=bias,
        mse=mse,
        reps_attempted=int(reps),
        reps_failed=int(failed),
        q_star_true=q_star,
        master_seed=int(master_seed),
    )


# -- full grid ---------------------------------------------------------------


def _run_grid_cell(cfg: SimulationConfig, cell):
    kind, m, ratio, n = cell
    cell_seed = stable_hash(cfg.master_seed, kind.value, m, ratio, n)
    p = CostParams.from_ratio(ratio, m)
    try:
        return run_cell(
            Exponential(cfg.lam), p, n, cfg.reps, kind, cell_seed, cfg.broken_rank, cfg.master_seed
        ), None
    except SygenError as exc:
        return None, f"{kind.value} m={m} ratio={ratio!r} n={n}: {exc}"


def _warm_constants(cfg: SimulationConfig) -> None:
    # solve each cached constant once, before workers race to fill the caches
    for kind, m, ratio, n in cfg.cells():
        p = CostParams.from_ratio(ratio, m)
        try:
            solve_dimensionless(p)
            if kind is EstimatorKind.EXP_EEQ2 and n >= 2:
                eeq2_root(n, p)
            elif kind is EstimatorKind.EXP_OS2 and cfg.broken_rank <= n:
                os2_root(cfg.broken_rank, n, p)
        except SygenError:
            pass  # reported again, per cell, by the run itself


def run_experiment(cfg: SimulationConfig, threads: int = 0) -> SimulationReport:
    """Run every cell of the grid; ``threads=0`` uses all available cores."""
    workers = threads if threads > 0 else (os.cpu_count() or 1)
    cells = list(cfg.cells())
    _warm_constants(cfg)
    report = SimulationReport()
    if workers == 1:
        results = [_run_grid_cell(cfg, c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_grid_cell(cfg, c), cells))
    for row, error in results:
        if row is not None:
            report.rows.append(row)
        if error is not None:
            report.errors.append(error)
    return report


# -- optimal quantity sweep ----------------------------------------------------


def sweep_qstar(m_list, ratio_grid) -> list[tuple[int, float, float | None]]:
    """Optimal ``q / lambda`` over a grid of loss degrees and cost ratios.

    Points where the solver fails are kept with ``None`` in place of the value.
    """
    rows = []
    for m in m_list:
        for ratio in ratio_grid:
            if not (ratio > 0 and math.isfinite(ratio)):
                raise DomainError(f"cost ratios must be positive, got {ratio}")
            try:
                u = solve_dimensionless(CostParams.from_ratio(float(ratio), int(m)))
            except SygenError:
                u = None
            rows.append((int(m), float(ratio), u))
    return rows


def format_sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("m", "rho", "u_star"))
    for m, ratio, u in rows:
        writer.writerow((m, repr(ratio), "" if u is None else repr(u)))
    return buf.getvalue()


# -- text tables ---------------------------------------------------------------


def render_tables(report: SimulationReport, digits: int = 5) -> str:
    """One table per (estimator, ratio): a bias row over an MSE row for each m."""
    blocks = []
    groups: dict = {}
    for row in report.rows:
        groups.setdefault((row.estimator.value, row.ratio), []).append(row)
    for (name, ratio), rows in groups.items():
        ns = sorted({r.n for r in rows})
        ms = sorted({r.m for r in rows})
        lookup = {(r.m, r.n): r for r in rows}
        width = digits + 7
        lines = [f"{name}  ratio={ratio:g}  (bias over MSE)"]
        lines.append("m".rjust(4) + "".join(f"n={n}".rjust(width) for n in ns))
        for m in ms:
            for label, attr in (("bias", "bias"), ("mse", "mse")):
                cells = []
                for n in ns:
                    r = lookup.get((m, n))
                    cells.append("-".rjust(width) if r is None else f"{getattr(r, attr):.{digits}f}".rjust(width))
                head = str(m) if attr == "bias" else ""
                lines.append(head.rjust(4) + "".join(cells))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
