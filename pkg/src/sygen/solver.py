"""Optimal order quantities.

Uniform demand has the closed form ``b / (1 + root_ratio)``.  Exponential
demand needs the root of the dimensionless residual
``foc_series(u, m) - rhs_coefficient * e^(-u)``, computed once per
``(ratio, m)`` and rescaled by the mean demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    CostParams,
    excess_integral,
    expected_cost,
    foc_residual,
    foc_series_residual,
    foc_series_residual_derivative,
    log_excess_integral,
)
from .demand import DemandModel, Exponential, Uniform
from .exceptions import NoRootError

__all__ = [
    "OptimalSolution",
    "optimal_q",
    "solve_dimensionless",
    "dimensionless_roots",
    "optimal_cost_uniform",
    "bisect_sign_change",
]

U_MIN = 1e-8
U_MAX_LIMIT = 1e6
POINTS_PER_DECADE = 64


@dataclass(frozen=True)
class OptimalSolution:
    q_star: float
    u_star: float | None
    expected_cost_at_q: float
    residual: float
    bracket_count: int


def bisect_sign_change(f, lo, hi, f_lo=None, rel_width=1e-13, scale_floor=1.0, max_iter=400):
    """Shrink ``[lo, hi]`` around a sign change of ``f`` by bisection.

    Stops once the width is below ``rel_width * max(scale_floor, hi)``.
    ``f_lo`` must have the sign of ``f(lo)``; the bracket is assumed valid.
    """
    if f_lo is None:
        f_lo = f(lo)
    neg_lo = f_lo < 0
    for _ in range(max_iter):
        if hi - lo <= rel_width * max(scale_floor, hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid, mid
        if (f_mid < 0) == neg_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _sign_of_residual(u: np.ndarray, p: CostParams) -> np.ndarray:
    # sign(excess_integral - ratio e^-u) computed on a log scale
    log_lhs = log_excess_integral(u, p.m)
    return np.sign(log_lhs - (math.log(p.ratio) - u))


def _residual(u: float, p: CostParams) -> float:
    return float(foc_series_residual(u, p))


def _polish(u: float, lo: float, hi: float, p: CostParams) -> float:
    f = _residual(u, p)
    df = float(foc_series_residual_derivative(u, p))
    if df > 0 and math.isfinite(f):
        cand = u - f / df
        if lo <= cand <= hi and abs(_residual(cand, p)) <= abs(f):
            return cand
    return u


def dimensionless_roots(p: CostParams) -> tuple[list[float], int]:
    """All positive roots found by a geometric sign scan, plus the bracket count."""
    u_max = max(1.0, float(p.m))
    while True:
        decades = math.log10(u_max / U_MIN)
        grid = np.geomspace(U_MIN, u_max, int(math.ceil(decades * POINTS_PER_DECADE)) + 1)
        signs = _sign_of_residual(grid, p)
        brackets = []
        for k in range(len(grid) - 1):
            if signs[k] == 0:
                brackets.append((grid[k], grid[k]))
            elif signs[k + 1] != 0 and signs[k] != signs[k + 1]:
                brackets.append((grid[k], grid[k + 1]))
        if brackets and signs[-1] > 0:
            break
        if u_max >= U_MAX_LIMIT:
            raise NoRootError(
                "no sign change of the first-order condition",
                m=p.m,
                rhs_coefficient=p.rhs_coefficient,
                u_max=u_max,
            )
        u_max = min(2.0 * u_max, U_MAX_LIMIT)

    roots = []
    for lo, hi in brackets:
        if lo == hi:
            roots.append(float(lo))
            continue
        sign_fn = lambda x: float(_sign_of_residual(np.array([x]), p)[0])
        a, b = bisect_sign_change(sign_fn, float(lo), float(hi))
        roots.append(_polish(0.5 * (a + b), a, b, p))
    return roots, len(brackets)


def _dimensionless_cost(u: float, p: CostParams) -> float:
    # expected cost / (m! lambda^m)
    return p.c_e * float(excess_integral(u, p.m + 1)) + p.c_s * math.exp(-u)


def _select_root(roots: list[float], p: CostParams) -> float:
    if len(roots) == 1:
        return roots[0]
    best_u, best_c = None, p.c_s  # cost in the limit u -> 0+
    for u in sorted(roots):
        c = _dimensionless_cost(u, p)
        if best_u is None or c < best_c * (1.0 - 1e-12):
            best_u, best_c = u, c
    return best_u


@lru_cache(maxsize=4096)
def _solve_cached(ratio: float, m: int) -> tuple[float, int]:
    p = CostParams.from_ratio(ratio, m)
    roots, count = dimensionless_roots(p)
    return _select_root(roots, p), count


def solve_dimensionless(p: CostParams) -> float:
    """Optimal ``q / lambda`` for exponential demand; independent of ``lambda``."""
    return _solve_cached(p.ratio, p.m)[0]


def optimal_q(model: DemandModel, p: CostParams) -> OptimalSolution:
    if isinstance(model, Uniform):
        q = model.b / (1.0 + p.root_ratio)
        return OptimalSolution(
            q_star=q,
            u_star=None,
            expected_cost_at_q=expected_cost(model, q, p),
            residual=foc_residual(model, q, p),
            bracket_count=0,
        )
    if isinstance(model, Exponential):
        u, count = _solve_cached(p.ratio, p.m)
        q = model.lam * u
        return OptimalSolution(
            q_star=q,
            u_star=u,
            expected_cost_at_q=expected_cost(model, q, p),
            residual=foc_residual(model, q, p),
            bracket_count=count,
        )
    raise TypeError(f"unsupported demand model {model!r}")


def optimal_cost_uniform(b: float, p: CostParams) -> float:
    """Minimum expected cost under uniform demand on ``(0, b)``."""
    m = p.m
    denom = (p.c_e ** (1.0 / m) + p.c_s ** (1.0 / m)) ** m
    return p.c_s * b**m / (m + 1) * p.c_e / denom
