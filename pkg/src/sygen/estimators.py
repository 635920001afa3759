"""Estimators of the optimal order quantity when the demand parameter is unknown.

Uniform demand: method of moments, UMVUE and MLE plug-ins for ``b``.

Exponential demand, full sample:
  * ``eeq1`` replaces ``lambda`` by the sample mean in the first-order condition;
  * ``eeq2`` replaces ``lambda`` by the mean and ``e^(-q/lambda)`` by its UMVUE
    ``(1 - q/W)_+^(n-1)`` with ``W`` the sample total.

Exponential demand, broken sample (only ``X_(r)`` of a size-``n`` sample):
  * ``os1`` plugs in the unbiased scale estimate ``X_(r) / a_r``;
  * ``os2`` additionally replaces the survival function by an unbiased step
    estimator built on ``Z_r = (n - r + 1) X_(r)``.

Every exponential estimating equation depends on the data only through a
single scale statistic, so each estimator is that statistic times a constant
that depends on ``(n, rank, ratio, m)`` alone.  The constants are cached.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .core import CostParams, excess_integral, foc_series
from .exceptions import DomainError, EstimationFailure
from .solver import bisect_sign_change, solve_dimensionless
from .validation import check_demand_sample

__all__ = [
    "FullSample",
    "BrokenSample",
    "SampleData",
    "EstimatorKind",
    "estimate",
    "estimate_uniform",
    "uniform_estimator_moments",
    "estimate_exp_eeq1",
    "estimate_exp_eeq2",
    "eeq2_root",
    "order_stat_weight",
    "scale_from_order_stat",
    "survival_from_order_stat",
    "survival_survey",
    "estimate_exp_os1",
    "estimate_exp_os2",
    "os2_root",
    "srs_survival",
]


@dataclass(frozen=True, eq=False)
class FullSample:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", check_demand_sample(self.values))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def order_statistic(self, rank: int) -> "BrokenSample":
        """Reduce to the broken sample holding only ``X_(rank)``."""
        if not 1 <= rank <= self.n:
            raise DomainError(f"rank must lie in [1, {self.n}], got {rank}")
        value = float(np.partition(self.values, rank - 1)[rank - 1])
        return BrokenSample(rank=rank, sample_size=self.n, value=value)


@dataclass(frozen=True)
class BrokenSample:
    rank: int
    sample_size: int
    value: float

    def __post_init__(self):
        if self.sample_size < 1:
            raise DomainError(f"sample size must be positive, got {self.sample_size}")
        if not 1 <= self.rank <= self.sample_size:
            raise DomainError(
                f"rank must lie in [1, {self.sample_size}], got {self.rank}"
            )
        if not (self.value > 0 and math.isfinite(self.value)):
            raise DomainError(f"observed order statistic must be positive, got {self.value}")


SampleData = FullSample | BrokenSample


class EstimatorKind(str, enum.Enum):
    UNIF_MOMENT = "unif-moment"
    UNIF_UMVUE = "unif-umvue"
    UNIF_MLE = "unif-mle"
    EXP_EEQ1 = "eeq1"
    EXP_EEQ2 = "eeq2"
    EXP_OS1 = "os1"
    EXP_OS2 = "os2"

    @property
    def is_uniform(self) -> bool:
        return self.value.startswith("unif")

    @property
    def needs_broken_sample(self) -> bool:
        return self in (EstimatorKind.EXP_OS1, EstimatorKind.EXP_OS2)

    @classmethod
    def parse(cls, value) -> "EstimatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise DomainError(f"unknown estimator {value!r}; expected one of {names}") from None


# -- uniform demand ---------------------------------------------------------


def estimate_uniform(sample: FullSample, p: CostParams, kind: EstimatorKind) -> float:
    kind = EstimatorKind.parse(kind)
    if not isinstance(sample, FullSample):
        raise DomainError("uniform estimators need the full sample")
    x = sample.values
    n = sample.n
    denom = 1.0 + p.root_ratio
    if kind is EstimatorKind.UNIF_MOMENT:
        return 2.0 * math.fsum(x) / n / denom
    if kind is EstimatorKind.UNIF_UMVUE:
        return (n + 1) * float(x.max()) / (n * denom)
    if kind is EstimatorKind.UNIF_MLE:
        return float(x.max()) / denom
    raise DomainError(f"{kind.value} is not a uniform-demand estimator")


def uniform_estimator_moments(kind, b: float, n: int, p: CostParams) -> tuple[float, float]:
    """Exact ``(bias, mse)`` of a uniform estimator for samples of size ``n``."""
    kind = EstimatorKind.parse(kind)
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    denom = 1.0 + p.root_ratio
    if kind is EstimatorKind.UNIF_MOMENT:
        return 0.0, b * b / (3.0 * n * denom**2)
    if kind is EstimatorKind.UNIF_UMVUE:
        return 0.0, b * b / (denom**2 * n * (n + 2))
    if kind is EstimatorKind.UNIF_MLE:
        q_star = b / denom
        return -q_star / (n + 1), q_star**2 * 2.0 / ((n + 1) * (n + 2))
    raise DomainError(f"{kind.value} is not a uniform-demand estimator")


# -- exponential demand, full sample ----------------------------------------


def _require_full(sample) -> FullSample:
    if not isinstance(sample, FullSample):
        raise DomainError("this estimator needs the full sample")
    return sample


def estimate_exp_eeq1(sample: FullSample, p: CostParams) -> float:
    sample = _require_full(sample)
    return math.fsum(sample.values) / sample.n * solve_dimensionless(p)


def srs_survival(q, total, n: int):
    """UMVUE ``(1 - q/total)_+^(n-1)`` of ``e^(-q/lambda)`` from a full sample."""
    base = np.clip(1.0 - np.asarray(q, dtype=float) / np.asarray(total, dtype=float), 0.0, None)
    out = base ** (n - 1)
    return float(out) if np.ndim(out) == 0 else out


def _eeq2_log_h(t: np.ndarray, n: int, m: int) -> np.ndarray:
    # log of  N!/((m-1)!(N-m)!) * int_0^t y^(m-1) (1-y)^(-N-1) dy,  N = n - 1 >= m,
    # using y = z/(1+z):  sum_l C(N-m, l) z^(m+l) / (m+l),  z = t/(1-t)
    big_n = n - 1
    r = big_n - m
    l = np.arange(r + 1, dtype=float)
    log_binom = special.gammaln(r + 1.0) - special.gammaln(l + 1.0) - special.gammaln(r - l + 1.0)
    log_z = np.log(t) - np.log1p(-t)
    logs = log_binom[None, :] + (m + l)[None, :] * log_z[:, None] - np.log(m + l)[None, :]
    coef = special.gammaln(big_n + 1.0) - special.gammaln(m) - special.gammaln(r + 1.0)
    return coef + special.logsumexp(logs, axis=1)


def _truncated_binomial_sign(t: np.ndarray, n: int, m: int) -> np.ndarray:
    # sign of sum_{k<m} C(n-1, k) (-t)^k for t >= 1, evaluated on a log scale
    k = np.arange(m, dtype=float)
    log_binom = special.gammaln(n) - special.gammaln(k + 1.0) - special.gammaln(n - k)
    logs = log_binom[None, :] + k[None, :] * np.log(t)[:, None]
    top = logs.max(axis=1, keepdims=True)
    signs = np.where(k % 2 == 0, 1.0, -1.0)
    return np.sign(np.sum(signs[None, :] * np.exp(logs - top), axis=1))


def _eeq2_candidates(n: int, p: CostParams) -> list[float]:
    m = p.m
    if m - 1 >= n - 1:
        # the polynomial side is the whole (1 - t)^(n-1): only t = 1 solves it
        return [1.0]
    log_ratio = math.log(p.ratio)
    cands = []

    # t in (0, 1): residual has the sign of H(t) - ratio with H increasing
    grid = np.linspace(0.0, 1.0, 1001)
    inner = grid[1:-1]
    sgn = np.concatenate(([-1.0], np.sign(_eeq2_log_h(inner, n, m) - log_ratio), [1.0]))
    sign_fn = lambda x: float(np.sign(_eeq2_log_h(np.array([x]), n, m)[0] - log_ratio))
    for k in range(len(grid) - 1):
        if sgn[k] == 0:
            cands.append(float(grid[k]))
        elif sgn[k + 1] != 0 and sgn[k] != sgn[k + 1]:
            lo, hi = bisect_sign_change(
                sign_fn, float(grid[k]), float(grid[k + 1]), f_lo=sgn[k], scale_floor=0.0
            )
            cands.append(0.5 * (lo + hi))

    # t >= 1: the truncation (.)_+ zeroes the right side, leaving the polynomial
    kk = np.arange(m - 1, dtype=float)
    log_ratios = (
        special.gammaln(m) + special.gammaln(n - m + 1.0)
        - special.gammaln(kk + 1.0) - special.gammaln(n - kk)
    )
    log_bound = math.log1p(math.exp(min(float(log_ratios.max()), 700.0))) if m > 1 else 0.0
    if m > 1:
        t_hi = math.exp(log_bound) * 1.01
        npts = max(16, int(math.ceil(math.log10(t_hi) * 64)) + 1)
        tg = np.geomspace(1.0, t_hi, npts)
        sg = _truncated_binomial_sign(tg, n, m)
        poly_sign = lambda x: float(_truncated_binomial_sign(np.array([x]), n, m)[0])
        for k in range(len(tg) - 1):
            if sg[k] == 0:
                cands.append(float(tg[k]))
            elif sg[k + 1] != 0 and sg[k] != sg[k + 1]:
                lo, hi = bisect_sign_change(poly_sign, float(tg[k]), float(tg[k + 1]), f_lo=sg[k])
                cands.append(0.5 * (lo + hi))
    return cands


@lru_cache(maxsize=4096)
def _eeq2_root_cached(n: int, ratio: float, m: int) -> float:
    p = CostParams.from_ratio(ratio, m)
    cands = _eeq2_candidates(n, p)
    if not cands:
        raise EstimationFailure("second estimating equation has no positive root", n=n, m=m)
    if len(cands) == 1:
        return cands[0]
    # expected cost under Exponential(sample mean), in units of mean^m m!
    costs = [p.c_e * float(excess_integral(n * t, m + 1)) + p.c_s * math.exp(-n * t) for t in cands]
    return cands[int(np.argmin(costs))]


def eeq2_root(n: int, p: CostParams) -> float:
    """Root ``t = q / W`` of the second estimating equation for sample size ``n``."""
    if n < 2:
        raise DomainError(f"second estimating equation needs n >= 2, got {n}")
    return _eeq2_root_cached(int(n), p.ratio, p.m)


def estimate_exp_eeq2(sample: FullSample, p: CostParams) -> float:
    sample = _require_full(sample)
    total = math.fsum(sample.values)
    return total * eeq2_root(sample.n, p)


# -- exponential demand, single order statistic -----------------------------


def order_stat_weight(rank: int, n: int) -> float:
    """``E[X_(rank)] / lambda`` for an exponential sample of size ``n``."""
    if not 1 <= rank <= n:
        raise DomainError(f"rank must lie in [1, {n}], got {rank}")
    return math.fsum(1.0 / (n - j + 1) for j in range(1, rank + 1))


def scale_from_order_stat(x, rank: int, n: int):
    """Unbiased estimate of the exponential mean from ``X_(rank)``."""
    a = order_stat_weight(rank, n)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("order statistic must be positive")
    out = x / a
    return float(out) if out.ndim == 0 else out


class _SurvivalTable:
    """Sorted log-thresholds and running coefficient sums of the step estimator.

    With ``i`` smaller order statistics below the observed one, the estimator is
    ``sum_j d_j I(Z > beta^j q)`` over multi-indices ``j`` in ``N^i``, with
    ``beta_k = (n-i+k)/(n-i)`` and

        d_j = multinomial(j) * prod_k u_k^(j_k) / C(n, i),
        u_k = (-1)^(k+1) C(i, k) / beta_k.

    Only terms with ``sum_k j_k log(beta_k) < log(Z/q)`` contribute, so the
    table is built up to a log limit and extended on demand.
    """

    MAX_TERMS = 2_000_000

    def __init__(self, i: int, n: int):
        self.i = i
        self.n = n
        self.limit = -1.0
        self.log_thresholds = np.zeros(0)
        self.cumulative = np.zeros(0)

    def ensure(self, log_limit: float):
        if log_limit <= self.limit:
            return
        limit = float(math.ceil(max(log_limit, 0.0)) + 1.0)
        if self.i == 0:
            s = np.zeros(1)
            cum = np.ones(1)
        elif self.i == 1:
            log_beta = math.log(self.n / (self.n - 1.0))
            count = int(math.ceil(limit / log_beta)) + 1
            if count > self.MAX_TERMS:
                raise DomainError("order-statistic survival estimator needs too many terms")
            j = np.arange(count, dtype=float)
            s = j * log_beta
            # 1/n sum_{l<=j} beta^-l telescopes to 1 - beta^-(j+1)
            cum = -np.expm1(-(j + 1.0) * log_beta)
        else:
            s, cum = self._enumerate(limit)
        self.limit = limit
        self.log_thresholds = s
        self.cumulative = cum

    def _enumerate(self, limit: float):
        i, n = self.i, self.n
        log_beta = [math.log((n - i + k) / (n - i)) for k in range(1, i + 1)]
        log_u = [math.log(math.comb(i, k)) - log_beta[k - 1] for k in range(1, i + 1)]
        neg = [k % 2 == 0 for k in range(1, i + 1)]
        log_norm = -math.log(math.comb(n, i))
        entries = []

        def walk(k, s, js):
            if k == i:
                total = sum(js)
                logmag = log_norm + math.lgamma(total + 1)
                sign = 1.0
                for idx, jk in enumerate(js):
                    logmag += jk * log_u[idx] - math.lgamma(jk + 1)
                    if neg[idx] and jk % 2:
                        sign = -sign
                entries.append((s, sign * math.exp(logmag)))
                if len(entries) > self.MAX_TERMS:
                    raise DomainError("order-statistic survival estimator needs too many terms")
                return
            jk = 0
            while s + jk * log_beta[k] < limit:
                walk(k + 1, s + jk * log_beta[k], js + [jk])
                jk += 1

        walk(0, 0.0, [])
        entries.sort(key=lambda e: e[0])
        s = np.array([e[0] for e in entries])
        cum = np.empty(len(entries))
        total, comp = 0.0, 0.0
        for idx, (_, d) in enumerate(entries):
            t = total + d
            if abs(total) >= abs(d):
                comp += (total - t) + d
            else:
                comp += (d - t) + total
            total = t
            cum[idx] = total + comp
        return s, cum

    def evaluate(self, log_ratio):
        """Estimator value for ``log(Z/q)``; vectorised."""
        log_ratio = np.asarray(log_ratio, dtype=float)
        self.ensure(float(np.max(log_ratio)) if log_ratio.size else 0.0)
        k = np.searchsorted(self.log_thresholds, log_ratio, side="left")
        out = np.where(k > 0, self.cumulative[np.maximum(k - 1, 0)], 0.0)
        return out


@lru_cache(maxsize=512)
def _survival_table(i: int, n: int) -> _SurvivalTable:
    return _SurvivalTable(i, n)


def survival_from_order_stat(x_next, i: int, n: int, q: float):
    """Unbiased estimate of ``e^(-q/lambda)`` from the observed ``X_(i+1)``.

    Vectorised over ``x_next``.  Values may fall outside ``[0, 1]``; only the
    expectation is controlled.
    """
    if not 0 <= i <= n - 1:
        raise DomainError(f"need 0 <= i <= n - 1, got i={i}, n={n}")
    if not q > 0:
        raise DomainError(f"order quantity must be positive, got {q}")
    x = np.asarray(x_next, dtype=float)
    if np.any(x <= 0):
        raise DomainError("order statistic must be positive")
    z = (n - i) * x
    out = _survival_table(i, n).evaluate(np.log(z / q))
    return float(out) if out.ndim == 0 else out


def survival_survey(i: int, n: int, log_limit: float) -> tuple[np.ndarray, np.ndarray]:
    """Log-thresholds and running sums of the step estimator up to ``log_limit``."""
    table = _survival_table(i, n)
    table.ensure(log_limit)
    keep = table.log_thresholds < log_limit
    return table.log_thresholds[keep], table.cumulative[keep]


def _require_broken(sample) -> BrokenSample:
    if not isinstance(sample, BrokenSample):
        raise DomainError("this estimator needs a broken sample (one order statistic)")
    return sample


def estimate_exp_os1(sample: BrokenSample, p: CostParams) -> float:
    sample = _require_broken(sample)
    lam_hat = scale_from_order_stat(sample.value, sample.rank, sample.sample_size)
    return lam_hat * solve_dimensionless(p)


def _first_upcrossing(p: CostParams, rank: int, n: int) -> float:
    m = p.m
    g = p.rhs_coefficient
    i = rank - 1
    kappa = (n - i) * order_stat_weight(rank, n)
    u_lo = min(1e-6, 1e-3 * solve_dimensionless(p))
    s, cum = survival_survey(i, n, math.log(kappa / u_lo))
    # breakpoints kappa e^-s in increasing u; s is sorted ascending
    bps = kappa * np.exp(-s[::-1])
    heights = cum[::-1]  # constant just left of each breakpoint (ascending u)
    lefts = np.concatenate(([u_lo], bps))
    rights = np.concatenate((bps, [np.inf]))
    levels = np.concatenate((heights, [0.0]))
    keep = rights > lefts
    lefts, rights, levels = lefts[keep], rights[keep], levels[keep]

    # the pieces tile [u_lo, inf), so each right end is the next left end
    finite = np.isfinite(rights)
    psi_left = foc_series(lefts, m)
    r_left = psi_left - g * levels
    r_right = np.full(lefts.shape, np.inf)
    r_right[:-1] = psi_left[1:] - g * levels[:-1]

    # jump crossing at the left end of an interval, or a sign change inside it
    jump = np.zeros(lefts.shape, dtype=bool)
    jump[1:] = (r_right[:-1] < 0) & (r_left[1:] >= 0)
    inside = (r_left < 0) & ((r_right >= 0) | ~finite)
    if m % 2 == 1:
        inside &= finite  # the last piece has a positive polynomial that never reaches 0
    hits = np.flatnonzero(jump | inside)
    if hits.size:
        k = int(hits[0])
        if jump[k]:
            return float(lefts[k])
        level = float(levels[k])
        f = lambda u: float(foc_series(u, m)) - g * level
        hi = float(rights[k])
        if not math.isfinite(hi):
            hi = max(2.0 * float(lefts[k]), 1.0)
            while f(hi) < 0:
                hi *= 2.0
        lo, hi = bisect_sign_change(f, float(lefts[k]), hi, f_lo=float(r_left[k]), scale_floor=0.0)
        return 0.5 * (lo + hi)
    raise EstimationFailure(
        "no crossing of the order-statistic estimating equation", rank=rank, n=n, m=m
    )


@lru_cache(maxsize=4096)
def _os2_root_cached(rank: int, n: int, ratio: float, m: int) -> float:
    return _first_upcrossing(CostParams.from_ratio(ratio, m), rank, n)


def os2_root(rank: int, n: int, p: CostParams) -> float:
    """Dimensionless root ``q / lambda_hat`` of the second order-statistic equation."""
    if not 1 <= rank <= n:
        raise DomainError(f"rank must lie in [1, {n}], got {rank}")
    if p.rhs_coefficient == 0:
        return solve_dimensionless(p)
    return _os2_root_cached(int(rank), int(n), p.ratio, p.m)


def estimate_exp_os2(sample: BrokenSample, p: CostParams) -> float:
    sample = _require_broken(sample)
    lam_hat = scale_from_order_stat(sample.value, sample.rank, sample.sample_size)
    return lam_hat * os2_root(sample.rank, sample.sample_size, p)


def estimate(sample: SampleData, p: CostParams, kind) -> float:
    """Dispatch to the estimator named by ``kind``."""
    kind = EstimatorKind.parse(kind)
    if kind.is_uniform:
        return estimate_uniform(sample, p, kind)
    if kind is EstimatorKind.EXP_EEQ1:
        return estimate_exp_eeq1(sample, p)
    if kind is EstimatorKind.EXP_EEQ2:
        return estimate_exp_eeq2(sample, p)
    if kind is EstimatorKind.EXP_OS1:
        return estimate_exp_os1(sample, p)
    return estimate_exp_os2(sample, p)
