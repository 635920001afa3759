"""Cost model for the symmetric power-loss newsvendor.

Shortage and excess are both penalised by the same power ``m``:

    cost(x, q) = c_s (x - q)^m   if x > q
                 c_e (q - x)^m   if x <= q

For exponential demand every quantity reduces to a dimensionless order level
``u = q / lambda`` and the kernel

    excess_integral(u, m) = int_0^u (u - t)^(m-1) e^(-t) dt / (m-1)!

which is the excess side of the first-order condition divided by
``(m-1)! lambda^(m-1)``; the shortage side reduces to ``e^(-u)``.  The
alternating polynomial of the first-order condition equals
``excess_integral(u, m) - (-1)^m e^(-u)``.  Evaluating it from the kernel
avoids the cancellation the raw alternating sum suffers near the root once
``m`` is large.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .demand import DemandModel, Exponential, Uniform
from .exceptions import DomainError, HypothesisViolation, NumericalError

__all__ = [
    "CostParams",
    "realized_cost",
    "expected_cost",
    "expected_cost_quadrature",
    "excess_integral",
    "log_excess_integral",
    "foc_series",
    "foc_series_residual",
    "foc_series_residual_derivative",
    "truncated_series",
    "lower_boundary",
    "upper_boundary",
    "series_bounds",
    "foc_terms",
    "foc_residual",
]


@dataclass(frozen=True)
class CostParams:
    """Per-unit shortage cost ``c_s``, excess cost ``c_e`` and loss degree ``m``."""

    c_s: float
    c_e: float
    m: int

    def __post_init__(self):
        if not (self.c_s > 0 and math.isfinite(self.c_s)):
            raise DomainError(f"shortage cost must be positive, got {self.c_s}")
        if not (self.c_e > 0 and math.isfinite(self.c_e)):
            raise DomainError(f"excess cost must be positive, got {self.c_e}")
        if isinstance(self.m, bool):
            raise DomainError("loss degree must be an integer")
        try:
            m = operator.index(self.m)
        except TypeError:
            if isinstance(self.m, float) and self.m.is_integer():
                m = int(self.m)
            else:
                raise DomainError(f"loss degree must be an integer, got {self.m!r}") from None
        if m < 1:
            raise DomainError(f"loss degree must be at least 1, got {m}")
        object.__setattr__(self, "m", m)

    @classmethod
    def from_ratio(cls, ratio: float, m: int, c_e: float = 1.0) -> "CostParams":
        return cls(c_s=ratio * c_e, c_e=c_e, m=m)

    @property
    def ratio(self) -> float:
        """Shortage-to-excess cost ratio ``c_s / c_e``."""
        return self.c_s / self.c_e

    @property
    def root_ratio(self) -> float:
        """``(c_e / c_s)^(1/m)``; the uniform optimum is ``b / (1 + root_ratio)``."""
        return (self.c_e / self.c_s) ** (1.0 / self.m)

    @property
    def rhs_coefficient(self) -> float:
        """Multiplier of ``e^(-u)`` in the exponential first-order condition."""
        return self.ratio - (-1.0) ** self.m


# -- realised and expected cost ---------------------------------------------


def realized_cost(x, q, p: CostParams):
    """Cost incurred when demand ``x`` meets order ``q``."""
    x_arr = np.asarray(x, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    if np.any(x_arr < 0) or np.any(q_arr < 0):
        raise DomainError("demand and order quantity must be nonnegative")
    diff = x_arr - q_arr
    cost = np.where(diff > 0, p.c_s * np.abs(diff) ** p.m, p.c_e * np.abs(diff) ** p.m)
    if cost.ndim == 0:
        return float(cost)
    return cost


def _check_order(q):
    q = float(q)
    if not q >= 0:
        raise DomainError(f"order quantity must be nonnegative, got {q}")
    return q


def expected_cost(model: DemandModel, q: float, p: CostParams) -> float:
    """Closed-form expected cost of ordering ``q``."""
    q = _check_order(q)
    m = p.m
    if isinstance(model, Uniform):
        b = model.b
        z = q / b
        if z <= 1.0:
            inner = p.c_e * z ** (m + 1) + p.c_s * (1.0 - z) ** (m + 1)
        else:
            inner = p.c_e * (z ** (m + 1) - (z - 1.0) ** (m + 1))
        return b**m * inner / (m + 1)
    if isinstance(model, Exponential):
        u = q / model.lam
        scale = math.exp(math.lgamma(m + 1) + m * math.log(model.lam))
        return scale * (p.c_e * excess_integral(u, m + 1) + p.c_s * math.exp(-u))
    raise TypeError(f"unsupported demand model {model!r}")


def _exponential_tail_limit(m: int, tol: float) -> float:
    # smallest doubling T with P(Gamma(m+1) > T) < tol
    t = float(m + 1)
    while special.gammaincc(m + 1, t) >= tol:
        t *= 2.0
    return t


def _quad(func, a, b, points=None):
    value, abserr, info = integrate.quad(
        func, a, b, epsabs=0.0, epsrel=1e-10, limit=500, points=points, full_output=1
    )[:3]
    return value, abserr, info


def expected_cost_quadrature(model: DemandModel, q: float, p: CostParams) -> float:
    """Expected cost by adaptive quadrature of the two branch integrals.

    Independent of the closed forms in :func:`expected_cost`; meant as an oracle.
    """
    q = _check_order(q)
    m = p.m
    pieces = []
    if isinstance(model, Uniform):
        b = model.b
        hi = min(q, b)
        if hi > 0:
            pieces.append(("excess", _quad(lambda x: p.c_e * (q - x) ** m / b, 0.0, hi)))
        if q < b:
            pieces.append(("shortage", _quad(lambda x: p.c_s * (x - q) ** m / b, q, b)))
    elif isinstance(model, Exponential):
        lam = model.lam
        if q > 0:
            pieces.append(
                ("excess", _quad(lambda x: p.c_e * (q - x) ** m * math.exp(-x / lam) / lam, 0.0, q))
            )
        upper = q + lam * _exponential_tail_limit(m, 1e-14)
        pieces.append(
            (
                "shortage",
                _quad(
                    lambda x: p.c_s * (x - q) ** m * math.exp(-x / lam) / lam,
                    q,
                    upper,
                    points=[q + lam * m],
                ),
            )
        )
    else:
        raise TypeError(f"unsupported demand model {model!r}")

    total = 0.0
    for name, (value, abserr, info) in pieces:
        if abserr > 1e-8 * max(abs(value), 1e-300):
            raise NumericalError(
                "quadrature did not reach the requested accuracy",
                branch=name,
                value=value,
                abserr=abserr,
                evaluations=info.get("neval"),
            )
        total += value
    return total


# -- the dimensionless first-order-condition kernel ------------------------


def _series_terms_needed(u_max: float) -> int:
    return int(math.ceil(u_max + 12.0 * math.sqrt(u_max) + 40.0))


def log_excess_integral(u, m: int):
    """Natural log of :func:`excess_integral`; ``-inf`` at ``u = 0``.

    ``m = 0`` is accepted and means ``e^(-u)`` (the derivative of ``m = 1``).
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(u_arr < 0) or np.any(np.isnan(u_arr)):
        raise DomainError("dimensionless order level must be nonnegative")
    if m < 0:
        raise DomainError(f"degree must be nonnegative, got {m}")
    out = np.full(u_arr.shape, -np.inf)
    if m == 0:
        out = -u_arr
        return out if np.ndim(u) else float(out[0])

    pos = u_arr > 0
    small = pos & (u_arr <= 2.0 * m + 10.0)
    large = u_arr > 2.0 * m + 10.0

    if np.any(small):
        us = u_arr[small]
        k = np.arange(_series_terms_needed(float(us.max())), dtype=float)
        log_u = np.log(us)[:, None]
        # e^-u u^(m+k) / ((m+k) k! (m-1)!), all terms positive
        logs = (
            -us[:, None]
            + (m + k)[None, :] * log_u
            - np.log(m + k)[None, :]
            - special.gammaln(k + 1.0)[None, :]
            - special.gammaln(m)
        )
        out[small] = special.logsumexp(logs, axis=1)

    if np.any(large):
        ul = u_arr[large]
        k = np.arange(m, dtype=float)
        logs = k[None, :] * np.log(ul)[:, None] - special.gammaln(k + 1.0)[None, :]
        signs = np.where((m - 1 - k) % 2 == 0, 1.0, -1.0)
        top = logs[:, -1:]
        body = np.sum(signs[None, :] * np.exp(logs - top), axis=1)
        tail = (-1.0) ** m * np.exp(-ul - top[:, 0])
        out[large] = top[:, 0] + np.log(body + tail)

    return out if np.ndim(u) else float(out[0])


def excess_integral(u, m: int):
    """``int_0^u (u - t)^(m-1) e^(-t) dt / (m-1)!`` for ``u >= 0``."""
    return np.exp(log_excess_integral(u, m))


def foc_series(u, m: int):
    """The alternating polynomial ``sum_j (-1)^j u^(m-j-1) / (m-j-1)!``, j < m."""
    if m < 1:
        raise DomainError(f"loss degree must be at least 1, got {m}")
    if m == 1:
        return np.ones_like(np.asarray(u, dtype=float)) if np.ndim(u) else 1.0
    return excess_integral(u, m) - (-1.0) ** m * np.exp(-np.asarray(u, dtype=float))


def foc_series_residual(u, p: CostParams):
    """``foc_series(u, m) - rhs_coefficient * e^(-u)``; zero at the optimum."""
    u_arr = np.asarray(u, dtype=float)
    return excess_integral(u, p.m) - p.ratio * np.exp(-u_arr)


def foc_series_residual_derivative(u, p: CostParams):
    u_arr = np.asarray(u, dtype=float)
    return excess_integral(u, p.m - 1) + p.ratio * np.exp(-u_arr)


def truncated_series(u: float, m: int, k: int) -> float:
    """Partial alternating sum over ``j = 0 .. m-k``.

    ``k = 1`` gives the full :func:`foc_series`.
    """
    top = m - k
    if m < 1 or top < 0 or top > m - 1:
        raise DomainError(f"need 0 <= m - k <= m - 1, got m={m}, k={k}")
    u = float(u)
    terms = []
    for j in range(top + 1):
        power = m - j - 1
        mag = u**power / math.factorial(power)
        terms.append(-mag if j % 2 else mag)
    return math.fsum(terms)


def lower_boundary(u: float, p: CostParams) -> float:
    """Polynomial lower envelope of the residual, derived from ``e^-u < 1 - u + u^2/2``."""
    if p.m < 4:
        raise HypothesisViolation(f"lower envelope needs m >= 4, got m={p.m}")
    g = p.rhs_coefficient
    return -(1.0 + g) * (u * u / 2.0 - u + 1.0) + truncated_series(u, p.m, 4)


def upper_boundary(u: float, p: CostParams) -> float:
    """Polynomial upper envelope of the residual, derived from ``e^-u > 1 - u``."""
    if p.m < 3:
        raise HypothesisViolation(f"upper envelope needs m >= 3, got m={p.m}")
    g = p.rhs_coefficient
    return (1.0 + g) * (u - 1.0) + truncated_series(u, p.m, 3)


def series_bounds(u: float, p: CostParams) -> tuple[float, float]:
    """Envelope ``(lower, upper)`` claimed to bracket :func:`foc_series_residual`.

    The claim needs ``m >= 4`` and a positive ``rhs_coefficient``.  The lower
    envelope always holds.  For odd ``m`` the upper one fails when ``u < 1``,
    because the term ``(-1)^m + rhs_coefficient`` then multiplies a negative
    ``u - 1``.
    """
    if p.m < 4:
        raise HypothesisViolation(f"bounds need m >= 4, got m={p.m}")
    if not p.rhs_coefficient > 0:
        raise HypothesisViolation(
            "bounds need a positive rhs coefficient",
        )
    return lower_boundary(u, p), upper_boundary(u, p)


# -- first-order condition in natural units ---------------------------------


def foc_terms(model: DemandModel, q: float, p: CostParams) -> tuple[float, float]:
    """Excess-side and shortage-side integrals of the first-order condition."""
    q = _check_order(q)
    m = p.m
    if isinstance(model, Uniform):
        b = model.b
        z = q / b
        scale = b ** (m - 1) / m
        if z <= 1.0:
            return p.c_e * scale * z**m, p.c_s * scale * (1.0 - z) ** m
        return p.c_e * scale * (z**m - (z - 1.0) ** m), 0.0
    if isinstance(model, Exponential):
        u = q / model.lam
        scale = math.exp(math.lgamma(m) + (m - 1) * math.log(model.lam))
        return p.c_e * scale * excess_integral(u, m), p.c_s * scale * math.exp(-u)
    raise TypeError(f"unsupported demand model {model!r}")


def foc_residual(model: DemandModel, q: float, p: CostParams) -> float:
    """Excess side minus shortage side; negative means ordering more lowers cost."""
    lhs, rhs = foc_terms(model, q, p)
    return lhs - rhs
