"""Demand distributions: uniform on (0, b) and exponential with mean lambda.

Both laws expose density, distribution function, quantile, mean and seeded
sampling.  Sampling is inverse-transform on a Philox (counter-based) stream
keyed by the seed, so identical ``(model, seed, n)`` always reproduces the
same vector and independent streams can be created in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "DemandModel",
    "Uniform",
    "Exponential",
    "pdf",
    "cdf",
    "quantile",
    "sample",
    "uniform_stream",
]

_TWO_POW_53 = float(2**53)
_SEED_MASK = (1 << 64) - 1


def _check_nonnegative(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError("demand values must be nonnegative")
    return x


def _scalar_or_array(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


def uniform_stream(seed: int, n: int) -> np.ndarray:
    """Return ``n`` draws from the open interval (0, 1) keyed by ``seed``.

    The draws are built from the raw 64-bit Philox output, which numpy keeps
    stable across releases, rather than from ``Generator`` methods.
    """
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    if seed < 0:
        raise DomainError("seed must be an unsigned 64-bit integer")
    bitgen = np.random.Philox(key=int(seed) & _SEED_MASK)
    raw = bitgen.random_raw(int(n))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO_POW_53


@dataclass(frozen=True)
class Uniform:
    """Demand uniform on ``(0, b)``."""

    b: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise DomainError(f"uniform upper limit must be positive, got {self.b}")

    @property
    def mean(self) -> float:
        return self.b / 2.0

    def pdf(self, x):
        x = _check_nonnegative(x)
        out = np.where((x > 0) & (x < self.b), 1.0 / self.b, 0.0)
        return _scalar_or_array(out, x)

    def cdf(self, x):
        x = _check_nonnegative(x)
        return _scalar_or_array(np.clip(x / self.b, 0.0, 1.0), x)

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar_or_array(self.b * p, p)

    def sample(self, seed: int, n: int) -> np.ndarray:
        return self.b * uniform_stream(seed, n)


@dataclass(frozen=True)
class Exponential:
    """Demand exponential with mean ``lam``."""

    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"exponential mean must be positive, got {self.lam}")

    @property
    def mean(self) -> float:
        return self.lam

    def pdf(self, x):
        x = _check_nonnegative(x)
        return _scalar_or_array(np.exp(-x / self.lam) / self.lam, x)

    def cdf(self, x):
        x = _check_nonnegative(x)
        return _scalar_or_array(-np.expm1(-x / self.lam), x)

    def quantile(self, p):
        p = _check_probability(p)
        return _scalar_or_array(-self.lam * np.log1p(-p), p)

    def sample(self, seed: int, n: int) -> np.ndarray:
        return -self.lam * np.log(uniform_stream(seed, n))


DemandModel = Uniform | Exponential


def _check_probability(p):
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p >= 1):
        raise DomainError("probability must lie in [0, 1)")
    return p


def pdf(model: DemandModel, x):
    return model.pdf(x)


def cdf(model: DemandModel, x):
    return model.cdf(x)


def quantile(model: DemandModel, p):
    return model.quantile(p)


def sample(model: DemandModel, seed: int, n: int) -> np.ndarray:
    return model.sample(seed, n)
