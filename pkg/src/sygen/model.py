"""scikit-learn style wrapper: learn an order quantity from a demand history."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import CostParams, realized_cost
from .estimators import (
    BrokenSample,
    EstimatorKind,
    FullSample,
    estimate,
    order_stat_weight,
)
from .exceptions import DomainError
from .validation import check_demand_sample

__all__ = ["SyGenNewsvendor"]

_DEMANDS = ("exponential", "uniform")


class SyGenNewsvendor(BaseEstimator):
    """Order-quantity estimator for the symmetric power-loss newsvendor.

    Parameters
    ----------
    c_s, c_e : float
        Shortage and excess cost multipliers.
    m : int
        Loss degree applied to both shortage and excess.
    demand : {"exponential", "uniform"}
        Assumed demand family; its parameter is estimated from the data.
    method : str or None
        Estimator name (``eeq1``, ``eeq2``, ``os1``, ``os2``, ``unif-moment``,
        ``unif-umvue``, ``unif-mle``).  Defaults to ``eeq1`` for exponential
        and ``unif-umvue`` for uniform demand.
    rank : int or None
        Order-statistic rank used by ``os1``/``os2`` (default 2).
    sample_size : int or None
        For ``os1``/``os2`` only.  When given, ``X`` must hold the single
        observed order statistic of a sample of this size; otherwise ``X`` is
        the full sample and the order statistic is taken from it.

    Attributes
    ----------
    order_quantity_ : float
    method_ : EstimatorKind
    scale_ : float
        Estimated demand scale (mean for exponential, upper limit for uniform).
    n_samples_ : int
        Size of the sample the estimate refers to.
    """

    def __init__(self, c_s=1.0, c_e=1.0, m=2, demand="exponential", method=None, rank=None, sample_size=None):
        self.c_s = c_s
        self.c_e = c_e
        self.m = m
        self.demand = demand
        self.method = method
        self.rank = rank
        self.sample_size = sample_size

    def _cost_params(self) -> CostParams:
        return CostParams(self.c_s, self.c_e, self.m)

    def _resolve_method(self) -> EstimatorKind:
        if self.demand not in _DEMANDS:
            raise DomainError(f"demand must be one of {_DEMANDS}, got {self.demand!r}")
        if self.method is None:
            return EstimatorKind.EXP_EEQ1 if self.demand == "exponential" else EstimatorKind.UNIF_UMVUE
        kind = EstimatorKind.parse(self.method)
        if kind.is_uniform != (self.demand == "uniform"):
            raise DomainError(f"method {kind.value} does not apply to {self.demand} demand")
        return kind

    def fit(self, X, y=None):
        p = self._cost_params()
        kind = self._resolve_method()
        x = check_demand_sample(X)

        if kind.needs_broken_sample:
            rank = 2 if self.rank is None else int(self.rank)
            if self.sample_size is None:
                sample = FullSample(x).order_statistic(rank)
            else:
                if x.shape[0] != 1:
                    raise DomainError("with sample_size set, X must hold one order statistic")
                sample = BrokenSample(rank, int(self.sample_size), float(x[0]))
            self.n_samples_ = sample.sample_size
            self.scale_ = sample.value / order_stat_weight(sample.rank, sample.sample_size)
        else:
            if self.rank is not None or self.sample_size is not None:
                raise DomainError(f"rank and sample_size only apply to os1/os2, not {kind.value}")
            sample = FullSample(x)
            self.n_samples_ = sample.n
            if kind is EstimatorKind.UNIF_MOMENT:
                self.scale_ = 2.0 * float(np.mean(x))
            elif kind is EstimatorKind.UNIF_UMVUE:
                self.scale_ = (sample.n + 1) * float(x.max()) / sample.n
            elif kind is EstimatorKind.UNIF_MLE:
                self.scale_ = float(x.max())
            else:
                self.scale_ = float(np.mean(x))

        self.method_ = kind
        self.order_quantity_ = float(estimate(sample, p, kind))
        return self

    def predict(self, X=None):
        """The fitted order quantity, once per row of ``X`` (or a scalar)."""
        check_is_fitted(self, "order_quantity_")
        if X is None:
            return self.order_quantity_
        n = len(X)
        return np.full(n, self.order_quantity_)

    def score(self, X, y=None):
        """Minus the average realised cost of the fitted quantity on demands ``X``."""
        check_is_fitted(self, "order_quantity_")
        x = check_demand_sample(X)
        return -float(np.mean(realized_cost(x, self.order_quantity_, self._cost_params())))
