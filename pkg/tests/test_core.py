import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from sygen.core import (
    CostParams,
    excess_integral,
    expected_cost,
    expected_cost_quadrature,
    foc_residual,
    foc_series,
    foc_series_residual,
    foc_terms,
    log_excess_integral,
    lower_boundary,
    realized_cost,
    series_bounds,
    truncated_series,
    upper_boundary,
)
from sygen.demand import Exponential, Uniform
from sygen.exceptions import DomainError, HypothesisViolation


def exact_alternating(u: Fraction, m: int) -> Fraction:
    """The alternating polynomial summed exactly in rationals."""
    return sum(
        (-1) ** j * u ** (m - j - 1) / math.factorial(m - j - 1) for j in range(m)
    )


class TestCostParams:
    def test_derived_quantities(self):
        p = CostParams(2.0, 1.0, 3)
        assert p.ratio == 2.0
        assert p.root_ratio == pytest.approx(0.5 ** (1 / 3), rel=1e-15)
        assert p.rhs_coefficient == 3.0
        assert CostParams(2.0, 1.0, 2).rhs_coefficient == 1.0

    def test_odd_degree_coefficient_always_positive(self):
        for ratio in (1e-9, 0.3, 5.0):
            assert CostParams.from_ratio(ratio, 5).rhs_coefficient > 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(c_s=0.0, c_e=1.0, m=2),
            dict(c_s=1.0, c_e=-1.0, m=2),
            dict(c_s=1.0, c_e=1.0, m=0),
            dict(c_s=1.0, c_e=1.0, m=2.5),
            dict(c_s=math.nan, c_e=1.0, m=2),
            dict(c_s=1.0, c_e=1.0, m=True),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            CostParams(**kwargs)

    def test_integral_float_degree_accepted(self):
        assert CostParams(1.0, 1.0, 3.0).m == 3


class TestRealizedCost:
    def test_examples(self):
        assert realized_cost(3.0, 3.0, CostParams(1.0, 1.0, 2)) == 0.0
        assert realized_cost(5.0, 3.0, CostParams(2.0, 1.0, 2)) == 8.0
        assert realized_cost(1.0, 3.0, CostParams(2.0, 1.0, 3)) == 8.0

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            realized_cost(-1.0, 1.0, CostParams(1.0, 1.0, 2))

    @given(
        x=st.floats(0, 100),
        q=st.floats(0, 100),
        m=st.integers(1, 8),
        cs=st.floats(0.01, 10),
        ce=st.floats(0.01, 10),
    )
    def test_nonnegative_and_zero_iff_equal(self, x, q, m, cs, ce):
        c = realized_cost(x, q, CostParams(cs, ce, m))
        assert c >= 0
        if x == q:
            assert c == 0
        elif abs(x - q) > 1e-3:
            assert c > 0


class TestExpectedCost:
    def test_uniform_linear_pure_shortage(self):
        p = CostParams(3.0, 1.0, 1)
        assert expected_cost(Uniform(2.0), 0.0, p) == pytest.approx(3.0 * 2.0 / 2, rel=1e-15)

    @pytest.mark.parametrize("m", [1, 2, 5, 12])
    def test_exponential_at_zero_is_raw_moment(self, m):
        p = CostParams(1.5, 1.0, m)
        lam = 0.8
        assert expected_cost(Exponential(lam), 0.0, p) == pytest.approx(
            1.5 * lam**m * math.factorial(m), rel=1e-13
        )

    def test_uniform_half(self):
        assert expected_cost(Uniform(1.0), 0.5, CostParams(1, 1, 2)) == pytest.approx(1 / 12, rel=1e-15)

    def test_quadrature_examples(self):
        p2 = CostParams(1.0, 1.0, 2)
        assert expected_cost_quadrature(Exponential(1.0), 0.0, p2) == pytest.approx(2.0, rel=1e-9)
        assert expected_cost_quadrature(Uniform(1.0), 0.5, p2) == pytest.approx(1 / 12, rel=1e-6)
        p3 = CostParams(1.0, 1.0, 3)
        assert expected_cost_quadrature(Exponential(1.0), 1.0, p3) == pytest.approx(
            expected_cost(Exponential(1.0), 1.0, p3), rel=1e-6
        )

    @pytest.mark.parametrize("q", [0.0, 0.3, 1.0, 1.7, 4.0])
    @pytest.mark.parametrize("m", [1, 3, 6])
    def test_uniform_matches_quadrature_including_beyond_support(self, q, m):
        p = CostParams(1.7, 0.6, m)
        model = Uniform(1.5)
        assert expected_cost(model, q, p) == pytest.approx(expected_cost_quadrature(model, q, p), rel=1e-9)

    @pytest.mark.parametrize("q", [0.05, 0.9, 3.0, 25.0])
    @pytest.mark.parametrize("m", [1, 4, 15])
    def test_exponential_matches_quadrature(self, q, m):
        p = CostParams(0.7, 1.3, m)
        model = Exponential(1.9)
        assert expected_cost(model, q, p) == pytest.approx(expected_cost_quadrature(model, q, p), rel=1e-8)

    def test_linear_uniform_classical_minimizer(self):
        b = 2.0
        for ratio in (0.5, 1.0, 2.0):
            p = CostParams.from_ratio(ratio, 1)
            q0 = b * ratio / (1 + ratio)
            c0 = expected_cost(Uniform(b), q0, p)
            assert c0 <= expected_cost(Uniform(b), q0 + 0.01 * b, p)
            assert c0 <= expected_cost(Uniform(b), q0 - 0.01 * b, p)

    def test_negative_order_rejected(self):
        with pytest.raises(DomainError):
            expected_cost(Uniform(1.0), -0.1, CostParams(1, 1, 2))


class TestKernel:
    @pytest.mark.parametrize("m", [1, 2, 3, 7, 20, 50, 100])
    def test_matches_confluent_hypergeometric_form(self, m):
        # int_0^u (u-t)^(m-1) e^-t dt/(m-1)! = e^-u u^m/m! 1F1(m; m+1; u)
        u = np.concatenate([np.geomspace(1e-3, 1.0, 20), np.linspace(1.0, 60.0, 60)])
        log_ref = -u + m * np.log(u) - special.gammaln(m + 1) + np.log(special.hyp1f1(m, m + 1, u))
        np.testing.assert_allclose(log_excess_integral(u, m), log_ref, rtol=1e-12, atol=1e-11)

    def test_log_form_deep_tail(self):
        # far below the bulk, where the plain value underflows
        u, m = 1e-3, 100
        val = log_excess_integral(u, m)
        ref = m * math.log(u) - math.lgamma(m + 1) - u + math.log(special.hyp1f1(m, m + 1, u))
        assert val == pytest.approx(ref, rel=1e-13)

    def test_value_at_zero(self):
        assert log_excess_integral(0.0, 3) == -math.inf
        assert excess_integral(0.0, 3) == 0.0

    def test_degree_zero_is_plain_exponential(self):
        assert log_excess_integral(2.0, 0) == -2.0

    def test_direct_integration(self):
        u, m = 2.3, 4
        ref = integrate.quad(lambda t: (u - t) ** (m - 1) * math.exp(-t), 0, u)[0] / math.factorial(m - 1)
        assert excess_integral(u, m) == pytest.approx(ref, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            excess_integral(-1.0, 2)


class TestAlternatingSeries:
    def test_examples(self):
        assert foc_series(0.37, 1) == 1.0
        assert foc_series(1.0, 2) == pytest.approx(0.0, abs=1e-15)
        assert foc_series(2.0, 3) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("m", [2, 3, 4, 9, 20, 40])
    @pytest.mark.parametrize("u", [Fraction(1, 8), Fraction(3, 2), Fraction(7), Fraction(61, 2)])
    def test_matches_exact_rational_sum(self, m, u):
        exact = float(exact_alternating(u, m))
        uf = float(u)
        # error is measured against the size of the two pieces it is built from
        scale = float(excess_integral(uf, m)) + math.exp(-uf)
        assert abs(foc_series(uf, m) - exact) <= 1e-12 * max(scale, abs(exact))

    @pytest.mark.parametrize("m", [2, 3, 5, 8])
    @pytest.mark.parametrize("u", [0.4, 1.3, 3.7])
    def test_derivative_recurrence(self, m, u):
        h = 1e-6
        fd = (foc_series(u + h, m) - foc_series(u - h, m)) / (2 * h)
        assert fd == pytest.approx(foc_series(u, m - 1), abs=1e-5)

    def test_residual_is_series_minus_coefficient_term(self):
        p = CostParams(2.0, 1.0, 5)
        u = np.linspace(0.1, 8, 11)
        np.testing.assert_allclose(
            foc_series_residual(u, p),
            foc_series(u, 5) - p.rhs_coefficient * np.exp(-u),
            rtol=1e-12,
            atol=1e-14,
        )

    @given(m=st.integers(2, 30), u=st.floats(0.01, 60))
    def test_series_not_nan(self, m, u):
        assert math.isfinite(float(foc_series(u, m)))


class TestTruncatedSeries:
    def test_full_truncation_is_series(self):
        assert truncated_series(1.7, 5, 1) == pytest.approx(foc_series(1.7, 5), rel=1e-13)

    def test_single_term(self):
        assert truncated_series(1.9, 4, 4) == pytest.approx(1.9**3 / 6, rel=1e-15)

    def test_two_terms(self):
        assert truncated_series(2.0, 4, 3) == pytest.approx(8 / 6 - 4 / 2, rel=1e-15)

    @pytest.mark.parametrize("m, k", [(4, 5), (4, 0), (3, -1)])
    def test_range(self, m, k):
        with pytest.raises(DomainError):
            truncated_series(1.0, m, k)


class TestEnvelopes:
    def test_example_inside(self):
        p = CostParams(1.0, 1.0, 5)
        lo, hi = series_bounds(1.0, p)
        val = float(foc_series_residual(1.0, p))
        assert lo < val < hi

    def test_equality_at_origin(self):
        p = CostParams.from_ratio(3.0, 4)
        lo, _ = series_bounds(0.0, p)
        assert float(foc_series_residual(0.0, p)) == pytest.approx(-1 - p.rhs_coefficient, rel=1e-15)
        assert lo == pytest.approx(-(1 + p.rhs_coefficient), rel=1e-15)
        assert lo <= float(foc_series_residual(0.0, p)) + 1e-12

    def test_hypotheses_enforced(self):
        with pytest.raises(HypothesisViolation):
            series_bounds(1.0, CostParams(1.0, 1.0, 3))
        with pytest.raises(HypothesisViolation):
            series_bounds(1.0, CostParams(1.0, 1.0, 4))  # coefficient is 0
        with pytest.raises(HypothesisViolation):
            series_bounds(1.0, CostParams(0.5, 1.0, 6))  # coefficient is negative
        with pytest.raises(HypothesisViolation):
            lower_boundary(1.0, CostParams(1.0, 1.0, 3))

    @pytest.mark.parametrize(
        "m, ratio",
        [
            (m, r)
            for m in range(4, 11)
            for r in (0.5, 1.0, 2.0)
            if CostParams.from_ratio(r, m).rhs_coefficient > 0
        ],
    )
    def test_lower_envelope_holds(self, m, ratio):
        p = CostParams.from_ratio(ratio, m)
        for u in np.linspace(0.1, 10.0, 100):
            assert lower_boundary(u, p) <= float(foc_series_residual(u, p)) + 1e-12

    @pytest.mark.parametrize("m", [4, 6, 8, 10])
    def test_upper_envelope_holds_for_even_degree(self, m):
        p = CostParams.from_ratio(2.0, m)
        for u in np.linspace(0.1, 10.0, 100):
            assert float(foc_series_residual(u, p)) <= upper_boundary(u, p) + 1e-12

    @pytest.mark.parametrize("m", [5, 7, 9])
    def test_upper_envelope_fails_below_one_for_odd_degree(self, m):
        # for odd m the upper envelope is exceeded when u < 1: the slack
        # (1 - u - e^-u)(...) changes sign because (-1)^m + coefficient
        # multiplies (u - 1) < 0
        p = CostParams.from_ratio(1.0, m)
        assert float(foc_series_residual(0.3, p)) > upper_boundary(0.3, p)
        assert float(foc_series_residual(2.0, p)) <= upper_boundary(2.0, p)

    @pytest.mark.parametrize("ratio", [0.2, 1.0, 2.0, 7.5])
    def test_cubic_upper_envelope_root(self, ratio):
        p = CostParams.from_ratio(ratio, 3)
        g = p.rhs_coefficient
        root = -(1 + g) + math.sqrt(g * g + 4 * g + 3)
        assert root > 0
        assert abs(upper_boundary(root, p)) < 1e-10


class TestFirstOrderCondition:
    @pytest.mark.parametrize(
        "model, q",
        [(Uniform(2.0), 0.7), (Uniform(2.0), 2.5), (Exponential(1.4), 0.3), (Exponential(1.4), 3.1)],
    )
    @pytest.mark.parametrize("m", [1, 2, 3, 6])
    def test_terms_are_cost_derivative(self, model, q, m):
        p = CostParams(1.8, 0.9, m)
        h = 1e-5 * max(1.0, q)
        fd = (expected_cost(model, q + h, p) - expected_cost(model, q - h, p)) / (2 * h)
        lhs, rhs = foc_terms(model, q, p)
        assert m * (lhs - rhs) == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_uniform_zero_at_closed_form_optimum(self):
        p = CostParams(3.0, 1.0, 4)
        q = 5.0 / (1 + p.root_ratio)
        assert abs(foc_residual(Uniform(5.0), q, p)) < 1e-10

    def test_exponential_equal_costs_quadratic(self):
        assert abs(foc_residual(Exponential(1.0), 1.0, CostParams(1, 1, 2))) < 1e-15

    @pytest.mark.parametrize("m", [1, 3, 5])
    def test_negative_at_zero_for_odd_degree(self, m):
        assert foc_residual(Exponential(1.0), 0.0, CostParams(0.7, 1.0, m)) < 0

    @given(u=st.floats(0.01, 30), m=st.integers(1, 12), ratio=st.floats(0.05, 20))
    def test_sign_matches_dimensionless_residual(self, u, m, ratio):
        p = CostParams.from_ratio(ratio, m)
        r = foc_residual(Exponential(2.0), 2.0 * u, p)
        d = float(foc_series_residual(u, p))
        if abs(d) > 1e-9:
            assert np.sign(r) == np.sign(d)
