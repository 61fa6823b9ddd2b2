"""Coverage-curve evaluation, derivatives, multi-path totals, and the
discounted dynamic information recursions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crlab import (
    ContentError,
    DynamicContentState,
    ExponentialCoverage,
    OverlapSegment,
    PiecewiseLinearCap,
    Tabulated,
    dynamic_iterate_to_fixed_point,
    dynamic_stationary,
    dynamic_step,
    q1_derivative,
    q1_eval,
    q_multi,
    q_total,
)
from crlab.oracle import finite_difference_check

EXP = ExponentialCoverage(100, 100, 1, 2)
PW = PiecewiseLinearCap(1.0, 0.5)


class TestQ1Eval:
    def test_zero_at_origin(self):
        assert q1_eval(PW, 0.0) == 0.0
        assert q1_eval(EXP, 0.0) == 0.0

    def test_piecewise_ramp(self):
        assert q1_eval(PW, 0.3) == pytest.approx(0.6, abs=1e-15)

    def test_exponential_half(self):
        # 50 * (1 - 0.98**50), evaluated at high precision
        assert q1_eval(EXP, 0.5) == pytest.approx(31.79151599564416, abs=1e-10)

    def test_domain_error(self):
        with pytest.raises(ContentError):
            q1_eval(PW, 1.5)
        with pytest.raises(ContentError):
            q1_eval(PW, -0.1)

    def test_exponential_requires_capacity_margin(self):
        with pytest.raises(ContentError):
            ExponentialCoverage(10, 100, 5, 2)


class TestQ1Derivative:
    def test_exponential_at_origin(self):
        lo, hi = q1_derivative(EXP, 0.0)
        assert lo == hi == pytest.approx(101.01353658759733, abs=1e-8)

    def test_piecewise_ramp_slope(self):
        assert q1_derivative(PW, 0.25) == (2.0, 2.0)

    def test_piecewise_cap_slope(self):
        assert q1_derivative(PW, 0.75) == (0.0, 0.0)

    def test_kink_reports_both_sides(self):
        assert q1_derivative(PW, 0.5) == (2.0, 0.0)

    def test_matches_central_differences(self):
        assert finite_difference_check(EXP) < 1e-4


class TestQTotal:
    def test_with_cap(self):
        assert q_total(PW, 0.3, 1.0) == pytest.approx(1.6, abs=1e-15)

    def test_all_on_one_path(self):
        assert q_total(PW, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            b = rng.uniform(0.1, 1.0)
            x = rng.uniform(0.0, b)
            for f in (PW, EXP):
                assert q_total(f, x, b) == pytest.approx(q_total(f, b - x, b), abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ContentError):
            q_total(PW, 0.6, 0.4)

    def test_maximized_at_even_split(self):
        xs = np.linspace(0.0, 1.0, 101)
        vals = [q_total(EXP, float(x), 1.0) for x in xs]
        assert int(np.argmax(vals)) == 50


class TestQMulti:
    PW3 = PiecewiseLinearCap(1.0, 1.0 / 3.0)

    def test_single_path_mass(self):
        assert q_multi(self.PW3, (1.0, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)

    def test_even_split(self):
        assert q_multi(self.PW3, (1 / 3, 1 / 3, 1 / 3)) == pytest.approx(3.0, abs=1e-12)

    def test_overlap_constant(self):
        seg = OverlapSegment(10, 100, 1)
        assert seg.q0 == pytest.approx(9.999734386011124, abs=1e-10)
        base = q_multi(self.PW3, (1 / 3, 1 / 3, 1 / 3))
        assert q_multi(self.PW3, (1 / 3, 1 / 3, 1 / 3), seg) == pytest.approx(base + seg.q0)

    def test_simplex_violation(self):
        with pytest.raises(ContentError):
            q_multi(self.PW3, (0.5, 0.5, 0.5))

    def test_two_path_reduces_to_q_total(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = float(rng.uniform(0, 1))
            assert q_multi(EXP, (1.0 - x, x)) == q_total(EXP, x, 1.0)


class TestTabulated:
    def test_interpolation(self):
        f = Tabulated(((0.0, 0.0), (0.5, 1.0), (1.0, 1.2)))
        assert q1_eval(f, 0.25) == pytest.approx(0.5)
        assert q1_eval(f, 0.75) == pytest.approx(1.1)

    def test_kink_slopes(self):
        f = Tabulated(((0.0, 0.0), (0.5, 1.0), (1.0, 1.2)))
        assert q1_derivative(f, 0.5) == pytest.approx((2.0, 0.4))

    def test_rejects_nonzero_origin(self):
        with pytest.raises(ContentError):
            Tabulated(((0.0, 0.5), (1.0, 1.0)))

    def test_rejects_decreasing(self):
        with pytest.raises(ContentError):
            Tabulated(((0.0, 0.0), (0.5, 1.0), (1.0, 0.5)))

    def test_rejects_convex(self):
        with pytest.raises(ContentError):
            Tabulated(((0.0, 0.0), (0.5, 0.2), (1.0, 1.0)))


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(0.0, 1.0),
    x=st.floats(0.0, 1.0),
    y=st.floats(0.0, 1.0),
    pick=st.integers(0, 2),
)
def test_concavity_property(lam, x, y, pick):
    f = (EXP, PW, Tabulated(((0.0, 0.0), (0.2, 0.5), (0.6, 0.9), (1.0, 1.0))))[pick]
    mid = lam * x + (1.0 - lam) * y
    lhs = q1_eval(f, mid)
    rhs = lam * q1_eval(f, x) + (1.0 - lam) * q1_eval(f, y)
    assert lhs >= rhs - 1e-9


class TestDynamicModel:
    def params(self, gamma=0.9):
        return DynamicContentState(0.0, 0.0, gamma, 100, 100, 1)

    def test_retention(self):
        assert self.params().retention == pytest.approx(0.13261955589475294, abs=1e-12)

    def test_empty_pool_step(self):
        st0 = self.params()
        nxt = dynamic_step(st0, 0.0)
        r = st0.retention
        assert nxt.q_h == 0.0
        assert nxt.q_l == pytest.approx(50.0 * (1.0 - r))

    def test_iterated_all_low_matches_stationary(self):
        st0 = self.params()
        fixed = dynamic_iterate_to_fixed_point(st0, 0.0)
        r = st0.retention
        expected = 50.0 * (1.0 - r) / (1.0 - 0.9 * r)
        assert fixed.q_l == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(49.247029464282406, abs=1e-9)

    def test_even_split_iteration_matches_closed_form(self):
        st0 = self.params()
        cur = st0
        for _ in range(10_000):
            cur = dynamic_step(cur, 0.5)
        q_h, q_l = dynamic_stationary(st0, 0.5)
        assert cur.q_h == pytest.approx(q_h, abs=1e-8)
        assert cur.q_l == pytest.approx(q_l, abs=1e-8)
        # (N/2)(1 - sqrt(r)) / (1 - gamma sqrt(r)) for these parameters
        assert q_h == pytest.approx(47.29140089792679, abs=1e-9)

    def test_stationary_all_low(self):
        q_h, q_l = dynamic_stationary(self.params(), 0.0)
        assert q_h == 0.0
        assert q_l == pytest.approx(49.247029464282406, abs=1e-9)

    def test_patient_limit_fills_both_paths(self):
        q_h, q_l = dynamic_stationary(self.params(gamma=1 - 1e-9), 0.5)
        assert q_h == pytest.approx(50.0, abs=1e-4)
        assert q_l == pytest.approx(50.0, abs=1e-4)

    def test_contraction_for_random_flows(self):
        rng = np.random.default_rng(2)
        st0 = self.params()
        for _ in range(10):
            x = float(rng.uniform(0, 1))
            fixed = dynamic_iterate_to_fixed_point(st0, x)
            q_h, q_l = dynamic_stationary(st0, x)
            assert fixed.q_h == pytest.approx(q_h, abs=1e-8)
            assert fixed.q_l == pytest.approx(q_l, abs=1e-8)

    def test_pool_bounds_validated(self):
        with pytest.raises(ContentError):
            DynamicContentState(60.0, 0.0, 0.9, 100, 100, 1)
        with pytest.raises(ContentError):
            DynamicContentState(0.0, 0.0, 1.0, 100, 100, 1)
