"""Designer correctness: worked examples, threshold boundaries, dominance
of the combined scheme, continuous types, the three-path network, the
dynamic information model, and the linear traffic-cost extension."""

import math

import numpy as np
import pytest

from crlab import (
    ContentRestriction,
    ExponentialCoverage,
    Homogeneous,
    LinearCost,
    NoIncentive,
    PathNetwork,
    PiecewiseLinearCap,
    Scenario,
    ScenarioError,
    SidePayment,
    Stability,
    TwoType,
    UniformContinuous,
    classify_stability,
    design_combined,
    design_content_restriction,
    design_continuous_content_restriction,
    design_continuous_side_payment,
    design_dynamic_content_restriction,
    design_multipath_content_restriction,
    design_multipath_side_payment,
    design_side_payment,
    dynamic_no_incentive,
    dynamic_stationary_optimum,
    linear_cost_design,
    restriction_thresholds,
    side_payment_schedule,
    social_optimum,
    social_welfare,
    verify_equilibrium,
)
from crlab import game
from crlab.mechanisms import DynamicInfoParams, _half_participation_optimum
from conftest import random_two_type_scenario, stability_probe


class TestSchedule:
    def test_collects_equilibrium_charge_at_target(self):
        g = side_payment_schedule(0.3, 1.0, 1.0)
        assert g.value(0.3) == pytest.approx(0.3, abs=1e-15)

    def test_zero_at_full_flow(self):
        g = side_payment_schedule(0.3, 1.0, 1.0)
        assert g.value(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_value_at_empty_high_path(self):
        g = side_payment_schedule(0.3, 1.0, 1.0)
        assert g.value(0.0) == pytest.approx(0.3 / 0.7, abs=1e-12)

    def test_degenerate_targets_rejected(self):
        with pytest.raises(ScenarioError):
            side_payment_schedule(0.0, 1.0, 1.0)
        with pytest.raises(ScenarioError):
            side_payment_schedule(1.0, 1.0, 1.0)


class TestSidePaymentDesign:
    def test_homogeneous_reaches_social_optimum(self, pw_homogeneous):
        out = design_side_payment(pw_homogeneous)
        assert out.regime_label == "SocialOptimum"
        assert out.target_flow[1] == pytest.approx(0.5, abs=1e-9)
        assert out.predicted_sw == pytest.approx(0.85, abs=1e-12)
        ok, _ = verify_equilibrium(pw_homogeneous, out.mechanism, out.target_flow)
        assert ok

    def test_two_type_full_participation_example(self, pw_two_type):
        out = design_side_payment(pw_two_type)
        assert out.regime_label == "FullParticipation"
        assert out.target_flow[1] == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert out.predicted_sw == pytest.approx(2.0 / 3.0, abs=1e-9)

    def test_vanishing_low_type_limit(self):
        s = Scenario(
            network=PathNetwork.canonical(0.5),
            types=TwoType(1e-9, 1.0 - 1e-9),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_side_payment(s)
        # IR pins the flow at zero, welfare collapses to theta0 * Q(0,1)
        assert out.extras["x_ir"] == pytest.approx(0.0, abs=1e-6)
        assert out.predicted_sw == pytest.approx(0.5, abs=1e-6)

    def test_continuous_types_redirected(self, uniform_pw):
        with pytest.raises(ScenarioError):
            design_side_payment(uniform_pw)

    def test_uneven_type_shares(self):
        s = Scenario(
            network=PathNetwork.canonical(0.5),
            types=TwoType(0.1, 0.9, eta=0.25),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_side_payment(s)
        assert out.participation_b in (1.0, 0.75)
        ok, _ = verify_equilibrium(s, out.mechanism, out.target_flow, out.participation_b)
        assert ok

    def test_ir_holds_at_target(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            s = random_two_type_scenario(rng)
            out = design_side_payment(s)
            for theta, _mass in game.participating_types(s, out.participation_b):
                u = [
                    game.payoff(s, out.mechanism, theta, k, out.target_flow)
                    for k in range(2)
                ]
                assert max(u) >= -1e-9


class TestRestrictionDesign:
    def test_homogeneous_medium_regime(self, pw_homogeneous):
        out = design_content_restriction(pw_homogeneous)
        assert out.regime_label == "MediumRestriction"
        assert out.mechanism.coefficients[0] == pytest.approx(0.7 - 1e-6, abs=1e-12)
        assert out.predicted_sw == pytest.approx(0.7, abs=1e-12)

    def test_diverse_branch_example(self, pw_two_type):
        out = design_content_restriction(pw_two_type)
        assert out.regime_label == "LowerMediumRestriction"
        assert out.mechanism.coefficients[0] == pytest.approx(4.0 / 9.0 - 1e-6, abs=1e-12)
        assert out.predicted_sw == pytest.approx(0.5 * 2.0 - (0.1 * 2 + 0.9) / (2 * 0.9) * 0.5, abs=1e-12)
        assert out.predicted_sw == pytest.approx(0.69444444444, abs=1e-9)

    def test_high_cost_declines_restriction(self):
        s = Scenario(
            network=PathNetwork.canonical(5.0),
            types=TwoType(0.1, 0.9),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_content_restriction(s)
        assert out.regime_label == "WeakRestriction"
        assert out.mechanism.coefficients == (1.0, 1.0)
        assert out.predicted_sw == pytest.approx(0.5)

    def test_branch_boundary_continuity(self):
        # At the threshold cost both branches must produce equal welfare.
        for types in (Homogeneous(0.5), TwoType(0.1, 0.9), TwoType(0.4, 0.6)):
            base = Scenario(
                network=PathNetwork.canonical(1.0),
                types=types,
                content=ExponentialCoverage(100, 100, 1, 2),
            )
            thr = restriction_thresholds(base)
            th = [t for t, _ in base.type_masses()]
            if isinstance(types, Homogeneous):
                cut = types.theta0 * (thr.q_high - thr.q_low)
            elif th[1] / th[0] > thr.q_high / thr.q_low:
                cut = (
                    (th[0] + th[1])
                    * (thr.q_high - thr.q_low)
                    * th[1]
                    * thr.q_low
                    / (th[0] * thr.q_high + th[1] * thr.q_low)
                )
            else:
                cut = types.theta0 * (thr.q_high - thr.q_low)
            lo = design_content_restriction(
                Scenario(network=PathNetwork.canonical(cut * (1 - 1e-12)), types=types, content=base.content)
            )
            hi = design_content_restriction(
                Scenario(network=PathNetwork.canonical(cut * (1 + 1e-12)), types=types, content=base.content)
            )
            assert lo.predicted_sw == pytest.approx(hi.predicted_sw, abs=1e-9)

    def test_designed_targets_verify_and_hold(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            s = random_two_type_scenario(rng)
            out = design_content_restriction(s)
            ok, gain = verify_equilibrium(s, out.mechanism, out.target_flow)
            assert ok, (s, out, gain)
            verdict = classify_stability(
                s, out.mechanism, out.target_flow, eps_perturb=stability_probe(out)
            )
            # The similar-types branch pins a tangency point whose numeric
            # verdict saturates at Boundary; everything else must be Stable.
            assert verdict is not Stability.UNSTABLE
            if out.regime_label != "MediumRestriction":
                assert verdict is Stability.STABLE


class TestCombinedDesign:
    def test_beats_feasibility_bound(self, pw_two_type):
        out = design_combined(pw_two_type)
        assert out.predicted_sw >= 0.7222222222 - 1e-9
        assert out.regime_label == "Combined.IR21"
        ok, gain = verify_equilibrium(pw_two_type, out.mechanism, out.target_flow)
        assert ok and gain <= 1e-9

    def test_unrestricted_level_recovers_side_charge(self, pw_two_type):
        # At a = 1 the pivot payment is the plain equilibrium charge x * c_H.
        from crlab.mechanisms import _combined_scan

        v, x, a = _combined_scan(pw_two_type, 0.1, 0.9, 0.5, np.array([0.25]))
        g = (0.5 - (1.0 - a) * 0.9 * pw_two_type.content_total((0.75, 0.25), 1.0)) * 0.25
        if a == 1.0:
            assert g == pytest.approx(0.25 * 0.5)

    def test_low_cost_small_exposure_subsidizes_low_path(self, pw_two_type):
        # The pivot payment (c_H - (1 - a) * theta2 * Q) * x turns into a
        # reward when the cost is small and the exposure is cut deep.
        c_h, a, x = 0.05, 0.5, 0.5
        q = pw_two_type.content_total((0.5, 0.5), 1.0)
        level = (c_h - (1.0 - a) * 0.9 * q) * x
        assert level < 0.0
        m = game.Combined(a, game.BangSchedule(x, 1.0, level, 1e6))
        t = game.transfers(
            Scenario(
                network=PathNetwork.canonical(c_h),
                types=TwoType(0.1, 0.9),
                content=PiecewiseLinearCap(1.0, 0.5),
            ),
            m,
            (0.5, 0.5),
        )
        assert t[0] < 0.0  # low-path users receive money

    def test_dominates_single_mechanisms(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            s = random_two_type_scenario(rng)
            sw_ag = design_combined(s).predicted_sw
            sw_g = design_side_payment(s).predicted_sw
            sw_a = design_content_restriction(s).predicted_sw
            assert sw_ag >= max(sw_g, sw_a) - 1e-8

    def test_dominated_cases_stay_dominated(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            s = random_two_type_scenario(rng)
            out = design_combined(s, debug=True)
            assert out.extras["sw_ir12"] <= out.extras["sw_ir21"] + 1e-9
            assert out.extras["sw_split"] <= out.extras["sw_ir21"] + 1e-9

    def test_stability_of_bang_target(self, pw_two_type):
        out = design_combined(pw_two_type)
        assert (
            classify_stability(pw_two_type, out.mechanism, out.target_flow)
            is Stability.STABLE
        )


class TestContinuousDesigns:
    def test_side_payment_free_cost(self):
        s = Scenario(
            network=PathNetwork.canonical(0.0),
            types=UniformContinuous(),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_continuous_side_payment(s)
        assert out.participation_b == 1.0
        assert out.target_flow[1] == pytest.approx(0.5, abs=1e-9)
        assert out.predicted_sw == pytest.approx(0.5 * 2.0, abs=1e-9)

    def test_side_payment_example(self, uniform_pw):
        out = design_continuous_side_payment(uniform_pw)
        assert out.participation_b == pytest.approx(0.8774, abs=2e-3)
        assert out.target_flow[1] == pytest.approx(0.3774, abs=2e-3)
        assert out.predicted_sw == pytest.approx(0.67554, abs=2e-4)

    def test_full_participation_forces_zero_flow(self):
        s = Scenario(
            network=PathNetwork.canonical(3.0),
            types=UniformContinuous(),
            content=PiecewiseLinearCap(0.2, 0.5),
        )
        out = design_continuous_side_payment(s)
        if out.participation_b >= 1.0 - 1e-9:
            assert out.target_flow[1] == pytest.approx(0.0, abs=1e-9)

    def test_restriction_example(self, uniform_pw):
        out = design_continuous_content_restriction(uniform_pw)
        assert out.target_flow[1] == pytest.approx(0.5, abs=1e-9)
        assert out.mechanism.coefficients[0] == pytest.approx(0.5, abs=1e-9)
        assert out.predicted_sw == pytest.approx(0.625, abs=1e-9)

    def test_restriction_high_cost_fallback(self):
        s = Scenario(
            network=PathNetwork.canonical(2.0),
            types=UniformContinuous(),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_continuous_content_restriction(s)
        assert out.mechanism.coefficients == (1.0, 1.0)
        assert out.predicted_sw == pytest.approx(0.5, abs=1e-12)

    def test_restriction_free_cost_means_no_destruction(self):
        s = Scenario(
            network=PathNetwork.canonical(0.0),
            types=UniformContinuous(),
            content=PiecewiseLinearCap(1.0, 0.5),
        )
        out = design_continuous_content_restriction(s)
        assert out.mechanism.coefficients[0] == pytest.approx(1.0, abs=1e-9)

    def test_designed_continuous_targets_verify(self, uniform_pw):
        for out in (
            design_continuous_side_payment(uniform_pw),
            design_continuous_content_restriction(uniform_pw),
        ):
            ok, gain = verify_equilibrium(
                uniform_pw, out.mechanism, out.target_flow, out.participation_b
            )
            assert ok, gain
            assert (
                classify_stability(uniform_pw, out.mechanism, out.target_flow)
                is Stability.STABLE
            )


class TestMultipath:
    def canonical(self, c_h=1.0):
        return Scenario(
            network=PathNetwork.multipath(3, c_h),
            types=Homogeneous(0.5),
            content=ExponentialCoverage(100, 100, 1, 3),
        )

    def test_payment_example_values(self):
        s = self.canonical()
        mech, out = design_multipath_side_payment(s, (0.4, 0.35, 0.25))
        t = (0.4, 0.35, 0.25)
        assert mech.g1(t) == pytest.approx(0.425, abs=1e-12)
        assert mech.g2(t) == pytest.approx(-0.075, abs=1e-12)
        assert mech.refund3(t) == pytest.approx(0.575, abs=1e-12)
        collected = t[0] * mech.g1(t) + t[1] * mech.g2(t)
        assert collected == pytest.approx(0.14375, abs=1e-12)
        costs = np.asarray(s.path_costs(t)) + np.asarray(game.transfers(s, mech, t))
        assert np.ptp(costs) < 1e-12

    def test_budget_balance_off_target(self):
        s = self.canonical()
        mech, _ = design_multipath_side_payment(s, (1 / 3, 1 / 3, 1 / 3))
        assert mech.g1((1 / 3, 1 / 3, 1 / 3)) == pytest.approx(0.5, abs=1e-12)
        rng = np.random.default_rng(3)
        for _ in range(100):
            w = rng.dirichlet((2.0, 2.0, 2.0))
            t = game.transfers(s, mech, tuple(w))
            assert abs(float(np.dot(w, t))) < 1e-10

    def test_degenerate_target_rejected(self):
        s = self.canonical()
        with pytest.raises(ScenarioError):
            design_multipath_side_payment(s, (1.0, 0.0, 0.0))

    def test_payment_design_is_efficient(self):
        s = self.canonical()
        mech, out = design_multipath_side_payment(s)
        _, sw_star = social_optimum(s)
        assert out.predicted_sw == pytest.approx(sw_star, abs=1e-9)

    def test_restriction_regimes(self):
        # steep ramp: all thresholds coincide at c_H = 2 theta0 q, and the
        # no-destruction regime is preferred on the tie
        s_tie = Scenario(
            network=PathNetwork.multipath(3, 1.0),
            types=Homogeneous(0.5),
            content=PiecewiseLinearCap(1.0, 1.0 / 3.0),
        )
        out = design_multipath_content_restriction(s_tie)
        assert out.regime_label == "Multipath.HighCost"
        assert out.predicted_sw == pytest.approx(0.5, abs=1e-12)

        out_low = design_multipath_content_restriction(self.canonical(1.0))
        assert out_low.regime_label == "Multipath.LowCost"
        a1, a2, a3 = out_low.mechanism.coefficients
        assert a1 < a2 < a3 == 1.0
        ok, gain = verify_equilibrium(self.canonical(1.0), out_low.mechanism, out_low.target_flow)
        assert ok, gain

    def test_restriction_free_cost(self):
        out = design_multipath_content_restriction(self.canonical(0.0))
        q13 = self.canonical().content.value(1.0 / 3.0)
        assert out.predicted_sw == pytest.approx(3 * 0.5 * q13, abs=1e-9)
        assert out.mechanism.coefficients[0] == pytest.approx(1.0, abs=1e-9)

    def test_medium_regime_targets_two_paths(self):
        s = self.canonical(4.0)
        out = design_multipath_content_restriction(s)
        if out.regime_label == "Multipath.MediumCost":
            assert out.target_flow[2] == 0.0
            assert out.mechanism.coefficients[1] == 1.0
            ok, _ = verify_equilibrium(s, out.mechanism, out.target_flow)
            assert ok


class TestDynamicModel:
    P = DynamicInfoParams(100, 100, 1, 0.9, 10.0)

    def test_no_incentive_welfare(self):
        x, sw = dynamic_no_incentive(self.P)
        assert x == 0.0
        assert sw == pytest.approx(24.623514732141203, abs=1e-9)

    def test_huge_cost_keeps_single_path(self):
        x, _ = dynamic_stationary_optimum(DynamicInfoParams(100, 100, 1, 0.9, 1e6))
        assert x == 0.0

    def test_free_cost_balances(self):
        x, _ = dynamic_stationary_optimum(DynamicInfoParams(100, 100, 1, 0.9, 0.0))
        assert x == pytest.approx(0.5, abs=1e-9)

    def test_interior_root_is_myopic_fixed_point(self):
        from crlab.content import dynamic_stationary

        x_opt, _ = dynamic_stationary_optimum(self.P)
        q_h, q_l = dynamic_stationary(self.P.state(), x_opt)
        n, r, g = self.P.total_items, self.P.retention, self.P.discount

        def per_period(xp):
            d_h = (n / 2) * (1 - r ** xp)
            d_l = (n / 2) * (1 - r ** (1 - xp))
            qh = (n / 2) * (1 - (1 - 2 * g * q_h / n) * (1 - 2 * d_h / n))
            ql = (n / 2) * (1 - (1 - 2 * g * q_l / n) * (1 - 2 * d_l / n))
            return 0.5 * (qh + ql) - xp * self.P.c_h

        grid = np.linspace(0.0, 0.5, 100001)
        vals = [per_period(float(x)) for x in grid]
        best = float(grid[int(np.argmax(vals))])
        assert best == pytest.approx(x_opt, abs=1e-4)

    def test_restriction_design_values(self):
        out = design_dynamic_content_restriction(self.P)
        assert out.regime_label == "Dynamic.Diversity"
        assert out.extras["threshold"] == pytest.approx(22.667886165785585, abs=1e-9)
        assert out.mechanism.coefficients[0] == pytest.approx(0.7885450671765066, abs=1e-10)
        assert out.predicted_sw == pytest.approx(37.29140089792679, abs=1e-9)

    def test_restriction_design_high_cost(self):
        out = design_dynamic_content_restriction(DynamicInfoParams(100, 100, 1, 0.9, 30.0))
        assert out.regime_label == "Dynamic.None"
        assert out.predicted_sw == pytest.approx(24.623514732141203, abs=1e-9)

    def test_designed_restriction_reaches_even_split_pools(self):
        from crlab.content import dynamic_iterate_to_fixed_point

        out = design_dynamic_content_restriction(self.P)
        fixed = dynamic_iterate_to_fixed_point(self.P.state(), 0.5)
        # every user nets half the pool minus the cost, destruction included
        sw = 0.5 * (fixed.q_h + fixed.q_l) - self.P.c_h
        assert sw == pytest.approx(out.predicted_sw, abs=1e-8)
        # the restricted low path is exactly indifferent at the fixed point
        a = out.mechanism.coefficients[0]
        q_t = fixed.q_h + fixed.q_l
        assert 0.5 * a * q_t == pytest.approx(0.5 * q_t - self.P.c_h, abs=1e-8)


class TestLinearCostDesign:
    CONTENT = ExponentialCoverage(100, 100, 1, 2)

    def scenario(self, c_l=0.0, b_l=1.0, c_h=0.3, b_h=1.0):
        return Scenario(
            network=PathNetwork.canonical(max(c_h, 1e-12)),
            types=Homogeneous(0.5),
            content=self.CONTENT,
            cost_model=LinearCost(c_l, b_l, c_h, b_h),
        )

    def test_symmetric_slopes_no_adjustment(self):
        from crlab.mechanisms import linear_cost_delta_tilde

        assert linear_cost_delta_tilde(self.scenario()) == 0.0

    def test_reduction_to_canonical_is_exact(self):
        lin = self.scenario(c_l=0.0, b_l=0.0, c_h=0.4, b_h=0.0)
        base = Scenario(
            network=PathNetwork.canonical(0.4), types=Homogeneous(0.5), content=self.CONTENT
        )
        for kind, designer in (
            ("side", design_side_payment),
            ("restriction", design_content_restriction),
        ):
            got = linear_cost_design(lin, kind)
            want = designer(base)
            assert got.regime_label == want.regime_label
            assert got.target_flow[1] == want.target_flow[1]
            assert abs(got.predicted_sw - want.predicted_sw) <= 1e-12

    def test_a5_side_payment_fixed_point(self):
        s = self.scenario()
        out = linear_cost_design(s, "side")
        assert out.regime_label == "A5"
        x_star = out.target_flow[1]
        gbar = out.extras["g_at_target"]
        assert (gbar >= 0.0) == (out.extras["x_nash"] < x_star)
        # best-response fixed point of the schedule equals the optimum
        sch = out.mechanism.schedule
        cm = s.cost_model

        def gap(x):
            flow = (1.0 - x, x)
            g = sch.value(x)
            u_h = -cm.c_h - cm.b_h * x + (1.0 - x) * g / max(x, 1e-12)
            u_l = -cm.c_l - cm.b_l * (1.0 - x) - g
            return u_h - u_l

        from crlab.mechanisms import _bisect_root

        root = _bisect_root(gap, 1e-6, 1.0 - 1e-6)
        assert root == pytest.approx(x_star, abs=1e-6)
        ok, gain = verify_equilibrium(s, out.mechanism, out.target_flow)
        assert ok, gain

    def test_nash_flow_example(self):
        s = self.scenario()
        assert game.equilibrium_no_incentive(s).flow[1] == pytest.approx(0.35, abs=1e-15)

    def test_restriction_branch_targets_high_payoff_peak(self):
        s = self.scenario()
        out = linear_cost_design(s, "restriction")
        assert out.regime_label == "A5"
        a_l = out.mechanism.coefficients[0]
        assert 0.0 <= a_l < 1.0
        ok, gain = verify_equilibrium(s, out.mechanism, out.target_flow)
        assert ok, gain
        assert out.predicted_sw >= game.equilibrium_no_incentive(s).social_welfare

    def test_cheap_high_path_regions(self):
        s = self.scenario(c_l=0.5, b_l=0.2, c_h=0.05, b_h=1.0)
        out = linear_cost_design(s, "side")
        assert out.regime_label in ("A1", "A2", "A3", "A4")
        ok, gain = verify_equilibrium(s, out.mechanism, out.target_flow)
        assert ok, gain


class TestOutcomeConsistency:
    def test_predicted_matches_welfare_at_target(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            s = random_two_type_scenario(rng)
            for designer in (design_side_payment, design_combined):
                out = designer(s)
                sw_at = social_welfare(s, out.mechanism, out.target_flow, out.participation_b)
                assert sw_at == pytest.approx(out.predicted_sw, abs=1e-8)

    def test_restriction_eps_bookkeeping(self):
        rng = np.random.default_rng(37)
        for _ in range(40):
            s = random_two_type_scenario(rng)
            out = design_content_restriction(s)
            sw_at = social_welfare(s, out.mechanism, out.target_flow, 1.0)
            slack = abs(out.predicted_sw - sw_at)
            if out.regime_label == "LowerMediumRestriction":
                # exact-target design: the slack is the eps-scaled destruction
                assert slack <= out.eps_mech * s.types.theta1 * 200.0 + 1e-12
            elif out.regime_label == "WeakRestriction":
                assert slack <= 1e-12
            else:
                assert slack <= out.extras.get("sw_at_target", sw_at) * 1e-3 + 1e-3

    def test_json_round_trip(self, pw_two_type):
        import json

        out = design_combined(pw_two_type)
        payload = json.loads(json.dumps(out.to_json_dict()))
        assert payload["regime_label"] == "Combined.IR21"
        assert payload["mechanism"]["kind"] == "Combined"
        assert payload["g_max"] == pytest.approx(0.5e6)
