"""Optimal incentive design for every model variant: side payments, content
restriction, the combined scheme, continuous types, the three-path network,
the dynamic information model, and the linear traffic-cost extension.

Designers are pure functions of the scenario; internal searches are
deterministic grids with local refinement (objectives are kinked for
piecewise content, so gradient methods are avoided), with argmax ties broken
toward the smaller flow and then the smaller restriction coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import game
from .content import DynamicContentState, q1_derivative, q1_eval
from .game import (
    BangSchedule,
    Combined,
    ConstantCost,
    ContentRestriction,
    Homogeneous,
    LinearCost,
    LinearSchedule,
    Mechanism,
    MultipathSidePayment,
    NoIncentive,
    ProportionalSchedule,
    Scenario,
    ScenarioError,
    SidePayment,
    TwoType,
    UniformContinuous,
    social_optimum,
    social_welfare,
)

EPS_MECH = 1e-6
BISECT_TOL = 1e-10


@dataclass(frozen=True)
class DesignOutcome:
    """A designed mechanism together with the equilibrium it targets.

    ``predicted_sw`` is the analytic (epsilon-limit) welfare; for
    epsilon-perturbed designs the welfare realized exactly at ``target_flow``
    differs by O(eps_mech) and is reported in ``extras['sw_at_target']``.
    """

    mechanism: Mechanism
    target_flow: Tuple[float, ...]
    regime_label: str
    predicted_sw: float
    participation_b: float
    eps_mech: float = 0.0
    g_max: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict, compare=False)

    def to_json_dict(self) -> dict:
        mech = self.mechanism
        spec: dict = {"kind": type(mech).__name__}
        if isinstance(mech, SidePayment):
            spec["participation"] = mech.participation
            spec["schedule"] = _schedule_dict(mech.schedule)
        elif isinstance(mech, Combined):
            spec["a"] = mech.a
            spec["schedule"] = _schedule_dict(mech.schedule)
        elif isinstance(mech, ContentRestriction):
            spec["coefficients"] = list(mech.coefficients)
        elif isinstance(mech, MultipathSidePayment):
            spec["target"] = list(mech.target)
            spec["costs"] = list(mech.costs)
        return {
            "regime_label": self.regime_label,
            "mechanism": spec,
            "target_flow": list(self.target_flow),
            "predicted_sw": self.predicted_sw,
            "participation_b": self.participation_b,
            "eps_mech": self.eps_mech,
            "g_max": self.g_max,
            "extras": dict(self.extras),
        }


def _schedule_dict(sch) -> dict:
    d = {"form": type(sch).__name__}
    d.update({k: getattr(sch, k) for k in sch.__dataclass_fields__})
    return d


@dataclass(frozen=True)
class RestrictionThresholds:
    """Content levels and per-type restriction cutoffs for two-path designs."""

    q_low: float
    q_high: float
    a_low: Tuple[float, ...]
    a_high: Tuple[float, ...]


def restriction_thresholds(s: Scenario) -> RestrictionThresholds:
    q_low = s.content_total((1.0, 0.0), 1.0)
    q_high = s.content_total((0.5, 0.5), 1.0)
    thetas = [t for t, _ in s.type_masses()]
    c_h = s.c_h
    a_low = tuple(max(0.0, (t * q_low - c_h) / (t * q_low)) if t > 0 else 0.0 for t in thetas)
    a_high = tuple(max(0.0, (t * q_high - c_h) / (t * q_high)) if t > 0 else 0.0 for t in thetas)
    return RestrictionThresholds(q_low, q_high, a_low, a_high)


# ---------------------------------------------------------------------------
# Shared numerics
# ---------------------------------------------------------------------------


def _bisect_root(fun, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Root of a function with fun(lo) >= 0 >= fun(hi) by bisection.

    Returns the bracket endpoint on the nonnegative side so feasibility
    constraints solved this way stay satisfied at the returned point.
    """
    flo = fun(lo)
    fhi = fun(hi)
    if flo < 0 and fhi < 0:
        return lo
    if flo >= 0 and fhi >= 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fun(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _q(s: Scenario, x_h: float, b: float = 1.0) -> float:
    return s.content_total((b - x_h, x_h), b)


def _require_canonical(s: Scenario, op: str) -> None:
    if s.k != 2:
        raise ScenarioError(f"{op} is two-path only; use the multipath designer")
    if not isinstance(s.cost_model, ConstantCost):
        raise ScenarioError(f"{op} needs constant costs; use linear_cost_design")
    if s.beta is not None:
        raise ScenarioError(f"{op} does not support path-weighted valuations")


# ---------------------------------------------------------------------------
# Side payments (two-path, discrete types)
# ---------------------------------------------------------------------------


def side_payment_schedule(target: float, b: float, c_h: float) -> ProportionalSchedule:
    """Budget-balanced payment incentivizing ``target`` out of mass ``b``."""
    if not (0.0 < target < b):
        raise ScenarioError("no interior schedule exists for target in {0, b}")
    return ProportionalSchedule(target, b, c_h)


def ir_flow_bound(s: Scenario, theta_low: float, b: float = 1.0) -> float:
    """Largest flow keeping a type-``theta_low`` participant at nonnegative
    payoff under the equilibrium charge x*c_H/b; 1 if IR never binds."""
    c_h = s.c_h

    def slack(x: float) -> float:
        return theta_low * _q(s, x, b) - x * c_h / b

    if slack(1.0 * b) >= 0.0:
        return b
    return _bisect_root(slack, 0.0, b)


def _half_participation_optimum(s: Scenario) -> Tuple[float, float]:
    """Best flow and welfare when only the high type participates."""
    types = s.types
    b = 1.0 - types.eta
    theta2 = types.theta2
    c_h = s.c_h

    def value(xs):
        return (1.0 - types.eta) * theta2 * game.q_curve(s, xs, b) - np.asarray(xs) * c_h

    x, v = game._maximize_on_interval(value, 0.0, b / 2.0, step=1e-5)
    return x, v


def design_side_payment(s: Scenario, eps_mech: float = EPS_MECH) -> DesignOutcome:
    """Welfare-optimal budget-balanced payment for homogeneous or two-type
    users: target the social optimum when the low type's participation
    allows it, otherwise the better of the IR-binding flow and the
    high-type-only system."""
    _require_canonical(s, "design_side_payment")
    if isinstance(s.types, UniformContinuous):
        raise ScenarioError("continuous types: use design_continuous_side_payment")
    c_h = s.c_h
    flow_star, sw_star = social_optimum(s)
    x_star = flow_star[1]

    if isinstance(s.types, Homogeneous):
        mech: Mechanism = (
            NoIncentive() if x_star <= 1e-12 else SidePayment(side_payment_schedule(x_star, 1.0, c_h), 1.0)
        )
        return DesignOutcome(mech, (1.0 - x_star, x_star), "SocialOptimum", sw_star, 1.0)

    types = s.types
    x_ir = ir_flow_bound(s, types.theta1, 1.0)
    if x_star <= x_ir + 1e-12:
        x_hat, sw, b, label = x_star, sw_star, 1.0, "SocialOptimum"
    else:
        sw_ir = social_welfare(s, NoIncentive(), (1.0 - x_ir, x_ir), 1.0)
        x_half, sw_half = _half_participation_optimum(s)
        if sw_ir >= sw_half:
            x_hat, sw, b, label = x_ir, sw_ir, 1.0, "FullParticipation"
        else:
            x_hat, sw, b, label = x_half, sw_half, 1.0 - types.eta, "HalfParticipation"
    mech = NoIncentive() if x_hat <= 1e-12 else SidePayment(side_payment_schedule(x_hat, b, c_h), b)
    extras = {"x_star": x_star, "x_ir": x_ir, "sw_star": sw_star}
    return DesignOutcome(mech, (b - x_hat, x_hat), label, sw, b, extras=extras)


# ---------------------------------------------------------------------------
# Content restriction (two-path, discrete types)
# ---------------------------------------------------------------------------


def _medium_regime_equilibrium(s: Scenario, theta: float, a: float) -> float:
    """Stable intersection of the decision threshold with the content curve
    on [0.5, 1] for an indifferent type ``theta`` under restriction ``a``."""
    c_h = s.c_h
    level = c_h / ((1.0 - a) * theta)
    return _bisect_root(lambda x: _q(s, x) - level, 0.5, 1.0)


def design_content_restriction(s: Scenario, eps_mech: float = EPS_MECH) -> DesignOutcome:
    """Optimal exposure fraction for the low-cost path per the two-path
    threshold regimes; heterogeneity is exploited when the type ratio
    exceeds the content ratio."""
    _require_canonical(s, "design_content_restriction")
    if isinstance(s.types, UniformContinuous):
        raise ScenarioError("continuous types: use design_continuous_content_restriction")
    thr = restriction_thresholds(s)
    q_low, q_high = thr.q_low, thr.q_high
    c_h = s.c_h
    theta0 = s.mean_theta

    def no_restriction(label: str = "WeakRestriction") -> DesignOutcome:
        mech = ContentRestriction((1.0, 1.0))
        sw = theta0 * q_low
        return DesignOutcome(mech, (1.0, 0.0), label, sw, 1.0, eps_mech=eps_mech)

    if isinstance(s.types, Homogeneous):
        if c_h < theta0 * (q_high - q_low):
            a = (theta0 * q_high - c_h) / (theta0 * q_high) - eps_mech
            x_hat = _medium_regime_equilibrium(s, theta0, a)
            mech = ContentRestriction((a, 1.0))
            sw_limit = theta0 * q_high - c_h
            sw_at = social_welfare(s, mech, (1.0 - x_hat, x_hat), 1.0)
            return DesignOutcome(
                mech,
                (1.0 - x_hat, x_hat),
                "MediumRestriction",
                sw_limit,
                1.0,
                eps_mech=eps_mech,
                extras={"sw_at_target": sw_at},
            )
        return no_restriction()

    types = s.types
    if types.eta != 0.5:
        raise ScenarioError("restriction design is derived for equal type shares")
    th1, th2 = types.theta1, types.theta2
    diverse = th1 == 0.0 or th2 / th1 > q_high / q_low
    if diverse:
        c_cut = (th1 + th2) * (q_high - q_low) * th2 * q_low / (th1 * q_high + th2 * q_low)
        if c_h < c_cut:
            a = (th2 * q_low - c_h) / (th2 * q_low) - eps_mech
            mech = ContentRestriction((a, 1.0))
            sw_limit = theta0 * q_high - (th1 * q_high + th2 * q_low) / (2.0 * th2 * q_low) * c_h
            sw_at = social_welfare(s, mech, (0.5, 0.5), 1.0)
            return DesignOutcome(
                mech,
                (0.5, 0.5),
                "LowerMediumRestriction",
                sw_limit,
                1.0,
                eps_mech=eps_mech,
                extras={"sw_at_target": sw_at},
            )
        return no_restriction()
    if c_h < theta0 * (q_high - q_low):
        a = (th1 * q_high - c_h) / (th1 * q_high)
        mech = ContentRestriction((a, 1.0))
        sw = theta0 * q_high - c_h
        return DesignOutcome(
            mech,
            (0.5, 0.5),
            "MediumRestriction",
            sw,
            1.0,
            eps_mech=eps_mech,
            extras={"sw_at_target": sw},
        )
    return no_restriction()


# ---------------------------------------------------------------------------
# Combined mechanism (two-path, two types)
# ---------------------------------------------------------------------------


def _combined_best_a(th1: float, th2: float, q: float, c_h: float, x: float) -> Optional[float]:
    """Largest restriction coefficient keeping the low type's IR feasible at
    a candidate target; the objective is linear and increasing in ``a``, so
    this is the exact per-x optimum of the full-participation program."""
    s_coef = (th1 - x * th2) * q
    t_coef = x * (c_h - th2 * q)
    tol = 1e-9 * max(1.0, abs(s_coef) + abs(t_coef))
    if s_coef > 1e-15:
        return 1.0 if s_coef >= t_coef - tol else None
    if s_coef < -1e-15:
        bound = t_coef / s_coef
        if bound < -1e-12:
            return None
        return min(1.0, max(0.0, bound))
    return 1.0 if t_coef <= tol else None


def _combined_scan(s: Scenario, th1: float, th2: float, c_h: float, xs) -> Tuple[float, float, float]:
    """Vectorized best (value, x, a) of the full-participation program over a
    flow grid, with the restriction coefficient exact per flow."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return (-math.inf, 0.0, 1.0)
    q = game.q_curve(s, xs, 1.0)
    s_coef = (th1 - xs * th2) * q
    t_coef = xs * (c_h - th2 * q)
    tol = 1e-9 * np.maximum(1.0, np.abs(s_coef) + np.abs(t_coef))
    a = np.full_like(xs, np.nan)
    pos = s_coef > 1e-15
    a = np.where(pos & (s_coef >= t_coef - tol), 1.0, a)
    neg = s_coef < -1e-15
    bound = np.divide(t_coef, s_coef, out=np.full_like(xs, np.nan), where=neg)
    ok_neg = neg & (bound >= -1e-12)
    a = np.where(ok_neg, np.minimum(1.0, np.maximum(0.0, bound)), a)
    flat = ~pos & ~neg & (t_coef <= tol)
    a = np.where(flat, 1.0, a)
    value = (xs * th2 + ((0.5 - xs) * th2 + 0.5 * th1) * a) * q - xs * c_h
    value = np.where(np.isnan(a), -np.inf, value)
    i = int(np.argmax(value))
    if not np.isfinite(value[i]):
        return (-math.inf, 0.0, 1.0)
    return (float(value[i]), float(xs[i]), float(a[i]))


def design_combined(
    s: Scenario,
    eps_mech: float = EPS_MECH,
    x_step: float = 1e-3,
    refine_step: float = 1e-6,
    debug: bool = False,
) -> DesignOutcome:
    """Joint restriction-plus-payment design: solve the full-participation
    program with the high type pivotal, compare against the high-type-only
    fallback and the do-nothing corner, and emit a bang payment pinning the
    chosen target."""
    _require_canonical(s, "design_combined")
    if not isinstance(s.types, TwoType):
        raise ScenarioError("combined design needs two user types")
    if s.types.eta != 0.5:
        raise ScenarioError("combined design is derived for equal type shares")
    th1, th2 = s.types.theta1, s.types.theta2
    theta0 = s.mean_theta
    c_h = s.c_h

    flow_star, sw_star = social_optimum(s)
    x_ir = ir_flow_bound(s, th1, 1.0)
    specials = [x for x in (flow_star[1], x_ir, 0.5) if 0.0 < x <= 0.5]
    best = _combined_scan(s, th1, th2, c_h, np.arange(x_step, 0.5 + x_step / 2, x_step))
    step = x_step
    while step > refine_step:
        lo = max(step / 10.0, best[1] - 2.0 * step)
        hi = min(0.5, best[1] + 2.0 * step)
        step /= 10.0
        cand = _combined_scan(s, th1, th2, c_h, np.arange(lo, hi + step / 2, step))
        if cand[0] > best[0]:
            best = cand
    cand = _combined_scan(s, th1, th2, c_h, np.array(specials))
    if cand[0] > best[0]:
        best = cand
    sw_ir21, x_check, a_check = best

    x_half, sw_half = _half_participation_optimum(s)
    sw_none = theta0 * _q(s, 0.0)

    extras: Dict[str, float] = {
        "sw_ir21": sw_ir21,
        "sw_ir2": sw_half,
        "sw_none": sw_none,
        "sw_star": sw_star,
    }
    if debug:
        extras.update(_combined_debug_cases(s))

    g_max = 1e6 * c_h if c_h > 0 else 1e6
    if sw_ir21 >= max(sw_half, sw_none) - 1e-15:
        q = _q(s, x_check)
        level = (c_h - (1.0 - a_check) * th2 * q) * x_check
        mech = Combined(a_check, BangSchedule(x_check, 1.0, level, g_max))
        return DesignOutcome(
            mech,
            (1.0 - x_check, x_check),
            "Combined.IR21",
            sw_ir21,
            1.0,
            eps_mech=eps_mech,
            g_max=g_max,
            extras=extras,
        )
    if sw_half > sw_none:
        mech = SidePayment(side_payment_schedule(x_half, 0.5, c_h), 0.5)
        return DesignOutcome(
            mech, (0.5 - x_half, x_half), "Combined.IR2", sw_half, 0.5, g_max=g_max, extras=extras
        )
    return DesignOutcome(
        NoIncentive(), (1.0, 0.0), "Combined.NoIncentive", sw_none, 1.0, g_max=g_max, extras=extras
    )


def _combined_debug_cases(s: Scenario) -> Dict[str, float]:
    """Best welfare of the dominated equilibrium structures, for the
    dominance checks: the low type pivotal on [0.5, 1], and the exact-split
    structure at one half."""
    th1, th2 = s.types.theta1, s.types.theta2
    c_h = s.c_h
    best12 = -math.inf
    for x in np.arange(0.5, 1.0, 1e-3):
        q = _q(s, float(x))
        if th1 <= 0.0:
            continue
        lower = x * (c_h - th1 * q) / ((1.0 - x) * th1 * q) if x < 1.0 else math.inf
        if lower > 1.0:
            continue
        a = 1.0
        g = (c_h - (1.0 - a) * th1 * q) * x
        if th2 * q - c_h + (1.0 - x) * g / x < -1e-12:
            continue
        sw = ((1.0 - x) * a * th1 + (x - 0.5) * th1 + 0.5 * th2) * q - x * c_h
        best12 = max(best12, sw)
    q_high = _q(s, 0.5)
    best_split = -math.inf
    for a in np.arange(0.0, 1.0 + 1e-9, 1e-3):
        g_lo = 0.5 * (c_h - (1.0 - a) * th2 * q_high)
        if th1 * a * q_high - g_lo < -1e-12:
            continue
        sw = (0.5 * th1 * a + 0.5 * th2) * q_high - 0.5 * c_h
        best_split = max(best_split, sw)
    return {"sw_ir12": best12, "sw_split": best_split}


# ---------------------------------------------------------------------------
# Continuous types
# ---------------------------------------------------------------------------


def design_continuous_side_payment(
    s: Scenario, b_step: float = 1e-3, refine_rounds: int = 2
) -> DesignOutcome:
    """Optimal payment and participation for uniform types: the marginal
    participant's IR binds, pinning the target flow for each participation
    level; the level itself is scanned and locally refined."""
    _require_canonical(s, "design_continuous_side_payment")
    if not isinstance(s.types, UniformContinuous):
        raise ScenarioError("uniform continuous types required")
    c_h = s.c_h

    if c_h <= 0.0:
        x, v = game._maximize_on_interval(lambda t: game.sw_curve(s, t), 0.0, 0.5, 1e-5)
        mech = SidePayment(side_payment_schedule(x, 1.0, c_h), 1.0) if x > 0 else NoIncentive()
        return DesignOutcome(mech, (1.0 - x, x), "Continuous.Full", v, 1.0)

    def candidate(b: float) -> Optional[Tuple[float, float, float]]:
        if b <= 0.0:
            return None
        if b >= 1.0:
            sw = 0.5 * _q(s, 0.0, 1.0)
            return (sw, 1.0, 0.0)

        def slack(x: float) -> float:
            return (1.0 - b) * b * _q(s, x, b) - x * c_h

        if slack(b) > 0.0:
            return None  # IR never binds below x=b: participation would exceed b
        x = _bisect_root(slack, 0.0, b)
        if x >= b - 1e-12:
            return None
        sw = b * (2.0 - b) / 2.0 * _q(s, x, b) - x * c_h
        return (sw, b, x)

    def scan(bs) -> Optional[Tuple[float, float, float]]:
        best = None
        for b in bs:
            c = candidate(float(b))
            if c is not None and (best is None or c[0] > best[0] + 1e-15):
                best = c
        return best

    best = scan(np.arange(b_step, 1.0 + b_step / 2, b_step))
    step = b_step
    for _ in range(refine_rounds):
        lo = max(step / 100.0, best[1] - 2.0 * step)
        hi = min(1.0, best[1] + 2.0 * step)
        step /= 100.0
        cand = scan(np.arange(lo, hi + step / 2, step))
        if cand is not None and cand[0] > best[0]:
            best = cand
    sw, b, x = best
    mech = SidePayment(side_payment_schedule(x, b, c_h), b) if x > 1e-12 else NoIncentive()
    label = "Continuous.Full" if b >= 1.0 - 1e-12 else "Continuous.Partial"
    return DesignOutcome(mech, (b - x, x), label, sw, b)


def design_continuous_content_restriction(s: Scenario) -> DesignOutcome:
    """Optimal exposure for uniform types: users above the marginal type
    self-select onto the high-cost path, so the target flow maximizes the
    half-weighted welfare with the (1 + x) destruction overhead."""
    _require_canonical(s, "design_continuous_content_restriction")
    if not isinstance(s.types, UniformContinuous):
        raise ScenarioError("uniform continuous types required")
    c_h = s.c_h

    def objective(xs):
        return 0.5 * (game.q_curve(s, xs, 1.0) - (1.0 + np.asarray(xs)) * c_h)

    x_a, sw_a = game._maximize_on_interval(objective, 0.0, 1.0, 1e-5)
    q_at = _q(s, x_a)
    q_low = _q(s, 0.0)
    if c_h < (q_at - q_low) / (1.0 + x_a) and x_a < 1.0:
        a = 1.0 - c_h / ((1.0 - x_a) * q_at)
        mech = ContentRestriction((a, 1.0))
        return DesignOutcome(mech, (1.0 - x_a, x_a), "Continuous.Diversity", sw_a, 1.0)
    mech = ContentRestriction((1.0, 1.0))
    return DesignOutcome(mech, (1.0, 0.0), "Continuous.NoRestriction", 0.5 * q_low, 1.0)


# ---------------------------------------------------------------------------
# Three-path network
# ---------------------------------------------------------------------------


def _require_three_path(s: Scenario, op: str) -> None:
    if s.k != 3:
        raise ScenarioError(f"{op} supports K = 3 only")
    if not isinstance(s.types, Homogeneous):
        raise ScenarioError(f"{op} needs homogeneous users")
    if not isinstance(s.cost_model, ConstantCost):
        raise ScenarioError(f"{op} needs constant costs")
    c = s.network.costs
    if abs(c[1] - c[2] / 2.0) > 1e-12:
        raise ScenarioError("three-path designs assume costs (0, c_H/2, c_H)")


def design_multipath_side_payment(
    s: Scenario, target: Optional[Tuple[float, float, float]] = None
) -> Tuple[MultipathSidePayment, DesignOutcome]:
    """Per-path payment functions making any interior target the unique
    stable equilibrium with equal perceived costs; defaults to the social
    optimum, achieving full efficiency."""
    _require_three_path(s, "design_multipath_side_payment")
    if target is None:
        flow_star, _ = social_optimum(s)
        target = tuple(flow_star)
    if min(target) <= 1e-12:
        raise ScenarioError("no interior schedule exists for boundary targets")
    mech = MultipathSidePayment(tuple(float(t) for t in target), s.network.costs)
    sw = social_welfare(s, mech, target, 1.0)
    outcome = DesignOutcome(mech, tuple(target), "Multipath.SidePayment", sw, 1.0)
    return mech, outcome


def design_multipath_content_restriction(
    s: Scenario, eps_mech: float = EPS_MECH
) -> DesignOutcome:
    """Three-path restriction coefficients by travel-cost regime: full
    diversity onto all paths, diversity across the two cheapest, or none."""
    _require_three_path(s, "design_multipath_content_restriction")
    theta0 = s.mean_theta
    c2, c3 = s.network.costs[1], s.network.costs[2]
    c_h = c3
    q0 = s.overlap.q0 if s.overlap is not None else 0.0
    q13 = q1_eval(s.content, 1.0 / 3.0)
    q12 = q1_eval(s.content, 0.5)
    q11 = q1_eval(s.content, 1.0)

    sw_low = 3.0 * theta0 * q13 + theta0 * q0 - c3
    sw_med = 2.0 * theta0 * q12 + theta0 * q0 - c2
    sw_high = theta0 * q11 + theta0 * q0
    # Equivalent to the cost-regime thresholds, with welfare ties broken
    # toward less destruction (no restriction, then two-path, then full).
    if sw_high >= max(sw_low, sw_med):
        mech = ContentRestriction((1.0, 1.0, 1.0))
        return DesignOutcome(mech, (1.0, 0.0, 0.0), "Multipath.HighCost", sw_high, 1.0)
    if sw_low > sw_med:
        level = 3.0 * theta0 * q13 + theta0 * q0 - eps_mech
        a1 = max(0.0, 1.0 - c3 / level)
        a2 = max(0.0, 1.0 - (c3 - c2) / level)
        mech = ContentRestriction((a1, a2, 1.0))

        def gap(shift: float) -> float:
            q = q0 + q1_eval(s.content, 1.0 / 3.0 - shift) + q13 + q1_eval(s.content, 1.0 / 3.0 + shift)
            return theta0 * q - level

        shift = _bisect_root(gap, 0.0, 1.0 / 3.0)
        target = (1.0 / 3.0 - shift, 1.0 / 3.0, 1.0 / 3.0 + shift)
        sw_at = social_welfare(s, mech, target, 1.0)
        return DesignOutcome(
            mech,
            target,
            "Multipath.LowCost",
            sw_low,
            1.0,
            eps_mech=eps_mech,
            extras={"sw_at_target": sw_at, "level": level},
        )
    level = 2.0 * theta0 * q12 + theta0 * q0 - eps_mech
    a1 = max(0.0, 1.0 - c2 / level)
    mech = ContentRestriction((a1, 1.0, 1.0))

    def gap2(x2: float) -> float:
        q = q0 + q1_eval(s.content, 1.0 - x2) + q1_eval(s.content, x2)
        return theta0 * q - level

    x2 = _bisect_root(gap2, 0.5, 1.0)
    target = (1.0 - x2, x2, 0.0)
    sw_at = social_welfare(s, mech, target, 1.0)
    return DesignOutcome(
        mech,
        target,
        "Multipath.MediumCost",
        sw_med,
        1.0,
        eps_mech=eps_mech,
        extras={"sw_at_target": sw_at, "level": level},
    )


# ---------------------------------------------------------------------------
# Dynamic information model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicInfoParams:
    """Parameters of the repeated-collection model with discounting."""

    total_items: float
    users: float
    items_per_user: float
    discount: float
    c_h: float

    def state(self, q_h: float = 0.0, q_l: float = 0.0) -> DynamicContentState:
        return DynamicContentState(
            q_h, q_l, self.discount, self.total_items, self.users, self.items_per_user
        )

    @property
    def retention(self) -> float:
        return self.state().retention


def dynamic_no_incentive(p: DynamicInfoParams) -> Tuple[float, float]:
    """Stationary equilibrium flow (all on the free path) and its welfare."""
    r = p.retention
    sw = p.total_items * (1.0 - r) / (4.0 * (1.0 - p.discount * r))
    return (0.0, sw)


def _dynamic_stationary_sw(p: DynamicInfoParams, x: float) -> float:
    r = p.retention
    g = p.discount
    n = p.total_items
    return (
        n / 4.0 * ((1.0 - r ** x) / (1.0 - g * r ** x) + (1.0 - r ** (1.0 - x)) / (1.0 - g * r ** (1.0 - x)))
        - x * p.c_h
    )


def dynamic_stationary_optimum(p: DynamicInfoParams) -> Tuple[float, float]:
    """Stationary flow maximizing per-period welfare: zero when the marginal
    content gain cannot cover the travel cost, else the interior root of the
    stationary first-order condition."""
    r = p.retention
    g = p.discount
    n = p.total_items
    log_r = math.log(r)
    if (r - 1.0) * n * log_r / (1.0 - g * r) <= 4.0 * p.c_h:
        return (0.0, _dynamic_stationary_sw(p, 0.0))

    def foc(x: float) -> float:
        rh = r ** x
        rl = r ** (1.0 - x)
        return (1.0 - g) * (rl / (1.0 - g * rl) - rh / (1.0 - g * rh)) * n * log_r - 4.0 * p.c_h

    x = _bisect_root(foc, 0.0, 0.5)
    return (x, _dynamic_stationary_sw(p, x))


def design_dynamic_content_restriction(p: DynamicInfoParams) -> DesignOutcome:
    """Stationary restriction coefficient for the dynamic model: incentivize
    the even split when the travel cost is below the diversity threshold."""
    r = p.retention
    g = p.discount
    n = p.total_items
    sq = math.sqrt(r)
    cut = n * (1.0 + g * sq) * (1.0 - sq) ** 2 / (4.0 * (1.0 - g * sq) * (1.0 - g * r))
    if p.c_h < cut:
        a = 1.0 - 2.0 * p.c_h * (1.0 - g * sq) / (n * (1.0 - sq))
        sw = n * (1.0 - sq) / (2.0 * (1.0 - g * sq)) - p.c_h
        mech = ContentRestriction((a, 1.0))
        return DesignOutcome(
            mech, (0.5, 0.5), "Dynamic.Diversity", sw, 1.0, extras={"threshold": cut}
        )
    mech = ContentRestriction((1.0, 1.0))
    _, sw = dynamic_no_incentive(p)
    return DesignOutcome(mech, (1.0, 0.0), "Dynamic.None", sw, 1.0, extras={"threshold": cut})


# ---------------------------------------------------------------------------
# Linear traffic-dependent costs (homogeneous users)
# ---------------------------------------------------------------------------


def _q1_slope(s: Scenario, x: float) -> float:
    lo, hi = q1_derivative(s.content, x)
    return 0.5 * (lo + hi)


def linear_cost_delta_tilde(s: Scenario) -> float:
    """Cost difference at which the selfish split already maximizes welfare;
    zero exactly for symmetric congestion slopes."""
    cm = s.cost_model
    if cm.b_l == cm.b_h:
        return 0.0
    theta0 = s.mean_theta
    denom = cm.b_h + cm.b_l

    def fun(dc: float) -> float:
        x = (cm.b_l - dc) / denom
        return -(theta0 * _q1_slope(s, x) - theta0 * _q1_slope(s, 1.0 - x) + dc)

    return _bisect_root(fun, -cm.b_h + 1e-12, cm.b_l - 1e-12)


def _linear_regions(s: Scenario) -> Tuple[str, float]:
    cm = s.cost_model
    theta0 = s.mean_theta
    dc = cm.c_h - cm.c_l
    d1 = theta0 * (_q1_slope(s, 1.0) - _q1_slope(s, 0.0))
    dtil = linear_cost_delta_tilde(s)
    if dc <= d1 - 2.0 * cm.b_h:
        return ("A1", dtil)
    if dc <= -cm.b_h:
        return ("A2", dtil)
    if abs(dc - dtil) <= 1e-12:
        return ("A4", dtil)
    if dc < dtil:
        return ("A3", dtil)
    if dc < cm.b_l:
        return ("A5", dtil)
    if dc < -d1 + 2.0 * cm.b_l:
        return ("A6", dtil)
    return ("A7", dtil)


def linear_nash_flow(s: Scenario) -> float:
    cm = s.cost_model
    denom = cm.b_h + cm.b_l
    if denom <= 0.0:
        dc = cm.c_h - cm.c_l
        return 1.0 if dc < 0 else 0.0
    return min(max((cm.c_l + cm.b_l - cm.c_h) / denom, 0.0), 1.0)


def linear_cost_design(s: Scenario, kind: str = "side", eps_mech: float = EPS_MECH) -> DesignOutcome:
    """Side-payment or restriction design for the linear traffic-cost model,
    classified by the cost-difference region; the degenerate constant-cost
    reduction delegates to the canonical designers."""
    if not isinstance(s.cost_model, LinearCost):
        raise ScenarioError("linear_cost_design needs a LinearCost scenario")
    if not isinstance(s.types, Homogeneous):
        raise ScenarioError("linear cost design needs homogeneous users")
    cm = s.cost_model
    if cm.b_l == 0.0 and cm.b_h == 0.0 and cm.c_l == 0.0:
        reduced = Scenario(
            network=game.PathNetwork.canonical(cm.c_h),
            types=s.types,
            content=s.content,
            overlap=s.overlap,
        )
        if kind == "side":
            return design_side_payment(reduced, eps_mech)
        return design_content_restriction(reduced, eps_mech)
    if kind not in ("side", "restriction"):
        raise ScenarioError("kind must be 'side' or 'restriction'")

    region, dtil = _linear_regions(s)
    x_nash = linear_nash_flow(s)
    sw_nash = social_welfare(s, NoIncentive(), (1.0 - x_nash, x_nash), 1.0)
    flow_star, sw_star = social_optimum(s)
    x_star = flow_star[1]
    theta0 = s.mean_theta
    dc = cm.c_h - cm.c_l
    extras = {"delta_c": dc, "delta_tilde": dtil, "x_nash": x_nash, "x_star": x_star}

    if kind == "side":
        if region in ("A1", "A4", "A7"):
            return DesignOutcome(
                NoIncentive(), tuple(flow_star), region, sw_star, 1.0, extras=extras
            )
        gbar = dc * x_star - cm.b_l * x_star + (cm.b_h + cm.b_l) * x_star ** 2
        if region in ("A2", "A3"):
            schedule = LinearSchedule(0.0, gbar / x_star) if x_star > 0 else LinearSchedule(gbar, 0.0)
        else:  # A5, A6: selfish flow falls short of the optimum
            slope = gbar / (x_star - 1.0)
            schedule = LinearSchedule(gbar - slope * x_star, slope)
        mech = SidePayment(schedule, 1.0)
        extras["g_at_target"] = gbar
        return DesignOutcome(mech, tuple(flow_star), region, sw_star, 1.0, extras=extras)

    # Restriction branch.
    if region in ("A1", "A4", "A7"):
        mech = ContentRestriction((1.0, 1.0))
        return DesignOutcome(mech, (1.0 - x_nash, x_nash), region, sw_nash, 1.0, extras=extras)
    if region in ("A2", "A3"):

        def u_l(xs):
            xs = np.asarray(xs, dtype=float)
            return theta0 * game.q_curve(s, xs, 1.0) + cm.b_l * xs - cm.c_l - cm.b_l

        x_bl, u_best = game._maximize_on_interval(u_l, 0.0, 1.0, 1e-5)
        if dc < cm.b_l - (cm.b_h + cm.b_l) * x_bl and u_best > sw_nash:
            a_h = 1.0 - (cm.b_l - (cm.b_h + cm.b_l) * x_bl - dc) / (theta0 * _q(s, x_bl))
            mech = ContentRestriction((1.0, a_h))
            return DesignOutcome(mech, (1.0 - x_bl, x_bl), region, u_best, 1.0, extras=extras)
        mech = ContentRestriction((1.0, 1.0))
        return DesignOutcome(mech, (1.0 - x_nash, x_nash), region, sw_nash, 1.0, extras=extras)

    def u_h(xs):
        xs = np.asarray(xs, dtype=float)
        return theta0 * game.q_curve(s, xs, 1.0) - cm.b_h * xs - cm.c_h

    x_bh, u_best = game._maximize_on_interval(u_h, 0.0, 1.0, 1e-5)
    if dc > cm.b_l - (cm.b_h + cm.b_l) * x_bh and u_best > sw_nash:
        a_l = 1.0 - (dc + (cm.b_h + cm.b_l) * x_bh - cm.b_l) / (theta0 * _q(s, x_bh))
        mech = ContentRestriction((a_l, 1.0))
        return DesignOutcome(mech, (1.0 - x_bh, x_bh), region, u_best, 1.0, extras=extras)
    mech = ContentRestriction((1.0, 1.0))
    return DesignOutcome(mech, (1.0 - x_nash, x_nash), region, sw_nash, 1.0, extras=extras)
