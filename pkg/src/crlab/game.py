"""Scenario definitions, payoffs under any mechanism, social welfare,
optimum solvers, no-incentive equilibria, and equilibrium verification.

Flow vectors are indexed by path in nondecreasing travel-cost order, so the
canonical two-path model stores ``(x_L, x_H)`` and the K-path model
``(x_1, ..., x_K)`` with ``costs[0] == 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .content import (
    ContentError,
    ContentFunction,
    ExponentialCoverage,
    OverlapSegment,
    q1_eval,
    q_total,
    validate_content,
)

EQ_TOL = 1e-9
# Transfers that blow up at empty paths are capped here so dynamics stay finite.
TRANSFER_CAP = 1e12


class ScenarioError(ValueError):
    """Raised for inconsistent scenario or mechanism combinations."""


# ---------------------------------------------------------------------------
# Scenario building blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathNetwork:
    """Parallel paths with fixed per-path base costs, nondecreasing."""

    costs: Tuple[float, ...]

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        object.__setattr__(self, "costs", costs)
        if len(costs) < 2:
            raise ScenarioError("need at least two paths")
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ScenarioError("path costs must be nondecreasing")
        if abs(costs[0]) > 1e-15:
            raise ScenarioError("lowest-cost path must have zero cost")

    @property
    def k(self) -> int:
        return len(self.costs)

    @staticmethod
    def canonical(c_h: float) -> "PathNetwork":
        return PathNetwork((0.0, float(c_h)))

    @staticmethod
    def multipath(k: int, c_h: float) -> "PathNetwork":
        return PathNetwork(tuple((i / (k - 1)) * c_h for i in range(k)))


@dataclass(frozen=True)
class Homogeneous:
    theta0: float


@dataclass(frozen=True)
class TwoType:
    theta1: float
    theta2: float
    eta: float = 0.5

    def __post_init__(self):
        if self.theta1 > self.theta2:
            raise ScenarioError("theta1 must not exceed theta2")
        if not (0.0 <= self.eta <= 1.0):
            raise ScenarioError("eta must lie in [0, 1]")

    @property
    def theta0(self) -> float:
        return self.eta * self.theta1 + (1.0 - self.eta) * self.theta2


@dataclass(frozen=True)
class UniformContinuous:
    """Valuations uniform on [0, 1]."""


TypeDistribution = Union[Homogeneous, TwoType, UniformContinuous]


@dataclass(frozen=True)
class ConstantCost:
    """Travel costs fixed at the network's per-path values."""


@dataclass(frozen=True)
class LinearCost:
    """Two-path traffic-dependent costs: c_L + b_L*x_L on L, c_H + b_H*x_H on H."""

    c_l: float
    b_l: float
    c_h: float
    b_h: float

    def __post_init__(self):
        if min(self.c_l, self.b_l, self.c_h, self.b_h) < 0:
            raise ScenarioError("linear cost coefficients must be nonnegative")


CostModel = Union[ConstantCost, LinearCost]


@dataclass(frozen=True)
class Scenario:
    network: PathNetwork
    types: TypeDistribution
    content: ContentFunction
    overlap: Optional[OverlapSegment] = None
    cost_model: CostModel = ConstantCost()
    beta: Optional[float] = None  # L-path valuation weight, H-path fixed at 1

    def __post_init__(self):
        validate_content(self.content)
        if isinstance(self.content, ExponentialCoverage) and self.content.paths != self.network.k:
            raise ScenarioError("content K inconsistent with network K")
        if self.beta is not None:
            if not (0.0 < self.beta <= 1.0):
                raise ScenarioError("beta must lie in (0, 1]")
            if self.network.k != 2:
                raise ScenarioError("beta weighting is two-path only")
        if isinstance(self.cost_model, LinearCost) and self.network.k != 2:
            raise ScenarioError("linear cost model is two-path only")

    @property
    def k(self) -> int:
        return self.network.k

    @property
    def c_h(self) -> float:
        if isinstance(self.cost_model, LinearCost):
            return self.cost_model.c_h
        return self.network.costs[-1]

    @property
    def mean_theta(self) -> float:
        if isinstance(self.types, UniformContinuous):
            return 0.5
        return self.types.theta0

    def type_masses(self) -> Tuple[Tuple[float, float], ...]:
        """Discrete (theta, mass) pairs, lowest type first."""
        if isinstance(self.types, Homogeneous):
            return ((self.types.theta0, 1.0),)
        if isinstance(self.types, TwoType):
            return ((self.types.theta1, self.types.eta), (self.types.theta2, 1.0 - self.types.eta))
        raise ScenarioError("continuous distribution has no finite type list")

    def path_costs(self, flow: Sequence[float]) -> Tuple[float, ...]:
        """Realized per-user travel cost on each path at the given flow."""
        if isinstance(self.cost_model, LinearCost):
            cm = self.cost_model
            return (cm.c_l + cm.b_l * flow[0], cm.c_h + cm.b_h * flow[1])
        return self.network.costs

    def content_total(self, flow: Sequence[float], b: float = 1.0) -> float:
        """Aggregate information value weight shared by every user.

        With ``beta`` set this is the weighted Q1(x_H) + beta*Q1(x_L) form;
        otherwise it is Q0 + sum_k Q1(x_k) evaluated at participation b.
        """
        q0 = self.overlap.q0 if self.overlap is not None else 0.0
        if self.beta is not None:
            return q0 + q1_eval(self.content, flow[1]) + self.beta * q1_eval(self.content, flow[0])
        if self.k == 2:
            return q0 + q_total(self.content, flow[1], b)
        return q0 + float(sum(q1_eval(self.content, x) for x in flow))


# ---------------------------------------------------------------------------
# Mechanisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoIncentive:
    pass


@dataclass(frozen=True)
class ProportionalSchedule:
    """Side payment g(x_H) = target*c_H*(b - x_H) / (b*(b - target)).

    Charged to L-path participants; at the target it collects target*c_H/b.
    """

    target: float
    b: float
    c_h: float

    def __post_init__(self):
        if not (0.0 < self.target < self.b <= 1.0):
            raise ScenarioError("proportional schedule needs 0 < target < b <= 1")

    def value(self, x_h: float) -> float:
        return self.target * self.c_h * (self.b - x_h) / (self.b * (self.b - self.target))


@dataclass(frozen=True)
class BangSchedule:
    """Step side payment: +cap below the target flow, -cap above, a finite
    pivot level exactly at the target."""

    target: float
    b: float
    level: float
    cap: float

    def value(self, x_h: float) -> float:
        if x_h < self.target:
            return self.cap
        if x_h > self.target:
            return -self.cap
        return self.level


@dataclass(frozen=True)
class LinearSchedule:
    """Affine side payment g(x_H) = intercept + slope * x_H (traffic-cost model)."""

    intercept: float
    slope: float
    b: float = 1.0

    def value(self, x_h: float) -> float:
        return self.intercept + self.slope * x_h


PaymentSchedule = Union[ProportionalSchedule, BangSchedule, LinearSchedule]


@dataclass(frozen=True)
class SidePayment:
    schedule: PaymentSchedule
    participation: float = 1.0


@dataclass(frozen=True)
class ContentRestriction:
    """Per-path fractions of total content exposed; at least one path must
    stay unrestricted (restricting all paths only destroys content)."""

    coefficients: Tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if any(not (0.0 <= a <= 1.0) for a in coeffs):
            raise ScenarioError("restriction coefficients must lie in [0, 1]")
        if abs(max(coeffs) - 1.0) > 1e-12:
            raise ScenarioError("at least one path must be unrestricted")


@dataclass(frozen=True)
class Combined:
    """Content restriction a on the low-cost path plus a side payment."""

    a: float
    schedule: PaymentSchedule

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise ScenarioError("restriction coefficient must lie in [0, 1]")


@dataclass(frozen=True)
class MultipathSidePayment:
    """Three-path payment functions pinned to a target flow; the refund on the
    most expensive path follows from budget balance."""

    target: Tuple[float, float, float]
    costs: Tuple[float, float, float]

    def __post_init__(self):
        t = self.target
        if abs(sum(t) - 1.0) > 1e-9:
            raise ScenarioError("target must lie on the simplex")
        if min(t[1], t[2]) <= 0.0 or t[0] <= 0.0:
            raise ScenarioError("no interior schedule exists for boundary targets")

    def g1(self, flow: Sequence[float]) -> float:
        x1s, x2s, x3s = self.target
        c2, c3 = self.costs[1], self.costs[2]
        x1 = 1.0 - flow[1] - flow[2]
        return x1 * (x2s * c2 + x3s * c3) / x1s

    def g2(self, flow: Sequence[float]) -> float:
        x1s, x2s, x3s = self.target
        c2, c3 = self.costs[1], self.costs[2]
        x1 = 1.0 - flow[1] - flow[2]
        if flow[1] <= 0.0:
            return -TRANSFER_CAP
        return -(x1 ** 2) * x2s * c2 / (x1s * flow[1]) + flow[2] * (c3 - c2)

    def refund3(self, flow: Sequence[float]) -> float:
        collected = flow[0] * self.g1(flow) + flow[1] * self.g2(flow)
        if flow[2] <= 0.0:
            return math.copysign(TRANSFER_CAP, collected) if collected != 0.0 else 0.0
        return collected / flow[2]

    def transfers(self, flow: Sequence[float]) -> Tuple[float, float, float]:
        """Per-user net payment on each path (positive = user pays)."""
        return (self.g1(flow), self.g2(flow), -self.refund3(flow))


Mechanism = Union[NoIncentive, SidePayment, ContentRestriction, Combined, MultipathSidePayment]


def mechanism_participation(m: Mechanism) -> float:
    if isinstance(m, SidePayment):
        return m.participation
    if isinstance(m, Combined):
        return m.schedule.b
    return 1.0


def restriction_coefficients(s: Scenario, m: Mechanism) -> Tuple[float, ...]:
    if isinstance(m, ContentRestriction):
        if len(m.coefficients) != s.k:
            raise ScenarioError("restriction vector length must equal K")
        return m.coefficients
    if isinstance(m, Combined):
        if s.k != 2:
            raise ScenarioError("combined mechanism is two-path only")
        return (m.a, 1.0)
    return (1.0,) * s.k


def _clip_transfer(v: float) -> float:
    return max(-TRANSFER_CAP, min(TRANSFER_CAP, v))


def transfers(s: Scenario, m: Mechanism, flow: Sequence[float]) -> Tuple[float, ...]:
    """Per-user net payment by path (positive = pays, negative = subsidized)."""
    if isinstance(m, (NoIncentive, ContentRestriction)):
        return (0.0,) * s.k
    if isinstance(m, MultipathSidePayment):
        if s.k != 3:
            raise ScenarioError("multipath side payment needs K = 3")
        return tuple(_clip_transfer(t) for t in m.transfers(flow))
    schedule = m.schedule if isinstance(m, (SidePayment, Combined)) else None
    if schedule is None:  # pragma: no cover - exhaustive union
        raise ScenarioError(f"unknown mechanism {m!r}")
    if s.k != 2:
        raise ScenarioError("payment schedules are two-path only")
    b = mechanism_participation(m)
    x_h = flow[1]
    g = schedule.value(x_h)
    if x_h <= 0.0:
        subsidy = math.copysign(TRANSFER_CAP, g) if g != 0.0 else 0.0
    else:
        subsidy = _clip_transfer((b - x_h) * g / x_h)
    return (_clip_transfer(g), -subsidy)


def payoff(
    s: Scenario,
    m: Mechanism,
    theta: float,
    path: int,
    flow: Sequence[float],
) -> float:
    """Utility of a type-``theta`` user on ``path`` at the aggregate ``flow``.

    The information term is identical across paths up to the restriction
    coefficient: a non-atomic user's own contribution never enters.
    """
    if not (0 <= path < s.k):
        raise ScenarioError(f"path {path} out of range")
    b = mechanism_participation(m)
    q = s.content_total(flow, b)
    coeff = restriction_coefficients(s, m)[path]
    costs = s.path_costs(flow)
    t = transfers(s, m, flow)
    return theta * coeff * q - costs[path] - t[path]


# ---------------------------------------------------------------------------
# Type-to-path assignment and social welfare
# ---------------------------------------------------------------------------


def participating_types(s: Scenario, b: float) -> Tuple[Tuple[float, float], ...]:
    """Discrete (theta, mass) pairs active at participation ``b``; highest
    types stay when a side payment drives the rest out."""
    if isinstance(s.types, UniformContinuous):
        raise ScenarioError("use continuous-type helpers")
    pairs = s.type_masses()
    remaining = b
    kept = []
    for theta, mass in sorted(pairs, key=lambda p: -p[0]):
        take = min(mass, remaining)
        if take > 1e-15:
            kept.append((theta, take))
        remaining -= take
    if remaining > 1e-9:
        raise ScenarioError(f"participation {b} exceeds total mass")
    return tuple(sorted(kept))


def assign_types(s: Scenario, flow: Sequence[float], b: float) -> np.ndarray:
    """Equilibrium-consistent greedy assignment: fill paths from the most
    expensive down with the highest-valuation mass first.

    Returns an (n_types, K) mass matrix whose rows follow
    ``participating_types`` order (lowest type first).
    """
    kept = participating_types(s, b)
    masses = np.zeros((len(kept), s.k))
    remaining_path = list(flow)
    order = sorted(range(len(kept)), key=lambda i: -kept[i][0])
    for k in range(s.k - 1, -1, -1):
        need = remaining_path[k]
        for i in order:
            available = kept[i][1] - masses[i].sum()
            take = min(available, need)
            if take > 0:
                masses[i, k] += take
                need -= take
            if need <= 1e-15:
                break
    return masses


def social_welfare(s: Scenario, m: Mechanism, flow: Sequence[float], b: float | None = None) -> float:
    """Total welfare at ``flow``: information value net of restriction for the
    restricted users, minus travel cost.  Transfers cancel by budget balance
    and nonparticipants contribute zero.
    """
    if b is None:
        b = mechanism_participation(m)
    q = s.content_total(flow, b)
    coeffs = restriction_coefficients(s, m)
    costs = s.path_costs(flow)
    travel = float(sum(x * c for x, c in zip(flow, costs)))
    if isinstance(s.types, UniformContinuous):
        if s.k != 2:
            raise ScenarioError("continuous types are two-path only")
        x_h = flow[1]
        lo, mid, hi = 1.0 - b, 1.0 - flow[1], 1.0
        info = coeffs[0] * q * (mid ** 2 - lo ** 2) / 2.0 + coeffs[1] * q * (hi ** 2 - mid ** 2) / 2.0
        return info - travel
    masses = assign_types(s, flow, b)
    thetas = np.array([t for t, _ in participating_types(s, b)])
    info = float(np.sum(masses * thetas[:, None] * np.asarray(coeffs)[None, :] * q))
    return info - travel


# ---------------------------------------------------------------------------
# Social optimum
# ---------------------------------------------------------------------------


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _refine_1d(fun, lo: float, hi: float, rounds: int = 70) -> float:
    """Golden-section search for the maximizer of a unimodal ``fun``."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(rounds):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = fun(d)
    return 0.5 * (lo + hi)


def _maximize_on_interval(fun, lo: float, hi: float, step: float = 1e-5):
    """Dense-grid scan plus local ternary refinement; first-max tie-break
    keeps the smallest argument."""

    def scalar(t: float) -> float:
        return float(np.asarray(fun(t), dtype=float).reshape(-1)[0])

    n = max(2, int(round((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(fun(xs), dtype=float).reshape(-1)
    i = int(np.argmax(vals))
    wlo = float(xs[max(0, i - 2)])
    whi = float(xs[min(n - 1, i + 2)])
    x = _refine_1d(scalar, wlo, whi)
    best_x, best_v = float(xs[i]), float(vals[i])
    xv = scalar(x)
    if xv > best_v + 1e-15:
        best_x, best_v = x, xv
    return best_x, best_v


def q_curve(s: Scenario, xs, b: float = 1.0):
    """Vectorized total content over two-path flows x_H in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    low = s.content.value(np.clip(b - xs, 0.0, 1.0))
    q = s.content.value(xs) + (s.beta * low if s.beta is not None else low)
    if s.overlap is not None:
        q = q + s.overlap.q0
    return q


def sw_curve(s: Scenario, xs):
    """Vectorized no-incentive welfare over two-path flows x_H in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    q = q_curve(s, xs, 1.0)
    theta = s.mean_theta
    if isinstance(s.cost_model, LinearCost):
        cm = s.cost_model
        travel = (
            (cm.b_h + cm.b_l) * xs ** 2
            - (2.0 * cm.b_l + cm.c_l - cm.c_h) * xs
            + (cm.c_l + cm.b_l)
        )
        return theta * q - travel
    return theta * q - xs * s.network.costs[-1]


def social_optimum(s: Scenario, step: float = 1e-5) -> Tuple[Tuple[float, ...], float]:
    """Unconstrained welfare maximizer; two-path searches [0, 0.5] for the
    canonical symmetric model, [0, 1] for asymmetric extensions, and the
    reduced simplex for K = 3."""
    if s.k == 2:
        hi = 0.5 if (s.beta is None and isinstance(s.cost_model, ConstantCost)) else 1.0
        x, v = _maximize_on_interval(lambda t: sw_curve(s, t), 0.0, hi, step)
        return ((1.0 - x, x), v)
    if s.k != 3:
        raise ScenarioError("social optimum supports K in {2, 3}")
    return _multipath_optimum(s)


def _multipath_optimum(s: Scenario) -> Tuple[Tuple[float, ...], float]:
    theta = s.mean_theta
    costs = s.network.costs
    q0 = s.overlap.q0 if s.overlap is not None else 0.0
    f = s.content

    def sw(x2, x3):
        x1 = 1.0 - x2 - x3
        q = q0 + f.value(x1) + f.value(x2) + f.value(x3)
        return theta * q - costs[1] * x2 - costs[2] * x3

    # Exchange symmetry: cheaper paths never carry less flow at the optimum.
    best = (0.0, 0.0)
    best_v = -math.inf
    step = 1.0 / 128.0
    lo2 = lo3 = 0.0
    hi2 = hi3 = 1.0
    for _ in range(9):
        g2 = np.arange(max(0.0, lo2), min(0.5, hi2) + step / 2, step)
        g3 = np.arange(max(0.0, lo3), min(1.0 / 3.0, hi3) + step / 2, step)
        m2, m3 = np.meshgrid(g2, g3, indexing="ij")
        x1 = 1.0 - m2 - m3
        ok = (m3 <= m2 + 1e-12) & (m2 <= x1 + 1e-12) & (x1 >= -1e-12)
        q = q0 + f.value(np.clip(x1, 0.0, 1.0)) + f.value(m2) + f.value(m3)
        vals = np.where(ok, theta * q - costs[1] * m2 - costs[2] * m3, -np.inf)
        i = int(np.argmax(vals))
        b2 = float(m2.flat[i])
        b3 = float(m3.flat[i])
        if float(vals.flat[i]) > best_v:
            best_v = float(vals.flat[i])
            best = (b2, b3)
        lo2, hi2 = best[0] - 2 * step, best[0] + 2 * step
        lo3, hi3 = best[1] - 2 * step, best[1] + 2 * step
        step /= 8.0
    x2, x3 = best
    return ((1.0 - x2 - x3, x2, x3), best_v)


# ---------------------------------------------------------------------------
# Equilibrium without incentives, verification, stability
# ---------------------------------------------------------------------------


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class EquilibriumReport:
    flow: Tuple[float, ...]
    stability: Stability
    per_type_payoffs: Tuple[Tuple[float, Tuple[float, ...]], ...]
    participation_b: float
    social_welfare: float

    def csv_row(self) -> str:
        cells = [repr(x) for x in self.flow]
        cells += [repr(self.social_welfare), self.stability.value, repr(self.participation_b)]
        return ",".join(cells)


def _per_type_payoffs(s: Scenario, m: Mechanism, flow, b) -> Tuple:
    if isinstance(s.types, UniformContinuous):
        marks = (1.0 - b, 1.0 - flow[1], 1.0)
        return tuple(
            (theta, tuple(payoff(s, m, theta, k, flow) for k in range(s.k))) for theta in marks
        )
    return tuple(
        (theta, tuple(payoff(s, m, theta, k, flow) for k in range(s.k)))
        for theta, _ in s.type_masses()
    )


def equilibrium_no_incentive(s: Scenario) -> EquilibriumReport:
    """Selfish outcome without incentives: everyone on the cheapest path for
    constant costs, the cost-equalizing split for the linear model."""
    m = NoIncentive()
    if isinstance(s.cost_model, LinearCost):
        cm = s.cost_model
        denom = cm.b_h + cm.b_l
        if denom <= 0.0:
            x_h = 1.0 if cm.c_h < cm.c_l else 0.0
        else:
            x_h = min(max((cm.c_l + cm.b_l - cm.c_h) / denom, 0.0), 1.0)
        flow = (1.0 - x_h, x_h)
        stab = Stability.STABLE
        if x_h in (0.0, 1.0):
            edge = cm.c_h - cm.c_l - (cm.b_l if x_h == 0.0 else -cm.b_h)
            stab = Stability.BOUNDARY if abs(edge) <= EQ_TOL else Stability.STABLE
    else:
        flow = (1.0,) + (0.0,) * (s.k - 1)
        stab = Stability.BOUNDARY if s.network.costs[-1] <= EQ_TOL else Stability.STABLE
    sw = social_welfare(s, m, flow, 1.0)
    return EquilibriumReport(flow, stab, _per_type_payoffs(s, m, flow, 1.0), 1.0, sw)


def _theta_probes(s: Scenario, flow, b) -> Tuple[Tuple[float, float], ...]:
    """(theta, mass-on-record) pairs to test for deviations, continuous types
    included via their boundary and a coarse interior sample."""
    if not isinstance(s.types, UniformContinuous):
        return participating_types(s, b)
    marks = {1.0 - b, 1.0 - flow[1], 1.0}
    marks.update(1.0 - b + (b * i / 8.0) for i in range(9))
    return tuple((t, 0.0) for t in sorted(marks) if -1e-12 <= t <= 1.0 + 1e-12)


def verify_equilibrium(
    s: Scenario, m: Mechanism, flow: Sequence[float], b: float | None = None, tol: float = EQ_TOL
) -> Tuple[bool, float]:
    """Best unilateral deviation gain over participating types and paths,
    plus the entry gain of excluded types; an equilibrium iff below ``tol``."""
    if b is None:
        b = mechanism_participation(m)
    max_gain = 0.0
    if isinstance(s.types, UniformContinuous):
        x_h = flow[1]
        for theta, _ in _theta_probes(s, flow, b):
            u = [payoff(s, m, theta, k, flow) for k in range(s.k)]
            if theta > 1.0 - b + 1e-12:  # participant
                on_path = 1 if theta >= 1.0 - x_h - 1e-12 else 0
                max_gain = max(max_gain, max(u) - u[on_path])
            else:  # would-be entrant gains its best in-system payoff
                max_gain = max(max_gain, max(u))
        return (max_gain <= tol, max_gain)
    masses = assign_types(s, flow, b)
    kept = participating_types(s, b)
    for i, (theta, _) in enumerate(kept):
        u = [payoff(s, m, theta, k, flow) for k in range(s.k)]
        for k in range(s.k):
            if masses[i, k] > 1e-12:
                max_gain = max(max_gain, max(u) - u[k])
    if b < 1.0 - 1e-12:
        kept_thetas = {t for t, _ in kept}
        for theta, mass in s.type_masses():
            if theta not in kept_thetas:
                u = [payoff(s, m, theta, k, flow) for k in range(s.k)]
                max_gain = max(max_gain, max(u))
    return (max_gain <= tol, max_gain)


def classify_stability(
    s: Scenario,
    m: Mechanism,
    flow: Sequence[float],
    b: float | None = None,
    eps_perturb: float = 1e-4,
    cfg=None,
) -> Stability:
    """Perturb each type's mass across every ordered path pair and replay the
    flow dynamics; Stable means every perturbation returns to within
    eps/10 of the equilibrium, escape beyond 10*eps means Unstable."""
    from . import dynamics as dyn

    if b is None:
        b = mechanism_participation(m)
    ok, gain = verify_equilibrium(s, m, flow, b)
    if not ok:
        raise ScenarioError(f"flow is not an equilibrium (gain {gain:.3e})")
    cfg = cfg or dyn.DynamicsConfig(horizon=200_000)
    target = np.asarray(flow, dtype=float)
    worst = 0.0
    tested = False
    if isinstance(s.types, UniformContinuous):
        x_h = flow[1]
        for x0 in (x_h - eps_perturb, x_h + eps_perturb):
            if not (0.0 <= x0 <= b):
                continue
            tested = True
            traj = dyn.simulate_to_convergence(s, m, (b - x0, x0), cfg)
            end = np.asarray(traj.final_flow, dtype=float)
            worst = max(worst, float(np.max(np.abs(end - target))))
            if worst > 10.0 * eps_perturb:
                return Stability.UNSTABLE
    else:
        base = dyn.state_from_flow(s, flow, b)
        for i in range(base.shape[0]):
            for src in range(s.k):
                for dst in range(s.k):
                    if src == dst or base[i, src] < eps_perturb:
                        continue
                    start = base.copy()
                    start[i, src] -= eps_perturb
                    start[i, dst] += eps_perturb
                    tested = True
                    traj = dyn.simulate_to_convergence(s, m, start, cfg)
                    end = np.asarray(traj.final_flow, dtype=float)
                    worst = max(worst, float(np.max(np.abs(end - target))))
                    if worst > 10.0 * eps_perturb:
                        return Stability.UNSTABLE
    if not tested:
        return Stability.BOUNDARY
    if worst <= eps_perturb / 10.0:
        return Stability.STABLE
    return Stability.UNSTABLE if worst > 10.0 * eps_perturb else Stability.BOUNDARY
