"""Information-content models: per-path coverage curves, overlap segments,
and the discounted dynamic information pools.

Every object here is immutable and every operation is a pure function, so
callers may evaluate them concurrently without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

_CONCAVITY_TOL = 1e-9
_GRID_POINTS = 1000


class ContentError(ValueError):
    """Raised for invalid content-function parameters or domain violations."""


def _check_domain(x: float) -> None:
    if not (-1e-12 <= x <= 1.0 + 1e-12):
        raise ContentError(f"coverage argument {x} outside [0, 1]")


@dataclass(frozen=True)
class ExponentialCoverage:
    """Coupon-collector coverage: Q1(x) = (N/K) * (1 - (1 - K*phi/N)**(n*x)).

    ``total_items`` is the total item count N spread uniformly over ``paths``
    parallel paths, ``users`` the population size n, and ``items_per_user``
    the number phi of distinct items each traveler samples.
    """

    total_items: float
    users: float
    items_per_user: float
    paths: int = 2

    def __post_init__(self):
        if self.paths < 2:
            raise ContentError("need at least 2 paths")
        if self.paths * self.items_per_user >= self.total_items:
            raise ContentError("requires K*phi < N")
        if self.total_items <= 0 or self.users <= 0 or self.items_per_user <= 0:
            raise ContentError("N, n, phi must be positive")

    @property
    def retention(self) -> float:
        """Per-unit-mass miss probability base (1 - K*phi/N)."""
        return 1.0 - self.paths * self.items_per_user / self.total_items

    def value(self, x):
        per_path = self.total_items / self.paths
        return per_path * (1.0 - self.retention ** (self.users * np.asarray(x, dtype=float)))

    def slopes(self, x: float) -> Tuple[float, float]:
        d = (
            -(self.total_items / self.paths)
            * self.users
            * math.log(self.retention)
            * self.retention ** (self.users * x)
        )
        return (d, d)


@dataclass(frozen=True)
class PiecewiseLinearCap:
    """Linear ramp to a cap: Q1(x) = cap * x / knee below the knee, cap above."""

    cap: float
    knee: float = 0.5

    def __post_init__(self):
        if self.cap <= 0:
            raise ContentError("cap must be positive")
        if not (0.0 < self.knee <= 1.0):
            raise ContentError("knee must lie in (0, 1]")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x / self.knee, 1.0) * self.cap

    def slopes(self, x: float) -> Tuple[float, float]:
        s = self.cap / self.knee
        if x < self.knee:
            return (s, s)
        if x == self.knee:
            return (s, 0.0) if self.knee < 1.0 else (s, s)
        return (0.0, 0.0)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear coverage through sorted (x, value) breakpoints.

    Breakpoints must start at (0, 0), cover [0, 1], be nondecreasing, and be
    concave; violations are rejected at construction rather than repaired.
    """

    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(v)) for x, v in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ContentError("need at least two breakpoints")
        xs = [p[0] for p in pts]
        vs = [p[1] for p in pts]
        if abs(xs[0]) > 1e-15 or abs(vs[0]) > 1e-15:
            raise ContentError("first breakpoint must be (0, 0)")
        if abs(xs[-1] - 1.0) > 1e-12:
            raise ContentError("breakpoints must cover [0, 1]")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ContentError("breakpoint x values must be strictly increasing")
        slopes = [(v1 - v0) / (x1 - x0) for (x0, v0), (x1, v1) in zip(pts, pts[1:])]
        if any(s < -_CONCAVITY_TOL for s in slopes):
            raise ContentError("tabulated coverage must be nondecreasing")
        if any(s1 > s0 + _CONCAVITY_TOL for s0, s1 in zip(slopes, slopes[1:])):
            raise ContentError("tabulated coverage must be concave")
        object.__setattr__(self, "_xs", np.array(xs))
        object.__setattr__(self, "_vs", np.array(vs))
        object.__setattr__(self, "_slopes", slopes)

    def value(self, x):
        return np.interp(np.asarray(x, dtype=float), self._xs, self._vs)

    def slopes(self, x: float) -> Tuple[float, float]:
        xs = self._xs
        sl = self._slopes
        if x <= xs[0]:
            return (sl[0], sl[0])
        if x >= xs[-1]:
            return (sl[-1], sl[-1])
        i = int(np.searchsorted(xs, x))
        if math.isclose(x, xs[i], rel_tol=0.0, abs_tol=1e-14) and 0 < i < len(sl) + 1:
            left = sl[i - 1]
            right = sl[i] if i < len(sl) else sl[-1]
            return (left, right)
        return (sl[i - 1], sl[i - 1])


ContentFunction = Union[ExponentialCoverage, PiecewiseLinearCap, Tabulated]


def validate_content(f: ContentFunction) -> None:
    """Grid-check Q1(0) = 0, monotonicity, and concavity on a 1e3-point grid."""
    xs = np.linspace(0.0, 1.0, _GRID_POINTS + 1)
    vals = f.value(xs)
    if abs(float(vals[0])) > 1e-12:
        raise ContentError("Q1(0) must be 0")
    diffs = np.diff(vals)
    if np.any(diffs < -_CONCAVITY_TOL):
        raise ContentError("coverage must be nondecreasing")
    if np.any(np.diff(diffs) > _CONCAVITY_TOL):
        raise ContentError("coverage must be concave")


def q1_eval(f: ContentFunction, x: float) -> float:
    """Single-path expected content collected by a mass x of users."""
    _check_domain(x)
    return float(f.value(min(max(x, 0.0), 1.0)))


def q1_derivative(f: ContentFunction, x: float) -> Tuple[float, float]:
    """(left, right) one-sided derivatives of Q1 at x; equal away from kinks."""
    _check_domain(x)
    return f.slopes(min(max(x, 0.0), 1.0))


def q_total(f: ContentFunction, x_h: float, b: float = 1.0) -> float:
    """Two-path total content Q(x_H, b) = Q1(x_H) + Q1(b - x_H).

    ``b`` is the active participation mass; requires 0 <= x_H <= b <= 1.
    """
    if x_h < -1e-12 or x_h > b + 1e-12 or b > 1.0 + 1e-12:
        raise ContentError(f"need 0 <= x_H <= b <= 1, got x_H={x_h}, b={b}")
    x_h = min(max(x_h, 0.0), b)
    return q1_eval(f, x_h) + q1_eval(f, b - x_h)


@dataclass(frozen=True)
class OverlapSegment:
    """Common link shared by all routes; contributes a constant content Q0."""

    items: float
    users: float
    items_per_user: float

    def __post_init__(self):
        if self.items <= 0 or self.users <= 0 or self.items_per_user <= 0:
            raise ContentError("N0, n, phi must be positive")
        if self.items_per_user > self.items:
            raise ContentError("phi cannot exceed N0")

    @property
    def q0(self) -> float:
        return self.items * (1.0 - (1.0 - self.items_per_user / self.items) ** self.users)


def q_multi(f: ContentFunction, flows, overlap: OverlapSegment | None = None) -> float:
    """Multi-path total content Q0 + sum_k Q1(x_k) for flows on the unit simplex."""
    flows = np.asarray(flows, dtype=float)
    if np.any(flows < -1e-9):
        raise ContentError("flows must be nonnegative")
    if abs(float(flows.sum()) - 1.0) > 1e-9:
        raise ContentError(f"flows must sum to 1, got {flows.sum()}")
    q0 = overlap.q0 if overlap is not None else 0.0
    return q0 + float(sum(q1_eval(f, float(x)) for x in np.clip(flows, 0.0, 1.0)))


# ---------------------------------------------------------------------------
# Dynamic information model: per-period collection plus discounted carry-over.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicContentState:
    """Useful-information pools (q_H, q_L) of the repeated sensing game."""

    q_h: float
    q_l: float
    discount: float
    total_items: float
    users: float
    items_per_user: float

    def __post_init__(self):
        if not (0.0 < self.discount < 1.0):
            raise ContentError("discount must lie in (0, 1)")
        half = self.total_items / 2.0
        if not (-1e-12 <= self.q_h <= half + 1e-9 and -1e-12 <= self.q_l <= half + 1e-9):
            raise ContentError("pools must lie in [0, N/2]")
        if 2.0 * self.items_per_user >= self.total_items:
            raise ContentError("requires 2*phi < N")

    @property
    def retention(self) -> float:
        """r = (1 - 2*phi/N)**n, the fraction of a path's items missed by all users."""
        return (1.0 - 2.0 * self.items_per_user / self.total_items) ** self.users

    def replace_pools(self, q_h: float, q_l: float) -> "DynamicContentState":
        return DynamicContentState(
            q_h, q_l, self.discount, self.total_items, self.users, self.items_per_user
        )


def dynamic_step(state: DynamicContentState, x_h: float) -> DynamicContentState:
    """One period of the dynamic model: fresh collection merged with the
    discounted legacy pool under independent-coverage overlap."""
    _check_domain(x_h)
    n_half = state.total_items / 2.0
    r = state.retention
    delta_h = n_half * (1.0 - r ** x_h)
    delta_l = n_half * (1.0 - r ** (1.0 - x_h))
    g = state.discount
    q_h = n_half * (1.0 - (1.0 - g * state.q_h / n_half) * (1.0 - delta_h / n_half))
    q_l = n_half * (1.0 - (1.0 - g * state.q_l / n_half) * (1.0 - delta_l / n_half))
    return state.replace_pools(q_h, q_l)


def dynamic_stationary(state: DynamicContentState, x_h: float) -> Tuple[float, float]:
    """Closed-form fixed point of ``dynamic_step`` at a constant flow x_H."""
    _check_domain(x_h)
    n_half = state.total_items / 2.0
    r = state.retention
    g = state.discount
    q_h = n_half * (1.0 - r ** x_h) / (1.0 - g * r ** x_h)
    q_l = n_half * (1.0 - r ** (1.0 - x_h)) / (1.0 - g * r ** (1.0 - x_h))
    return (q_h, q_l)


def dynamic_iterate_to_fixed_point(
    state: DynamicContentState,
    x_h: float,
    tol: float = 1e-12,
    max_steps: int = 10 ** 6,
) -> DynamicContentState:
    """Iterate ``dynamic_step`` until both pools move less than ``tol``.

    The discount factor below one makes the map a contraction, so failure to
    converge within ``max_steps`` indicates invalid parameters and raises.
    """
    cur = state
    for _ in range(max_steps):
        nxt = dynamic_step(cur, x_h)
        if abs(nxt.q_h - cur.q_h) < tol and abs(nxt.q_l - cur.q_l) < tol:
            return nxt
        cur = nxt
    raise ContentError("dynamic recursion failed to converge")
