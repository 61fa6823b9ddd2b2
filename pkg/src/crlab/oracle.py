"""Independent brute-force references: exhaustive grids over flows and
mechanism parameters with feasibility decided by raw payoff comparisons,
plus a finite-agent best-response validator of the non-atomic limit.

Nothing here reuses designer case logic; these are the validation targets
the designers are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import game
from .content import q1_derivative, q1_eval
from .game import (
    Homogeneous,
    Mechanism,
    NoIncentive,
    Scenario,
    ScenarioError,
    SidePayment,
    TwoType,
    UniformContinuous,
    social_welfare,
)
from .mechanisms import DesignOutcome

IR_TOL = 1e-9


@dataclass(frozen=True)
class OracleConfig:
    grid_step: float = 1e-4
    agent_count: int = 10_000
    br_rounds: int = 1000
    seed: int = 0


# ---------------------------------------------------------------------------
# Exhaustive social optimum
# ---------------------------------------------------------------------------


def grid_social_optimum(s: Scenario, cfg: OracleConfig | None = None) -> Tuple[Tuple[float, ...], float]:
    """Exhaustive grid over the (symmetry-reduced) flow simplex."""
    cfg = cfg or OracleConfig()
    step = cfg.grid_step
    if s.k == 2:
        hi = 0.5 if (s.beta is None and isinstance(s.cost_model, game.ConstantCost)) else 1.0
        xs = np.arange(0.0, hi + step / 2, step)
        vals = game.sw_curve(s, xs)
        i = int(np.argmax(vals))
        x = float(xs[i])
        return ((1.0 - x, x), float(vals[i]))
    if s.k != 3:
        raise ScenarioError("grid oracle supports K <= 3")
    theta = s.mean_theta
    q0 = s.overlap.q0 if s.overlap is not None else 0.0
    costs = s.network.costs
    step3 = max(step, 1e-3)
    g = np.arange(0.0, 1.0 + step3 / 2, step3)
    x2, x3 = np.meshgrid(g[g <= 0.5 + step3], g[g <= 1.0 / 3.0 + step3], indexing="ij")
    x1 = 1.0 - x2 - x3
    ok = (x3 <= x2 + 1e-12) & (x2 <= x1 + 1e-12) & (x1 >= -1e-12)
    q = q0 + s.content.value(np.clip(x1, 0.0, 1.0)) + s.content.value(x2) + s.content.value(x3)
    vals = np.where(ok, theta * q - costs[1] * x2 - costs[2] * x3, -np.inf)
    i = int(np.argmax(vals))
    b2, b3 = float(x2.flat[i]), float(x3.flat[i])
    return ((1.0 - b2 - b3, b2, b3), float(vals.flat[i]))


# ---------------------------------------------------------------------------
# Finite-agent best response
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteAgentResult:
    shares: Tuple[float, ...]
    participation: float
    converged: bool
    rounds: int


def finite_agent_equilibrium(
    s: Scenario,
    m: Mechanism,
    cfg: OracleConfig | None = None,
    init_flow=None,
) -> FiniteAgentResult:
    """Asynchronous best response over ``agent_count`` discrete agents.

    Payoffs are evaluated at the empirical path shares; an agent's own
    contribution is ignored, mirroring the non-atomic model.  Agents facing
    a negative best payoff under a payment mechanism leave the system.
    Initial paths are drawn uniformly unless ``init_flow`` biases the draw
    (useful to land in a chosen equilibrium's basin when several coexist).
    """
    cfg = cfg or OracleConfig()
    n = cfg.agent_count
    if n < 100:
        raise ScenarioError("agent_count must be at least 100")
    rng = np.random.default_rng(cfg.seed)
    if isinstance(s.types, UniformContinuous):
        thetas = rng.uniform(0.0, 1.0, size=n)
    elif isinstance(s.types, TwoType):
        n1 = int(round(s.types.eta * n))
        thetas = np.concatenate([np.full(n1, s.types.theta1), np.full(n - n1, s.types.theta2)])
    else:
        thetas = np.full(n, s.types.theta0)
    can_exit = isinstance(m, (SidePayment, game.Combined))
    if init_flow is None:
        paths = rng.integers(0, s.k, size=n)  # -1 marks agents that left
    else:
        probs = np.asarray(init_flow, dtype=float)
        paths = rng.choice(s.k, size=n, p=probs / probs.sum())
    counts = np.bincount(paths, minlength=s.k).astype(float)

    coeffs = np.asarray(game.restriction_coefficients(s, m), dtype=float)

    def path_utilities(theta: float, flow) -> np.ndarray:
        b_emp = float(sum(flow))
        q0 = s.overlap.q0 if s.overlap is not None else 0.0
        if s.beta is not None:
            q = q0 + q1_eval(s.content, flow[1]) + s.beta * q1_eval(s.content, flow[0])
        else:
            q = q0 + float(sum(q1_eval(s.content, min(x, 1.0)) for x in flow))
        costs = np.asarray(s.path_costs(flow), dtype=float)
        t = np.asarray(game.transfers(s, m, flow), dtype=float)
        return theta * coeffs * q - costs - t

    rounds_used = cfg.br_rounds
    converged = False
    for rnd in range(cfg.br_rounds):
        moved = 0
        for i in rng.permutation(n):
            flow = tuple(counts / n)
            u = path_utilities(float(thetas[i]), flow)
            best = int(np.argmax(u))
            cur = int(paths[i])
            if can_exit and u[best] < -IR_TOL:
                if cur != -1:
                    counts[cur] -= 1
                    paths[i] = -1
                    moved += 1
                continue
            if cur == -1:
                if u[best] >= -IR_TOL:
                    counts[best] += 1
                    paths[i] = best
                    moved += 1
                continue
            if best != cur and u[best] > u[cur] + IR_TOL:
                counts[cur] -= 1
                counts[best] += 1
                paths[i] = best
                moved += 1
        if moved == 0:
            converged = True
            rounds_used = rnd + 1
            break
    shares = tuple(float(c / n) for c in counts)
    return FiniteAgentResult(shares, float(sum(shares)), converged, rounds_used)


# ---------------------------------------------------------------------------
# Restriction equilibria at a fixed coefficient
# ---------------------------------------------------------------------------


def restriction_equilibria(
    s: Scenario, a: float, step: float = 1e-4
) -> List[Tuple[float, float, bool]]:
    """All equilibria (x_H, welfare, stable) of the two-path game under a
    fixed low-path exposure ``a``: indifference crossings of each type's
    path-preference function, the exact-split point, and the corners."""
    c_h = s.c_h
    pairs = s.type_masses()
    delta = max(step, 1e-6)

    def q_at(x: float) -> float:
        x = min(max(x, 0.0), 1.0)
        return s.content_total((1.0 - x, x), 1.0)

    def d(theta: float, x: float) -> float:
        return (1.0 - a) * theta * q_at(x) - c_h

    out: List[Tuple[float, float, bool]] = []

    def sw_at(x: float) -> float:
        return social_welfare(s, game.ContentRestriction((a, 1.0)), (1.0 - x, x), 1.0)

    # Corners: perturbations push the greedy-assigned marginal type across,
    # so the top type governs the all-L corner and the bottom type all-H.
    t_hi = max(t for t, _ in pairs)
    t_lo = min(t for t, _ in pairs)
    if all(d(t, 0.0) <= IR_TOL for t, _ in pairs):
        out.append((0.0, sw_at(0.0), d(t_hi, delta) < -IR_TOL))
    if all(d(t, 1.0) >= -IR_TOL for t, _ in pairs):
        out.append((1.0, sw_at(1.0), d(t_lo, 1.0 - delta) > IR_TOL))

    xs = np.arange(0.0, 1.0 + step / 2, step)
    qs = np.array([q_at(float(x)) for x in xs])
    for idx, (theta, mass) in enumerate(pairs):
        if theta <= 0.0:
            continue
        dv = (1.0 - a) * theta * qs - c_h
        sign_change = np.flatnonzero(dv[:-1] * dv[1:] < 0)
        high_mass = sum(mm for tt, mm in pairs if tt > theta)
        lo_bound = high_mass            # heavier types fill the H path first
        hi_bound = high_mass + mass
        for j in sign_change:
            root = _bisect(lambda x: d(theta, x), float(xs[j]), float(xs[j + 1]))
            if not (lo_bound - 1e-9 <= root <= hi_bound + 1e-9):
                continue
            others_ok = all(
                (d(tt, root) >= -IR_TOL if tt > theta else d(tt, root) <= IR_TOL)
                for tt, _ in pairs
                if tt != theta
            )
            if not others_ok:
                continue
            stable = d(theta, root - delta) > 0 > d(theta, root + delta)
            out.append((root, sw_at(root), stable))
    # Exact split between types (two-type only): each type strictly on its side.
    if len(pairs) == 2:
        x_split = pairs[1][1]
        if d(pairs[1][0], x_split) >= -IR_TOL and d(pairs[0][0], x_split) <= IR_TOL:
            stable = d(pairs[1][0], x_split) > IR_TOL and d(pairs[0][0], x_split) < -IR_TOL
            out.append((x_split, sw_at(x_split), stable))
    dedup: List[Tuple[float, float, bool]] = []
    for e in sorted(out):
        if not dedup or abs(e[0] - dedup[-1][0]) > 1e-7:
            dedup.append(e)
        elif e[2] and not dedup[-1][2]:
            dedup[-1] = e
    return dedup


def _bisect(fun, lo: float, hi: float, iters: int = 80) -> float:
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (fun(mid) > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Brute-force mechanism design
# ---------------------------------------------------------------------------


def brute_force_design(s: Scenario, kind: str, cfg: OracleConfig | None = None) -> DesignOutcome:
    """Exhaustive search over mechanism parameters with IR and equilibrium
    existence checked from raw payoff comparisons; no designer case logic."""
    cfg = cfg or OracleConfig()
    if s.k != 2:
        raise ScenarioError("brute force design is two-path only")
    if kind == "side":
        return _brute_side(s, cfg)
    if kind == "restriction":
        return _brute_restriction(s, cfg)
    if kind == "combined":
        return _brute_combined(s, cfg)
    raise ScenarioError(f"unknown mechanism kind {kind!r}")


def _brute_side(s: Scenario, cfg: OracleConfig) -> DesignOutcome:
    c_h = s.c_h
    pairs = s.type_masses()
    step = cfg.grid_step
    options = [1.0]
    if isinstance(s.types, TwoType) and s.types.theta1 < s.types.theta2:
        options.append(1.0 - s.types.eta)
    best = (-math.inf, 0.0, 1.0)
    for b in options:
        xs = np.arange(0.0, b / 2.0 + step / 2, step)
        qs = np.array([s.content_total((b - float(x), float(x)), b) for x in xs])
        charge = xs * c_h / b
        kept = [(t, mm) for t, mm in pairs]
        if b < 1.0:
            kept = [max(pairs, key=lambda p: p[0])]
        feasible = np.ones(len(xs), dtype=bool)
        for theta, _ in kept:
            feasible &= theta * qs - charge >= -IR_TOL
        if b < 1.0:
            theta_out = min(pairs, key=lambda p: p[0])[0]
            feasible &= theta_out * qs - charge < IR_TOL
        theta_mass = sum(t * mm for t, mm in kept)
        sw = np.where(feasible, theta_mass * qs - xs * c_h, -np.inf)
        i = int(np.argmax(sw))
        if float(sw[i]) > best[0]:
            best = (float(sw[i]), float(xs[i]), b)
    sw_best, x_best, b_best = best
    flow_star, _ = grid_social_optimum(s, cfg)
    if b_best < 1.0:
        label = "HalfParticipation"
    elif abs(x_best - flow_star[1]) <= 2.0 * step:
        label = "SocialOptimum"
    else:
        label = "FullParticipation"
    return DesignOutcome(NoIncentive(), (b_best - x_best, x_best), label, sw_best, b_best)


def _brute_restriction(s: Scenario, cfg: OracleConfig) -> DesignOutcome:
    step_a = max(cfg.grid_step, 1e-4)
    best = (-math.inf, 0.0, 0.0)
    for a in np.arange(0.0, 1.0 + step_a / 2, step_a):
        eqs = restriction_equilibria(s, float(a), step=max(cfg.grid_step, 1e-3))
        stable = [(x, sw) for x, sw, st in eqs if st]
        if not stable:
            continue
        x, sw = max(stable, key=lambda e: e[1])
        if sw > best[0]:
            best = (sw, x, float(a))
    sw, x, a = best
    return DesignOutcome(
        game.ContentRestriction((a, 1.0)), (1.0 - x, x), "oracle", sw, 1.0
    )


def _brute_combined(s: Scenario, cfg: OracleConfig) -> DesignOutcome:
    if not isinstance(s.types, TwoType):
        raise ScenarioError("combined brute force needs two types")
    th1, th2, eta = s.types.theta1, s.types.theta2, s.types.eta
    c_h = s.c_h
    step = max(cfg.grid_step, 1e-3)
    a_grid = np.arange(0.0, 1.0 + step / 2, step)
    best = (-math.inf, 0.0, 1.0)
    # Full participation, high type pivotal on [0, eta mass of the top type].
    for x in np.arange(step, 0.5 + step / 2, step):
        q = s.content_total((1.0 - x, x), 1.0)
        g = (c_h - (1.0 - a_grid) * th2 * q) * x
        ir1 = th1 * a_grid * q - g
        sw = (x * th2 + ((0.5 - x) * th2 + 0.5 * th1) * a_grid) * q - x * c_h
        sw = np.where(ir1 >= -IR_TOL, sw, -np.inf)
        i = int(np.argmax(sw))
        if float(sw[i]) > best[0]:
            best = (float(sw[i]), float(x), float(a_grid[i]))
    # Full participation, low type pivotal on [0.5, 1).
    if th1 > 0.0:
        for x in np.arange(0.5, 1.0, step):
            q = s.content_total((1.0 - x, x), 1.0)
            g = (c_h - (1.0 - a_grid) * th1 * q) * x
            ir1 = th1 * a_grid * q - g
            ir2 = th2 * q - c_h + (1.0 - x) * g / x
            sw = ((1.0 - x) * th1 * a_grid + (x - 0.5) * th1 + 0.5 * th2) * q - x * c_h
            sw = np.where((ir1 >= -IR_TOL) & (ir2 >= -IR_TOL), sw, -np.inf)
            i = int(np.argmax(sw))
            if float(sw[i]) > best[0]:
                best = (float(sw[i]), float(x), float(a_grid[i]))
    # Exact split at one half: payment free within the preference interval.
    q = s.content_total((0.5, 0.5), 1.0)
    g_lo = 0.5 * (c_h - (1.0 - a_grid) * th2 * q)
    sw = (0.5 * th1 * a_grid + 0.5 * th2) * q - 0.5 * c_h
    sw = np.where(th1 * a_grid * q - g_lo >= -IR_TOL, sw, -np.inf)
    i = int(np.argmax(sw))
    if float(sw[i]) > best[0]:
        best = (float(sw[i]), 0.5, float(a_grid[i]))
    # High-type-only participation, no restriction needed.
    b = 1.0 - eta
    for x in np.arange(0.0, b / 2.0 + step / 2, step):
        q = s.content_total((b - x, float(x)), b)
        if th2 * q - x * c_h / b < -IR_TOL:
            continue
        if th1 * q - x * c_h / b >= IR_TOL:
            continue
        sw = (1.0 - eta) * th2 * q - x * c_h
        if sw > best[0]:
            best = (float(sw), float(x), 1.0)
    # Do-nothing corner.
    sw0 = s.mean_theta * s.content_total((1.0, 0.0), 1.0)
    if sw0 > best[0]:
        best = (sw0, 0.0, 1.0)
    sw, x, a = best
    return DesignOutcome(NoIncentive(), (1.0 - x, x), "oracle", sw, 1.0)


# ---------------------------------------------------------------------------
# Derivative check
# ---------------------------------------------------------------------------


def finite_difference_check(f, points=None, h: float = 1e-6) -> float:
    """Max relative error of the analytic slope against central differences,
    sampled away from kinks."""
    if points is None:
        points = np.linspace(2 * h, 1.0 - 2 * h, 1001)
    worst = 0.0
    for x in points:
        x = float(x)
        lo, hi = q1_derivative(f, x)
        if abs(hi - lo) > 1e-12:
            continue  # kink: one-sided values differ by design
        fd = (q1_eval(f, x + h) - q1_eval(f, x - h)) / (2.0 * h)
        worst = max(worst, abs(fd - lo) / max(abs(lo), 1.0))
    return worst
