"""Efficiency ratios, the tight worst-case instance families, and seeded
random probes of the welfare bounds.

Ratios follow the convention SW(worst stable equilibrium under the designed
mechanism) / SW(social optimum); for the emitted designs that equilibrium is
the designer's own target, so predicted welfare is used directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import game, mechanisms
from .content import ExponentialCoverage, PiecewiseLinearCap
from .game import (
    Homogeneous,
    PathNetwork,
    Scenario,
    ScenarioError,
    TwoType,
    UniformContinuous,
    social_optimum,
    social_welfare,
)

DESIGNERS = ("none", "side", "restriction", "combined")


@dataclass(frozen=True)
class PoAProbeReport:
    family: str
    designer: str
    samples: int
    min_ratio: float
    argmin_instance: Dict[str, float]
    violations: int
    bound: Optional[float] = None

    def to_json(self) -> str:
        d = dict(self.__dict__)
        return json.dumps(d, indent=2, sort_keys=True)


def designed_welfare(s: Scenario, designer: str) -> float:
    """Welfare of the equilibrium the named designer incentivizes."""
    if designer == "none":
        rep = game.equilibrium_no_incentive(s)
        return rep.social_welfare
    if designer == "side":
        if isinstance(s.types, UniformContinuous):
            return mechanisms.design_continuous_side_payment(s).predicted_sw
        return mechanisms.design_side_payment(s).predicted_sw
    if designer == "restriction":
        if isinstance(s.types, UniformContinuous):
            return mechanisms.design_continuous_content_restriction(s).predicted_sw
        if s.k == 3:
            return mechanisms.design_multipath_content_restriction(s).predicted_sw
        return mechanisms.design_content_restriction(s).predicted_sw
    if designer == "combined":
        return mechanisms.design_combined(s).predicted_sw
    raise ScenarioError(f"unknown designer {designer!r}")


def poa_ratio(s: Scenario, designer: str) -> float:
    """Efficiency ratio of the designed outcome against the social optimum."""
    _, sw_star = social_optimum(s)
    if sw_star <= 0.0:
        return 1.0
    return designed_welfare(s, designer) / sw_star


# ---------------------------------------------------------------------------
# Tight instance families from the worst-case constructions
# ---------------------------------------------------------------------------


def worst_case_instance(kind: str, **params) -> Scenario:
    """Adversarial scenario families with their free parameters exposed.

    kinds: ``prop2`` (ramp-to-cap content, homogeneous), ``thm1`` (same
    content, two types), ``thm2`` (alias of prop2 for the restriction bound),
    ``thm3`` (steep ramp with knee delta, two types), ``multipath`` (K = 3
    steep ramp).
    """
    q = params.get("q", 1.0)
    theta0 = params.get("theta0", 0.5)
    if kind in ("prop2", "thm2"):
        c_h = params.get("c_h", theta0 * q)
        return Scenario(
            network=PathNetwork.canonical(c_h),
            types=Homogeneous(theta0),
            content=PiecewiseLinearCap(q, 0.5),
        )
    if kind == "thm1":
        c_h = params.get("c_h", theta0 * q)
        theta1 = params.get("theta1", 1e-6)
        return Scenario(
            network=PathNetwork.canonical(c_h),
            types=TwoType(theta1, 2.0 * theta0 - theta1),
            content=PiecewiseLinearCap(q, 0.5),
        )
    if kind == "thm3":
        delta = params.get("delta", 1e-4)
        c_h = params.get("c_h", 2.0 * theta0 * q)
        theta1 = params.get("theta1", 1e-9)
        return Scenario(
            network=PathNetwork.canonical(c_h),
            types=TwoType(theta1, 2.0 * theta0 - theta1),
            content=PiecewiseLinearCap(q, delta),
        )
    if kind == "multipath":
        k = params.get("k", 3)
        if k != 3:
            raise ScenarioError("multipath worst case supports K = 3 only")
        delta = params.get("delta", 1e-4)
        c_h = params.get("c_h", 2.0 * theta0 * q)
        return Scenario(
            network=PathNetwork.multipath(3, c_h),
            types=Homogeneous(theta0),
            content=PiecewiseLinearCap(q, delta),
        )
    raise ScenarioError(f"unknown worst-case kind {kind!r}")


# ---------------------------------------------------------------------------
# Seeded probes
# ---------------------------------------------------------------------------


def _sample_scenario(rng: np.random.Generator, family: str, theta0: float, need_two_type: bool):
    """Draw one instance; piecewise caps and exponential coverages, with the
    cost scaled log-uniformly against the peak content value."""
    pick = family
    if family == "mixed":
        pick = "piecewise" if rng.random() < 0.5 else "exponential"
    if pick == "piecewise":
        q = float(rng.uniform(0.5, 2.0))
        knee = float(rng.choice([0.5, 0.25, 0.1]))
        content = PiecewiseLinearCap(q, knee)
    elif pick == "exponential":
        content = ExponentialCoverage(
            float(rng.uniform(50, 500)), float(rng.uniform(50, 500)), float(rng.choice([1, 2])), 2
        )
    else:
        raise ScenarioError(f"unknown family {family!r}")
    q_high = 2.0 * float(content.value(0.5))
    c_h = theta0 * q_high * 10.0 ** float(rng.uniform(-3.0, 0.3))
    if need_two_type:
        theta1 = float(rng.uniform(0.0, theta0))
        types = TwoType(theta1, 2.0 * theta0 - theta1)
    else:
        types = Homogeneous(theta0)
    params = {
        "content": type(content).__name__,
        "c_h": c_h,
        "theta1": getattr(types, "theta1", theta0),
    }
    s = Scenario(network=PathNetwork.canonical(c_h), types=types, content=content)
    return s, params


def poa_search(
    family: str,
    designer: str,
    n_samples: int,
    seed: int,
    bound: Optional[float] = None,
    theta0: float = 0.5,
    check_dominance: bool = False,
) -> PoAProbeReport:
    """Sample instances, compute the designer's efficiency ratio on each, and
    report the minimum plus any violations of an asserted bound."""
    if designer not in DESIGNERS:
        raise ScenarioError(f"unknown designer {designer!r}")
    rng = np.random.default_rng(seed)
    need_two = designer in ("side", "restriction", "combined")
    min_ratio = math.inf
    argmin: Dict[str, float] = {}
    violations = 0
    for i in range(n_samples):
        s, params = _sample_scenario(rng, family, theta0, need_two)
        _, sw_star = social_optimum(s)
        if sw_star <= 0.0:
            continue
        sw = designed_welfare(s, designer)
        if check_dominance and designer == "combined":
            sw_g = designed_welfare(s, "side")
            sw_a = designed_welfare(s, "restriction")
            if sw < max(sw_g, sw_a) - 1e-8:
                raise AssertionError(
                    f"combined design dominated on sample {i}: {sw} < {max(sw_g, sw_a)}"
                )
        ratio = sw / sw_star
        if bound is not None and ratio < bound:
            violations += 1
        if ratio < min_ratio:
            min_ratio = ratio
            argmin = dict(params, ratio=ratio, sample=i)
    return PoAProbeReport(family, designer, n_samples, min_ratio, argmin, violations, bound)
