"""crlab: a numerical laboratory for content routing games.

Selfish travelers split between paths of unequal cost while the information
they collect is pooled as a public good; this package solves the resulting
equilibria, designs budget-balanced side payments, content-restriction, and
combined incentive schemes, simulates the revision dynamics, and probes the
price of anarchy, all validated against brute-force oracles.
"""

from .content import (
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
from .game import (
    BangSchedule,
    Combined,
    ConstantCost,
    ContentRestriction,
    EquilibriumReport,
    Homogeneous,
    LinearCost,
    LinearSchedule,
    MultipathSidePayment,
    NoIncentive,
    PathNetwork,
    ProportionalSchedule,
    Scenario,
    ScenarioError,
    SidePayment,
    Stability,
    TwoType,
    UniformContinuous,
    classify_stability,
    equilibrium_no_incentive,
    payoff,
    social_optimum,
    social_welfare,
    verify_equilibrium,
)
from .mechanisms import (
    DesignOutcome,
    DynamicInfoParams,
    RestrictionThresholds,
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
)

__version__ = "0.1.0"
