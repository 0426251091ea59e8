"""Flows driven by rough drivers: vector-field-valued paths with a second level."""
from ._accel import backend
from .core import (
    AnalyticField,
    BracketField,
    ConstantField,
    DriverParams,
    FieldEval,
    FiniteDifferenceField,
    LinearCombination,
    LinearField,
    Partition,
    ScalarField,
    SpaceSample,
    TimeInterval,
    cr_norm,
    dyadic_partition,
    dyadic_time_pairs,
    loglog_slope,
)
from .driver import (
    CoefficientDriver,
    FunctionalDriver,
    GridPath,
    PiecewiseLinearPath,
    RoughDriver,
    additivity_defect,
    chen_defect,
    constant_driver,
    dilate,
    driver_dist,
    driver_norm,
    scalar_linear_driver,
    time_reverse,
    zero_driver,
)
from .errors import (
    BlowUpError,
    ChenViolationError,
    ConfigurationError,
    DerivativeOrderError,
    OffGridError,
    ParameterMismatchError,
    RoughFlowsError,
)
from .flow import (
    Flow,
    FlowSolveReport,
    ODEConfig,
    add_drivers,
    compose,
    euler_defect,
    euler_defect_profile,
    flow_continuity_probe,
    flow_property_defect,
    inverse_flow,
    mu,
    solve_flow,
)
from .lift import (
    BrownianModeField,
    ModeBasis,
    RoughPath,
    VelocityFieldSamples,
    lift_rough_path,
    local_characteristic,
    mode_driver,
    piecewise_linear_lift,
    simulate_brownian_field,
    stratonovich_heun,
)
from .sewing import ItoFunction, TwoIndexMap, flow_functional_sew, ito_reconstruct, sew
from .stochastic import (
    CameronMartinPath,
    RngStreams,
    TailFit,
    cm_bounds_check,
    cm_inner,
    kolmogorov_diagnostics,
    rate_function,
    sigma_gamma,
    smooth_lift,
    smooth_lift_bounds,
    wong_zakai_experiment,
)

__version__ = "0.1.0"
