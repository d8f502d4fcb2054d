"""Numerical toolkit for isoperimetry in the Schwarzschild slice and its perturbations."""

__version__ = "0.1.0"

from .errors import DomainError, NumericError
from .schwarzschild import (
    MassParam,
    QuadratureSpec,
    conformal_factor,
    hawking_mass,
    isoperimetric_ratio,
    profile_area,
    radius_for_volume,
    sphere_area,
    sphere_mean_curvature,
    volume_to,
)
from .chart import (
    ChartParams,
    OdeSpec,
    RadialProfile,
    chart_hawking_mass,
    chart_params,
    cone_scalar_curvature,
    first_integral,
    inner_area_minimum,
    solve_w,
    u_gap_bound,
    u_profile,
)
from .metrics import PerturbationSpec, make_metric
from .regions import (
    BallUnion,
    CenteredBall,
    OffsetBall,
    RadialGraph,
    SurfaceQuadrature,
    boundary_area,
    off_center_classify,
    region_volume,
    to_chart,
)
from .deficit import bray_chain, perturbed_deficit_check, schwarzschild_deficit_check, theorem_step_audit
from .minimizer import GraphSurface, OptimizerConfig, area_and_gradient, minimize, project_volume
from .decay import (
    GrowthSurface,
    beta_bound_check,
    coarea_bound_check,
    exterior_radial_integral,
    volume_diff_bound_check,
)
