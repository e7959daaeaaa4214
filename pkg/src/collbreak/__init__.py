"""Truncated discrete collision-induced breakage: simulation and executable property checks."""

from importlib.resources import files

from .config import ConfigError, Scenario, load_scenario, load_suite, parse_scenario
from .integrator import IntegrationConfig, IntegrationError, Trajectory, detect_steady_state, integrate
from .kernels import (
    BreakupTable,
    CollisionKernel,
    DaughterDistribution,
    ValidationReport,
    daughter_eval,
    kernel_eval,
    map_b_to_B,
    validate_B,
    validate_daughter,
    validate_kernel,
)
from .rhs import RhsWorkspace, moment_rate_gme, rhs_B_form, rhs_b_form
from .state import (
    ClusterState,
    InitialData,
    MomentWeight,
    build_dlvp_weight,
    g_moment,
    mass_norm,
    moment,
    power_weight,
    tail_mass,
)
from .verify import (
    CheckReport,
    check_continuous_dependence,
    check_dissipation_identity,
    check_gmoment_monotone,
    check_large_time,
    check_mass_conservation,
    check_support_invariance,
    check_tail_monotonicity,
    truncation_convergence,
)

__version__ = "0.1.0"


def scenario_path(name: str) -> str:
    """Path of a bundled scenario preset, e.g. ``scenario_path("s1_riccati.json")``."""
    return str(files(__name__) / "scenarios" / name)


__all__ = [
    "BreakupTable", "CheckReport", "ClusterState", "CollisionKernel", "ConfigError",
    "DaughterDistribution", "InitialData", "IntegrationConfig", "IntegrationError",
    "MomentWeight", "RhsWorkspace", "Scenario", "Trajectory", "ValidationReport",
    "build_dlvp_weight", "check_continuous_dependence", "check_dissipation_identity",
    "check_gmoment_monotone", "check_large_time", "check_mass_conservation",
    "check_support_invariance", "check_tail_monotonicity", "daughter_eval",
    "detect_steady_state", "g_moment", "integrate", "kernel_eval", "load_scenario",
    "load_suite", "map_b_to_B", "mass_norm", "moment", "moment_rate_gme", "parse_scenario",
    "power_weight", "rhs_B_form", "rhs_b_form", "scenario_path", "tail_mass",
    "truncation_convergence", "validate_B", "validate_daughter", "validate_kernel",
]
