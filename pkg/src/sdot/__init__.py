"""Semi-discrete optimal transport by coordinate-wise weight decrease."""

from .bounds import BoundReport, compute_bounds, iteration_bound
from .config import ConfigError, RunConfig, parse_config
from .cost import (LogDistanceCost, QuadraticCost, ReflectorCost, ExpressionCost,
                   verify_conditions)
from .geometry import Rectangle, SphericalCap, Polygon, build_grid, normalize_measure
from .oracle import audit, solve_exact
from .partition import Problem, assign_cells, make_targets
from .scheme import SchemeConfig, run_scheme, verify_error_bound

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "compute_bounds", "iteration_bound",
    "ConfigError", "RunConfig", "parse_config",
    "LogDistanceCost", "QuadraticCost", "ReflectorCost", "ExpressionCost", "verify_conditions",
    "Rectangle", "SphericalCap", "Polygon", "build_grid", "normalize_measure",
    "audit", "solve_exact",
    "Problem", "assign_cells", "make_targets",
    "SchemeConfig", "run_scheme", "verify_error_bound",
]
