"""Level-set mean curvature flow on uniform grids, with residual checks for its weak solution concepts."""

from .errors import (
    ConstructionError,
    InsufficientData,
    InvalidArgument,
    MCFError,
    NestingViolation,
    OutOfDomainError,
    StabilityError,
)
from .fields import Grid2, ScalarField, SpaceTimeField, make_grid, read_snapshot, write_snapshot
from .geometry import (
    Contour,
    ContourField,
    FinitePerimeterSet,
    boundary_distance,
    curvature_on_contour,
    marching_squares,
    normal_velocity_on_contour,
    normalize_representative,
    perimeter,
    sublevel_set,
    sym_diff_area,
)
from .initial_data import DatumSpec, build_datum, two_circles_datum, well_prepared_norm
from .reconstruct import LayerCakeParams, check_level_consistency, layer_cake, sup_norm_distance
from .solver import SolverParams, check_viscosity_inequalities, evolve, step_explicit
from .verify import LevelFamily, TestFunction, VerificationReport, verify_variational

__version__ = "0.1.0"

__all__ = [
    "ConstructionError",
    "Contour",
    "ContourField",
    "DatumSpec",
    "FinitePerimeterSet",
    "Grid2",
    "InsufficientData",
    "InvalidArgument",
    "LayerCakeParams",
    "LevelFamily",
    "MCFError",
    "NestingViolation",
    "OutOfDomainError",
    "ScalarField",
    "SolverParams",
    "SpaceTimeField",
    "StabilityError",
    "TestFunction",
    "VerificationReport",
    "boundary_distance",
    "build_datum",
    "check_level_consistency",
    "check_viscosity_inequalities",
    "curvature_on_contour",
    "evolve",
    "layer_cake",
    "make_grid",
    "marching_squares",
    "normal_velocity_on_contour",
    "normalize_representative",
    "perimeter",
    "read_snapshot",
    "step_explicit",
    "sublevel_set",
    "sup_norm_distance",
    "sym_diff_area",
    "two_circles_datum",
    "verify_variational",
    "well_prepared_norm",
    "write_snapshot",
]
