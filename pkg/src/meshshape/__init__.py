"""Mesh-quality penalized shape optimization on planar triangular meshes."""

from .mesh import (
    ConnectivityComplex,
    build_complex,
    edge_length,
    height,
    is_admissible,
    make_disc_mesh,
    make_square5_mesh,
    regularized_distance,
    signed_area,
    uniform_refine,
)
from .penalty import (
    AugmentationParams,
    PenaltyParams,
    mesh_quality,
    penalty_gradient,
    penalty_value,
    quality_reciprocal,
)
from .fem import (
    AssembledSystem,
    RhsField,
    assemble,
    constant_rhs,
    model_rhs,
    objective_value,
    shape_derivative,
    solve_adjoint,
    solve_state,
)
from .metrics import MetricSpec, lame_parameters, metric_apply, retract_euclidean, to_gradient
from .geodesic import GeodesicConfig, retract_geodesic
from .optimizer import (
    IterationRecord,
    OptimizerConfig,
    RunResult,
    steepest_descent,
)

__version__ = "0.1.0"
