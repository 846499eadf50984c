"""Symmetric periodic orbits of the n-body problem by projected action minimisation."""

from .action import ActionFunctional, action_eval, assemble_kinetic, kinetic_scalar_blocks
from .diagnostics import (
    DiagnosticsReport,
    OrbitVerification,
    check_admissibility,
    check_coercivity,
    check_frame_compatibility,
    check_rotating_circle,
    diagnose,
    verify_orbit,
    verify_samples,
)
from .errors import (
    AliasError,
    ClosureOverflow,
    CollisionError,
    EquiOrbError,
    ParseError,
    SchemaError,
    UnsupportedDimension,
    ValidationError,
)
from .group import FiniteGroup, GroupElement, Permutation, SymmetryProblem, build_problem, group_closure
from .io import (
    export_trajectory,
    import_trajectory,
    parse_problem,
    read_path_from_file,
    store_result,
)
from .optimize import (
    MinimizationResult,
    OptimizerOptions,
    find_orbits,
    initial_guess,
    minimize,
    newton_refine,
)
from .path import build_path, extend_to_period
from .potential import PotentialModel
from .projectors import coefficient_projector, project_coefficients
from .render import render_orbit

__version__ = "0.1.0"

__all__ = [
    "action_eval",
    "ActionFunctional",
    "AliasError",
    "assemble_kinetic",
    "build_path",
    "build_problem",
    "check_admissibility",
    "check_coercivity",
    "check_frame_compatibility",
    "check_rotating_circle",
    "ClosureOverflow",
    "coefficient_projector",
    "CollisionError",
    "diagnose",
    "DiagnosticsReport",
    "EquiOrbError",
    "export_trajectory",
    "extend_to_period",
    "find_orbits",
    "FiniteGroup",
    "group_closure",
    "GroupElement",
    "import_trajectory",
    "initial_guess",
    "kinetic_scalar_blocks",
    "MinimizationResult",
    "minimize",
    "newton_refine",
    "OptimizerOptions",
    "OrbitVerification",
    "parse_problem",
    "ParseError",
    "Permutation",
    "PotentialModel",
    "project_coefficients",
    "read_path_from_file",
    "render_orbit",
    "SchemaError",
    "store_result",
    "SymmetryProblem",
    "UnsupportedDimension",
    "ValidationError",
    "verify_orbit",
    "verify_samples",
]
