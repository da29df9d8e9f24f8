"""Localized orthogonal decomposition multiscale FEM on the unit square."""

from .coefficient import (CoeffDescriptor, CoefficientField, make_checkerboard,
                          make_constant, make_periodic)
from .config import ConfigError, ExperimentConfig, load_config, parse_config, \
    serialize_config
from .fem import AssembledOperators, assemble_load, assemble_mass, \
    assemble_stiffness, build_operators, error_norms, pad_full, solve_reference
from .interpolation import InterpolationOperator, build_interpolation, \
    measure_constants
from .linalg import SaddleSystem, SolverFailure, saddle_solve, spd_solve
from .lod import CorrectorSet, MultiscaleSpace, assemble_corrector_set, \
    build_multiscale_space, fit_decay, measure_corrector_decay, \
    solve_global_corrector, solve_local_corrector, solve_multiscale
from .mesh import MeshHierarchy, Patch, TriMesh, build_uniform_mesh, \
    element_patch, export_text, node_star, refine_hierarchy

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
