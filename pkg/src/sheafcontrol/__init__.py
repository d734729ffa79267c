"""Sheaf encodings of network optimal control with Boolean discretization error bounds."""

from .affine import AffineDynamics, NominalStates, build_boolean_scheme, nominal_problem
from .boolrelax import (ThresholdingScheme, build_thresholded_sheaves, error_budget, lipschitz_constant,
                        theorem_bound, thresholding_error_bound)
from .encode import EncodedProblem, build_L, build_M, build_N, build_S, build_T
from .errors import SheafControlError
from .netmodel import DirectedGraph, NetworkProblem, VertexModel, simulate, validate
from .optimize import SolveRequest, SolveResult, relaxation_gap, solve, solve_constrained, solve_relaxed
from .poset import OrderMap, Poset, face_poset
from .problemfile import LoadedProblem, load, loads
from .sheaf import (Sheaf, SheafMorphism, apply_morphism, assignment_distance, consistency_radius,
                    is_global_section, morphism_defect, sections)
from .space import Space, StalkMap

__all__ = [
    "AffineDynamics", "NominalStates", "build_boolean_scheme", "nominal_problem",
    "ThresholdingScheme", "build_thresholded_sheaves", "error_budget", "lipschitz_constant",
    "theorem_bound", "thresholding_error_bound",
    "EncodedProblem", "build_L", "build_M", "build_N", "build_S", "build_T",
    "SheafControlError",
    "DirectedGraph", "NetworkProblem", "VertexModel", "simulate", "validate",
    "SolveRequest", "SolveResult", "relaxation_gap", "solve", "solve_constrained", "solve_relaxed",
    "OrderMap", "Poset", "face_poset",
    "LoadedProblem", "load", "loads",
    "Sheaf", "SheafMorphism", "apply_morphism", "assignment_distance", "consistency_radius",
    "is_global_section", "morphism_defect", "sections",
    "Space", "StalkMap",
]
