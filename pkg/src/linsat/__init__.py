"""Compile constraint models to Max-LINSAT over prime fields, analyze the
dual error-correcting code, and estimate DQI performance against classical
solver baselines."""

from .errors import GuardExceeded, LinsatError, ModelError, ProblemFormatError
from .gf import GF, FieldElement, FieldMatrix, FieldOrder, is_prime
from .instance import LinsatInstance, LinsatVar, to_unweighted
from .model import ConstraintModel, IntVar, Relation, bool_desugar
from .gadgets import (
    Gadget,
    and_gadget,
    distance_gadget,
    instantiate,
    majority3_gadget,
    not_gadget,
    or_gadget,
    repair_duplicates,
    synthesize_gadget,
    xor_gadget,
)
from .codes import CodeView, analyze, find_dependent_row_sets, min_distance, weight_enumerator
from .decoders import LookupDecoder, NearestDecoder, PrangeDecoder, nearest_codeword
from .transform import TransformCertificate, TransformOptions, full_pipeline
from .dqi import DqiEstimate, DqiPolynomial, build_dqi_state, estimate, optimal_polynomial
from .solvers import SolveResult, brute_force, prange_solve, simulated_annealing
from .serialize import ProblemFile, fixture, load_problem, save_problem

__version__ = "0.1.0"

__all__ = [
    "GF",
    "CodeView",
    "ConstraintModel",
    "DqiEstimate",
    "DqiPolynomial",
    "FieldElement",
    "FieldMatrix",
    "FieldOrder",
    "Gadget",
    "GuardExceeded",
    "IntVar",
    "LinsatError",
    "LinsatInstance",
    "LinsatVar",
    "LookupDecoder",
    "ModelError",
    "NearestDecoder",
    "PrangeDecoder",
    "ProblemFile",
    "ProblemFormatError",
    "Relation",
    "SolveResult",
    "TransformCertificate",
    "TransformOptions",
    "analyze",
    "and_gadget",
    "bool_desugar",
    "brute_force",
    "build_dqi_state",
    "distance_gadget",
    "estimate",
    "find_dependent_row_sets",
    "fixture",
    "full_pipeline",
    "instantiate",
    "is_prime",
    "load_problem",
    "majority3_gadget",
    "min_distance",
    "nearest_codeword",
    "not_gadget",
    "optimal_polynomial",
    "or_gadget",
    "prange_solve",
    "repair_duplicates",
    "save_problem",
    "simulated_annealing",
    "synthesize_gadget",
    "to_unweighted",
    "weight_enumerator",
    "xor_gadget",
]
