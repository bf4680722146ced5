"""Monotone and conditionally monotone products in finite dimensions.

Recursive moment evaluators, exact Fock space and Hilbert bimodule models,
products of completely positive maps and numerical checks of their
properties.
"""
from .algebra import (
    AlgebraSpec,
    BimoduleMap,
    BModule,
    CondExpSpec,
    LinearMap,
    SCALARS,
    StateSpec,
)
from .bimodule import MonotoneBimodule, build_free_bimodule, build_monotone_bimodule
from .cp import FreeProductMap, MonotoneProductMap, cp_check_choi, cp_check_gram
from .embedding import build_cp_embedding, nested_embedding
from .errors import MonofockError
from .fock import MonotoneFock, build_fock
from .moments import eval_cmonotone, eval_map_product, eval_monotone, eval_nested
from .report import VerificationReport
from .scenario import Scenario, load_scenario
from .words import Family, Letter, Member, NCPoly, Word, reduce

__version__ = "0.1.0"

__all__ = [
    "AlgebraSpec",
    "BimoduleMap",
    "BModule",
    "CondExpSpec",
    "LinearMap",
    "SCALARS",
    "StateSpec",
    "MonotoneBimodule",
    "build_free_bimodule",
    "build_monotone_bimodule",
    "FreeProductMap",
    "MonotoneProductMap",
    "cp_check_choi",
    "cp_check_gram",
    "build_cp_embedding",
    "nested_embedding",
    "MonofockError",
    "MonotoneFock",
    "build_fock",
    "eval_cmonotone",
    "eval_map_product",
    "eval_monotone",
    "eval_nested",
    "VerificationReport",
    "Scenario",
    "load_scenario",
    "Family",
    "Letter",
    "Member",
    "NCPoly",
    "Word",
    "reduce",
]
