"""Numerical laboratory for reduced amalgamated free product C*-algebras."""

from .algebra import (
    AlgebraWithExpectation,
    CenteredElement,
    MatrixStarAlgebra,
    algebra_from_json,
    center,
    diagonal_base,
    diagonal_in_matn,
    expectation_apply,
    function_algebra_with_state,
    scalar_base,
    scalars_in_matn,
    star_algebra,
    validate_expectation,
)
from .errors import (
    AmalgamError,
    CapacityError,
    ConfigError,
    HypothesisError,
    StructureError,
    TruncationError,
)
from .fock import FockBasisLabel, FockContext, FockOperator, build_fock
from .gns import GnsModule, ModuleVector, build_gns, inner_product, split_unit
from .shift import (
    DecayCurve,
    Mixture,
    ShiftExperiment,
    average_family,
    cesaro_expectation,
    decay_curve,
    shift_word,
)
from .words import (
    NormReport,
    Word,
    WordFamily,
    block_decomposition,
    family_operator,
    family_report,
    haagerup_upper,
    ladder_identity_residual,
    norm_lower,
    word_operator,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraWithExpectation",
    "AmalgamError",
    "CapacityError",
    "CenteredElement",
    "ConfigError",
    "DecayCurve",
    "FockBasisLabel",
    "FockContext",
    "FockOperator",
    "GnsModule",
    "HypothesisError",
    "MatrixStarAlgebra",
    "Mixture",
    "ModuleVector",
    "NormReport",
    "ShiftExperiment",
    "StructureError",
    "TruncationError",
    "Word",
    "WordFamily",
    "algebra_from_json",
    "average_family",
    "block_decomposition",
    "build_fock",
    "build_gns",
    "center",
    "cesaro_expectation",
    "decay_curve",
    "diagonal_base",
    "diagonal_in_matn",
    "expectation_apply",
    "family_operator",
    "family_report",
    "function_algebra_with_state",
    "haagerup_upper",
    "inner_product",
    "ladder_identity_residual",
    "norm_lower",
    "scalar_base",
    "scalars_in_matn",
    "shift_word",
    "split_unit",
    "star_algebra",
    "validate_expectation",
    "word_operator",
]
