"""Spectral stability analysis of time-periodic symmetric hyperbolic operators."""

__version__ = "0.1.0"

from .operator_model import (
    Certificate,
    OperatorSpec,
    StabilityConstants,
    WeightSequence,
    check_assumptions,
    derivative_norms,
    fixture,
    load_spec,
    stability_constants,
)
from .polynomial import MatrixPolynomial
from .spectral import SpectralBasis, assemble_operator, build_basis

__all__ = [
    "Certificate",
    "MatrixPolynomial",
    "OperatorSpec",
    "SpectralBasis",
    "StabilityConstants",
    "WeightSequence",
    "assemble_operator",
    "build_basis",
    "check_assumptions",
    "derivative_norms",
    "fixture",
    "load_spec",
    "stability_constants",
    "__version__",
]
