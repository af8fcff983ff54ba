"""Exact phase-space evolution of quadratic open quantum systems with linear Lindblad operators."""

__version__ = "0.1.0"

from .lindblad import LindbladVector, OpenSystem, QuadraticHamiltonian  # noqa: E402
from .states import GaussianPolynomialState  # noqa: E402

__all__ = ["__version__", "LindbladVector", "OpenSystem", "QuadraticHamiltonian", "GaussianPolynomialState"]
