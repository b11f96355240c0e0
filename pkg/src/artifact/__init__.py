"""Thermodynamic cooling protocols, cost ledgers and complexity measures."""

from .spectra import (
    DiagonalState,
    NumericalError,
    PermutationUnitary,
    ProductSpace,
    Spectrum,
    apply_permutation,
    entropy,
    functionals,
    marginal,
    mutual_information,
    relative_entropy,
    tensor,
    thermal_state,
)

__version__ = "0.1.0"
