"""Spectral solver and decay-rate harness for a drag-coupled compressible/incompressible two-phase flow."""

from .spectral import (ConfigurationError, FrequencyCutoff, SpectralGrid, State, build_grid,
                       cutoff_split, leray_project, to_physical, to_spectral)
from .kernel import apply_propagator, eigenvalues, green_hat, kernel_weights

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "FrequencyCutoff", "SpectralGrid", "State", "build_grid",
    "cutoff_split", "leray_project", "to_physical", "to_spectral",
    "apply_propagator", "eigenvalues", "green_hat", "kernel_weights",
]
