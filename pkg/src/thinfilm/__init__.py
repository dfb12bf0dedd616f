"""Spectral data, symmetry reduction, coordinate transforms and a confined
thin-film solver for the large-time behaviour of thin droplets."""

__version__ = "0.1.0"

from .spectrum import (  # noqa: F401
    Eigenmode,
    SpectrumTable,
    WeightedGrid,
    ball_grid,
    inner_H,
    inner_rho,
    lambda_of,
    multiplicity,
    mu_of,
    spectrum_table,
)
