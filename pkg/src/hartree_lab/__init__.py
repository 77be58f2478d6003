"""Desk-scale laboratory for the mean-field and semiclassical limit of interacting fermions in one dimension."""

from .errors import *  # noqa: F401,F403
from .spectral import Field, Grid, Potential, potential_norms
from .states import DensityMatrix, OrbitalSet, plane_wave, localized, random_slater
from .fitting import PowerFit, fit_power_law

__version__ = "0.1.0"

__all__ = ["Field", "Grid", "Potential", "potential_norms", "DensityMatrix", "OrbitalSet",
           "plane_wave", "localized", "random_slater", "PowerFit", "fit_power_law", "__version__"]
