"""Pseudospectral laboratory for Klein-Gordon-Poisson and relativistic quantum hydrodynamics."""

from .kg import KGState, Params, Trajectory, kg_solve, kg_step, plane_wave
from .madelung import HydroState, hydro_to_kg, kg_to_hydro
from .spectral import SpectralGrid

__version__ = "0.1.0"

__all__ = ["HydroState", "KGState", "Params", "SpectralGrid", "Trajectory", "hydro_to_kg",
           "kg_solve", "kg_step", "kg_to_hydro", "plane_wave"]
