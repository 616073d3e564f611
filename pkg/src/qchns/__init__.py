"""Quasi-incompressible Cahn-Hilliard-Navier-Stokes solver on a 2D box.

Finite differences on a cell-centred grid, a backward-Euler linear step
with frozen coefficients, a Picard fixed-point loop for the nonlinear
remainder, energy diagnostics and a small laboratory of discrete operator
checks.
"""
from .errors import *  # noqa: F401,F403
from .grid import Grid
from .phase import PhysParams, alpha_from_eps, density, double_well, viscosity

__version__ = "0.1.0"
