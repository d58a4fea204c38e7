"""Stationary light pulses in cold and hot atomic gases.

Cold-gas field equations with Bessel-function memory kernels, the secular
(hot-gas) reference equations, and the analysis used to compare them.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .model import (BoundaryLeakError, CFLError, FieldState, Grid, InstabilityError,
                    PhysicalParams, SolverError, SpinProfile, gaussian_spin,
                    retrieve_initial_fields)
from .special import KernelSign, kernel_f, kernel_laplace, scaled_bessel_i
from .volterra import EvolveOptions, Trajectory, evolve
from .secular import secular_evolve

__all__ = [
    "__version__",
    "BoundaryLeakError", "CFLError", "FieldState", "Grid", "InstabilityError",
    "PhysicalParams", "SolverError", "SpinProfile", "gaussian_spin", "retrieve_initial_fields",
    "KernelSign", "kernel_f", "kernel_laplace", "scaled_bessel_i",
    "EvolveOptions", "Trajectory", "evolve", "secular_evolve",
]
