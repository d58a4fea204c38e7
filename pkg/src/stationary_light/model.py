"""Parameters, grids, spin profiles and field states in normalized units.

Lengths are in units of the resonant absorption length ``l_abs`` and times in
units of ``Gamma / (g^2 N)``. The single physical parameter is
``a = 2 Omega^2 / (g^2 N) = 2 cot^2(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "SolverError",
    "CFLError",
    "BoundaryLeakError",
    "InstabilityError",
    "PhysicalParams",
    "DimensionalConstants",
    "Grid",
    "SpinProfile",
    "FieldState",
    "gaussian_spin",
    "retrieve_initial_fields",
    "derived_quantities",
]

BOUNDARY_SUPPORT_TOL = 1e-10


class SolverError(RuntimeError):
    """Base class for aborted time evolutions."""


class CFLError(SolverError):
    """Time step too large for the chosen spatial resolution."""


class BoundaryLeakError(SolverError):
    def __init__(self, tau: float, ratio: float):
        super().__init__(
            f"field reached the grid boundary at tau={tau:.6g} "
            f"(boundary/peak = {ratio:.3g}); enlarge the domain"
        )
        self.tau = tau
        self.ratio = ratio


class InstabilityError(SolverError):
    def __init__(self, tau: float, growth: float):
        super().__init__(f"field grew by a factor {growth:.3g} at tau={tau:.6g}")
        self.tau = tau
        self.growth = growth


@dataclass(frozen=True)
class DimensionalConstants:
    """Optional SI constants, only used to convert back to lab units."""

    Gamma: float
    gSqN: float
    c: float = 299_792_458.0

    def __post_init__(self):
        for name in ("Gamma", "gSqN", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def l_abs(self) -> float:
        return self.c * self.Gamma / self.gSqN

    @property
    def time_unit(self) -> float:
        return self.Gamma / self.gSqN


@dataclass(frozen=True)
class PhysicalParams:
    a: float
    units: Optional[DimensionalConstants] = None

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a!r}")

    @classmethod
    def from_tan2theta(cls, tan2theta: float, units=None) -> "PhysicalParams":
        if not tan2theta > 0:
            raise ValueError("tan2theta must be positive")
        return cls(2.0 / tan2theta, units)

    @property
    def tan2theta(self) -> float:
        return 2.0 / self.a

    @property
    def cos2theta(self) -> float:
        return self.a / (self.a + 2.0)

    @property
    def sin2theta(self) -> float:
        return 2.0 / (self.a + 2.0)

    @property
    def control_rabi_sq(self) -> Optional[float]:
        """Omega^2 in 1/s^2, if lab units are attached."""
        if self.units is None:
            return None
        return 0.5 * self.a * self.units.gSqN

    @property
    def beta(self) -> Optional[float]:
        """Kernel rate 2 Omega^2 / Gamma in 1/s, if lab units are attached."""
        if self.units is None:
            return None
        return self.a * self.units.gSqN / self.units.Gamma


def derived_quantities(p: PhysicalParams) -> dict:
    """tan^2, cos^2 of the mixing angle and the group velocity in units of c."""
    return {
        "tan2theta": p.tan2theta,
        "cos2theta": p.cos2theta,
        "vgr_normalized": p.cos2theta,
    }


@dataclass(frozen=True)
class Grid:
    """Uniform lattice in (xi, tau).

    ``d_tau`` is shrunk, if necessary, so that ``tau_max`` is a whole number
    of steps; ``n_steps * d_tau == tau_max`` up to rounding.
    """

    xi_min: float
    xi_max: float
    n_xi: int
    d_tau: float
    tau_max: float

    def __post_init__(self):
        if not self.xi_max > self.xi_min:
            raise ValueError("xi_max must exceed xi_min")
        if int(self.n_xi) != self.n_xi or self.n_xi < 5:
            raise ValueError("n_xi must be an integer >= 5")
        if not (self.d_tau > 0 and self.tau_max > 0):
            raise ValueError("d_tau and tau_max must be positive")
        ratio = self.tau_max / self.d_tau
        n = max(1, math.ceil(ratio - 1e-9 * max(1.0, ratio)))
        object.__setattr__(self, "n_xi", int(self.n_xi))
        object.__setattr__(self, "d_tau", self.tau_max / n)

    @classmethod
    def centered(cls, half_width: float, n_xi: int, tau_max: float,
                 d_tau: Optional[float] = None, cfl: float = 0.8) -> "Grid":
        d_xi = 2.0 * half_width / (n_xi - 1)
        return cls(-half_width, half_width, n_xi, d_tau or cfl * d_xi, tau_max)

    @property
    def d_xi(self) -> float:
        return (self.xi_max - self.xi_min) / (self.n_xi - 1)

    @property
    def n_steps(self) -> int:
        return int(round(self.tau_max / self.d_tau))

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(self.xi_min, self.xi_max, self.n_xi)

    @property
    def cfl_ok(self) -> bool:
        return self.d_tau <= self.d_xi * (1 + 1e-12)


@dataclass(frozen=True, eq=False)
class SpinProfile:
    grid: Grid
    sigma_gs0: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma_gs0, dtype=complex)
        if s.shape != (self.grid.n_xi,):
            raise ValueError("spin profile does not match the grid")
        if not np.all(np.isfinite(s)):
            raise ValueError("spin profile must be finite")
        edge = max(abs(s[0]), abs(s[-1]))
        if edge > BOUNDARY_SUPPORT_TOL:
            raise ValueError(
                f"spin profile is {edge:.3g} at the grid boundary; "
                "it must be compactly supported inside the grid"
            )
        s.setflags(write=False)
        object.__setattr__(self, "sigma_gs0", s)


@dataclass(frozen=True, eq=False)
class FieldState:
    """Sum and difference modes ``Es = E+ + E-`` and ``Ed = E+ - E-``."""

    tau: float
    Es: np.ndarray
    Ed: np.ndarray

    def __post_init__(self):
        Es = np.array(self.Es, dtype=complex)
        Ed = np.array(self.Ed, dtype=complex)
        if Es.shape != Ed.shape or Es.ndim != 1:
            raise ValueError("Es and Ed must be 1-d arrays of equal length")
        Es.setflags(write=False)
        Ed.setflags(write=False)
        object.__setattr__(self, "Es", Es)
        object.__setattr__(self, "Ed", Ed)

    @classmethod
    def from_components(cls, tau: float, E_plus, E_minus) -> "FieldState":
        E_plus = np.asarray(E_plus, dtype=complex)
        E_minus = np.asarray(E_minus, dtype=complex)
        return cls(tau, E_plus + E_minus, E_plus - E_minus)

    @property
    def E_plus(self) -> np.ndarray:
        return 0.5 * (self.Es + self.Ed)

    @property
    def E_minus(self) -> np.ndarray:
        return 0.5 * (self.Es - self.Ed)

    @property
    def peak(self) -> float:
        return float(max(np.max(np.abs(self.Es)), np.max(np.abs(self.Ed))))

    def scaled(self, c: complex) -> "FieldState":
        return FieldState(self.tau, c * self.Es, c * self.Ed)


def gaussian_spin(L0: float, center: float, grid: Grid) -> SpinProfile:
    """Stored coherence ``exp(-(xi - center)^2 / L0^2)`` on the grid."""
    if not L0 > 0:
        raise ValueError("L0 must be positive")
    xi = grid.xi
    return SpinProfile(grid, np.exp(-(((xi - center) / L0) ** 2)))


def retrieve_initial_fields(spin: SpinProfile, amplitude: float = 1.0,
                            grid: Optional[Grid] = None) -> FieldState:
    """Field retrieved at tau=0 from a stored coherence.

    Both counter-propagating optical coherences start equal, so the retrieved
    field is symmetric: ``Es = amplitude * sigma``, ``Ed = 0``. ``amplitude``
    is a free scale; all intensities are meant to be read relative to I(0).
    """
    if grid is not None and grid != spin.grid:
        raise ValueError("spin profile lives on a different grid")
    if not math.isfinite(amplitude):
        raise ValueError("amplitude must be finite")
    Es = amplitude * spin.sigma_gs0
    return FieldState(0.0, Es, np.zeros_like(Es))
