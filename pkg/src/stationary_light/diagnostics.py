"""Per-time-level diagnostics shared by both solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import FieldState, Grid

__all__ = [
    "DiagnosticsSeries",
    "window_weights",
    "windowed_intensity",
    "peak_position",
]


def window_weights(grid: Grid, window) -> np.ndarray:
    """Trapezoid weights (times d_xi) for the nodes inside ``window``.

    Window edges snap to the nearest enclosed node; the two end nodes of the
    enclosed run get half weight.
    """
    lo, hi = float(window[0]), float(window[1])
    tol = 1e-9 * grid.d_xi
    if not hi > lo:
        raise ValueError("window must have xi_hi > xi_lo")
    if lo < grid.xi_min - tol or hi > grid.xi_max + tol:
        raise ValueError(f"window ({lo}, {hi}) lies outside the grid")
    xi = grid.xi
    inside = (xi >= lo - tol) & (xi <= hi + tol)
    w = np.where(inside, grid.d_xi, 0.0)
    idx = np.flatnonzero(inside)
    if idx.size < 2:
        raise ValueError("window contains fewer than two grid nodes")
    w[idx[0]] *= 0.5
    w[idx[-1]] *= 0.5
    return w


def _intensity_density(state: FieldState) -> np.ndarray:
    return np.abs(state.E_plus) ** 2 + np.abs(state.E_minus) ** 2


def windowed_intensity(state: FieldState, window, grid: Grid) -> float:
    """Trapezoid integral of |E+|^2 + |E-|^2 over ``window``."""
    if state.Es.shape != (grid.n_xi,):
        raise ValueError("state does not match the grid")
    return float(np.dot(window_weights(grid, window), _intensity_density(state)))


def peak_position(xi: np.ndarray, values: np.ndarray) -> float:
    """Location of max |values|, refined by a parabola through three samples."""
    mag = np.abs(values)
    i = int(np.argmax(mag))
    if i == 0 or i == len(mag) - 1:
        return float(xi[i])
    y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(xi[i])
    shift = 0.5 * (y0 - y2) / denom
    return float(xi[i] + shift * (xi[1] - xi[0]))


@dataclass
class DiagnosticsSeries:
    tau: np.ndarray = field(default_factory=lambda: np.empty(0))
    I_window: np.ndarray = field(default_factory=lambda: np.empty(0))
    I_total: np.ndarray = field(default_factory=lambda: np.empty(0))
    peak_plus_pos: np.ndarray = field(default_factory=lambda: np.empty(0))
    peak_minus_pos: np.ndarray = field(default_factory=lambda: np.empty(0))
    peak_plus_amp: np.ndarray = field(default_factory=lambda: np.empty(0))
    peak_minus_amp: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        for name in self._fields():
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = {len(getattr(self, name)) for name in self._fields()}
        if len(n) > 1:
            raise ValueError("diagnostic sequences must have equal length")

    @staticmethod
    def _fields():
        return ("tau", "I_window", "I_total", "peak_plus_pos", "peak_minus_pos",
                "peak_plus_amp", "peak_minus_amp")

    def __len__(self):
        return len(self.tau)


class DiagnosticsRecorder:
    """Accumulates diagnostics row by row during a run."""

    def __init__(self, grid: Grid, window=None):
        self.grid = grid
        self.xi = grid.xi
        self.w_window = window_weights(grid, window if window is not None
                                       else (grid.xi_min, grid.xi_max))
        self.w_total = window_weights(grid, (grid.xi_min, grid.xi_max))
        self.rows = []

    def record(self, state: FieldState):
        dens = _intensity_density(state)
        Ep, Em = state.E_plus, state.E_minus
        self.rows.append((
            state.tau,
            float(np.dot(self.w_window, dens)),
            float(np.dot(self.w_total, dens)),
            peak_position(self.xi, Ep),
            peak_position(self.xi, Em),
            float(np.max(np.abs(Ep))),
            float(np.max(np.abs(Em))),
        ))

    def series(self) -> DiagnosticsSeries:
        if not self.rows:
            return DiagnosticsSeries()
        cols = list(zip(*self.rows))
        return DiagnosticsSeries(*(np.array(c) for c in cols))
