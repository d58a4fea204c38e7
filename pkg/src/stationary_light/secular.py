"""Hot-gas reference: the secular-approximation equations.

Full pair (normalized units, T = tan^2 theta = 2/a):

    (1 + T) d_tau Es = -d_xi Ed
    d_tau Ed + d_xi Es = -Ed

Slaving the fast difference mode, ``Ed = -d_xi Es``, leaves a diffusion
equation ``d_tau Es = cos^2(theta) d_xi^2 Es`` with a positive (spreading)
coefficient.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .diagnostics import DiagnosticsRecorder
from .model import CFLError, FieldState, Grid, PhysicalParams
from .stencil import first_derivative, second_derivative
from .volterra import EvolveOptions, Trajectory, check_state, reference_peak

__all__ = ["MODES", "secular_evolve", "analytic_gaussian_diffusion", "diffusion_time_step_limit"]

MODES = ("full-pair", "adiabatic-diffusion")


def diffusion_time_step_limit(p: PhysicalParams, grid: Grid) -> float:
    return grid.d_xi ** 2 / (2.0 * p.cos2theta)


def _ssprk3(u, rhs, dt):
    u1 = u + dt * rhs(u)
    u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
    return u / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2))


def secular_evolve(initial: FieldState, p: PhysicalParams, grid: Grid,
                   mode: str = "full-pair", options: Optional[EvolveOptions] = None):
    """Integrate the secular equations; returns ``(Trajectory, DiagnosticsSeries)``.

    Explicit three-stage SSP Runge-Kutta in time. In diffusion mode only Es
    is integrated and Ed is reconstructed as ``-d_xi Es`` at every level.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    opts = options or EvolveOptions()
    if opts.kernel is not None or opts.drive is not None:
        raise ValueError("kernel tables and transient drives do not apply to the secular solver")
    if initial.Es.shape != (grid.n_xi,):
        raise ValueError("initial state does not match the grid")
    if opts.output_every < 1 or grid.n_steps % opts.output_every:
        raise ValueError("output_every must divide the number of steps")
    if not grid.cfl_ok:
        raise CFLError(f"d_tau={grid.d_tau:.6g} exceeds d_xi={grid.d_xi:.6g}")

    D = first_derivative(grid.n_xi, grid.d_xi)
    dt = grid.d_tau
    n = grid.n_xi
    if mode == "adiabatic-diffusion":
        limit = diffusion_time_step_limit(p, grid)
        if dt > limit * (1 + 1e-12):
            raise CFLError(f"d_tau={dt:.6g} exceeds the diffusion limit {limit:.6g}")
        L = p.cos2theta * second_derivative(n, grid.d_xi)

        def rhs(u):
            return L @ u

        def to_state(tau, u):
            return FieldState(tau, u, -(D @ u))

        u = np.array(initial.Es)
        start = to_state(initial.tau, u)
    else:
        inertia = 1.0 + p.tan2theta

        def rhs(u):
            Es, Ed = u[:n], u[n:]
            return np.concatenate([-(D @ Ed) / inertia, -(D @ Es) - Ed])

        def to_state(tau, u):
            return FieldState(tau, u[:n], u[n:])

        u = np.concatenate([initial.Es, initial.Ed])
        start = initial

    rec = DiagnosticsRecorder(grid, opts.window)
    ref = reference_peak(start, None)
    traj = Trajectory([start])
    rec.record(start)
    for k in range(1, grid.n_steps + 1):
        u = _ssprk3(u, rhs, dt)
        state = to_state(initial.tau + k * dt, u)
        check_state(state, ref, opts)
        rec.record(state)
        if k % opts.output_every == 0:
            traj.snapshots.append(state)
    return traj, rec.series()


def analytic_gaussian_diffusion(L0: float, cos2theta: float, tau, xi):
    """Heat-kernel evolution of ``exp(-xi^2/L0^2)`` with diffusivity cos^2(theta).

    The variance grows as ``L0^2/2 + 2 cos^2(theta) tau`` and the peak falls
    as ``(1 + 4 cos^2(theta) tau / L0^2)^(-1/2)``.
    """
    if not L0 > 0:
        raise ValueError("L0 must be positive")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    width2 = L0 ** 2 + 4.0 * cos2theta * tau
    res = np.sqrt(L0 ** 2 / width2) * np.exp(-np.asarray(xi) ** 2 / width2)
    return res.astype(complex)
