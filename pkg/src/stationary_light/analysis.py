"""Post-processing and limit-regime checks for the field solvers."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, signal

from .diagnostics import DiagnosticsSeries, peak_position, window_weights, windowed_intensity
from .model import FieldState, Grid, PhysicalParams, gaussian_spin, retrieve_initial_fields
from .special import KernelSign, kernel_f, kernel_laplace
from .stencil import first_derivative
from .volterra import EvolveOptions, evolve

__all__ = [
    "DiagnosticsSeries",
    "FitError",
    "VelocityFit",
    "DecayCharacter",
    "LaplaceReport",
    "windowed_intensity",
    "window_weights",
    "peak_position",
    "decay_character",
    "estimate_group_velocity",
    "modified_group_velocity",
    "implied_kernel_factor",
    "stationary_profile_small_a",
    "verify_laplace_consistency",
    "laplace_quadrature",
    "kernel_laplace_table",
]

NOISE_FLOOR = 1e-8


class FitError(ValueError):
    """Raised when a peak trajectory cannot be fitted by a straight line."""


@dataclass(frozen=True)
class DecayCharacter:
    half_time: Optional[float]
    loglinear_r2: float
    decay_rate: float


@dataclass(frozen=True)
class VelocityFit:
    speed: float
    r_squared: float
    fit_window: tuple
    intercept: float = 0.0

    def __post_init__(self):
        if abs(self.speed) > 1.0 + 1e-9:
            raise FitError(f"fitted speed {self.speed:.4g} exceeds the characteristic speed 1")


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def decay_character(series: DiagnosticsSeries, tau_range=None) -> DecayCharacter:
    """Half time of the windowed intensity and straightness of log I vs tau.

    ``half_time`` is None when the intensity never halves. ``tau_range``
    restricts the log-linear fit (the half time always refers to I(0)).
    """
    tau = np.asarray(series.tau)
    I = np.asarray(series.I_window)
    if len(I) < 2 or not I[0] > 0:
        raise ValueError("windowed intensity must start positive")
    half = None
    below = np.flatnonzero(I <= 0.5 * I[0])
    if below.size:
        j = int(below[0])
        t0, t1, y0, y1 = tau[j - 1], tau[j], I[j - 1], I[j]
        half = float(t1 if y1 == y0 else t0 + (0.5 * I[0] - y0) * (t1 - t0) / (y1 - y0))
    sel = np.ones_like(tau, dtype=bool)
    if tau_range is not None:
        sel = (tau >= tau_range[0] - 1e-12) & (tau <= tau_range[1] + 1e-12)
    t, y = tau[sel], I[sel]
    if np.any(y <= 0):
        raise ValueError("intensity must stay positive for a log-linear fit")
    logy = np.log(y)
    slope, icept = np.polyfit(t, logy, 1)
    return DecayCharacter(half, _r_squared(logy, slope * t + icept), float(-slope))


def estimate_group_velocity(series: DiagnosticsSeries, fit_window,
                            component: str = "plus") -> VelocityFit:
    """Least-squares speed of the |E+| (or |E-|) peak over ``fit_window``."""
    if component not in ("plus", "minus"):
        raise ValueError("component must be 'plus' or 'minus'")
    tau = np.asarray(series.tau)
    pos = np.asarray(series.peak_plus_pos if component == "plus" else series.peak_minus_pos)
    amp = np.asarray(series.peak_plus_amp if component == "plus" else series.peak_minus_amp)
    lo, hi = fit_window
    sel = (tau >= lo - 1e-12) & (tau <= hi + 1e-12)
    if sel.sum() < 3:
        raise FitError("fewer than three samples inside the fit window")
    if amp.size and np.any(amp[sel] < NOISE_FLOOR):
        raise FitError("peak amplitude below the noise floor inside the fit window")
    t, x = tau[sel], pos[sel]
    dx = np.diff(x)
    scale = max(1e-12, float(np.max(np.abs(x))))
    if np.any(dx > 1e-9 * scale) and np.any(dx < -1e-9 * scale):
        raise FitError("peak trajectory is not monotonic in the fit window (not yet split?)")
    slope, icept = np.polyfit(t, x, 1)
    return VelocityFit(float(slope), _r_squared(x, slope * t + icept),
                       (float(lo), float(hi)), float(icept))


def modified_group_velocity(p: PhysicalParams, f: float = 1.0) -> float:
    """``2 cos^2 / (2 cos^2 + f sin^2)`` in units of c."""
    c2, s2 = p.cos2theta, p.sin2theta
    return 2.0 * c2 / (2.0 * c2 + f * s2)


def implied_kernel_factor(speed: float, p: PhysicalParams) -> float:
    """The f for which ``modified_group_velocity`` equals ``speed``."""
    if not 0 < abs(speed) <= 1:
        raise ValueError("speed must lie in (0, 1]")
    return 2.0 * p.cos2theta * (1.0 / abs(speed) - 1.0) / p.sin2theta


def _exp_kernel_convolution(src: np.ndarray, h: float) -> np.ndarray:
    # sum_j 0.5 exp(-|xi_i - xi_j|) src_j h via forward and backward sweeps.
    r = math.exp(-h)
    fwd = signal.lfilter([1.0], [1.0, -r], src)
    bwd = signal.lfilter([1.0], [1.0, -r], src[::-1])[::-1]
    return 0.5 * h * (fwd + bwd - src)


def stationary_profile_small_a(initial: FieldState, grid: Grid):
    """Stationary profiles reached for a -> 0.

    Solves ``(d_xi^2 - 1) Es = -(Es0 - d_xi Ed0)`` and
    ``(d_xi^2 - 1) Ed = -(Ed0 - d_xi Es0)`` on the open line with the Green's
    function ``exp(-|xi - xi'|)/2``. Returns ``(Es_profile, Ed_profile)``.
    """
    if initial.Es.shape != (grid.n_xi,):
        raise ValueError("initial state does not match the grid")
    D = first_derivative(grid.n_xi, grid.d_xi)
    src_s = initial.Es - D @ initial.Ed
    src_d = initial.Ed - D @ initial.Es
    h = grid.d_xi

    def conv(v):
        return _exp_kernel_convolution(v.real, h) + 1j * _exp_kernel_convolution(v.imag, h)

    return conv(src_s), conv(src_d)


@dataclass
class LaplaceReport:
    a: float
    s_values: np.ndarray
    residual_s: np.ndarray
    residual_d: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        if len(self.s_values) == 0:
            return 0.0
        return float(max(np.max(self.residual_s), np.max(self.residual_d)))


def _relative(diff: np.ndarray, ref: np.ndarray) -> float:
    top = float(np.max(np.abs(diff)))
    bottom = float(np.max(np.abs(ref)))
    if bottom == 0.0:
        return 0.0 if top == 0.0 else math.inf
    return top / bottom


def _linear_laplace_weights(tau: np.ndarray, s: float) -> np.ndarray:
    # Exact integral of exp(-s tau) against the piecewise-linear interpolant
    # of equally spaced samples; no loss of accuracy when s * d_tau is large.
    h = tau[1] - tau[0]
    z = s * h
    if z < 1e-4:
        left = h * (0.5 - z / 6.0 + z * z / 24.0)
        right = h * (0.5 - z / 3.0 + z * z / 8.0)
    else:
        ez = math.exp(-z)
        left = h * (z - 1.0 + ez) / (z * z)
        right = h * (1.0 - ez - z * ez) / (z * z)
    decay = np.exp(-s * tau)
    w = np.zeros(len(tau))
    w[:-1] += left * decay[:-1]
    w[1:] += right * decay[:-1]
    return w


def verify_laplace_consistency(p: PhysicalParams, grid: Grid,
                               s_values: Sequence[float] = (0.5, 1.0, 2.0),
                               initial: Optional[FieldState] = None) -> LaplaceReport:
    """Check the Laplace-domain resolvent relations on a computed trajectory.

    The trajectory is transformed in tau (exact weights for the
    piecewise-linear interpolant in time) and the relations

        s Es~ - Es(0) = -d_xi Ed~ / (1 + f_minus~(s))
        s Ed~ - Ed(0) = -d_xi Es~ / (1 + f_plus~(s))

    are evaluated at every grid point. Residuals are max-norm errors relative
    to the left-hand sides. The default initial state is a Gaussian of width
    one twelfth of the half domain.
    """
    if initial is None:
        half = 0.5 * (grid.xi_max - grid.xi_min)
        center = 0.5 * (grid.xi_max + grid.xi_min)
        initial = retrieve_initial_fields(gaussian_spin(half / 12.0, center, grid))
    s_values = np.asarray(list(s_values), dtype=float)
    notes = []
    for s in s_values:
        if grid.tau_max * s < 5:
            msg = f"tau_max*s = {grid.tau_max * s:.3g} < 5 for s={s:g}; transform tail not converged"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    traj, _ = evolve(initial, p, grid, EvolveOptions(output_every=1))
    tau = traj.taus
    Es, Ed = traj.Es, traj.Ed
    D = first_derivative(grid.n_xi, grid.d_xi)
    res_s, res_d = [], []
    for s in s_values:
        wt = _linear_laplace_weights(tau, s)
        Ls = wt @ Es
        Ld = wt @ Ed
        lhs_s = s * Ls - initial.Es
        lhs_d = s * Ld - initial.Ed
        rhs_s = -(D @ Ld) / (1.0 + kernel_laplace(KernelSign.MINUS, s, p.a))
        rhs_d = -(D @ Ls) / (1.0 + kernel_laplace(KernelSign.PLUS, s, p.a))
        res_s.append(_relative(lhs_s - rhs_s, lhs_s))
        res_d.append(_relative(lhs_d - rhs_d, lhs_d))
    return LaplaceReport(p.a, s_values, np.array(res_s), np.array(res_d), notes)


def laplace_quadrature(sign, s: float, a: float) -> float:
    """``int_0^inf exp(-s tau) f(a tau) dtau`` by adaptive quadrature.

    Independent of the closed form; used to cross-check it.
    """
    sign = KernelSign.coerce(sign)
    if not (s > 0 and a > 0):
        raise ValueError("s and a must be positive")
    t_end = 45.0 / s
    t_start = min(1.0 / a, 1.0 / s) * 1e-3
    edges = np.concatenate([[0.0], np.geomspace(t_start, t_end, 60)])

    def fn(t):
        return math.exp(-s * t) * kernel_f(sign, a * t)

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(fn, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    return total


def kernel_laplace_table(a_values, s_values):
    """Rows ``(a, s, closed_plus, quad_plus, closed_minus, quad_minus)``."""
    rows = []
    for a in a_values:
        for s in s_values:
            rows.append((
                float(a), float(s),
                kernel_laplace(KernelSign.PLUS, s, a), laplace_quadrature(KernelSign.PLUS, s, a),
                kernel_laplace(KernelSign.MINUS, s, a), laplace_quadrature(KernelSign.MINUS, s, a),
            ))
    return rows
