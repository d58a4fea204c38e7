"""Cold-gas evolution of the sum/difference modes with full memory kernels.

The equations solved are

    d_tau Es + d_xi Ed = - int_0^tau f_minus(a (tau - s)) d_s Es ds
    d_tau Ed + d_xi Es = - int_0^tau f_plus (a (tau - s)) d_s Ed ds

The history integral is discretized with the trapezoid rule in the lag, the
time derivatives of both modes are stored at every step, and the fields are
advanced with the trapezoid rule in time. Because the lag-zero sample
multiplies the current derivative, every step is a linear solve; the
corresponding matrix is constant for a run and is factorized once.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .diagnostics import DiagnosticsRecorder
from .model import (
    BoundaryLeakError,
    CFLError,
    FieldState,
    Grid,
    InstabilityError,
    PhysicalParams,
    SpinProfile,
)
from .special import KernelSign, kernel_f
from .stencil import first_derivative

__all__ = [
    "WORKERS_ENV",
    "KernelTable",
    "History",
    "Trajectory",
    "TransientDrive",
    "EvolveOptions",
    "build_kernel_table",
    "secular_kernel_table",
    "memory_term",
    "step",
    "evolve",
    "transient_drive",
]

WORKERS_ENV = "STATIONARY_LIGHT_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel samples at lags ``k * d_tau`` for k = 0..K.

    ``samples_minus`` acts on the history of Es, ``samples_plus`` on Ed.
    Lags beyond K contribute nothing.
    """

    a: float
    d_tau: float
    samples_plus: np.ndarray
    samples_minus: np.ndarray
    truncated: bool = False
    kind: str = "cold"

    @property
    def K(self) -> int:
        return len(self.samples_plus) - 1

    def samples(self, sign) -> np.ndarray:
        sign = KernelSign.coerce(sign)
        return self.samples_plus if sign is KernelSign.PLUS else self.samples_minus

    def lag_weights(self, sign, n: int) -> np.ndarray:
        """Trapezoid weights of the memory integral at step n.

        Entry j multiplies the stored derivative at step j, j = 0..n.
        """
        g = self.samples(sign)
        w = np.zeros(n + 1)
        lags = n - np.arange(n + 1)
        ok = lags <= self.K
        w[ok] = g[lags[ok]]
        if n > 0:
            w[0] *= 0.5
            w[n] *= 0.5
        else:
            w[0] = 0.0
        return self.d_tau * w


def build_kernel_table(p: PhysicalParams, grid: Grid,
                       truncation_eps: float = 0.0) -> KernelTable:
    """Precompute ``f_plus(a k d_tau)`` and ``f_minus(a k d_tau)``.

    With ``truncation_eps > 0`` the table stops at the first lag where both
    kernels are below the threshold (never beyond the run length).
    """
    if truncation_eps < 0:
        raise ValueError("truncation_eps must be non-negative")
    K = grid.n_steps
    x = p.a * grid.d_tau * np.arange(K + 1)
    fp = kernel_f(KernelSign.PLUS, x)
    fm = kernel_f(KernelSign.MINUS, x)
    truncated = False
    if truncation_eps > 0:
        below = np.flatnonzero((fp < truncation_eps) & (fm < truncation_eps))
        if below.size:
            K = int(below[0])
            fp, fm = fp[:K + 1], fm[:K + 1]
            truncated = True
    fp.setflags(write=False)
    fm.setflags(write=False)
    return KernelTable(p.a, grid.d_tau, fp, fm, truncated)


def secular_kernel_table(p: PhysicalParams, grid: Grid,
                         delta_weight: str = "full") -> KernelTable:
    """Kernels replaced by their hot-gas limits.

    ``f_plus -> 1`` and ``f_minus -> (2/a) delta``. With ``delta_weight="full"``
    the delta carries its whole weight 2/a = tan^2(theta), which reproduces
    ``(1 + tan^2 theta) d_tau Es = -d_xi Ed``. With ``"half"`` only half of it
    falls inside the integration range (effective weight 1/a).
    """
    if delta_weight not in ("full", "half"):
        raise ValueError("delta_weight must be 'full' or 'half'")
    weight = 2.0 / p.a if delta_weight == "full" else 1.0 / p.a
    K = grid.n_steps
    fm = np.zeros(K + 1)
    # The trapezoid gives the lag-0 sample weight d_tau / 2.
    fm[0] = 2.0 * weight / grid.d_tau
    fp = np.ones(K + 1)
    return KernelTable(p.a, grid.d_tau, fp, fm, False, kind=f"secular-{delta_weight}")


class History:
    """Stored time derivatives of Es and Ed at every internal step."""

    def __init__(self, grid: Grid, capacity: Optional[int] = None):
        self.d_tau = grid.d_tau
        cap = (grid.n_steps + 1) if capacity is None else capacity
        self._s = np.zeros((cap, grid.n_xi), dtype=complex)
        self._d = np.zeros((cap, grid.n_xi), dtype=complex)
        self.count = 0

    @classmethod
    def from_arrays(cls, d_tau: float, dEs, dEd) -> "History":
        dEs = np.atleast_2d(np.asarray(dEs, dtype=complex))
        dEd = np.atleast_2d(np.asarray(dEd, dtype=complex))
        if dEs.shape != dEd.shape:
            raise ValueError("Es and Ed histories differ in shape")
        h = cls.__new__(cls)
        h.d_tau = float(d_tau)
        h._s, h._d = dEs.copy(), dEd.copy()
        h.count = dEs.shape[0]
        return h

    def append(self, dEs: np.ndarray, dEd: np.ndarray):
        if self.count == self._s.shape[0]:
            grow = max(16, self.count)
            self._s = np.vstack([self._s, np.zeros((grow, self._s.shape[1]), complex)])
            self._d = np.vstack([self._d, np.zeros((grow, self._d.shape[1]), complex)])
        self._s[self.count] = dEs
        self._d[self.count] = dEd
        self.count += 1

    def rows(self, sign) -> np.ndarray:
        """Derivative history the given kernel acts on (minus: Es, plus: Ed)."""
        buf = self._s if KernelSign.coerce(sign) is KernelSign.MINUS else self._d
        return buf[:self.count]

    @property
    def dEs(self) -> np.ndarray:
        return self._s[:self.count]

    @property
    def dEd(self) -> np.ndarray:
        return self._d[:self.count]


def _check_spacing(history: History, table: KernelTable):
    if not math.isclose(history.d_tau, table.d_tau, rel_tol=1e-12):
        raise ValueError(
            f"history spacing {history.d_tau!r} does not match kernel table "
            f"spacing {table.d_tau!r}"
        )


def _weighted_row_sum(w: np.ndarray, rows: np.ndarray, pool=None, chunks=1) -> np.ndarray:
    # Each output column is accumulated over rows in the same order however
    # the columns are split among workers, so results do not depend on it.
    if pool is None or chunks <= 1:
        return np.einsum("j,jk->k", w, rows)
    n = rows.shape[1]
    bounds = np.linspace(0, n, chunks + 1).astype(int)
    out = np.empty(n, dtype=np.result_type(w, rows))

    def work(i):
        lo, hi = bounds[i], bounds[i + 1]
        out[lo:hi] = np.einsum("j,jk->k", w, rows[:, lo:hi])

    list(pool.map(work, range(chunks)))
    return out


def memory_term(sign, history: History, table: KernelTable) -> np.ndarray:
    """Trapezoid quadrature of ``int_0^tau f(a(tau - s)) dE/ds ds``.

    ``tau`` is the time of the newest stored derivative. The minus kernel
    acts on the Es history, the plus kernel on the Ed history.
    """
    _check_spacing(history, table)
    rows = history.rows(sign)
    if rows.shape[0] == 0:
        raise ValueError("empty history")
    n = rows.shape[0] - 1
    return _weighted_row_sum(table.lag_weights(sign, n), rows)


@dataclass(frozen=True, eq=False)
class TransientDrive:
    """Source from the stored coherence, decaying like ``f_minus(a tau)``."""

    spin: SpinProfile
    kappa: float


def transient_drive(spin: SpinProfile, kappa: float, tau: float,
                    a: float) -> np.ndarray:
    """Source added to each of the E+ and E- equations at time ``tau``.

    The Es equation receives twice this, the Ed equation nothing.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return -kappa * spin.sigma_gs0 * kernel_f(KernelSign.MINUS, a * tau)


class _Stepper:
    """Trapezoid-in-time integrator with the lag-0 memory term implicit."""

    def __init__(self, grid: Grid, table: KernelTable, drive=None, pool=None, chunks=1):
        if not grid.cfl_ok:
            raise CFLError(
                f"d_tau={grid.d_tau:.6g} exceeds d_xi={grid.d_xi:.6g} "
                "(characteristic speed is 1 in normalized units)"
            )
        if not math.isclose(table.d_tau, grid.d_tau, rel_tol=1e-12):
            raise ValueError("kernel table and grid have different d_tau")
        self.grid = grid
        self.table = table
        self.drive = drive
        self.pool = pool
        self.chunks = chunks
        self.dt = grid.d_tau
        self.D = first_derivative(grid.n_xi, grid.d_xi)
        self.c_minus = 1.0 + 0.5 * self.dt * table.samples_minus[0]
        self.c_plus = 1.0 + 0.5 * self.dt * table.samples_plus[0]
        self.lu = _schur_factor(grid.n_xi, grid.d_xi, self.dt, self.c_minus, self.c_plus)

    def _source_s(self, tau: float):
        if self.drive is None:
            return 0.0
        return 2.0 * transient_drive(self.drive.spin, self.drive.kappa, tau, self.table.a)

    def _past(self, sign, history: History, n: int) -> np.ndarray:
        # Memory at step n without the lag-0 term (derivatives 0..n-1 only).
        rows = history.rows(sign)[:n]
        w = self.table.lag_weights(sign, n)[:n]
        return _weighted_row_sum(w, rows, self.pool, self.chunks)

    def initial_derivatives(self, state: FieldState):
        # The history integral vanishes at tau = 0.
        dEs = -(self.D @ state.Ed) + self._source_s(state.tau)
        dEd = -(self.D @ state.Es)
        return dEs, dEd

    def advance(self, state: FieldState, history: History) -> FieldState:
        _check_spacing(history, self.table)
        if history.count == 0:
            history.append(*self.initial_derivatives(state))
        n = history.count - 1
        dt = self.dt
        tau_new = state.tau + dt
        Ps = self._past(KernelSign.MINUS, history, n + 1)
        Pd = self._past(KernelSign.PLUS, history, n + 1)
        src = self._source_s(tau_new)
        am = 0.5 * dt / self.c_minus
        ap = 0.5 * dt / self.c_plus
        rs = state.Es + 0.5 * dt * history.dEs[n] + am * (src - Ps)
        rd = state.Ed + 0.5 * dt * history.dEd[n] - ap * Pd
        # Es + am D Ed = rs ; Ed + ap D Es = rd  ->  (I - am ap D^2) Ed = rd - ap D rs
        Ed = _solve(self.lu, rd - ap * (self.D @ rs))
        Es = rs - am * (self.D @ Ed)
        dEs = (-(self.D @ Ed) - Ps + src) / self.c_minus
        dEd = (-(self.D @ Es) - Pd) / self.c_plus
        history.append(dEs, dEd)
        return FieldState(tau_new, Es, Ed)


@functools.lru_cache(maxsize=8)
def _schur_factor(n, h, dt, c_minus, c_plus):
    D = first_derivative(n, h)
    am = 0.5 * dt / c_minus
    ap = 0.5 * dt / c_plus
    M = (sps.identity(n, format="csc") - am * ap * (D @ D)).tocsc()
    return spla.splu(M)


def _solve(lu, rhs: np.ndarray) -> np.ndarray:
    both = np.column_stack([rhs.real, rhs.imag])
    x = lu.solve(both)
    return x[:, 0] + 1j * x[:, 1]


def step(state: FieldState, history: History, table: KernelTable, grid: Grid,
         drive: Optional[TransientDrive] = None) -> FieldState:
    """Advance ``state`` by one ``d_tau``; the new derivatives are appended
    to ``history`` (which is seeded from ``state`` when empty)."""
    return _Stepper(grid, table, drive).advance(state, history)


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    history: Optional[History] = None

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.snapshots])

    @property
    def Es(self) -> np.ndarray:
        return np.array([s.Es for s in self.snapshots])

    @property
    def Ed(self) -> np.ndarray:
        return np.array([s.Ed for s in self.snapshots])

    @property
    def final(self) -> FieldState:
        return self.snapshots[-1]

    def at(self, tau: float) -> FieldState:
        taus = self.taus
        i = int(np.argmin(np.abs(taus - tau)))
        if not math.isclose(taus[i], tau, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"no snapshot at tau={tau}")
        return self.snapshots[i]


@dataclass
class EvolveOptions:
    output_every: int = 1
    window: Optional[tuple] = None
    truncation_eps: float = 0.0
    kernel: Optional[KernelTable] = None
    drive: Optional[TransientDrive] = None
    leak_tol: float = 1e-6
    growth_limit: float = 10.0
    check_boundary: bool = True
    workers: Optional[int] = None


def reference_peak(initial: FieldState, drive: Optional[TransientDrive]) -> float:
    ref = initial.peak
    if drive is not None:
        ref = max(ref, 2.0 * abs(drive.kappa) * float(np.max(np.abs(drive.spin.sigma_gs0))))
    return ref


def check_state(state: FieldState, ref: float, opts) -> None:
    """Abort on runaway growth or on field reaching the edges."""
    if ref == 0.0:
        return
    peak = state.peak
    if not np.isfinite(peak) or peak > opts.growth_limit * ref:
        raise InstabilityError(state.tau, peak / ref)
    if opts.check_boundary:
        edge = max(np.max(np.abs(state.Es[[0, 1, -2, -1]])),
                   np.max(np.abs(state.Ed[[0, 1, -2, -1]])))
        if edge > opts.leak_tol * ref:
            raise BoundaryLeakError(state.tau, edge / ref)


def evolve(initial: FieldState, p: PhysicalParams, grid: Grid,
           options: Optional[EvolveOptions] = None):
    """Integrate from ``initial`` to ``grid.tau_max``.

    Returns ``(Trajectory, DiagnosticsSeries)``. Field snapshots are kept
    every ``options.output_every`` steps; diagnostics are recorded at every
    step. Results are bit-identical for any worker count.
    """
    opts = options or EvolveOptions()
    if initial.Es.shape != (grid.n_xi,):
        raise ValueError("initial state does not match the grid")
    if opts.output_every < 1 or grid.n_steps % opts.output_every:
        raise ValueError("output_every must divide the number of steps")
    if opts.drive is not None:
        if initial.peak != 0.0:
            raise ValueError("transient drive requires zero initial fields")
        if opts.drive.spin.grid != grid:
            raise ValueError("drive spin profile lives on a different grid")
    table = opts.kernel or build_kernel_table(p, grid, opts.truncation_eps)
    if not math.isclose(table.a, p.a, rel_tol=1e-12):
        raise ValueError("kernel table was built for a different a")

    workers = opts.workers or default_workers()
    chunks = min(workers, max(1, grid.n_xi // 256))
    pool = ThreadPoolExecutor(max_workers=chunks) if chunks > 1 else None
    try:
        stepper = _Stepper(grid, table, opts.drive, pool, chunks)
        history = History(grid)
        rec = DiagnosticsRecorder(grid, opts.window)
        ref = reference_peak(initial, opts.drive)
        state = initial
        traj = Trajectory([state], history)
        rec.record(state)
        for n in range(1, grid.n_steps + 1):
            state = stepper.advance(state, history)
            # Pin tau to the lattice to avoid drift from repeated addition.
            state = FieldState(initial.tau + n * grid.d_tau, state.Es, state.Ed)
            check_state(state, ref, opts)
            rec.record(state)
            if n % opts.output_every == 0:
                traj.snapshots.append(state)
    finally:
        if pool is not None:
            pool.shutdown()
    return traj, rec.series()
