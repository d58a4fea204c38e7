"""Exponentially scaled modified Bessel functions and the memory kernels.

Only the scaled forms ``exp(-x) * I_n(x)`` are ever evaluated, so nothing
overflows for large arguments. Below ``SERIES_CROSSOVER`` the ascending power
series is summed; above it the Hankel asymptotic expansion is used. The
difference kernel ``f_minus`` gets its own asymptotic series because the
leading terms of ``I_0`` and ``I_1`` cancel exactly.
"""
from __future__ import annotations

import enum
import math

import numpy as np

__all__ = [
    "KernelSign",
    "SERIES_CROSSOVER",
    "scaled_bessel_i",
    "kernel_f",
    "kernel_laplace",
]

SERIES_CROSSOVER = 18.0

# Power-series terms needed for x <= 18 at double precision, with margin.
_N_SERIES = 70
# Asymptotic terms; the expansion is still converging at k ~ 2x, so 30 terms
# is safe for every x >= 18. Crossover 18 keeps f_minus within ~3e-14.
_N_ASYMP = 30


class KernelSign(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def coerce(cls, value) -> "KernelSign":
        if isinstance(value, cls):
            return value
        if value in ("+", 1, "plus", "Plus", "PLUS"):
            return cls.PLUS
        if value in ("-", -1, "minus", "Minus", "MINUS"):
            return cls.MINUS
        raise ValueError(f"not a kernel sign: {value!r}")


def _asymptotic_coefficients(order: int, n: int) -> np.ndarray:
    # (-1)^k a_k(nu) with a_k = prod_{j<=k} (4 nu^2 - (2j-1)^2) / (k! 8^k)
    mu = 4.0 * order * order
    c = np.empty(n)
    c[0] = 1.0
    for k in range(1, n):
        c[k] = -c[k - 1] * (mu - (2 * k - 1) ** 2) / (k * 8.0)
    return c


_C0 = _asymptotic_coefficients(0, _N_ASYMP)
_C1 = _asymptotic_coefficients(1, _N_ASYMP)
# Computed from the exact rationals so the k=0 cancellation leaves no residue.
_CDIFF = _C0 - _C1
_CDIFF[0] = 0.0
_CSUM = _C0 + _C1


def _as_checked_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValueError("argument must be non-negative")
    return arr, arr.ndim == 0


def _series_terms(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return exp(-x) I_0(x) and exp(-x) I_1(x) from the ascending series."""
    h2 = (0.5 * x) ** 2
    term0 = np.ones_like(x)
    term1 = 0.5 * x
    s0 = term0.copy()
    s1 = term1.copy()
    for k in range(1, _N_SERIES):
        term0 = term0 * h2 / (k * k)
        term1 = term1 * h2 / (k * (k + 1))
        s0 += term0
        s1 += term1
    scale = np.exp(-x)
    return s0 * scale, s1 * scale


def _asymptotic_sum(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    inv = 1.0 / x
    # Horner from the smallest term up.
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * inv + c
    return acc / np.sqrt(2.0 * math.pi * x)


def _evaluate(x: np.ndarray, which: str) -> np.ndarray:
    out = np.empty_like(x)
    low = x < SERIES_CROSSOVER
    if np.any(low):
        i0, i1 = _series_terms(x[low])
        out[low] = {"i0": i0, "i1": i1, "plus": i0 + i1, "minus": i0 - i1}[which]
    high = ~low
    if np.any(high):
        coeffs = {"i0": _C0, "i1": _C1, "plus": _CSUM, "minus": _CDIFF}[which]
        out[high] = _asymptotic_sum(x[high], coeffs)
    return out


def scaled_bessel_i(order: int, x):
    """``exp(-x) * I_order(x)`` for order 0 or 1 and x >= 0.

    Accepts a scalar or an array; returns the same shape. Raises
    ``ValueError`` for negative x or any other order.
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")
    arr, scalar = _as_checked_array(x)
    res = _evaluate(np.atleast_1d(arr), "i0" if order == 0 else "i1")
    return float(res[0]) if scalar else res.reshape(arr.shape)


def kernel_f(sign, x):
    """Memory kernel ``exp(-x) * (I_0(x) +/- I_1(x))``.

    Both kernels equal 1 at the origin and decrease monotonically; ``f_plus``
    falls off like ``sqrt(2/(pi x))`` while ``f_minus`` falls off like
    ``x**-1.5 / (2 sqrt(2 pi))`` and integrates to one over the half line.
    """
    sign = KernelSign.coerce(sign)
    arr, scalar = _as_checked_array(x)
    res = _evaluate(np.atleast_1d(arr), "plus" if sign is KernelSign.PLUS else "minus")
    return float(res[0]) if scalar else res.reshape(arr.shape)


def kernel_laplace(sign, s, a):
    r"""Laplace transform of ``tau -> f(a * tau)`` evaluated at ``s``.

    With ``r = sqrt(2a/s + 1)`` the transforms are ``(r - 1)/a`` for the plus
    kernel and ``(1 - 1/r)/a`` for the minus kernel. Both are rewritten here
    without the subtraction so they stay accurate when ``a/s`` is tiny.
    """
    sign = KernelSign.coerce(sign)
    s_arr = np.asarray(s, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    if np.any(~(s_arr > 0)):
        raise ValueError("Laplace variable s must be positive")
    if np.any(~(a_arr > 0)):
        raise ValueError("coupling parameter a must be positive")
    r = np.sqrt(1.0 + 2.0 * a_arr / s_arr)
    base = (2.0 / s_arr) / (r + 1.0)
    res = base if sign is KernelSign.PLUS else base / r
    return float(res) if np.ndim(res) == 0 else res
