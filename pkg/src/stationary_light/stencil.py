"""Finite-difference operators on a uniform grid with field-free edges.

Nodes outside the grid are treated as zero, which keeps the first-derivative
operator exactly skew-symmetric (purely imaginary spectrum).
"""
from __future__ import annotations

import functools

import numpy as np
import scipy.sparse as sps


@functools.lru_cache(maxsize=16)
def first_derivative(n: int, h: float) -> sps.csr_matrix:
    """Fourth-order central d/dxi as a sparse matrix."""
    c1 = 8.0 / (12.0 * h)
    c2 = 1.0 / (12.0 * h)
    ones = np.ones(n)
    return sps.diags(
        [c2 * ones[:n - 2], -c1 * ones[:n - 1], c1 * ones[:n - 1], -c2 * ones[:n - 2]],
        [-2, -1, 1, 2],
        shape=(n, n),
        format="csr",
    )


@functools.lru_cache(maxsize=16)
def second_derivative(n: int, h: float) -> sps.csr_matrix:
    """Three-point d^2/dxi^2; its spectrum lies in [-4/h^2, 0]."""
    ones = np.ones(n)
    return sps.diags(
        [ones[:n - 1], -2.0 * ones, ones[:n - 1]], [-1, 0, 1], shape=(n, n), format="csr"
    ) / (h * h)


def ddxi(f: np.ndarray, h: float) -> np.ndarray:
    return first_derivative(f.shape[-1], h) @ f
