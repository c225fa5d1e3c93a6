"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np


def solve_tridiagonal(dl: np.ndarray, d: np.ndarray, du: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Thomas algorithm, vectorized over leading batch axes.

    ``dl[..., i]`` multiplies ``x[..., i-1]``, ``d[..., i]`` the diagonal and
    ``du[..., i]`` multiplies ``x[..., i+1]``; ``dl[..., 0]`` and
    ``du[..., -1]`` are ignored.  No pivoting: intended for the (column-)
    diagonally dominant Jacobians assembled by the proximal solvers.
    """
    n = d.shape[-1]
    c = np.empty_like(d)
    y = np.empty_like(d)
    c[..., 0] = du[..., 0] / d[..., 0]
    y[..., 0] = b[..., 0] / d[..., 0]
    for i in range(1, n):
        denom = d[..., i] - dl[..., i] * c[..., i - 1]
        c[..., i] = du[..., i] / denom if i < n - 1 else 0.0
        y[..., i] = (b[..., i] - dl[..., i] * y[..., i - 1]) / denom
    x = np.empty_like(d)
    x[..., n - 1] = y[..., n - 1]
    for i in range(n - 2, -1, -1):
        x[..., i] = y[..., i] - c[..., i] * x[..., i + 1]
    return x
