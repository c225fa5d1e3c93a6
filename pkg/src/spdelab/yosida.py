"""Moreau-Yosida machinery for radial power laws ``|xi|^p / p`` with p in [1, 2].

The regularized slope is ``phi_delta(xi) = (xi - R_delta xi) / delta`` where
``R_delta xi`` is the unique solution zeta of ``zeta + delta * phi(zeta) = xi``
(soft threshold for p = 1, linear shrinkage for p = 2, a scalar root solve in
between).  The envelope value is

    psi_delta(xi) = (delta / 2) |phi_delta(xi)|^2 + psi(R_delta xi)

and satisfies ``psi(R_delta xi) <= psi_delta(xi) <= psi(xi)`` together with
``|psi(xi) - psi_delta(xi)| <= delta * |phi(xi)|^2`` (minimal-section slope
for p = 1).  p = 2 is admitted purely as an analytic reference case.

All functions are vectorized: ``xi`` may be an array of d-vectors with the
vector components on ``axis`` (default last), or plain signed scalars when
``axis is None``.
"""

from __future__ import annotations

import numpy as np

_ROOT_TOL = 1e-13
_ROOT_MAX_ITER = 100


def _check_p(p: float):
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"power must lie in [1, 2], got {p}")


def prox_radius(p: float, delta: float, s) -> np.ndarray:
    """Radius r >= 0 solving ``r + delta * r^(p-1) = s`` for magnitudes s >= 0.

    Safeguarded Newton on the bracket [0, s]; absolute tolerance 1e-13.
    """
    _check_p(p)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ValueError("delta must be positive")
    if delta.ndim == 0:
        delta = float(delta)
    s = np.asarray(s, dtype=float)
    if p == 1.0:
        return np.maximum(s - delta, 0.0)
    if p == 2.0:
        return s / (1.0 + delta)
    r = np.array(s / (1.0 + delta), dtype=float)  # start below the root
    lo = np.zeros_like(r)
    hi = np.array(s, dtype=float)
    for _ in range(_ROOT_MAX_ITER):
        with np.errstate(divide="ignore", invalid="ignore"):
            rp = np.where(r > 0.0, r ** (p - 1.0), 0.0)
            f = r + delta * rp - s
            df = 1.0 + np.where(r > 0.0, delta * (p - 1.0) * r ** (p - 2.0), np.inf)
            step = np.where(np.isfinite(df), f / df, 0.0)
        lo = np.where(f < 0.0, r, lo)
        hi = np.where(f > 0.0, r, hi)
        cand = r - step
        bad = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
        r = np.where(bad, 0.5 * (lo + hi), cand)
        if np.all(np.abs(f) <= _ROOT_TOL):
            break
    return np.where(s <= 0.0, 0.0, r)


def _split(xi, axis):
    xi = np.asarray(xi, dtype=float)
    if axis is None:
        return np.abs(xi), np.sign(xi)
    mag = np.linalg.norm(xi, axis=axis, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(mag > 0.0, xi / mag, 0.0)
    return mag, direction


def resolvent_radial(p: float, delta: float, xi, axis: int | None = -1) -> np.ndarray:
    """Resolvent ``R_delta xi``: direction preserved, magnitude shrunk."""
    mag, direction = _split(xi, axis)
    r = prox_radius(p, delta, mag)
    return r * direction


def phi_delta(p: float, delta: float, xi, axis: int | None = -1) -> np.ndarray:
    """Yosida-regularized slope ``(xi - R_delta xi) / delta``; 1/delta-Lipschitz."""
    xi = np.asarray(xi, dtype=float)
    return (xi - resolvent_radial(p, delta, xi, axis)) / delta


def phi_delta_radial(p: float, delta: float, s) -> np.ndarray:
    """Magnitude of the regularized slope for magnitudes s >= 0."""
    s = np.asarray(s, dtype=float)
    return (s - prox_radius(p, delta, s)) / delta


def psi_value(p: float, xi, axis: int | None = -1) -> np.ndarray:
    """Raw potential ``|xi|^p / p``."""
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    mag = np.abs(xi) if axis is None else np.linalg.norm(xi, axis=axis)
    return mag**p / p


def psi_delta(p: float, delta: float, xi, axis: int | None = -1) -> np.ndarray:
    """Moreau-Yosida envelope of ``|.|^p / p`` at xi."""
    mag, _ = _split(xi, axis)
    if axis is not None:
        mag = np.squeeze(mag, axis=axis)
    r = prox_radius(p, delta, mag)
    slope = (mag - r) / delta
    return 0.5 * delta * slope**2 + r**p / p


def phi_min_norm(p: float, xi, axis: int | None = -1) -> np.ndarray:
    """Minimal-section slope magnitude ``inf{|eta| : eta in phi(xi)}``.

    For p = 1 this is 1 away from the origin and 0 at it; for p > 1 it is
    ``|xi|^(p-1)``.
    """
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    mag = np.abs(xi) if axis is None else np.linalg.norm(xi, axis=axis)
    if p == 1.0:
        return (mag > 0.0).astype(float)
    return mag ** (p - 1.0)
