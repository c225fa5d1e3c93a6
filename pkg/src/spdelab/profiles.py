"""Scalar convex profiles psi: [0, inf) -> [0, inf) driving the potentials.

Every potential in this package integrates a radial profile of either a face
gradient, a pairwise difference, or the state itself.  A profile exposes the
few scalar maps the solvers need: the value, the (minimal-section) slope, an
almost-everywhere curvature for Newton steps, the slope limit at 0+ (nonzero
only for kinked profiles like the raw absolute value), and the radial
proximal map ``r + tau * psi'(r) = s``.

Supported families: raw powers ``s^p / p`` with p in [1, 2], their
Moreau-Yosida regularizations, and an additive quadratic (used both for the
vanishing-viscosity profiles ``psi + mu s^2 / 2`` and the viscosity term of
the approximating schemes).
"""

from __future__ import annotations

import numpy as np

from . import yosida

CURVATURE_CAP = 1e12
_ROOT_TOL = 1e-13
_ROOT_MAX_ITER = 100


class RadialProfile:
    """Interface: vectorized maps of nonnegative magnitudes."""

    kink: float = 0.0  # slope limit at 0+, nonzero for nonsmooth-at-zero profiles
    delta: float | None = None  # Yosida parameter when the profile is regularized
    curvature_bounded: bool = False  # True when psi'' is bounded (Newton-friendly)
    slope_unbounded: bool = False  # True when psi' is surjective onto [0, inf)

    def value(self, s):
        raise NotImplementedError

    def slope(self, s):
        raise NotImplementedError

    def curvature(self, s):
        raise NotImplementedError

    def prox_radius(self, tau, s):
        """Solve ``r + tau * psi'(r) = s`` for r >= 0 (s >= 0, tau > 0)."""
        return _generic_prox_radius(self, tau, s)

    def signed_slope(self, x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * self.slope(np.abs(x))

    def slope_lipschitz(self) -> float:
        """Global Lipschitz constant of the slope (inf when unbounded)."""
        return np.inf

    @property
    def is_kinked(self) -> bool:
        return self.kink > 0.0


class PowerProfile(RadialProfile):
    """Raw power ``s^p / p``; multivalued slope at 0 when p = 1."""

    def __init__(self, p: float):
        if not 1.0 <= p <= 2.0:
            raise ValueError(f"power must lie in [1, 2], got {p}")
        self.p = float(p)
        self.kink = 1.0 if self.p == 1.0 else 0.0
        self.curvature_bounded = self.p == 2.0
        self.slope_unbounded = self.p > 1.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return s**self.p / self.p

    def slope(self, s):
        s = np.asarray(s, dtype=float)
        if self.p == 1.0:
            return (s > 0.0).astype(float)
        return s ** (self.p - 1.0)

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        if self.p == 1.0:
            return np.zeros_like(s)
        if self.p == 2.0:
            return np.ones_like(s)
        with np.errstate(divide="ignore", over="ignore"):
            c = (self.p - 1.0) * s ** (self.p - 2.0)
        return np.minimum(np.where(np.isfinite(c), c, CURVATURE_CAP), CURVATURE_CAP)

    def prox_radius(self, tau, s):
        return yosida.prox_radius(self.p, tau, s)

    def slope_lipschitz(self) -> float:
        return 1.0 if self.p == 2.0 else np.inf

    def __repr__(self):
        return f"PowerProfile(p={self.p})"


class YosidaPowerProfile(RadialProfile):
    """Moreau-Yosida envelope of ``s^p / p``; slope is 1/delta-Lipschitz."""

    curvature_bounded = True

    def __init__(self, p: float, delta: float):
        if not 1.0 <= p <= 2.0:
            raise ValueError(f"power must lie in [1, 2], got {p}")
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.p = float(p)
        self.delta = float(delta)
        self.slope_unbounded = self.p > 1.0

    def value(self, s):
        return yosida.psi_delta(self.p, self.delta, np.asarray(s, dtype=float), axis=None)

    def slope(self, s):
        return yosida.phi_delta_radial(self.p, self.delta, s)

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        p, d = self.p, self.delta
        if p == 1.0:
            return np.where(s < d, 1.0 / d, 0.0)
        if p == 2.0:
            return np.full_like(s, 1.0 / (1.0 + d))
        r = yosida.prox_radius(p, d, s)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            phi_prime = (p - 1.0) * r ** (p - 2.0)
            ratio = phi_prime / (1.0 + d * phi_prime)
        # chain rule through the resolvent; limit 1/delta at r = 0
        return np.where(np.isfinite(phi_prime), ratio, 1.0 / d)

    def slope_lipschitz(self) -> float:
        return 1.0 / self.delta

    def __repr__(self):
        return f"YosidaPowerProfile(p={self.p}, delta={self.delta})"


class ViscousProfile(RadialProfile):
    """``base(s) + mu * s^2 / 2`` -- the vanishing-viscosity family."""

    def __init__(self, base: RadialProfile, mu: float):
        if mu < 0:
            raise ValueError(f"mu must be nonnegative, got {mu}")
        self.base = base
        self.mu = float(mu)
        self.kink = base.kink
        self.delta = base.delta
        self.curvature_bounded = base.curvature_bounded
        self.slope_unbounded = base.slope_unbounded or self.mu > 0.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self.base.value(s) + 0.5 * self.mu * s**2

    def slope(self, s):
        s = np.asarray(s, dtype=float)
        return self.base.slope(s) + self.mu * s

    def curvature(self, s):
        return self.base.curvature(s) + self.mu

    def slope_lipschitz(self) -> float:
        return self.base.slope_lipschitz() + self.mu

    def __repr__(self):
        return f"ViscousProfile({self.base!r}, mu={self.mu})"


class EdgeConjugate:
    """Fenchel conjugate of an edge penalty ``h(g) = W psi(|g|) + Q g^2 / 2``.

    Exposes the maps a dual Newton method needs.  The conjugate is smooth
    whenever Q > 0 or psi has unbounded slope (raw powers p > 1); for the
    pure kinked case (p = 1, Q = 0) its domain is the box ``|y| <= W`` and
    the projected variant of the solver applies instead.
    """

    def __init__(self, profile: RadialProfile, W, Q):
        self.profile = profile
        self.W = np.asarray(W, dtype=float)
        self.Q = np.asarray(Q, dtype=float)

    def _radius(self, t):
        """Solve ``W psi'(r) + Q r = t`` for r >= 0 given magnitudes t >= 0."""
        prof = self.profile
        W, Q = self.W, self.Q
        t = np.asarray(t, dtype=float)
        thresh = W * prof.kink
        active = t > thresh
        hi = np.maximum(t, 1.0)
        for _ in range(200):
            val = W * prof.slope(hi) + Q * hi
            need = active & (val < t)
            if not np.any(need):
                break
            hi = np.where(need, 2.0 * hi, hi)
        lo = np.zeros_like(hi)
        r = np.where(active, 0.5 * hi, 0.0)
        for _ in range(_ROOT_MAX_ITER):
            f = W * prof.slope(r) + Q * r - t
            f = np.where(active, f, 0.0)
            if np.all(np.abs(f) <= _ROOT_TOL * (1.0 + np.abs(t))):
                break
            df = W * prof.curvature(r) + Q
            lo = np.where(f < 0.0, r, lo)
            hi = np.where(f > 0.0, r, hi)
            with np.errstate(invalid="ignore", divide="ignore"):
                cand = r - f / df
            bad = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
            r = np.where(active, np.where(bad, 0.5 * (lo + hi), cand), 0.0)
        return r

    def slope(self, y):
        """(h*)'(y): the g achieving the conjugate supremum (odd in y)."""
        return np.sign(y) * self._radius(np.abs(y))

    def value(self, y):
        t = np.abs(y)
        r = self._radius(t)
        return t * r - (self.W * self.profile.value(r) + 0.5 * self.Q * r**2)

    def curvature(self, y):
        """(h*)''(y) = 1 / h''(g(y)); zero inside a kink's flat region."""
        r = self._radius(np.abs(y))
        denom = self.W * self.profile.curvature(r) + self.Q
        flat = (r <= 0.0) & (self.profile.kink > 0.0)
        with np.errstate(divide="ignore"):
            out = np.where(denom > 0.0, 1.0 / denom, 0.0)
        return np.where(flat, 0.0, out)


def _generic_prox_radius(profile: RadialProfile, tau, s):
    """Safeguarded Newton for ``r + tau * psi'(r) = s`` on the bracket [0, s]."""
    s = np.asarray(s, dtype=float)
    tau = np.asarray(tau, dtype=float)
    thresh = tau * profile.kink
    active = s > thresh
    r = np.where(active, 0.5 * np.maximum(s - thresh, 0.0), 0.0)
    lo = np.zeros_like(r)
    hi = np.array(np.broadcast_to(s, r.shape), dtype=float)
    for _ in range(_ROOT_MAX_ITER):
        f = r + tau * profile.slope(r) - s
        f = np.where(active, f, 0.0)
        if np.all(np.abs(f) <= _ROOT_TOL):
            break
        df = 1.0 + tau * profile.curvature(r)
        lo = np.where(f < 0.0, r, lo)
        hi = np.where(f > 0.0, r, hi)
        with np.errstate(invalid="ignore"):
            cand = r - f / df
        bad = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
        r = np.where(active, np.where(bad, 0.5 * (lo + hi), cand), 0.0)
    return r
