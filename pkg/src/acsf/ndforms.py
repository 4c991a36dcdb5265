"""Closed-form affine normal flow of spheres and ellipsoids in R^{n+1}.

A sphere of radius R has Gauss curvature R^{-n} and moves inward with speed
K^{1/(n+2)}, so dR/dt = -R^{-n/(n+2)}.  Ellipsoids are unimodular images of
spheres and shrink homothetically.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidInputError, RangeError


@dataclass(frozen=True)
class EllipsoidND:
    """Axis-aligned ellipsoid with ``dim_n``-dimensional boundary in R^{dim_n + 1}."""

    dim_n: int
    semiaxes: np.ndarray
    center: np.ndarray = None

    def __post_init__(self):
        axes = np.array(self.semiaxes, dtype=float).ravel()
        if self.dim_n < 1:
            raise InvalidInputError("dim_n must be at least 1")
        if axes.size != self.dim_n + 1:
            raise InvalidInputError(f"need {self.dim_n + 1} semiaxes, got {axes.size}")
        if np.any(axes <= 0):
            raise InvalidInputError("semiaxes must be positive")
        center = np.zeros(self.dim_n + 1) if self.center is None else np.array(self.center, dtype=float).ravel()
        if center.size != self.dim_n + 1:
            raise InvalidInputError("center has the wrong dimension")
        object.__setattr__(self, "semiaxes", axes)
        object.__setattr__(self, "center", center)

    @property
    def equivalent_radius(self):
        """Radius of the sphere with the same volume, (∏ a_i)^{1/(n+1)}."""
        return float(np.exp(np.mean(np.log(self.semiaxes))))


def _exponent(n):
    return (2.0 * n + 2.0) / (n + 2.0)


def extinction_time_nd(R0, n):
    """((n+2)/(2n+2)) R0^{(2n+2)/(n+2)}."""
    if R0 <= 0:
        raise InvalidInputError("R0 must be positive")
    return R0 ** _exponent(n) / _exponent(n)


def sphere_radius_nd(R0, n, t):
    """Radius at time t of a sphere evolving by affine normal flow.

    R(t) = (R0^{(2n+2)/(n+2)} - ((2n+2)/(n+2)) t)^{(n+2)/(2n+2)}.
    Accepts array ``t``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t >= extinction_time_nd(R0, n)):
        raise RangeError("t must lie in [0, extinction time)")
    p = _exponent(n)
    r = (R0**p - p * t) ** (1.0 / p)
    return float(r) if r.ndim == 0 else r


def ellipsoid_evolution_nd(E, t):
    """Ellipsoid at time t: semiaxes scaled by R(t)/R0 of the volume-equivalent sphere."""
    R0 = E.equivalent_radius
    factor = sphere_radius_nd(R0, E.dim_n, t) / R0
    return EllipsoidND(E.dim_n, E.semiaxes * factor, E.center)


def sphere_area(n):
    """Surface measure σ_n of the unit n-sphere in R^{n+1}."""
    return float(2.0 * np.exp(0.5 * (n + 1) * np.log(np.pi) - gammaln(0.5 * (n + 1))))


def iso_ratio_nd(E):
    """Affine isoperimetric ratio V^{-n/(n+2)} ∫_{S^n} K^{-(n+1)/(n+2)} dΩ of an ellipsoid.

    For semiaxes a_i, K^{-1}(v) = (∏ a_i)^2 / h(v)^{n+2} in Gauss-map
    coordinates and ∫ h^{-(n+1)} dΩ = σ_n / ∏ a_i, so every factor of ∏ a_i
    cancels against V = (σ_n / (n+1)) ∏ a_i.
    """
    n = E.dim_n
    sigma = sphere_area(n)
    log_prod = float(np.sum(np.log(E.semiaxes)))
    log_volume = np.log(sigma / (n + 1)) + log_prod
    log_integral = 2.0 * (n + 1) / (n + 2) * log_prod + np.log(sigma) - log_prod
    return float(np.exp(-n / (n + 2) * log_volume + log_integral))


def rescale_invariance_check(R0, n, lam, samples=64):
    """Max deviation between λ^{-(n+2)/(2n+2)} R(λt; R0) and R(t; λ^{-(n+2)/(2n+2)} R0)."""
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    factor = lam ** (-1.0 / _exponent(n))
    t_end = extinction_time_nd(R0, n) / lam
    t = np.linspace(0.0, t_end, samples, endpoint=False)
    lhs = factor * sphere_radius_nd(R0, n, lam * t)
    rhs = sphere_radius_nd(factor * R0, n, t)
    return float(np.max(np.abs(lhs - rhs)))
