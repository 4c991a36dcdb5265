"""Affine arclength and the affine isoperimetric ratio."""

from dataclasses import dataclass

import numpy as np

from .curve import area, radius_of_curvature

SUP_RATIO = 2.0 * np.pi ** (2.0 / 3.0)


def affine_length(c):
    """Affine arclength ∫ρ^{2/3}dθ (= ∫κ^{1/3}ds), trapezoid rule on the normal grid."""
    rho = radius_of_curvature(c)
    return float(np.sum(np.cbrt(rho) ** 2) * c.dtheta)


def iso_ratio(c):
    """Affine isoperimetric ratio A^{-1/3}∫ρ^{2/3}dθ; at most 2π^{2/3}, with equality for ellipses."""
    return affine_length(c) / area(c) ** (1.0 / 3.0)


@dataclass(frozen=True)
class RatioSeries:
    times: np.ndarray
    ratios: np.ndarray
    sup_value: float = SUP_RATIO

    @property
    def gaps(self):
        return self.sup_value - self.ratios

    @property
    def min_increment(self):
        """Smallest consecutive change; >= -1e-6 counts as nondecreasing."""
        if len(self.ratios) < 2:
            return 0.0
        return float(np.min(np.diff(self.ratios)))

    def is_monotone(self, slack=1e-6):
        return self.min_increment >= -slack

    def exceeds_sup(self, slack=1e-6):
        return bool(np.any(self.ratios > self.sup_value + slack))

    def rows(self):
        return [(float(t), float(r), float(self.sup_value - r)) for t, r in zip(self.times, self.ratios)]


def ratio_series(traj):
    return RatioSeries(traj.times, np.array([iso_ratio(c) for c in traj.curves]))
