"""Affine curve shortening flow of convex curves: solver, invariants, John
normalization, arrival-time fields and higher-dimensional closed forms."""

from .curve import (AffineMap, ConvexPolygon, Ellipse, SupportCurve, apply_affine, area,
                    circle, from_fourier, from_polygon, hausdorff, radius_of_curvature,
                    steiner_point, support_of_ellipse, to_points)
from .errors import (ACSFError, ConditioningError, ConvergenceError, InvalidInputError,
                     LostConvexityError, RangeError, ResolutionError)
from .flow import FlowState, Trajectory, area_law_check, cfl_dt, evolve, step
from .invariants import SUP_RATIO, RatioSeries, affine_length, iso_ratio, ratio_series
from .normalization import (blow_down, ellipse_eps, good_shape_check, mvee,
                            normalize_snapshot, unimodular_normalizer)

__version__ = "0.1.0"
