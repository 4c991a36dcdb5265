"""End-to-end experiments wiring the modules together.

These are the computations behind the CLI subcommands; they return plain
data (dicts, dataclasses) and never touch the filesystem.
"""

from dataclasses import dataclass, field

import numpy as np

from . import arrival, ndforms
from .curve import (AffineMap, ConvexPolygon, Ellipse, apply_affine, area, boundary_points,
                    circle, from_fourier, from_polygon, hausdorff, read_polygon, scale,
                    support_of_ellipse)
from .errors import InvalidInputError
from .flow import area_law_check, evolve
from .invariants import SUP_RATIO, iso_ratio, ratio_series
from .normalization import (BLOW_DOWN_EXPONENT, ellipse_eps, good_shape_check,
                            normalize_snapshot)

CURVE_KINDS = ("circle", "ellipse", "fourier", "polygon", "random_polygon")


def random_polygon(rng, vertices=20, radius=1.0):
    """Convex hull of ``vertices`` points drawn uniformly on a circle.

    Angles are redrawn until every gap is below π so the hull is a genuine
    polygon with all points as vertices.
    """
    if vertices < 3:
        raise InvalidInputError("a polygon needs at least 3 vertices")
    while True:
        phi = np.sort(rng.uniform(0.0, 2.0 * np.pi, vertices))
        gaps = np.diff(np.append(phi, phi[0] + 2.0 * np.pi))
        if gaps.max() < np.pi and gaps.min() > 1e-3:
            return ConvexPolygon(radius * np.column_stack([np.cos(phi), np.sin(phi)]))


def build_curve(spec, n, rng=None):
    """Initial curve from a config mapping; see the README for the keys."""
    spec = dict(spec or {"kind": "circle"})
    kind = spec.pop("kind", "circle")
    try:
        if kind == "circle":
            return circle(float(spec.get("radius", 1.0)), n, spec.get("center", (0.0, 0.0)))
        if kind == "ellipse":
            E = Ellipse.from_axes(float(spec["a"]), float(spec["b"]), float(spec.get("angle", 0.0)),
                                  spec.get("center", (0.0, 0.0)))
            return support_of_ellipse(E, n)
        if kind == "fourier":
            return from_fourier(spec.get("modes", [[3, 0.1]]), n, float(spec.get("base", 1.0)))
        if kind == "polygon":
            if "path" in spec:
                poly = read_polygon(spec["path"])
            else:
                poly = ConvexPolygon(spec["vertices"])
            return from_polygon(poly, n, spec.get("r_smooth"))
        if kind == "random_polygon":
            rng = np.random.default_rng(0) if rng is None else rng
            poly = random_polygon(rng, int(spec.get("vertices", 20)), float(spec.get("radius", 1.0)))
            return from_polygon(poly, n, spec.get("r_smooth"))
    except KeyError as exc:
        raise InvalidInputError(f"curve of kind {kind!r} is missing key {exc}") from None
    raise InvalidInputError(f"unknown curve kind {kind!r}; expected one of {CURVE_KINDS}")


@dataclass
class Milestone:
    k: int
    lam: float
    t: float
    area: float
    eps: float
    gap: float
    shape_lambda: float
    ellipse: Ellipse
    disk_radius: float
    normalized: object = field(repr=False)

    def to_dict(self):
        return {
            "k": self.k, "lambda": self.lam, "t": self.t, "area": self.area,
            "eps": self.eps, "iso_gap": self.gap, "good_shape_lambda": self.shape_lambda,
            "ellipse": self.ellipse.to_dict(), "normalized_disk_radius": self.disk_radius,
        }


@dataclass
class ClassifyResult:
    milestones: list
    stop_reason: str
    extinction_estimate: float
    trajectory: object = field(repr=False)

    @property
    def eps(self):
        return np.array([m.eps for m in self.milestones])

    @property
    def gaps(self):
        return np.array([m.gap for m in self.milestones])

    @property
    def eps_strictly_decreasing(self):
        return bool(np.all(np.diff(self.eps) < 0))

    def to_dict(self, gap_tol=1e-2):
        return {
            "milestones": [m.to_dict() for m in self.milestones],
            "stop_reason": self.stop_reason,
            "extinction_estimate": self.extinction_estimate,
            "eps_strictly_decreasing": self.eps_strictly_decreasing,
            "final_eps": float(self.eps[-1]),
            "final_gap": float(self.gaps[-1]),
            "gap_below_tol": bool(self.gaps[-1] < gap_tol),
        }


def classify(c, base=4.0, k_max=6, safety=0.2, mvee_tol=1e-6):
    """Evolve to the area milestones A0 / base^k and normalize each snapshot.

    ε_k is the distance of the John-normalized milestone curve from its
    ellipse; the iso gap is 2π^{2/3} minus its affine isoperimetric ratio.
    """
    if base <= 1 or k_max < 1:
        raise InvalidInputError("schedule needs base > 1 and k_max >= 1")
    a0 = area(c)
    marks = [a0 / base**k for k in range(1, k_max + 1)]
    traj = evolve(c, area_floor=marks[-1], safety=safety, area_marks=marks)
    areas = traj.areas()
    milestones = []
    for k, mark in enumerate([a0] + marks):
        hit = np.flatnonzero(areas <= mark * (1 + 1e-12))
        if hit.size == 0:
            break
        state = traj.states[hit[0]]
        normalized, transform, E = normalize_snapshot(state.curve, tol=mvee_tol)
        _, lam = good_shape_check(state.curve, E)
        # the John ellipse maps to a centered disk of this radius
        radius = np.sqrt(transform.det) * np.linalg.det(E.shape) ** 0.25
        milestones.append(Milestone(k, float(base**k), state.t, float(areas[hit[0]]),
                                    ellipse_eps(state.curve, E), SUP_RATIO - iso_ratio(state.curve),
                                    lam, E, float(radius), normalized))
    return ClassifyResult(milestones, traj.stop_reason, traj.extinction_estimate, traj)


def evolve_summary(traj):
    series = ratio_series(traj)
    return {
        "stop_reason": traj.stop_reason,
        "n_snapshots": len(traj),
        "n_steps": traj.step_policy.get("n_steps"),
        "t_stop": float(traj.times[-1]),
        "extinction_estimate": traj.extinction_estimate,
        "extinction_formula": traj.extinction_formula,
        "area_law_deviation": area_law_check(traj) if len(traj) >= 3 else None,
        "ratio_min_increment": series.min_increment,
        "ratio_monotone": series.is_monotone(),
        "ratio_exceeds_sup": series.exceeds_sup(),
        "final_ratio_gap": float(series.gaps[-1]),
    }


def invariance(c, matrix, t_end, lam=16.0, safety=0.2):
    """Deviations of evolve∘A from A∘evolve and of the space-time rescaling.

    The rescaling check compares λ^{3/4} evolve(λ^{-3/4} c, t_end/λ) with
    evolve(c, t_end), both at full scale.
    """
    A = matrix if isinstance(matrix, AffineMap) else AffineMap(matrix, unimodular=False)
    if abs(A.det - 1.0) > 1e-12:
        raise InvalidInputError(f"invariance needs a unimodular matrix, det = {A.det!r}")
    A = AffineMap(A.linear, A.translation, unimodular=True)
    base = evolve(c, target_time=t_end, safety=safety).states[-1]
    mapped = evolve(apply_affine(c, A), target_time=t_end, safety=safety).states[-1]
    affine_dev = hausdorff(mapped.curve, apply_affine(base.curve, A))

    shrink = lam ** (-BLOW_DOWN_EXPONENT)
    small = evolve(scale(c, shrink), target_time=t_end / lam, safety=safety).states[-1]
    scaling_dev = hausdorff(scale(small.curve, 1.0 / shrink), base.curve)
    return {
        "matrix": A.linear.tolist(),
        "t_end": t_end,
        "affine_deviation": affine_dev,
        "lambda": lam,
        "scaling_exponent": BLOW_DOWN_EXPONENT,
        "scaling_deviation": scaling_dev,
    }


def random_unimodular(rng, max_cond=4.0):
    """Random unimodular 2x2 matrix with condition number at most ``max_cond``."""
    s = np.sqrt(rng.uniform(1.0, max_cond))
    rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])  # noqa: E731
    m = rot(rng.uniform(0, np.pi)) @ np.diag([s, 1.0 / s]) @ rot(rng.uniform(0, np.pi))
    return m / np.sqrt(np.linalg.det(m))


def arrival_grid(c, nodes, margin=0.05):
    pts = boundary_points(c)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * float(np.max(hi - lo))
    return arrival.GridSpec.covering(float(lo.min() - pad), float(hi.max() + pad), nodes)


def arrival_experiment(c, nodes=256, margin=0.05, safety=0.2, snapshot_fraction=0.0025,
                       area_floor=0.01, h0=None, r_min=None, r_max=None):
    """Reconstruct the arrival field of ``c`` and test the level-set equation
    and the log-concavity statement on it."""
    a0 = area(c)
    traj = evolve(c, area_floor=area_floor * a0, safety=safety, snapshot_fraction=snapshot_fraction)
    grid = arrival_grid(c, nodes, margin)
    fld = arrival.reconstruct(traj, grid)
    res = arrival.pde_residual(fld, r_min, r_max)
    h0 = fld.extinction_time - traj.times[0] if h0 is None else h0
    conc = arrival.log_concavity_check(fld, h0)
    return fld, res, conc, traj


def ndcheck(n_max=5, lambdas=(0.25, 1.0, 4.0, 16.0), R0=1.0, solver_n=128):
    """Pass/fail rows (check, n, parameter, deviation, tolerance, passed)."""
    rows = []
    for n in range(1, n_max + 1):
        for lam in lambdas:
            dev = ndforms.rescale_invariance_check(R0, n, lam)
            rows.append(("rescale_invariance", n, lam, dev, 1e-12, dev < 1e-12))
        T = ndforms.extinction_time_nd(R0, n)
        expected = (n + 2) / (2 * n + 2) * R0 ** ((2 * n + 2) / (n + 2))
        rows.append(("extinction_time", n, R0, abs(T - expected), 1e-12, abs(T - expected) < 1e-12))
        axes = np.linspace(0.5, 2.0, n + 1)
        E = ndforms.EllipsoidND(n, axes / np.exp(np.mean(np.log(axes))))
        t = 0.5 * T
        Et = ndforms.ellipsoid_evolution_nd(E, t)
        dev = abs(np.prod(Et.semiaxes) - ndforms.sphere_radius_nd(1.0, n, t) ** (n + 1))
        rows.append(("ellipsoid_volume_law", n, t, dev, 1e-12, dev < 1e-12))
        dev = abs(ndforms.iso_ratio_nd(E) - ndforms.iso_ratio_nd(ndforms.EllipsoidND(n, np.ones(n + 1))))
        rows.append(("iso_ratio_affine_invariance", n, 0.0, dev, 1e-10, dev < 1e-10))

    dev = abs(ndforms.iso_ratio_nd(ndforms.EllipsoidND(1, [1.0, 1.0])) - SUP_RATIO)
    rows.append(("iso_ratio_n1_vs_planar", 1, 0.0, dev, 1e-10, dev < 1e-10))

    T = ndforms.extinction_time_nd(R0, 1)
    traj = evolve(circle(R0, solver_n), target_time=0.9 * T)
    radii = np.sqrt(traj.areas() / np.pi)
    closed = ndforms.sphere_radius_nd(R0, 1, traj.times)
    dev = float(np.max(np.abs(radii - closed)))
    rows.append(("n1_vs_planar_solver", 1, 0.9 * T, dev, 1e-4, dev < 1e-4))
    return rows
