"""Arrival-time (level-set) representation of a shrinking trajectory.

A node x swept by the flow receives the time τ(x) at which the moving curve
passes it.  With T the extinction estimate, u = T - τ is nonnegative,
vanishes at the extinction point, and solves

    div(Du/|Du|) = |Du|^{-3},

with the flow snapshot at time t equal to the level set {u = T - t}.
For a shrinking circle u(x) = (3/4)|x|^{4/3}.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np
from contourpy import contour_generator
from scipy.spatial import ConvexHull

from .curve import SupportCurve, _grid, radius_of_curvature, spectral_derivative, steiner_point
from .errors import InvalidInputError, ResolutionError

MIN_NODES_ACROSS = 8
EXCLUSION_CELLS = 4
_CHUNK = 4096


@dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian grid; node (i, j) sits at origin + spacing * (i, j)."""

    origin: tuple
    spacing: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        if self.spacing <= 0 or min(self.dims) < 3:
            raise InvalidInputError("grid needs positive spacing and at least 3 nodes per axis")

    @classmethod
    def covering(cls, lo, hi, nodes):
        """Square grid of ``nodes`` x ``nodes`` nodes spanning [lo, hi]^2."""
        spacing = (hi - lo) / (nodes - 1)
        return cls((lo, lo), spacing, (nodes, nodes))

    def coords(self):
        """Node coordinate arrays X, Y of shape (ny, nx)."""
        nx, ny = self.dims
        x = self.origin[0] + self.spacing * np.arange(nx)
        y = self.origin[1] + self.spacing * np.arange(ny)
        return np.meshgrid(x, y)

    def to_dict(self):
        return {"origin": list(self.origin), "spacing": self.spacing, "dims": list(self.dims)}


@dataclass(frozen=True)
class ArrivalField:
    grid: GridSpec
    tau: np.ndarray
    inside_mask: np.ndarray
    resolved: np.ndarray
    u: np.ndarray
    extinction_time: float
    u_floor: float
    extinction_point: np.ndarray

    def with_u(self, u):
        """Same grid and masks with a replaced level function (for controls)."""
        return ArrivalField(self.grid, self.tau, self.inside_mask, self.resolved, np.asarray(u, dtype=float),
                            self.extinction_time, self.u_floor, self.extinction_point)

    def rows(self):
        """Export rows (i, j, x, y, tau, u, resolved) for nodes inside the initial curve."""
        X, Y = self.grid.coords()
        out = []
        for j, i in zip(*np.nonzero(self.inside_mask)):
            out.append((int(i), int(j), float(X[j, i]), float(Y[j, i]), float(self.tau[j, i]),
                        float(self.u[j, i]), int(self.resolved[j, i])))
        return out

    def sidecar(self):
        return {
            "grid": self.grid.to_dict(),
            "extinction_time": self.extinction_time,
            "u_floor": self.u_floor,
            "extinction_point": self.extinction_point.tolist(),
        }


def radial_exact(x):
    """(3/4)|x|^{4/3}; ``x`` is a point or an (..., 2) array of points."""
    x = np.asarray(x, dtype=float)
    return 0.75 * np.hypot(x[..., 0], x[..., 1]) ** (4.0 / 3.0)


def exact_field(grid, linear=None, center=(0.0, 0.0)):
    """Sample (3/4)|L(x - center)|^{4/3} on every node of ``grid``."""
    X, Y = grid.coords()
    pts = np.stack([X - center[0], Y - center[1]], axis=-1)
    if linear is not None:
        pts = pts @ np.asarray(linear, dtype=float).T
    u = radial_exact(pts)
    ones = np.ones(u.shape, dtype=bool)
    return ArrivalField(grid, -u, ones, ones, u, 0.0, 0.0, np.asarray(center, dtype=float))


def _taylor_tables(hs):
    """Per-snapshot support samples and their first four spectral derivatives, stacked on axis 0."""
    return np.stack([hs] + [spectral_derivative(hs, k) for k in range(1, 5)])


def _gap(px, py, tables, k, theta, newton=3):
    """Signed support gap F = max_θ(<p, u(θ)> - h(θ)) for node rows against
    per-row support samples; negative inside.  Returns (F, speed) with speed
    = ρ(θ*)^{-1/3} at the maximizing normal θ*.

    Row i is measured against snapshot ``k[i]`` of ``tables``, which holds h
    and its first four derivatives for every snapshot.  The discrete
    maximizer is refined by Newton steps on the quartic Taylor expansion of h
    about the nearest sample, which is exact for disks.
    """
    h = tables[0][k]
    cos, sin = np.cos(theta), np.sin(theta)
    g = px[:, None] * cos + py[:, None] * sin - h
    j = np.argmax(g, axis=1)
    d0, d1, d2, d3, d4 = tables[:, k, j]
    step = theta[1] - theta[0]
    delta = np.zeros(len(j))
    for _ in range(newton):
        t = theta[j] + delta
        c, s = np.cos(t), np.sin(t)
        dg = -px * s + py * c - (d1 + d2 * delta + d3 * delta**2 / 2 + d4 * delta**3 / 6)
        ddg = -px * c - py * s - (d2 + d3 * delta + d4 * delta**2 / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            update = np.where(ddg < 0, -dg / ddg, 0.0)
        delta = np.clip(delta + update, -step, step)
    t = theta[j] + delta
    hval = d0 + d1 * delta + d2 * delta**2 / 2 + d3 * delta**3 / 6 + d4 * delta**4 / 24
    rho = d0 + d2 + (d1 + d3) * delta + (d2 + d4) * delta**2 / 2
    return px * np.cos(t) + py * np.sin(t) - hval, 1.0 / np.cbrt(rho)


def _gap_at(px, py, k, tables, theta):
    F = np.empty(len(px))
    for s in range(0, len(px), _CHUNK):
        sl = slice(s, s + _CHUNK)
        F[sl] = _gap(px[sl], py[sl], tables, k[sl], theta)[0]
    return F


def _hermite(t0, t1, f0, f1, d0, d1, t):
    dt = t1 - t0
    s = (t - t0) / dt
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * f0 + h10 * dt * d0 + h01 * f1 + h11 * dt * d1


def reconstruct(traj, grid, time_tol=1e-10):
    """Arrival-time field of a shrinking trajectory on ``grid``.

    Each node inside the initial curve is bracketed between consecutive
    snapshots by binary search on the support gap F(x, t), which increases in
    t with dF/dt = ρ(θ*)^{-1/3}.  The crossing time is then found by bisection
    (to ``time_tol``) on the cubic Hermite interpolant of F built from those
    values and slopes.  Nodes still inside the final snapshot are unresolved.
    """
    curves = traj.curves
    if len(curves) < 2:
        raise InvalidInputError("trajectory needs at least two snapshots")
    n = curves[0].n_samples
    origin = curves[0].origin
    if any(c.n_samples != n or np.any(c.origin != origin) for c in curves):
        raise InvalidInputError("snapshots must share grid size and origin")
    theta = _grid(n)
    final = curves[-1]
    width = float(np.min(final.h + np.roll(final.h, n // 2))) if n % 2 == 0 else float(2 * final.h.min())
    if width < MIN_NODES_ACROSS * grid.spacing:
        suggested = int(np.ceil(MIN_NODES_ACROSS * grid.spacing * (max(grid.dims) - 1) / width)) + 1
        raise ResolutionError(
            f"grid spacing {grid.spacing:.3g} leaves fewer than {MIN_NODES_ACROSS} nodes across the final curve "
            f"(width {width:.3g}); use at least {suggested} nodes per axis", suggested=suggested)

    times = traj.times
    for c in curves:  # reject non-convex snapshots up front
        radius_of_curvature(c)
    tables = _taylor_tables(np.array([c.h for c in curves]))
    X, Y = grid.coords()
    px = (X - origin[0]).ravel()
    py = (Y - origin[1]).ravel()
    K = len(curves)

    f_first = _gap_at(px, py, np.zeros(px.size, dtype=int), tables, theta)
    inside = f_first < 0
    f_last = _gap_at(px, py, np.full(px.size, K - 1), tables, theta)
    resolved = inside & (f_last >= 0)

    idx = np.flatnonzero(resolved)
    qx, qy = px[idx], py[idx]
    lo = np.zeros(idx.size, dtype=int)
    hi = np.full(idx.size, K - 1)
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        f_mid = _gap_at(qx, qy, mid, tables, theta)
        outside = f_mid >= 0
        hi = np.where(outside, mid, hi)
        lo = np.where(outside, lo, mid)

    f0 = np.empty(idx.size)
    f1 = np.empty(idx.size)
    d0 = np.empty(idx.size)
    d1 = np.empty(idx.size)
    for s in range(0, idx.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        f0[sl], d0[sl] = _gap(qx[sl], qy[sl], tables, lo[sl], theta)
        f1[sl], d1[sl] = _gap(qx[sl], qy[sl], tables, hi[sl], theta)
    t0, t1 = times[lo], times[hi]
    a, b = t0.copy(), t1.copy()
    while np.max(b - a, initial=0.0) > time_tol:
        m = 0.5 * (a + b)
        fm = _hermite(t0, t1, f0, f1, d0, d1, m)
        a = np.where(fm < 0, m, a)
        b = np.where(fm < 0, b, m)

    tau = np.full(px.size, np.nan)
    tau[idx] = 0.5 * (a + b)
    T = traj.extinction_estimate
    t_stop = times[-1]
    u = np.full(px.size, np.nan)
    u[idx] = T - tau[idx]
    shape = X.shape
    ext = steiner_point(final)
    return ArrivalField(grid, tau.reshape(shape), inside.reshape(shape), resolved.reshape(shape),
                        u.reshape(shape), float(T), float(T - t_stop), ext)


@dataclass(frozen=True)
class ResidualReport:
    residual: np.ndarray
    eligible: np.ndarray
    max_abs: float
    median_abs: float
    count: int
    excluded_radius: float


def pde_residual(field, r_min=None, r_max=None, exclusion_cells=EXCLUSION_CELLS):
    """Residual div(Du/|Du|) - |Du|^{-3} on resolved interior nodes.

    The curvature term is expanded as
    (u_xx u_y² - 2 u_x u_y u_xy + u_yy u_x²) / |Du|³ with second-order
    central differences.  A disk of ``exclusion_cells`` spacings around the
    extinction point is skipped, and ``r_min``/``r_max`` restrict to an
    annulus about that point.
    """
    u = field.u
    d = field.grid.spacing
    ok = field.resolved & np.isfinite(u)
    interior = np.zeros_like(ok)
    interior[1:-1, 1:-1] = (ok[1:-1, 1:-1] & ok[:-2, 1:-1] & ok[2:, 1:-1] & ok[1:-1, :-2] & ok[1:-1, 2:]
                            & ok[:-2, :-2] & ok[:-2, 2:] & ok[2:, :-2] & ok[2:, 2:])
    X, Y = field.grid.coords()
    r = np.hypot(X - field.extinction_point[0], Y - field.extinction_point[1])
    excluded = exclusion_cells * d
    eligible = interior & (r > excluded)
    if r_min is not None:
        eligible &= r >= r_min
    if r_max is not None:
        eligible &= r <= r_max

    uu = np.where(ok, u, 0.0)
    res = np.full(u.shape, np.nan)
    c = (slice(1, -1), slice(1, -1))
    ux = (uu[1:-1, 2:] - uu[1:-1, :-2]) / (2 * d)
    uy = (uu[2:, 1:-1] - uu[:-2, 1:-1]) / (2 * d)
    uxx = (uu[1:-1, 2:] - 2 * uu[c] + uu[1:-1, :-2]) / d**2
    uyy = (uu[2:, 1:-1] - 2 * uu[c] + uu[:-2, 1:-1]) / d**2
    uxy = (uu[2:, 2:] - uu[2:, :-2] - uu[:-2, 2:] + uu[:-2, :-2]) / (4 * d**2)
    grad = np.hypot(ux, uy)
    with np.errstate(divide="ignore", invalid="ignore"):
        curvature = (uxx * uy**2 - 2 * ux * uy * uxy + uyy * ux**2) / grad**3
        res[c] = curvature - grad**-3.0
    res[~eligible] = np.nan
    vals = np.abs(res[eligible])
    if vals.size == 0:
        return ResidualReport(res, eligible, float("nan"), float("nan"), 0, excluded)
    return ResidualReport(res, eligible, float(vals.max()), float(np.median(vals)), int(vals.size), excluded)


def _hull_deficiency(points):
    """Largest distance from a point of a closed polyline to its convex hull boundary."""
    hull = ConvexHull(points)
    normals = hull.equations[:, :2]
    offsets = hull.equations[:, 2]
    # for points inside the hull every facet value is <= 0
    dist = -(points @ normals.T + offsets)
    return float(np.max(np.min(dist, axis=1)))


def level_contours(field, level):
    """Closed contour lines {u = level} as a list of (m, 2) point arrays."""
    u = np.where(field.resolved, field.u, np.nan)
    u = np.where(field.inside_mask & ~field.resolved, -1.0, u)
    big = np.nanmax(field.u[field.resolved]) + 1.0 if np.any(field.resolved) else 1.0
    u = np.where(~field.inside_mask, big, u)
    X, Y = field.grid.coords()
    return [line for line in contour_generator(X, Y, u).lines(level) if len(line) >= 4]


def level_set_support(field, level, n=256):
    """Support samples (about the plane origin) of the contour {u = level}."""
    lines = level_contours(field, level)
    if not lines:
        raise ResolutionError(f"no contour at level {level}")
    pts = np.vstack(lines)
    theta = _grid(n)
    return SupportCurve(np.max(np.stack([np.cos(theta), np.sin(theta)], 1) @ pts.T, axis=1))


@dataclass(frozen=True)
class ConcavityReport:
    passed: bool
    triples: int
    violations: int
    worst_violation: float
    worst_triple: tuple
    level_deficiency: dict

    def to_dict(self):
        return {
            "passed": self.passed,
            "triples": self.triples,
            "violations": self.violations,
            "worst_violation": self.worst_violation,
            "worst_triple": [list(map(int, p)) for p in self.worst_triple] if self.worst_triple else None,
            "level_deficiency": {repr(k): v for k, v in self.level_deficiency.items()},
        }


_STEPS = ((1, 0), (0, 1), (1, 1), (1, -1))


def log_concavity_check(field, h0, tol=1e-6, levels=5, level_tol=0.05):
    """Test that -log(h0 - u) is convex on Ω = {u < h0} and that its sampled
    level sets are convex.

    Every grid-aligned and diagonal triple (a, m, b) of resolved nodes in Ω
    with m the midpoint is checked for φ(m) <= (φ(a) + φ(b))/2 + tol.  Level
    sets at ``levels`` values between min u on Ω and h0 are contoured and their
    distance to their own convex hull must stay below ``level_tol`` spacings.
    """
    if h0 <= field.u_floor:
        raise ResolutionError(f"domain level {h0} lies inside the unresolved core (u_floor = {field.u_floor})")
    edge = np.zeros_like(field.inside_mask)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    omega = field.resolved & np.isfinite(field.u) & (field.u < h0)
    if np.any(omega & edge) or not np.any(omega):
        raise ResolutionError(f"domain {{u < {h0}}} is not contained in the swept grid region")

    phi = np.full(field.u.shape, np.nan)
    phi[omega] = -np.log(h0 - field.u[omega])
    ny, nx = phi.shape
    triples = 0
    violations = 0
    worst = -np.inf
    worst_triple = None
    for di, dj in _STEPS:
        js = slice(max(dj, -dj, 0), ny - max(dj, -dj, 0))
        is_ = slice(max(di, -di, 0), nx - max(di, -di, 0))
        mid = phi[js, is_]
        a = phi[js.start - dj: js.stop - dj, is_.start - di: is_.stop - di]
        b = phi[js.start + dj: js.stop + dj, is_.start + di: is_.stop + di]
        valid = np.isfinite(mid) & np.isfinite(a) & np.isfinite(b)
        excess = np.where(valid, mid - 0.5 * (a + b), -np.inf)
        triples += int(valid.sum())
        violations += int(np.sum(excess > tol))
        k = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[k] > worst:
            worst = float(excess[k])
            jm, im = k[0] + js.start, k[1] + is_.start
            worst_triple = ((im - di, jm - dj), (im, jm), (im + di, jm + dj))

    deficiency = {}
    for level in np.linspace(float(field.u[omega].min()), h0, levels + 2)[1:-1]:
        lines = level_contours(field, level)
        deficiency[float(level)] = max((_hull_deficiency(line) for line in lines), default=float("inf")) / field.grid.spacing
    levels_ok = all(v <= level_tol for v in deficiency.values())
    return ConcavityReport(violations == 0 and levels_ok, triples, violations, worst, worst_triple, deficiency)


def write_field(field, csv_path, json_path):
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "tau", "u", "resolved"])
        for row in field.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    with open(json_path, "w") as fh:
        json.dump(field.sidecar(), fh, indent=2, sort_keys=True)
