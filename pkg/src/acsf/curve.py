"""Strictly convex planar curves stored as support functions.

A convex body K is encoded by its support function h(θ) = max_{x∈K} <x - o, u(θ)>,
u(θ) = (cos θ, sin θ), sampled on the uniform normal-angle grid θ_j = 2πj/n and
measured about a reference point ``o`` (the curve's ``origin``).  The radius of
curvature at the boundary point with outward normal u(θ) is ρ = h + h'', and
every derivative in this module is a trigonometric spectral derivative.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError, LostConvexityError

MIN_SAMPLES = 16


@lru_cache(maxsize=None)
def _grid(n):
    theta = 2.0 * np.pi * np.arange(n) / n
    theta.setflags(write=False)
    return theta


@lru_cache(maxsize=None)
def _wavenumbers(n):
    k = np.arange(n // 2 + 1, dtype=float)
    k.setflags(write=False)
    return k


def spectral_derivative(values, order=1):
    """Derivative of periodic samples on the uniform grid, computed by FFT.

    For odd orders the Nyquist mode of an even-length grid is discarded, since
    its derivative is not representable by a real sample set.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    k = _wavenumbers(n)
    coef = np.fft.rfft(values) * (1j * k) ** order
    if order % 2 and n % 2 == 0:
        coef[..., -1] = 0.0
    return np.fft.irfft(coef, n)


def trig_interpolate(values, theta):
    """Evaluate the trigonometric interpolant of periodic samples at angles ``theta``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    coef = np.fft.rfft(values) / n
    weights = np.full(coef.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    theta = np.asarray(theta, dtype=float)
    phase = np.exp(1j * np.multiply.outer(theta, _wavenumbers(n)))
    return (phase @ (weights * coef)).real


def resample(values, m):
    """Fourier resampling of periodic samples onto an ``m``-point grid."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if m == n:
        return values.copy()
    coef = np.fft.rfft(values)
    out = np.zeros(m // 2 + 1, dtype=complex)
    if m > n:
        out[: coef.size] = coef
        if n % 2 == 0:
            # the n-grid Nyquist term stands for the pair ±n/2
            out[n // 2] *= 0.5
    else:
        out[:] = coef[: m // 2 + 1]
        if m % 2 == 0:
            out[-1] = 2.0 * out[-1].real
    return np.fft.irfft(out * (m / n), m)


@dataclass(frozen=True)
class SupportCurve:
    """Support-function samples of a convex curve about ``origin``.

    Strict convexity (positive radii of curvature) is not checked on
    construction; it is enforced by :func:`radius_of_curvature` and by
    everything built on it.
    """

    h: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        origin = np.array(self.origin, dtype=float).reshape(2)
        if h.ndim != 1:
            raise InvalidInputError("support samples must be a 1-D array")
        if h.size < MIN_SAMPLES:
            raise InvalidInputError(f"need at least {MIN_SAMPLES} samples, got {h.size}")
        if not np.all(np.isfinite(h)) or not np.all(np.isfinite(origin)):
            raise InvalidInputError("support samples must be finite")
        h.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "origin", origin)

    @property
    def n_samples(self):
        return self.h.size

    @property
    def theta(self):
        return _grid(self.n_samples)

    @property
    def dtheta(self):
        return 2.0 * np.pi / self.n_samples

    @property
    def normals(self):
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1)

    def with_h(self, h):
        return SupportCurve(h, self.origin)

    def to_dict(self):
        return {"n_samples": self.n_samples, "origin": self.origin.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, data):
        h = data["h"]
        if "n_samples" in data and int(data["n_samples"]) != len(h):
            raise InvalidInputError("n_samples does not match the length of h")
        return cls(h, data.get("origin", (0.0, 0.0)))


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise vertices in strictly convex position."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidInputError("vertices must be an (m, 2) array")
        if len(v) < 3:
            raise InvalidInputError("a polygon needs at least 3 vertices")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) == 0.0):
            raise InvalidInputError("repeated vertex")
        turn = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(turn <= 0.0):
            raise InvalidInputError("vertices are not in counterclockwise convex position")
        # a convex turn sequence can still wind more than once
        angles = np.arctan2(edges[:, 1], edges[:, 0])
        winding = np.sum(np.mod(np.diff(np.append(angles, angles[0])), 2 * np.pi))
        if abs(winding - 2 * np.pi) > 1e-8:
            raise InvalidInputError("vertex sequence winds more than once")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def signed_area(self):
        x, y = self.vertices.T
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    @property
    def diameter(self):
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())


@dataclass(frozen=True)
class Ellipse:
    """E = {x : (x - c)^T M^{-1} (x - c) <= 1} with M symmetric positive definite."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(2)
        m = np.array(self.shape, dtype=float).reshape(2, 2)
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise InvalidInputError("ellipse shape matrix must be symmetric")
        m = 0.5 * (m + m.T)
        if np.linalg.eigvalsh(m)[0] <= 0:
            raise InvalidInputError("ellipse shape matrix must be positive definite")
        c.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", m)

    @classmethod
    def from_axes(cls, a, b, angle=0.0, center=(0.0, 0.0)):
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        return cls(center, rot @ np.diag([a * a, b * b]) @ rot.T)

    @property
    def semi_axes(self):
        """Semi-axis lengths, largest first."""
        return np.sqrt(np.linalg.eigvalsh(self.shape))[::-1]

    @property
    def area(self):
        return float(np.pi * np.sqrt(np.linalg.det(self.shape)))

    def support(self, normals):
        normals = np.atleast_2d(normals)
        quad = np.einsum("ij,jk,ik->i", normals, self.shape, normals)
        return normals @ self.center + np.sqrt(quad)

    def scaled(self, factor):
        """Dilation about the center."""
        return Ellipse(self.center, self.shape * factor**2)

    def to_dict(self):
        return {"center": self.center.tolist(), "shape": self.shape.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["center"], data["shape"])


@dataclass(frozen=True)
class AffineMap:
    """x -> linear @ x + translation."""

    linear: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    unimodular: bool = False

    def __post_init__(self):
        a = np.array(self.linear, dtype=float).reshape(2, 2)
        b = np.array(self.translation, dtype=float).reshape(2)
        det = np.linalg.det(a)
        if not np.isfinite(det) or abs(det) < 1e-14 * max(1.0, np.abs(a).max() ** 2):
            raise InvalidInputError("affine map is singular")
        if self.unimodular and abs(det - 1.0) > 1e-12:
            raise InvalidInputError(f"map flagged unimodular but det = {det!r}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "translation", b)

    @property
    def det(self):
        return float(np.linalg.det(self.linear))

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.linear.T + self.translation

    def compose(self, other):
        """The map ``self ∘ other``."""
        linear = self.linear @ other.linear
        translation = self.linear @ other.translation + self.translation
        return AffineMap(linear, translation, self.unimodular and other.unimodular)

    def inverse(self):
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.translation, self.unimodular)


def _unit(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def radius_of_curvature(c):
    """Per-sample radii of curvature ρ = h + h''; raises if any is non-positive."""
    rho = c.h + spectral_derivative(c.h, 2)
    bad = np.flatnonzero(rho <= 0.0)
    if bad.size:
        j = int(bad[np.argmin(rho[bad])])
        raise LostConvexityError(f"radius of curvature {rho[j]:.3e} <= 0 at sample {j}", index=j)
    return rho


def area(c):
    """Enclosed area (1/2)∫(h² - h'²)dθ by the trapezoid rule."""
    dh = spectral_derivative(c.h, 1)
    return float(0.5 * np.sum(c.h**2 - dh**2) * c.dtheta)


def to_points(c):
    """Boundary points X(θ_j) = o + h u + h' u^⊥, as a :class:`ConvexPolygon`."""
    radius_of_curvature(c)
    return ConvexPolygon(boundary_points(c))


def boundary_points(c):
    """Boundary points as an (n, 2) array, without the convexity check."""
    u = c.normals
    uperp = np.stack([-u[:, 1], u[:, 0]], axis=1)
    dh = spectral_derivative(c.h, 1)
    return c.origin + c.h[:, None] * u + dh[:, None] * uperp


def support_of_ellipse(E, n):
    """Exact support samples of an ellipse, measured about the plane origin."""
    if n < MIN_SAMPLES:
        raise InvalidInputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    return SupportCurve(E.support(_unit(_grid(n))), np.zeros(2))


def circle(radius=1.0, n=256, center=(0.0, 0.0)):
    return support_of_ellipse(Ellipse(center, np.eye(2) * radius**2), n)


def from_fourier(modes, n=256, base=1.0):
    """h(θ) = base + Σ a cos(kθ) + b sin(kθ) for ``modes`` of (k, a[, b])."""
    theta = _grid(n)
    h = np.full(n, float(base))
    for mode in modes:
        k, a = int(mode[0]), float(mode[1])
        b = float(mode[2]) if len(mode) > 2 else 0.0
        h += a * np.cos(k * theta) + b * np.sin(k * theta)
    return SupportCurve(h)


def recenter(c, point):
    """Same body, support measured about ``point``."""
    point = np.asarray(point, dtype=float)
    return SupportCurve(c.h - c.normals @ (point - c.origin), point)


def scale(c, factor, about=(0.0, 0.0)):
    """Homothety x -> about + factor (x - about)."""
    about = np.asarray(about, dtype=float)
    return SupportCurve(factor * c.h, about + factor * (c.origin - about))


def from_polygon(poly, n, r_smooth=None, sigma_cells=2.0):
    """Support samples of a convex polygon, smoothed to a strictly convex curve.

    ``r_smooth`` defaults to 1% of the polygon diameter; ``r_smooth=0`` returns
    the raw (non-smooth) samples max_v <v - o, u_j>.  With smoothing, the
    polygon is Minkowski-added to a disk of radius ``r_smooth`` and its
    curvature measure (edge lengths at the edge normals) is mollified by a
    wrapped Gaussian of width ``sigma_cells`` grid cells, which keeps every
    spectral radius of curvature at least ``r_smooth``.  The origin is the
    vertex centroid.
    """
    if not isinstance(poly, ConvexPolygon):
        poly = ConvexPolygon(poly)
    if n < MIN_SAMPLES:
        raise InvalidInputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    v = poly.vertices
    origin = v.mean(axis=0)
    theta = _grid(n)
    if r_smooth is None:
        r_smooth = 0.01 * poly.diameter
    if r_smooth < 0:
        raise InvalidInputError("r_smooth must be non-negative")
    if r_smooth == 0:
        return SupportCurve(np.max(_unit(theta) @ (v - origin).T, axis=1), origin)

    edges = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    normal_angle = np.arctan2(edges[:, 1], edges[:, 0]) - 0.5 * np.pi
    # exterior angle at vertex i sits between the normals of edges i-1 and i
    exterior = np.mod(normal_angle - np.roll(normal_angle, 1), 2 * np.pi)
    steiner = (v * exterior[:, None]).sum(axis=0) / (2 * np.pi) - origin

    k = _wavenumbers(n)
    rho_hat = (lengths[None, :] * np.exp(-1j * np.outer(k, normal_angle))).sum(axis=1) / (2 * np.pi)
    sigma = sigma_cells * 2 * np.pi / n
    with np.errstate(divide="ignore", invalid="ignore"):
        h_hat = rho_hat * np.exp(-0.5 * (k * sigma) ** 2) / (1.0 - k**2)
    h_hat[0] += r_smooth
    h_hat[1] = 0.5 * (steiner[0] - 1j * steiner[1])
    coef = n * h_hat
    if n % 2 == 0:
        coef[-1] = 2.0 * coef[-1].real
    return SupportCurve(np.fft.irfft(coef, n), origin)


def apply_affine(c, A, n=None):
    """Image of the curve under an affine map, resampled on an ``n``-point grid.

    Uses the exact rule h_{AK}(u) = |L^T u| h_K(L^T u / |L^T u|), with h_K
    evaluated by trigonometric interpolation; the image's origin is A(origin).
    """
    if not isinstance(A, AffineMap):
        A = AffineMap(A)
    n = c.n_samples if n is None else int(n)
    if n < MIN_SAMPLES:
        raise InvalidInputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    u = _unit(_grid(n))
    pulled = u @ A.linear
    norm = np.hypot(pulled[:, 0], pulled[:, 1])
    angles = np.arctan2(pulled[:, 1], pulled[:, 0])
    h = norm * trig_interpolate(c.h, angles)
    return SupportCurve(h, A(c.origin))


def steiner_point(c):
    """Steiner point o + (1/π)∫ h u dθ."""
    return c.origin + (c.h @ c.normals) * c.dtheta / np.pi


def hausdorff(c1, c2):
    """Hausdorff distance max_j |h1_j - h2_j| of two convex bodies.

    Both curves are brought to the finer of the two grids by Fourier
    resampling and to a common reference point before comparing.
    """
    n = max(c1.n_samples, c2.n_samples)
    h1 = resample(c1.h, n)
    h2 = resample(c2.h, n)
    u = _unit(_grid(n))
    h2 = h2 + u @ (c2.origin - c1.origin)
    return float(np.max(np.abs(h1 - h2)))


def read_polygon(path):
    """Read the plain-text "x y" per line exchange format."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidInputError(f"{path}:{lineno}: expected 'x y'")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    return ConvexPolygon(np.array(rows))


def write_polygon(poly, path):
    with open(path, "w") as fh:
        for x, y in poly.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
