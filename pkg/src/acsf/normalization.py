"""John-ellipse normalization and blow-down rescaling of trajectories.

The minimum-volume enclosing ellipse (MVEE) E of a planar convex body K
satisfies (1/2)E ⊆ K ⊆ E about E's center.  A unimodular map sending E to a
disk puts K in "good shape"; the distance of the normalized support function
from that disk measures how elliptical K is.
"""

import numpy as np

from .curve import (AffineMap, ConvexPolygon, Ellipse, apply_affine, area, boundary_points,
                    radius_of_curvature, recenter, scale, steiner_point)
from .errors import ConditioningError, ConvergenceError, InvalidInputError, RangeError
from .flow import FlowState, Trajectory

BLOW_DOWN_EXPONENT = 0.75


def _barrier_weights(q, tol, max_newton=400):
    """Approximate optimal design weights from a log-barrier Newton solve of the
    dual problem max log det(Σ u_i q_i q_i^T) over the simplex.

    The Hessian of log det is -(G∘G) with G = Q X^{-1} Q^T of rank 3, so G∘G
    has rank 6 and every Newton system is solved in O(N) by Woodbury.
    """
    n = len(q)
    u = np.full(n, 1.0 / n)
    iu = np.triu_indices(3)
    coef = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))

    def slope(w, delta, mu):
        x = q.T @ (w[:, None] * q)
        g = np.einsum("ij,jk,ik->i", q, np.linalg.inv(x), q)
        return delta @ (g + mu / w)

    mu = 1.0
    mu_final = tol / n
    for _ in range(max_newton):
        x = q.T @ (u[:, None] * q)
        w = np.linalg.solve(np.linalg.cholesky(x), q.T).T
        g = np.sum(w * w, axis=1)
        if g.max() <= 3.0 * (1.0 + tol):
            break
        grad = g + mu / u
        v = (w[:, iu[0]] * w[:, iu[1]]) * coef
        dinv = u * u / mu

        def solve(b):
            db = dinv * b
            small = np.eye(6) + v.T @ (dinv[:, None] * v)
            return db - dinv * (v @ np.linalg.solve(small, v.T @ db))

        p_grad, p_one = solve(grad), solve(np.ones(n))
        delta = p_grad - p_one * (p_grad.sum() / p_one.sum())
        decrement = grad @ delta
        if decrement < 1e-14:
            if mu <= mu_final:
                break
            mu = max(mu * 0.1, mu_final)
            continue
        neg = delta < 0
        step = min(1.0, 0.99 * np.min(-u[neg] / delta[neg])) if np.any(neg) else 1.0
        # backtrack until the barrier objective is still ascending along delta
        while step > 1e-12 and slope(u + step * delta, delta, mu) < -0.9 * decrement:
            step *= 0.5
        if step <= 1e-12:
            break
        u = u + step * delta
    return u / u.sum()


def mvee(points, tol=1e-6, max_iters=100_000):
    """Minimum-volume enclosing ellipse by Khachiyan's multiplicative-weights
    iteration with Todd-Yildirim away steps.

    The weights are warm-started from a barrier Newton solve of the dual;
    plain Khachiyan stalls for many thousands of iterations on densely
    sampled smooth curves.  The Khachiyan loop then certifies the result.

    Parameters
    ----------
    points : ConvexPolygon or (N, 2) array_like
    tol : float
        Stop once every point satisfies q^T X^{-1} q <= 3 (1 + tol).  Then all
        points lie inside (1 + tol) E and vol(E) <= vol(MVEE) <= (1 + tol)^2 vol(E).

    Returns
    -------
    Ellipse
    """
    if isinstance(points, ConvexPolygon):
        points = points.vertices
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise InvalidInputError("mvee needs at least 3 planar points")
    if not 0 < tol <= 1e-2:
        raise InvalidInputError("tol must lie in (0, 1e-2]")
    if max_iters < 1:
        raise InvalidInputError("max_iters must be at least 1")
    spread = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    if spread[-1] <= 1e-12 * max(spread[0], 1e-300):
        raise InvalidInputError("points are collinear")

    d = 2
    # centering and scaling leave the problem affinely equivalent
    shift, unit = p.mean(axis=0), spread[0] / np.sqrt(len(p))
    q = np.hstack([(p - shift) / unit, np.ones((len(p), 1))])
    u = _barrier_weights(q, tol)
    bound = (d + 1) * (1.0 + tol)
    for _ in range(max_iters):
        x = q.T @ (u[:, None] * q)
        g = np.einsum("ij,jk,ik->i", q, np.linalg.inv(x), q)
        j = int(np.argmax(g))
        if g[j] <= bound:
            break
        support = np.flatnonzero(u > 0)
        i = support[np.argmin(g[support])]
        if g[j] - (d + 1) >= (d + 1) - g[i]:
            alpha = (g[j] - (d + 1)) / ((d + 1) * (g[j] - 1.0))
            u *= 1.0 - alpha
            u[j] += alpha
        else:
            beta = min((d + 1 - g[i]) / ((d + 1) * (g[i] - 1.0)), u[i] / (1.0 - u[i]))
            u *= 1.0 + beta
            u[i] = max(u[i] - beta, 0.0)
    else:
        raise ConvergenceError(f"mvee did not converge in {max_iters} iterations",
                               residual=float(g.max() / (d + 1) - 1.0))

    center = u @ p
    cov = p.T @ (u[:, None] * p) - np.outer(center, center)
    return Ellipse(center, d * cov)


def _support_ratio(c, E):
    """(h_c(u) - <center, u>) / sqrt(u^T M u) at the curve's grid normals."""
    u = c.normals
    h = c.h - u @ (E.center - c.origin)
    return h / np.sqrt(np.einsum("ij,jk,ik->i", u, E.shape, u))


def good_shape_check(c, E, tol=1e-3):
    """Check (1/2)E ⊆ c ⊆ (1 + tol)E about E's center.

    Returns ``(ok, lam)`` where ``lam`` is the largest λ with λE ⊆ c.
    """
    ratio = _support_ratio(c, E)
    lam = float(ratio.min())
    return bool(lam >= 0.5 and ratio.max() <= 1.0 + tol), lam


def unimodular_normalizer(E):
    """Map x -> det(M)^{1/4} M^{-1/2} (x - c), which sends E to the centered
    disk of radius det(M)^{1/4}."""
    w, v = np.linalg.eigh(E.shape)
    if w[-1] / w[0] > 1e12:
        raise ConditioningError(f"ellipse shape matrix condition number {w[-1] / w[0]:.3e} exceeds 1e12")
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    linear = np.sqrt(np.sqrt(w[0] * w[1])) * inv_sqrt
    # remove round-off so the determinant is 1 to machine precision
    linear /= np.sqrt(np.linalg.det(linear))
    return AffineMap(linear, -linear @ E.center, unimodular=True)


def ellipse_eps(c, E):
    """Smallest ε with (1-ε)E ⊆ c ⊆ (1+ε)E, dilations about E's center.

    After the unimodular normalizer the normalized support of c divided by
    the disk radius at direction w equals the support ratio at the pulled-back
    direction, so the extremes are read off the curve's own grid.
    """
    ratio = _support_ratio(c, E)
    return float(max(ratio.max() - 1.0, 1.0 - ratio.min()))


def normalize_snapshot(c, tol=1e-6):
    """Recenter, fit the John ellipse, map it to a disk and rescale to unit area.

    Returns
    -------
    normalized : SupportCurve
        Measured about the plane origin (the image of E's center).
    transform : AffineMap
        Unimodular normalizer followed by the isotropic unit-area scaling;
        ``transform.det`` is the squared scale factor.
    E : Ellipse
        The John ellipse of ``c``.
    """
    c = recenter(c, steiner_point(c))
    E = mvee(boundary_points(c), tol=tol)
    A = unimodular_normalizer(E)
    image = recenter(apply_affine(c, A), np.zeros(2))
    factor = 1.0 / np.sqrt(area(image))
    normalized = scale(image, factor)
    transform = AffineMap(factor * A.linear, factor * A.translation)
    return normalized, transform, E


def blow_down(traj, lam, times=None):
    """Rescaled trajectory t -> λ^{-3/4} X(λ t).

    With ``times=None`` the output is sampled at t_k / λ for every stored
    snapshot, so no interpolation is needed; explicit ``times`` are served by
    linear interpolation of support values between snapshots.
    """
    if lam <= 0:
        raise InvalidInputError("blow-down factor must be positive")
    factor = lam ** (-BLOW_DOWN_EXPONENT)
    if times is None:
        states = [FlowState(s.t / lam, scale(s.curve, factor)) for s in traj.states]
    else:
        t_all = traj.times
        states = []
        for t in times:
            if lam * t < t_all[0] - 1e-12 or lam * t > t_all[-1] + 1e-12:
                raise RangeError(f"blow-down time {t} maps outside the trajectory")
            curve = traj.curve_at(lam * t)
            radius_of_curvature(curve)
            states.append(FlowState(float(t), scale(curve, factor)))
    policy = dict(traj.step_policy)
    policy["blow_down"] = lam
    return Trajectory(states, policy, traj.extinction_estimate / lam)
