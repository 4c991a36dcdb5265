"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the pytest terminal summary.  Run with ``pytest tests/test_acceptance.py``.
"""

import json
import time

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from acsf import cli, ndforms
from acsf.arrival import GridSpec, exact_field, log_concavity_check, pde_residual, radial_exact, reconstruct
from acsf.curve import Ellipse, area, boundary_points, circle, from_fourier, support_of_ellipse
from acsf.experiments import arrival_grid, classify, invariance
from acsf.flow import evolve
from acsf.invariants import SUP_RATIO, ratio_series
from acsf.normalization import ellipse_eps, mvee

SHEAR = [[1.0, 1.0], [0.0, 1.0]]


def test_criterion_1_circle_law(criterion):
    start = time.perf_counter()
    traj = evolve(circle(1.0, 256), area_floor=np.pi / 100)
    elapsed = time.perf_counter() - start
    radius = np.sqrt(traj.areas() / np.pi)
    exact = (1 - 4 / 3 * traj.times) ** 0.75
    rel = float(np.max(np.abs(radius - exact) / exact))
    t_err = abs(traj.extinction_estimate - 0.75)
    ok = rel < 1e-4 and t_err < 1e-3 and elapsed < 5
    criterion("1 circle law", ok, f"max rel radius error {rel:.2e} (< 1e-4), |T - 3/4| = {t_err:.2e} (< 1e-3), "
                                  f"runtime {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_2_ellipse_self_similarity(criterion):
    # an ellipse support function with a/b = 4 has Fourier decay 0.6^k, so n = 128 resolves it
    c = support_of_ellipse(Ellipse.from_axes(2.0, 0.5), 128)
    start = time.perf_counter()
    traj = evolve(c, area_floor=area(c) / 10)
    elapsed = time.perf_counter() - start
    # semi-axes are the support values along the axes
    ratios = np.array([s.curve.h[0] / s.curve.h[32] for s in traj.states])
    drift = float(np.max(np.abs(ratios / 4.0 - 1)))
    a23 = traj.areas() ** (2 / 3)
    slope, intercept = np.polyfit(traj.times, a23, 1)
    expected = -4 / 3 * np.pi ** (2 / 3)
    slope_err = abs(slope / expected - 1)
    nonlinear = float(np.max(np.abs(a23 - (slope * traj.times + intercept))) / a23[0])
    ok = drift < 1e-3 and slope_err < 1e-3 and nonlinear < 1e-3 and elapsed < 10
    criterion("2 ellipse self-similarity", ok,
              f"axis ratio drift {drift:.2e} (< 1e-3), slope rel error {slope_err:.2e} (< 1e-3), "
              f"max deviation from line {nonlinear:.2e}, runtime {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_3_ratio_monotone_and_bounded(criterion):
    c = from_fourier([(3, 0.1)], 256)
    start = time.perf_counter()
    traj = evolve(c, area_floor=1e-3 * area(c))
    series = ratio_series(traj)
    elapsed = time.perf_counter() - start
    monotone = series.is_monotone(1e-6)
    over = float(np.max(series.ratios) - SUP_RATIO)
    final_gap = float(series.gaps[-1])
    ok = monotone and over <= 1e-6 and final_gap < 1e-2 and elapsed < 20
    criterion("3 ratio monotone, bounded by 2π^{2/3}", ok,
              f"min increment {series.min_increment:.2e} (>= -1e-6), max - sup {over:.2e} (<= 1e-6), "
              f"final gap {final_gap:.2e} (< 1e-2), runtime {elapsed:.2f}s (< 20s)")
    assert ok


def test_criterion_4_classification(criterion, tmp_path):
    start = time.perf_counter()
    cfg = cli.load_config("classify")
    cli.cmd_classify(cfg, tmp_path / "trefoil")
    trefoil = json.loads((tmp_path / "trefoil" / "classify.json").read_text())
    eps = [m["eps"] for m in trefoil["milestones"]]
    # an ellipse support function with a/b = 4 has Fourier decay 0.6^k, so n = 128 resolves it
    ellipse = classify(support_of_ellipse(Ellipse.from_axes(2.0, 0.5, 0.4), 128))
    elapsed = time.perf_counter() - start
    decreasing = bool(np.all(np.diff(eps) < 0))
    ok = (decreasing and len(eps) == 7 and eps[6] < 0.01 and bool(np.all(ellipse.eps < 1e-4))
          and elapsed < 60)
    criterion("4 classification re-enactment", ok,
              f"trefoil eps strictly decreasing {decreasing}, eps_6 {eps[-1]:.2e} (< 1e-2); "
              f"ellipse max eps {ellipse.eps.max():.2e} (< 1e-4); runtime {elapsed:.2f}s (< 60s)")
    assert ok


def test_criterion_5_affine_invariance(criterion):
    rep = invariance(from_fourier([(3, 0.1)], 256), SHEAR, t_end=0.3, lam=16.0)
    ok = rep["affine_deviation"] < 1e-3 and rep["scaling_deviation"] < 1e-3
    criterion("5 affine and scaling invariance", ok,
              f"shear hausdorff {rep['affine_deviation']:.2e} (< 1e-3), "
              f"lambda=16 scaling hausdorff {rep['scaling_deviation']:.2e} (< 1e-3)")
    assert ok


@pytest.fixture(scope="module")
def circle_arrival():
    c = circle(1.0, 256)
    traj = evolve(c, area_floor=0.01 * np.pi, snapshot_fraction=0.0025)
    return c, traj, reconstruct(traj, arrival_grid(c, 256))


def test_criterion_6_level_set_solution(criterion, circle_arrival):
    c, traj, fld = circle_arrival
    X, Y = fld.grid.coords()
    err = float(np.max(np.abs(fld.u - radial_exact(np.stack([X, Y], -1)))[fld.resolved]))
    coarse = pde_residual(fld, r_min=0.2, r_max=0.9)
    fine = pde_residual(reconstruct(traj, arrival_grid(c, 511)), r_min=0.2, r_max=0.9)
    ratio = coarse.median_abs / fine.median_abs
    ok = err < 1e-3 and coarse.median_abs < 2e-2 and ratio >= 2
    criterion("6 level-set solution", ok,
              f"max |u - (3/4)|x|^(4/3)| {err:.2e} (< 1e-3) on {int(fld.resolved.sum())} nodes, "
              f"median residual {coarse.median_abs:.2e} (< 2e-2), halving spacing reduces it {ratio:.2f}x (>= 2)")
    assert ok


def test_criterion_7_log_concavity(criterion, circle_arrival):
    _, traj, fld = circle_arrival
    h0 = fld.extinction_time - traj.times[0]
    circ = log_concavity_check(fld, h0)
    e = support_of_ellipse(Ellipse.from_axes(2.0, 0.5), 128)
    etraj = evolve(e, area_floor=0.1 * area(e), snapshot_fraction=0.0025)
    efld = reconstruct(etraj, arrival_grid(e, 192))
    ell = log_concavity_check(efld, efld.extinction_time - etraj.times[0])
    # √u is the control that fails; see test_criterion_7_u_squared_control for u²
    control = log_concavity_check(fld.with_u(np.sqrt(fld.u)), np.sqrt(h0))
    ok = circ.passed and ell.passed and circ.violations == 0 and ell.violations == 0 and not control.passed
    criterion("7 log-concavity", ok,
              f"circle violations {circ.violations}/{circ.triples}, ellipse violations "
              f"{ell.violations}/{ell.triples} (tol 1e-6); sqrt(u) control flagged {not control.passed} "
              f"({control.violations} violations)")
    assert ok


@pytest.mark.xfail(strict=True, reason="u² keeps -log(h0 - u²) convex, so the u² control cannot be flagged")
def test_criterion_7_u_squared_control(criterion, circle_arrival):
    _, traj, fld = circle_arrival
    h0 = fld.extinction_time - traj.times[0]
    control = log_concavity_check(fld.with_u(fld.u**2), h0**2)
    flagged = not control.passed
    criterion("7 u² negative control", flagged,
              f"flagged {flagged}, {control.violations} violations; -log(h0 - v) is convex for convex v")
    assert flagged


def test_criterion_8_john_normalization(criterion):
    rng = np.random.default_rng(2024)
    worst_out, worst_half, polygons = 0.0, -np.inf, 0
    for _ in range(100):
        pts = rng.normal(size=(int(rng.integers(3, 40)), 2)) @ rng.normal(size=(2, 2))
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]
        E = mvee(verts, tol=1e-6)
        d = verts - E.center
        q = np.einsum("ij,jk,ik->i", d, np.linalg.inv(E.shape), d)
        worst_out = max(worst_out, float(np.sqrt(q.max())) - 1)
        normals, offsets = hull.equations[:, :2], -hull.equations[:, 2]
        reach = normals @ E.center + 0.5 * np.sqrt(np.einsum("ij,jk,ik->i", normals, E.shape, normals))
        worst_half = max(worst_half, float(np.max(reach - offsets)))
        polygons += 1
    worst_eps = 0.0
    for _ in range(20):
        E0 = Ellipse.from_axes(rng.uniform(0.3, 3), rng.uniform(0.3, 3), rng.uniform(0, np.pi), rng.normal(size=2))
        c = support_of_ellipse(E0, 256)
        # ε tracks the MVEE tolerance, so 1e-8 needs a tolerance at or below it
        worst_eps = max(worst_eps, ellipse_eps(c, mvee(boundary_points(c), tol=1e-10)))
    ok = polygons == 100 and worst_out <= 1e-6 and worst_half <= 1e-12 and worst_eps < 1e-8
    criterion("8 John normalization", ok,
              f"{polygons} polygons: max containment excess {worst_out:.2e} (<= 1e-6), max (1/2)E overshoot "
              f"{worst_half:.2e} (<= 0); ellipse max eps {worst_eps:.2e} (< 1e-8)")
    assert ok


def test_criterion_9_closed_forms(criterion):
    traj = evolve(circle(1.0, 256), target_time=0.9 * 0.75)
    solver = float(np.max(np.abs(np.sqrt(traj.areas() / np.pi) - ndforms.sphere_radius_nd(1.0, 1, traj.times))))
    rescale = max(ndforms.rescale_invariance_check(1.0, n, lam)
                  for n in range(1, 6) for lam in (0.25, 1.0, 4.0, 16.0))
    iso = abs(ndforms.iso_ratio_nd(ndforms.EllipsoidND(1, [1.0, 1.0])) - 2 * np.pi ** (2 / 3))
    ok = solver < 1e-4 and rescale < 1e-12 and iso < 1e-10
    criterion("9 higher-dimensional closed forms", ok,
              f"n=1 vs planar solver {solver:.2e} (< 1e-4), rescale invariance {rescale:.2e} (< 1e-12), "
              f"iso_ratio_nd(1) - 2π^(2/3) {iso:.2e} (< 1e-10)")
    assert ok


def test_exact_field_halving_reference():
    # the same halving measured on the closed form, which isolates discretization error
    a = pde_residual(exact_field(GridSpec.covering(-1.05, 1.05, 256)), 0.2, 0.9).median_abs
    b = pde_residual(exact_field(GridSpec.covering(-1.05, 1.05, 511)), 0.2, 0.9).median_abs
    assert a / b >= 2
