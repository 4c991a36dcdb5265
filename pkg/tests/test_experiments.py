import json

import numpy as np
import pytest

from acsf.curve import ConvexPolygon, area, circle, hausdorff, write_polygon
from acsf.errors import InvalidInputError
from acsf.experiments import (CURVE_KINDS, arrival_experiment, build_curve, classify, evolve_summary,
                              invariance, ndcheck, random_polygon, random_unimodular)
from acsf.flow import evolve
from acsf.invariants import SUP_RATIO


# --- curve construction ------------------------------------------------------------------------------

def test_build_every_kind(tmp_path):
    path = tmp_path / "square.txt"
    write_polygon(ConvexPolygon([[1, 1], [-1, 1], [-1, -1], [1, -1]]), path)
    specs = {
        "circle": {"kind": "circle", "radius": 2.0},
        "ellipse": {"kind": "ellipse", "a": 2.0, "b": 0.5, "angle": 0.3},
        "fourier": {"kind": "fourier", "modes": [[3, 0.1]]},
        "polygon": {"kind": "polygon", "path": str(path)},
        "random_polygon": {"kind": "random_polygon", "vertices": 12},
    }
    assert set(specs) == set(CURVE_KINDS)
    curves = {k: build_curve(v, 64) for k, v in specs.items()}
    assert np.isclose(area(curves["circle"]), 4 * np.pi)
    assert np.isclose(area(curves["ellipse"]), np.pi, rtol=1e-6)
    assert np.isclose(area(curves["fourier"]), np.pi * (1 - 0.04))
    # rounding plus mollification only add area
    assert 4.0 < area(build_curve(specs["polygon"], 256)) < 4.5
    inline = build_curve({"kind": "polygon", "vertices": [[1, 1], [-1, 1], [-1, -1], [1, -1]]}, 64)
    assert np.array_equal(inline.h, curves["polygon"].h)


def test_build_curve_does_not_mutate_its_spec():
    spec = {"kind": "circle", "radius": 1.0}
    build_curve(spec, 32)
    assert spec == {"kind": "circle", "radius": 1.0}
    assert np.array_equal(build_curve(None, 32).h, circle(1.0, 32).h)


@pytest.mark.parametrize("spec", [{"kind": "blob"}, {"kind": "ellipse", "a": 1.0}, {"kind": "polygon"}])
def test_build_curve_errors(spec):
    with pytest.raises(InvalidInputError):
        build_curve(spec, 32)


def test_random_polygon_is_seeded_and_convex():
    a = random_polygon(np.random.default_rng(5), 15)
    b = random_polygon(np.random.default_rng(5), 15)
    assert np.array_equal(a.vertices, b.vertices)
    assert len(a.vertices) == 15
    assert np.allclose(np.hypot(*a.vertices.T), 1.0)
    with pytest.raises(InvalidInputError):
        random_polygon(np.random.default_rng(0), 2)


def test_random_unimodular():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m = random_unimodular(rng)
        assert abs(np.linalg.det(m) - 1) < 1e-12
        assert np.linalg.cond(m) <= 4.0 + 1e-9


# --- classify ------------------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trefoil_classify():
    return classify(build_curve({"kind": "fourier", "modes": [[3, 0.1]]}, 128))


def test_classify_trefoil_converges_to_ellipse(trefoil_classify):
    res = trefoil_classify
    assert [m.k for m in res.milestones] == list(range(7))
    assert res.eps_strictly_decreasing
    assert res.eps[-1] < 0.01 and res.gaps[-1] < 1e-2
    assert np.all(res.gaps >= -1e-9)
    assert res.stop_reason == "area_floor"


def test_classify_milestones_hit_the_schedule(trefoil_classify):
    a0 = trefoil_classify.milestones[0].area
    for m in trefoil_classify.milestones[1:]:
        assert m.lam == 4.0**m.k
        # first snapshot at or below the mark
        assert a0 / m.lam * (1 - 0.02) < m.area <= a0 / m.lam * (1 + 1e-12)


def test_classify_milestone_normalization(trefoil_classify):
    for m in trefoil_classify.milestones:
        assert abs(area(m.normalized) - 1) < 1e-10
        assert 0.5 <= m.shape_lambda <= 1
        assert np.max(m.normalized.h) <= m.disk_radius * (1 + 1e-5)
        assert np.min(m.normalized.h) >= 0.5 * m.disk_radius


def test_classify_to_dict_is_json(trefoil_classify):
    d = trefoil_classify.to_dict()
    json.dumps(d)
    assert d["eps_strictly_decreasing"] and d["gap_below_tol"]
    assert len(d["milestones"]) == 7
    assert set(d["milestones"][0]) >= {"k", "lambda", "eps", "iso_gap", "ellipse", "normalized_disk_radius"}


def test_classify_ellipse_is_stationary():
    res = classify(build_curve({"kind": "ellipse", "a": 2.0, "b": 0.5, "angle": 0.4}, 128))
    assert np.all(res.eps < 1e-4)
    assert np.all(np.abs(res.gaps) < 1e-6)


def test_classify_smoothed_square_decreases():
    res = classify(build_curve({"kind": "polygon", "vertices": [[1, 1], [-1, 1], [-1, -1], [1, -1]]}, 256),
                   k_max=4)
    assert res.eps_strictly_decreasing
    assert res.eps[0] > 0.25


@pytest.mark.parametrize("kwargs", [{"base": 1.0}, {"k_max": 0}])
def test_classify_rejects_bad_schedule(kwargs):
    with pytest.raises(InvalidInputError):
        classify(circle(1.0, 32), **kwargs)


# --- evolve summary, invariance -------------------------------------------------------------------------------

def test_evolve_summary():
    s = evolve_summary(evolve(circle(1.0, 64), area_floor=np.pi / 10))
    assert s["stop_reason"] == "area_floor" and s["ratio_monotone"] and not s["ratio_exceeds_sup"]
    assert abs(s["extinction_estimate"] - 0.75) < 1e-3
    assert s["area_law_deviation"] < 1e-3
    assert abs(s["final_ratio_gap"]) < 1e-10
    json.dumps(s)


def test_invariance_shear():
    c = build_curve({"kind": "fourier", "modes": [[3, 0.1]]}, 128)
    rep = invariance(c, [[1.0, 1.0], [0.0, 1.0]], 0.2)
    assert rep["affine_deviation"] < 1e-3 and rep["scaling_deviation"] < 1e-3
    assert rep["scaling_exponent"] == 0.75 and rep["lambda"] == 16.0


def test_invariance_detects_a_wrong_exponent(monkeypatch):
    from acsf import experiments
    monkeypatch.setattr(experiments, "BLOW_DOWN_EXPONENT", 0.5)
    c = build_curve({"kind": "fourier", "modes": [[3, 0.1]]}, 64)
    assert invariance(c, np.eye(2), 0.2)["scaling_deviation"] > 1e-2


def test_invariance_rejects_non_unimodular():
    with pytest.raises(InvalidInputError):
        invariance(circle(1.0, 32), [[2.0, 0.0], [0.0, 1.0]], 0.1)


# --- arrival, ndcheck --------------------------------------------------------------------------------------------

def test_arrival_experiment_on_circle():
    fld, res, conc, traj = arrival_experiment(circle(1.0, 128), nodes=128)
    assert res.median_abs < 2e-2
    assert conc.passed
    assert hausdorff(traj.curves[0], circle(1.0, 128)) == 0.0
    assert abs(fld.extinction_time - 0.75) < 1e-6


def test_ndcheck_rows_all_pass():
    rows = ndcheck(n_max=3, lambdas=(0.25, 16.0), solver_n=64)
    assert all(r[-1] for r in rows)
    checks = {r[0] for r in rows}
    assert checks == {"rescale_invariance", "extinction_time", "ellipsoid_volume_law",
                      "iso_ratio_affine_invariance", "iso_ratio_n1_vs_planar", "n1_vs_planar_solver"}
    n1 = [r for r in rows if r[0] == "iso_ratio_n1_vs_planar"][0]
    assert n1[3] < 1e-10 and SUP_RATIO > 4.29
