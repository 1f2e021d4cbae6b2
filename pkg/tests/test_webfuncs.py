from __future__ import annotations

import numpy as np
import pytest

from stadiumlab import geometry as geo
from stadiumlab import infinity_ops as io
from stadiumlab import webfuncs as wf

N = wf.WebProfile("normalized", 1.0)
NN = wf.WebProfile("nonnormalized", 1.0)


def test_constant_value():
    assert wf.C0 == pytest.approx(3 ** (4 / 3) / 4, rel=1e-15)
    assert wf.C0 == pytest.approx(1.081687, abs=1e-6)


def test_profile_values_at_ridge_and_boundary():
    assert wf.profile_value(N, 1.0) == pytest.approx(0.5)
    assert wf.profile_value(NN, 1.0) == pytest.approx(wf.C0)
    assert wf.profile_derivative(N, 0.0) == pytest.approx(1.0)
    assert wf.profile_value(N, 0.0) == 0.0 and wf.profile_value(NN, 0.0) == 0.0


def test_nonnormalized_profile_small_argument_is_accurate():
    t = 1e-12
    # first-order expansion: c0 (4/3) t for rho = 1
    assert wf.profile_value(NN, t) == pytest.approx(wf.C0 * 4 / 3 * t, rel=1e-9)


def test_profile_rejects_arguments_beyond_range():
    with pytest.raises(wf.ProfileDomainError):
        wf.profile_value(N, 1.5)


def test_profile_kinds_validated():
    with pytest.raises(ValueError):
        wf.WebProfile("cubic", 1.0)
    with pytest.raises(ValueError):
        wf.WebProfile("radial", 1.0, 0.5)


def test_profile_json_round_trip():
    p = wf.WebProfile("radial", 1.0, 2.0)
    assert wf.WebProfile.from_json(p.to_json()) == p


def test_web_values():
    assert wf.web_value(geo.Stadium(), (0.2, 0.0), N) == pytest.approx(0.5)
    assert wf.web_value(geo.Disk(), (1.0, 0.0), NN) == pytest.approx(0.0, abs=1e-15)


def test_web_gradients():
    np.testing.assert_allclose(wf.web_gradient(geo.Disk(), (0.5, 0.0), N), (-0.5, 0.0), atol=1e-14)
    np.testing.assert_allclose(wf.web_gradient(geo.Disk(), (0.0, 0.0), N), (0.0, 0.0))
    g = wf.web_gradient(geo.Stadium(), (0.0, 0.5), N)
    assert np.hypot(*g) == pytest.approx(0.5)
    assert g[1] < 0 and abs(g[0]) < 1e-14


def test_web_gradient_undefined_on_cut_locus():
    assert wf.web_gradient(geo.Ellipse(), (1.0, 0.0), N) is None


def test_web_gradient_matches_finite_differences():
    step = 1e-6
    for dom in (geo.Stadium(), geo.Ellipse(), geo.unit_square()):
        p = wf.profile_for(dom, "normalized")
        for x in ([0.4, 0.6], [-0.3, 0.35], [0.2, 0.15]):
            x = np.asarray(x)
            if dom.signed_distance(x) <= 0.01:
                continue
            g = wf.web_gradient(dom, x, p)
            if g is None:
                continue
            fd = [(wf.web_value(dom, x + step * e, p) - wf.web_value(dom, x - step * e, p)) / (2 * step)
                  for e in np.eye(2)]
            np.testing.assert_allclose(g, fd, atol=1e-5)


def test_serrin_constants():
    assert wf.serrin_constant(N) == pytest.approx(1.0)
    assert wf.serrin_constant(NN) == pytest.approx(3 ** (1 / 3), abs=1e-12)
    assert wf.serrin_constant(wf.WebProfile("normalized", 2.0)) == pytest.approx(2.0)


def test_p_constants():
    assert wf.p_constant(N) == 0.5
    assert wf.p_constant(NN) == pytest.approx(wf.C0)
    assert wf.p_constant(wf.WebProfile("normalized", 2.0)) == 2.0


def test_radial_values():
    assert wf.radial_solution_value(1.0, 1.0, np.zeros(2)) == pytest.approx(0.5)
    assert wf.radial_solution_value(2.0, 1.0, np.array([1.0, 0.0])) == pytest.approx(0.0)
    assert wf.radial_solution_value(2.0, 1.0, np.zeros(2)) == pytest.approx(1.5)


def test_certify_web_supersolution_reports_no_violations():
    rep = wf.certify_web_supersolution(geo.Stadium(), N, 2000)
    assert rep.n_violations == 0
    assert sum(rep.counts.values()) == 2000
    assert rep.counts["ridge"] > 0 and rep.counts["regular"] > 0


def test_web_jet_matches_operator_identity():
    dom = geo.Ellipse()
    for p in (N, NN):
        j = wf.web_jet(dom, (0.3, 0.5), p)
        val = io.infinity_laplacian(j)
        if p.kind == "normalized":
            val /= float(j.p @ j.p)
        assert -val == pytest.approx(1.0, abs=1e-10)


def test_boundary_curvature_disk_and_ellipse():
    assert wf.boundary_curvature(geo.Disk(), (1.0, 0.0)) == pytest.approx(1.0, rel=1e-6)
    # at the end of the major axis the curvature is a / b^2
    assert wf.boundary_curvature(geo.Ellipse(), (2.0, 0.0)) == pytest.approx(2.0, rel=1e-6)


def test_cut_kink_detected_just_below_the_ridge():
    # on the ellipse's cut segment next to the centre the kink is of size rho - d ~ 4e-5
    dom = geo.Ellipse()
    x = np.array([0.015625, 0.0])
    assert 0 < 1.0 - float(dom.signed_distance(x)) < 1e-4
    ok, _ = wf._cut_case(dom, lambda y: wf.web_value(dom, y, N), x, 10.0)
    assert ok


def test_smooth_function_at_a_cut_point_is_not_certified():
    dom = geo.Ellipse()
    x = np.array([0.5, 0.0])
    smooth = lambda y: 0.5 * (4.0 - float(np.dot(y, y)))  # noqa: E731
    ok, info = wf._cut_case(dom, smooth, x, 10.0)
    assert not ok and info["case"] == "cut"
