from __future__ import annotations

import math

import numpy as np
import pytest

from stadiumlab import geometry as geo
from stadiumlab import infinity_ops as io
from stadiumlab import webfuncs as wf


def jet(p, X):
    return io.Jet2(np.asarray(p, float), np.asarray(X, float))


# ---------------------------------------------------------------- jets


def test_jet_rejects_asymmetric_matrix():
    with pytest.raises(ValueError):
        jet((0, 0), [[1.0, 2.0], [0.0, 1.0]])


def test_jet_symmetrises_round_off():
    j = jet((0, 0), [[1.0, 2.0], [2.0 + 1e-16, 1.0]])
    assert j.X[0, 1] == j.X[1, 0]


def test_jet_json():
    d = jet((1, 2), np.eye(2)).to_json()
    assert d["p"] == [1.0, 2.0] and d["X"] == [[1.0, 0.0], [0.0, 1.0]]


# ---------------------------------------------------------------- operators


def test_infinity_laplacian_examples():
    assert io.infinity_laplacian(jet((1, 0), np.eye(2))) == 1.0
    assert io.infinity_laplacian(jet((0, 0), [[3.0, 1.0], [1.0, -2.0]])) == 0.0
    # half the squared norm at (1, 2): gradient (1, 2), identity Hessian
    assert io.infinity_laplacian(jet((1, 2), np.eye(2))) == pytest.approx(5.0, abs=1e-15)


def test_normalized_examples():
    assert io.normalized_infinity_laplacian(jet((3, 0), np.diag([-1.0, 7.0]))) == pytest.approx(-1.0)
    assert io.normalized_infinity_laplacian(jet((1, 1), np.eye(2))) == pytest.approx(1.0)
    with pytest.raises(io.ZeroGradientError):
        io.normalized_infinity_laplacian(jet((0, 0), np.eye(2)))


def test_extremal_operators_examples():
    assert io.delta_plus(jet((0, 0), -np.eye(2))) == -1.0
    j = jet((0, 0), np.diag([2.0, -3.0]))
    assert io.delta_plus(j) == 2.0 and io.delta_minus(j) == -3.0
    j = jet((1, 0), np.diag([-1.0, 5.0]))
    assert io.delta_plus(j) == pytest.approx(-1.0) and io.delta_minus(j) == pytest.approx(-1.0)


def test_zero_gradient_threshold_is_relative_to_hessian():
    X = np.diag([-1e6, 1e6])  # Frobenius norm about 1.41e6, threshold about 1.41e-8
    below = jet((1e-9, 0), X)
    assert io.delta_plus(below) == pytest.approx(1e6)
    assert io.delta_minus(below) == pytest.approx(-1e6)
    above = jet((1e-7, 0), X)
    assert io.delta_plus(above) == pytest.approx(-1e6)
    assert io.delta_minus(above) == pytest.approx(-1e6)


def test_eigenvalues_ordered():
    lo, hi = io.eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert (lo, hi) == pytest.approx((-1.0, 1.0))


# ---------------------------------------------------------------- certification


def test_web_function_on_stadium_spine_is_supersolution():
    dom = geo.Stadium()
    p = wf.WebProfile("normalized", 1.0)
    v = io.certify_supersolution(lambda y: wf.web_value(dom, y, p), (0.3, 0.0), normalized=True)
    assert v.satisfied and not v.empty_jet
    assert v.kind == "supersolution-check"
    assert v.margin >= 0


def test_square_cut_point_off_centre_has_empty_subjet():
    dom = geo.unit_square()
    p = wf.profile_for(dom, "normalized")
    v = io.certify_supersolution(lambda y: wf.web_value(dom, y, p), (0.25, 0.25), normalized=True)
    assert v.satisfied and v.empty_jet


def test_downward_quadratic_is_supersolution():
    x = np.array([0.2, -0.4])
    v = io.certify_supersolution(lambda y: -np.sum((np.asarray(y) - x) ** 2, axis=-1), x)
    # the touching Hessian is -2 I, so -delta_minus = 2 >= 1
    assert v.satisfied
    assert v.margin == pytest.approx(1.0, abs=1e-6)


def test_classical_solution_is_subsolution_off_centre():
    dom = geo.Disk()
    p = wf.WebProfile("normalized", 1.0)
    v = io.certify_subsolution(lambda y: wf.web_value(dom, y, p), (0.4, 0.1), normalized=True)
    assert v.satisfied and v.kind == "subsolution-check"


def test_steep_quadratic_violates_subsolution_with_witness():
    x = np.array([0.1, 0.1])
    v = io.certify_subsolution(lambda y: -10 * np.sum((np.asarray(y) - x) ** 2, axis=-1), x)
    assert not v.satisfied
    assert v.witness is not None
    # witness Hessian must touch from above: at least as large as -20 I in both eigenvalues
    assert np.all(np.linalg.eigvalsh(v.witness.X) >= -20 - 1e-9)
    assert v.margin < 0


def test_nonnormalized_web_function_subsolution_on_spine():
    dom = geo.Stadium()
    p = wf.WebProfile("nonnormalized", 1.0)
    v = io.certify_subsolution(lambda y: wf.web_value(dom, y, p), (0.0, 0.0), normalized=False)
    assert v.satisfied


def test_verdicts_are_deterministic():
    dom = geo.Ellipse()
    p = wf.WebProfile("normalized", 1.0)
    f = lambda y: wf.web_value(dom, y, p)  # noqa: E731
    a = io.certify_supersolution(f, (0.7, 0.3))
    b = io.certify_supersolution(f, (0.7, 0.3))
    assert a.to_json() == b.to_json()


def test_verdict_json_shape():
    v = io.certify_supersolution(lambda y: -np.sum(np.asarray(y) ** 2, axis=-1), (0.0, 0.0))
    d = v.to_json()
    assert set(d) == {"point", "kind", "satisfied", "margin"}
    assert isinstance(d["margin"], float) and not math.isnan(d["margin"])
