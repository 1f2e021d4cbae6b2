from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from stadiumlab import diagnostics as dg
from stadiumlab import geometry as geo
from stadiumlab import infinity_ops as io
from stadiumlab import solver as sv
from stadiumlab import webfuncs as wf

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec = st.tuples(finite, finite)
sym = st.tuples(finite, finite, finite)
SHAPES = {"disk": geo.Disk(), "stadium": geo.Stadium(), "ellipse": geo.Ellipse(), "square": geo.unit_square()}


def make(p, abc):
    a, b, c = abc
    return io.Jet2(np.asarray(p, float), np.array([[a, b], [b, c]]))


# ---------------------------------------------------------------- operators


@given(vec, sym, st.floats(1e-3, 1e3).flatmap(lambda m: st.sampled_from([m, -m])))
def test_normalized_operator_ignores_gradient_scale(p, X, c):
    assume(np.hypot(*p) > 1e-3)
    j = make(p, X)
    k = make(np.multiply(p, c), X)
    scale = max(1.0, np.abs(X).max())
    assert io.normalized_infinity_laplacian(k) == pytest.approx(io.normalized_infinity_laplacian(j),
                                                                abs=1e-10 * scale)


@given(vec, sym)
def test_plain_and_normalized_agree(p, X):
    assume(np.hypot(*p) > 1e-3)
    j = make(p, X)
    n2 = float(np.dot(p, p))
    ref = io.infinity_laplacian(j)
    assert n2 * io.normalized_infinity_laplacian(j) == pytest.approx(ref, rel=1e-12, abs=1e-12 * n2 * max(1, np.abs(X).max()))


@given(vec, sym)
def test_dichotomy_ordering(p, X):
    j = make(p, X)
    lo, hi = io.delta_minus(j), io.delta_plus(j)
    assert lo <= hi
    if np.hypot(*p) > 1e-14 * np.linalg.norm(j.X):
        assert lo == hi


@given(sym)
def test_eigenvalues_solve_characteristic_polynomial(abc):
    a, b, c = abc
    lo, hi = io.eigenvalues(np.array([[a, b], [b, c]]))
    scale = max(1.0, abs(a), abs(b), abs(c))
    for lam in (lo, hi):
        assert (a - lam) * (c - lam) - b * b == pytest.approx(0.0, abs=1e-11 * scale ** 2)
    assert lo + hi == pytest.approx(a + c, abs=1e-12 * scale)


# ---------------------------------------------------------------- geometry


def interior_points(dom, n, rng):
    x0, x1, y0, y1 = dom.bbox()
    pts = rng.uniform([x0, y0], [x1, y1], size=(4 * n, 2))
    return pts[np.asarray(dom.signed_distance(pts)) > 0][:n]


@pytest.mark.parametrize("name", list(SHAPES))
def test_distance_is_concave_on_random_triples(name):
    dom = SHAPES[name]
    rng = np.random.default_rng(11)
    x, y = interior_points(dom, 10_000, rng), interior_points(dom, 10_000, rng)
    n = min(len(x), len(y))
    t = rng.uniform(size=(n, 1))
    mid = dom.signed_distance(t * x[:n] + (1 - t) * y[:n])
    chord = t[:, 0] * dom.signed_distance(x[:n]) + (1 - t[:, 0]) * dom.signed_distance(y[:n])
    assert np.all(mid >= chord - 1e-10)


@pytest.mark.parametrize("name", list(SHAPES))
def test_distance_is_one_lipschitz(name):
    dom = SHAPES[name]
    rng = np.random.default_rng(12)
    x0, x1, y0, y1 = dom.bbox()
    a = rng.uniform([x0 - 0.5, y0 - 0.5], [x1 + 0.5, y1 + 0.5], size=(10_000, 2))
    b = rng.uniform([x0 - 0.5, y0 - 0.5], [x1 + 0.5, y1 + 0.5], size=(10_000, 2))
    diff = np.abs(dom.signed_distance(a) - dom.signed_distance(b))
    assert np.all(diff <= np.hypot(*(a - b).T) + 1e-12)


@given(st.sampled_from(["disk", "stadium", "ellipse", "square"]), st.floats(0.01, 1.0),
       st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_parallel_body_adds_eps_inside(name, eps, u, v):
    dom = SHAPES[name]
    x0, x1, y0, y1 = dom.bbox()
    x = np.array([x0 + u * (x1 - x0), y0 + v * (y1 - y0)])
    d = float(dom.signed_distance(x))
    assume(d > 0)
    body = geo.outer_parallel_body(dom, eps)
    assert float(body.signed_distance(x)) == pytest.approx(d + eps, abs=1e-12)


@pytest.mark.parametrize("name", list(SHAPES))
def test_high_ridge_lies_in_cut_locus(name):
    dom, h = SHAPES[name], 1 / 32
    rep = geo.ridge_report(dom, h)
    from scipy.spatial.distance import directed_hausdorff
    assert directed_hausdorff(rep.high_ridge, rep.cut_locus)[0] <= 2 * h


# ---------------------------------------------------------------- web functions


@pytest.mark.parametrize("kind", ["normalized", "nonnormalized"])
def test_profile_ode_identity(kind):
    p = wf.WebProfile(kind, 1.3)
    t = np.linspace(0.0, 1.3, 2001)[:-1]
    g1, g2 = wf.profile_derivative(p, t), wf.profile_second_derivative(p, t)
    lhs = -g1 ** 2 * g2 if kind == "nonnormalized" else -g2
    np.testing.assert_allclose(lhs, 1.0, atol=1e-10)


@pytest.mark.parametrize("name", list(SHAPES))
@pytest.mark.parametrize("kind", ["normalized", "nonnormalized"])
def test_p_function_constant_on_web_functions(name, kind):
    dom = SHAPES[name]
    p = wf.profile_for(dom, kind)
    pts = interior_points(dom, 2000, np.random.default_rng(5))
    g = wf.web_gradient_field(dom, pts, p)
    ok = ~np.isnan(g[:, 0])
    v = wf.web_value(dom, pts[ok], p)
    n2 = np.sum(g[ok] ** 2, axis=1)
    P = 0.25 * n2 ** 2 + v if kind == "nonnormalized" else 0.5 * n2 + v
    np.testing.assert_allclose(P, wf.p_constant(p), atol=1e-10)


@pytest.mark.parametrize("name", list(SHAPES))
@pytest.mark.parametrize("kind, power", [("normalized", 0.5), ("nonnormalized", 0.75)])
def test_power_concavity_along_segments(name, kind, power):
    dom = SHAPES[name]
    p = wf.profile_for(dom, kind)
    rng = np.random.default_rng(9)
    a, b = interior_points(dom, 10_000, rng), interior_points(dom, 10_000, rng)
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    f = lambda x: wf.web_value(dom, x, p) ** power  # noqa: E731
    assert np.all(f(0.5 * (a + b)) >= 0.5 * (f(a) + f(b)) - 1e-10)


@pytest.mark.parametrize("name", ["ellipse", "square", "stadium"])
def test_inner_ball_comparison(name):
    dom = SHAPES[name]
    rho, c = dom.inradius()
    p = wf.WebProfile("normalized", rho)
    rng = np.random.default_rng(2)
    r = rho * np.sqrt(rng.uniform(size=5000))
    th = rng.uniform(0, 2 * np.pi, size=5000)
    pts = c + np.column_stack([r * np.cos(th), r * np.sin(th)])
    ball = 0.5 * (rho ** 2 - np.sum((pts - c) ** 2, axis=1))
    assert np.all(ball <= wf.web_value(dom, pts, p) + 1e-12)
    # equality on the segment from the centre to a touching point
    foot, _ = dom.nearest_feet_and_normal(c + 1e-9)
    seg = c + np.linspace(0, 1, 50)[:, None] * (np.asarray(foot) - c)
    ball_seg = 0.5 * (rho ** 2 - np.sum((seg - c) ** 2, axis=1))
    np.testing.assert_allclose(wf.web_value(dom, seg, p), ball_seg, atol=1e-7)


# ---------------------------------------------------------------- scheme


reach_s = st.floats(0.05, 0.5)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.lists(reach_s, min_size=4, max_size=4),
       st.integers(0, 3), st.floats(1e-3, 1.0), st.floats(0.1, 4.0))
def test_local_update_is_monotone_in_neighbours(U, reach, k, bump, c):
    U = np.array([U])
    reach = np.array([reach])
    base = sv.local_update(U, reach, np.array([c]), np.zeros(1))
    V = U.copy()
    V[0, k] += bump
    assert sv.local_update(V, reach, np.array([c]), np.zeros(1))[0] >= base[0] - 1e-12


@given(st.integers(0, 2**32 - 1))
def test_jacobi_sweep_preserves_order(seed):
    g = sv.build_grid(geo.Ellipse(), 1 / 8)
    rng = np.random.default_rng(seed)
    v = rng.uniform(0, 1, g.n_active)
    w = v + rng.uniform(0, 0.5, g.n_active)
    assert np.all(sv.jacobi_update(v, g) <= sv.jacobi_update(w, g) + 1e-12)


def test_boundary_values_stay_zero():
    f = sv.solve(geo.unit_square(), 1 / 16, config=sv.SolverConfig(accelerate=False, tol=1e-8))
    inactive = np.ones(f.values.shape, bool)
    inactive[f.grid.active[:, 0], f.grid.active[:, 1]] = False
    assert np.all(f.values[inactive] == 0)


# ---------------------------------------------------------------- sup-convolution


fields = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).uniform(0, 1, (12, 12)))


@given(fields, st.floats(0.01, 0.2), st.floats(1.0, 3.0))
def test_sup_convolution_dominates_and_grows_with_eps(v, eps, factor):
    h, R = 0.05, 0.4
    small = dg.sup_convolution_values(v, h, eps, R)
    large = dg.sup_convolution_values(v, h, eps * factor, R)
    assert np.all(small >= v)
    assert np.all(large >= small - 1e-15)
