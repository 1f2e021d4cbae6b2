from __future__ import annotations

import numpy as np
import pytest

from stadiumlab import geometry as geo
from stadiumlab import solver as sv
from stadiumlab import webfuncs as wf

from conftest import DOMAINS, solved


# ---------------------------------------------------------------- grid


def test_coarse_disk_grid_has_origin_node():
    g = sv.build_grid(geo.Disk(), 0.5)
    pts = g.active_points()
    assert np.any(np.all(np.abs(pts) < 1e-12, axis=1))


def test_very_coarse_grid_still_classifies_and_cuts_are_short():
    g = sv.build_grid(geo.Disk(), 0.9)
    assert (g.status == sv.INTERIOR).sum() + (g.status == sv.BOUNDARY_ADJACENT).sum() >= 1
    cut = g.nbr < 0
    lengths = g.reach / np.linalg.norm(g.directions, axis=1)[None, :]
    assert np.all(lengths[cut] <= g.h + 1e-12)


def test_grid_too_coarse():
    with pytest.raises(sv.GridTooCoarseError):
        sv.build_grid(geo.Disk(), 2.0)


def test_boundary_cuts_land_on_boundary():
    dom = geo.Ellipse()
    g = sv.build_grid(dom, 1 / 16)
    pts = g.active_points()
    a, k = np.nonzero(g.nbr < 0)
    hit = pts[a] + g.reach[a, k, None] * g.directions[k] / np.linalg.norm(g.directions[k], axis=1)[:, None]
    assert np.max(np.abs(dom.signed_distance(hit))) < 1e-10


def test_config_validation():
    with pytest.raises(ValueError):
        sv.SolverConfig(tol=0)
    with pytest.raises(ValueError):
        sv.SolverConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        sv.SolverConfig(sweep="sor")
    with pytest.raises(ValueError):
        sv.SolverConfig(stencil=12)


# ---------------------------------------------------------------- solves


def test_disk_normalized_error():
    f = solved("disk", 1 / 64)
    exact = wf.web_value(geo.Disk(), f.grid.active_points(), wf.WebProfile("normalized", 1.0))
    assert np.max(np.abs(f.active_values - exact)) <= 0.02


def test_disk_nonnormalized_error():
    f = solved("disk", 1 / 64, "nonnormalized")
    exact = wf.web_value(geo.Disk(), f.grid.active_points(), wf.WebProfile("nonnormalized", 1.0))
    assert np.max(np.abs(f.active_values - exact)) <= 0.05


def test_values_vanish_off_active_set_and_are_finite():
    f = solved("stadium", 1 / 64)
    mask = np.zeros(f.values.shape, bool)
    mask[f.grid.active[:, 0], f.grid.active[:, 1]] = True
    assert np.all(f.values[~mask] == 0.0)
    assert np.all(np.isfinite(f.values))


def test_solve_is_bitwise_deterministic():
    a = sv.solve(geo.Ellipse(), 1 / 16)
    b = sv.solve(geo.Ellipse(), 1 / 16)
    assert np.array_equal(a.values, b.values)


def test_metadata_recorded():
    f = solved("disk", 1 / 64)
    for key in ("problem", "sweeps", "final_change", "linear_solves", "max_residual"):
        assert key in f.meta
    assert f.meta["final_change"] <= 1e-10


@pytest.mark.parametrize("sweep", ["jacobi", "gs"])
def test_plain_sweeps_reach_the_accelerated_answer(sweep):
    dom = geo.Disk()
    ref = sv.solve(dom, 1 / 8)
    f = sv.solve(dom, 1 / 8, config=sv.SolverConfig(accelerate=False, sweep=sweep, tol=1e-12))
    assert np.max(np.abs(f.values - ref.values)) < 1e-9


def test_sweep_budget_exhaustion_raises():
    cfg = sv.SolverConfig(accelerate=False, max_sweeps=3)
    with pytest.raises(sv.NonConvergenceError) as info:
        sv.solve(geo.Disk(), 1 / 8, config=cfg)
    assert info.value.residual > cfg.tol
    assert info.value.field is not None


@pytest.mark.parametrize("name", ["ellipse", "square"])
def test_inner_ball_and_web_function_sandwich(name):
    dom = DOMAINS[name]
    h = 1 / 64
    f = solved(name, h)
    rho, c = dom.inradius()
    pts = f.grid.active_points()
    u = f.active_values
    upper = wf.web_value(dom, pts, wf.WebProfile("normalized", rho))
    assert np.all(u <= upper + 5 * h)
    r = np.hypot(*(pts - c).T)
    inside = r < rho
    lower = 0.5 * (rho ** 2 - r[inside] ** 2)
    assert np.all(lower <= u[inside] + 5 * h)


def test_unknown_problem_kind():
    with pytest.raises(ValueError):
        sv.solve(geo.Disk(), 1 / 8, "biharmonic")


# ---------------------------------------------------------------- gradients


def test_discrete_gradient_exact_on_linear_fields():
    g = sv.build_grid(geo.Disk(), 1 / 16)
    f = sv.field_from_function(g, lambda x: 0.3 * x[..., 0] - 1.7 * x[..., 1])
    grad = sv.discrete_gradient(f)
    inner = (g.axis_nbr >= 0).all(axis=1)
    np.testing.assert_allclose(grad[inner], np.tile([0.3, -1.7], (inner.sum(), 1)), atol=1e-12)


def test_discrete_gradient_of_constant_is_zero():
    g = sv.build_grid(geo.Disk(), 1 / 16)
    f = sv.field_from_function(g, lambda x: np.full(x.shape[:-1], 2.0))
    inner = (g.axis_nbr >= 0).all(axis=1)
    assert np.max(np.abs(sv.discrete_gradient(f)[inner])) < 1e-12


def test_discrete_gradient_second_order_on_exact_disk_field():
    dom, p = geo.Disk(), wf.WebProfile("normalized", 1.0)
    errs = []
    for h in (1 / 16, 1 / 32):
        g = sv.build_grid(dom, h)
        f = sv.field_from_function(g, lambda x: wf.web_value(dom, x, p))
        pts = g.active_points()
        r = np.hypot(*pts.T)
        keep = (r > 0.2) & (r < 0.8)
        exact = -pts[keep]  # gradient of (1 - r^2)/2
        errs.append(np.max(np.abs(sv.discrete_gradient(f)[keep] - exact)))
    # the field is a quadratic away from the centre, so differences are exact to round-off
    assert max(errs) < 1e-10


def test_convergence_study_rejects_non_stadium_like():
    with pytest.raises(sv.OracleUnavailableError):
        sv.convergence_study(geo.Ellipse(), "normalized", [1 / 8, 1 / 16])


def test_convergence_rows_report_orders():
    rows = sv.convergence_study(geo.Stadium(), "normalized", [1 / 8, 1 / 16])
    assert rows[0].order is None and rows[1].order is not None
    assert rows[1].error < rows[0].error


# ---------------------------------------------------------------- local operator


def test_local_update_solves_the_two_point_balance():
    U = np.array([[1.0, 0.0, 0.5, 0.2]])
    reach = np.full((1, 4), 0.1)
    u = sv.local_update(U, reach, np.ones(1), np.zeros(1))
    t = (U - u[:, None]) / reach + 0.5 * reach
    assert t.max() + t.min() == pytest.approx(0.0, abs=1e-13)


def test_scheme_residual_vanishes_on_solution():
    f = solved("disk", 1 / 64)
    assert np.max(np.abs(sv.scheme_residual(f.active_values, f.grid))) < 1e-8


def test_gradient_surrogate_variants():
    g = sv.build_grid(geo.Disk(), 1 / 16)
    f = sv.field_from_function(g, lambda x: x[..., 0])
    inner = (g.nbr >= 0).all(axis=1)
    for kind in ("vertex", "half-range", "max"):
        q = sv.gradient_surrogate(f.active_values, g, kind)
        np.testing.assert_allclose(q[inner], 1.0, atol=1e-12)
