"""Functionals of solved fields: P-functions, gradient flows, sup-convolutions, level-set scans.

All routines read a :class:`~stadiumlab.solver.ScalarField` and never modify
it. ``normalized`` selects the pair ``(|∇u|^2/2 + u, ρ^2/2)``; otherwise the
pair ``(|∇u|^4/4 + u, c0 ρ^(4/3))`` is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import distance_transform_edt

from . import geometry as geo
from .solver import Grid2D, ScalarField, discrete_gradient, gradient_field, solve
from .webfuncs import WebProfile, p_constant

COLLAR = 4  # boundary collar width in units of h for interior statistics


class LeftGridError(geo.GeometryError):
    """A flow trajectory asked for the gradient outside the closed domain."""


def _p_values(u: np.ndarray, grad: np.ndarray, normalized: bool) -> np.ndarray:
    g2 = np.einsum("ij,ij->i", grad, grad)
    return 0.5 * g2 + u if normalized else 0.25 * g2 * g2 + u


def _interior(grid: Grid2D, collar: float) -> np.ndarray:
    a = grid.active
    return grid.dist[a[:, 0], a[:, 1]] >= collar


# ----------------------------------------------------------------------------
# P-functions


@dataclass
class PField:
    grid: Grid2D
    values: np.ndarray  # per active node
    normalized: bool
    lam: float
    collar: float

    def summary(self, collar: float | None = None) -> dict:
        mask = _interior(self.grid, self.collar if collar is None else collar)
        v = self.values[mask] if mask.any() else self.values
        return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean()),
                "spread": float(v.max() - v.min()), "lambda": self.lam, "nodes": int(v.size)}

    def to_field(self) -> ScalarField:
        return ScalarField(self.grid, self.grid.to_full(self.values),
                           {"kind": "P_N" if self.normalized else "P"})


def p_function(u: ScalarField, normalized: bool, rho: float) -> PField:
    """Nodal P-function from the discrete gradient; the reference constant is the web value."""
    grad = discrete_gradient(u)
    kind = "normalized" if normalized else "nonnormalized"
    vals = _p_values(u.active_values, grad, normalized)
    return PField(u.grid, vals, normalized, p_constant(WebProfile(kind, rho)), COLLAR * u.h)


def field_lipschitz(u: ScalarField) -> float:
    """Largest slope between stencil neighbours of the field extended by zero."""
    g = u.grid
    vals = u.active_values
    nb = np.where(g.nbr >= 0, vals[np.maximum(g.nbr, 0)], 0.0)
    return float(np.max(np.abs(nb - vals[:, None]) / g.reach)) if g.n_active else 0.0


def boundary_band(grid: Grid2D) -> np.ndarray:
    """Active nodes whose distance to the boundary lies in [h/2, 3h/2]."""
    a = grid.active
    d = grid.dist[a[:, 0], a[:, 1]]
    return np.nonzero((d >= 0.5 * grid.h) & (d <= 1.5 * grid.h))[0]


def boundary_gradient(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Boundary slope estimates 2u/d - |∇u| at the band nodes; returns (nodes, values).

    The correction removes the first-order bias of u/d: for
    u = c d + k d^2/2 along the normal the estimate returns c exactly.
    """
    g = u.grid
    idx = boundary_band(g)
    a = g.active[idx]
    d = g.dist[a[:, 0], a[:, 1]]
    grad = discrete_gradient(u)[idx]
    est = 2.0 * u.active_values[idx] / d - np.hypot(grad[:, 0], grad[:, 1])
    return idx, est


def boundary_gradient_stats(u: ScalarField, domain: geo.ConvexDomain | None = None) -> dict:
    _, est = boundary_gradient(u)
    if est.size == 0:
        raise geo.GeometryError("grid has no nodes near the boundary")
    return {"min": float(est.min()), "max": float(est.max()), "mean": float(est.mean()),
            "spread": float(est.max() - est.min()), "nodes": int(est.size)}


@dataclass
class PBoundsReport:
    passed: bool
    lower: float
    upper: float
    delta: float
    lipschitz: float
    n_violations: int
    worst_node: int | None
    worst_excess: float
    violations: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["violations"] = [list(map(float, v)) for v in self.violations[:50]]
        return out


def p_bounds_check(u: ScalarField, pf: PField, domain: geo.ConvexDomain | None = None,
                   delta_factor: float = 5.0) -> PBoundsReport:
    """min over the boundary of the P-kernel of |∇u| minus δ <= P <= max u + δ, δ = 5 h Lip.

    The boundary slopes come from :func:`boundary_gradient`.
    """
    lip = field_lipschitz(u)
    delta = delta_factor * u.h * lip
    _, slopes = boundary_gradient(u)
    smin = float(slopes.min()) if slopes.size else 0.0
    lower = 0.5 * smin ** 2 if pf.normalized else 0.25 * smin ** 4
    upper = float(u.active_values.max())
    v = pf.values
    excess = np.maximum(lower - delta - v, v - upper - delta)
    bad = np.nonzero(excess > 0)[0]
    worst = int(np.argmax(excess)) if v.size else None
    pts = u.grid.active_points()
    viol = [(int(i), pts[i, 0], pts[i, 1], v[i]) for i in bad]
    return PBoundsReport(passed=not bad.size, lower=lower, upper=upper, delta=delta, lipschitz=lip,
                         n_violations=int(bad.size), worst_node=worst,
                         worst_excess=float(excess[worst]) if worst is not None else 0.0,
                         violations=viol)


def hamiltonian_residual(u: ScalarField, lam: float) -> ScalarField:
    """Nodal |½|∇u|² + u - λ|, zero off the active set."""
    grad = discrete_gradient(u)
    res = np.abs(_p_values(u.active_values, grad, True) - lam)
    return ScalarField(u.grid, u.grid.to_full(res), {"kind": "hamiltonian_residual", "lambda": lam})


# ----------------------------------------------------------------------------
# gradient flow


@dataclass
class FlowTrajectory:
    x0: np.ndarray
    dt: float
    t: np.ndarray
    X: np.ndarray
    u: np.ndarray
    grad_norm: np.ndarray
    P: np.ndarray
    reason: str  # "entered K-neighborhood" | "left grid" | "max time"

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.X, self.u, self.grad_norm, self.P])


class _Sampler:
    """Vectorised bilinear interpolation of a lattice field and its gradient."""

    def __init__(self, grid: Grid2D, values: np.ndarray, grad: np.ndarray, domain=None):
        self.grid = grid
        self.values = values
        self.gradv = grad
        self.domain = grid.domain if domain is None else domain
        self.slack = 1e-9 * self.domain.scale

    def _weights(self, x):
        g = self.grid
        fx = (x[:, 0] / g.h) - g.i0
        fy = (x[:, 1] / g.h) - g.j0
        i = np.clip(np.floor(fx).astype(int), 0, g.nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, g.ny - 2)
        return i, j, fx - i, fy - j

    def _bilinear(self, arr, x):
        i, j, a, b = self._weights(x)
        if arr.ndim == 3:
            a, b = a[:, None], b[:, None]
        return ((1 - a) * (1 - b) * arr[i, j] + a * (1 - b) * arr[i + 1, j]
                + (1 - a) * b * arr[i, j + 1] + a * b * arr[i + 1, j + 1])

    def inside(self, x):
        return np.asarray(self.domain.signed_distance(x)) >= -self.slack

    def grad(self, x):
        return self._bilinear(self.gradv, x)

    def value(self, x):
        return self._bilinear(self.values, x)


def _rk4_batch(sampler: _Sampler, starts, dt, t_max, floor, normalized) -> list[FlowTrajectory]:
    """Advance all trajectories together; each freezes once it stops."""
    X = np.array(starts, dtype=float).reshape(-1, 2)
    n = len(X)
    n_steps = int(round(t_max / dt))
    live = np.ones(n, dtype=bool)
    reason = np.full(n, "max time", dtype=object)
    hist_x = [X.copy()]
    g = sampler.grad(X)
    hist_g = [g]
    stop_step = np.full(n, n_steps)
    for step in range(n_steps):
        gn = np.hypot(g[:, 0], g[:, 1])
        done = live & (gn <= floor)
        reason[done] = "entered K-neighborhood"
        stop_step[done] = step
        live &= ~done
        if not live.any():
            break
        k1 = g
        k2 = sampler.grad(X + 0.5 * dt * k1)
        k3 = sampler.grad(X + 0.5 * dt * k2)
        k4 = sampler.grad(X + dt * k3)
        Xn = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        probe = np.vstack([X + 0.5 * dt * k1, X + 0.5 * dt * k2, X + dt * k3, Xn])
        ok = sampler.inside(probe).reshape(4, n).all(axis=0)
        left = live & ~ok
        reason[left] = "left grid"
        stop_step[left] = step
        live &= ok
        X = np.where(live[:, None], Xn, X)
        g = np.where(live[:, None], sampler.grad(X), g)
        hist_x.append(X.copy())
        hist_g.append(g)
    else:
        gn = np.hypot(g[:, 0], g[:, 1])
        end = live & (gn <= floor)
        reason[end] = "entered K-neighborhood"
    HX = np.stack(hist_x)  # (steps + 1, n, 2)
    HG = np.stack(hist_g)
    out = []
    for k in range(n):
        m = min(stop_step[k], len(HX) - 1) + 1
        xs = HX[:m, k]
        gn = np.hypot(*HG[:m, k].T)
        us = sampler.value(xs)
        P = 0.5 * gn ** 2 + us if normalized else 0.25 * gn ** 4 + us
        out.append(FlowTrajectory(HX[0, k].copy(), dt, dt * np.arange(m), xs, us, gn, P, str(reason[k])))
    return out


def _field_sampler(u: ScalarField) -> _Sampler:
    return _Sampler(u.grid, u.values, gradient_field(u))


def gradient_flows(u: ScalarField, starts, dt: float = 1e-3, t_max: float = 3.0,
                   gradient_floor: float | None = None, normalized: bool = True) -> list[FlowTrajectory]:
    """Integrate several trajectories at once; see :func:`gradient_flow`."""
    sampler = _field_sampler(u)
    starts = np.asarray(starts, dtype=float).reshape(-1, 2)
    if not sampler.inside(starts).all():
        raise LeftGridError("a start point lies outside the closed domain")
    floor = u.h if gradient_floor is None else gradient_floor
    return _rk4_batch(sampler, starts, dt, t_max, floor, normalized)


def gradient_flow(u: ScalarField, x0, dt: float = 1e-3, t_max: float = 3.0,
                  gradient_floor: float | None = None, normalized: bool = True) -> FlowTrajectory:
    """Classical RK4 for dX/dt = ∇u(X) with the bilinearly interpolated discrete gradient.

    Stops when |∇u| drops to ``gradient_floor`` (default h) or at ``t_max``.
    Raises :class:`LeftGridError` if the start is outside the closed domain;
    a trajectory that would leave later stops with reason "left grid".
    """
    return gradient_flows(u, [x0], dt, t_max, gradient_floor, normalized)[0]


@dataclass
class FlowLawReport:
    p_deviation: float  # max |P_N(X_k) - λ|
    ode_residual: float  # max |u(X_k) - (m e^{-2t} + λ (1 - e^{-2t}))|
    m: float
    lam: float
    steps: int


def p_along_flow(traj: FlowTrajectory, lam: float) -> FlowLawReport:
    m = float(traj.u[0])
    decay = np.exp(-2.0 * traj.t)
    law = m * decay + lam * (1.0 - decay)
    return FlowLawReport(float(np.max(np.abs(traj.P - lam))), float(np.max(np.abs(traj.u - law))),
                         m, lam, len(traj.t) - 1)


# ----------------------------------------------------------------------------
# supremal convolution


@dataclass
class SupConvBundle:
    eps: float
    lipschitz: float
    reach: float  # R; the search window has radius eps * R
    grid: Grid2D
    u: np.ndarray  # (nx, ny) original values, zero outside
    u_eps: np.ndarray  # (nx, ny)
    U_mask: np.ndarray
    A_mask: np.ndarray
    m_eps: float
    omega_mask: np.ndarray
    P_eps: np.ndarray  # (nx, ny), NaN where the gradient is not formed
    grad_eps: np.ndarray  # (nx, ny, 2)

    @property
    def empty(self) -> bool:
        return not self.A_mask.any()

    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.u_eps, {"kind": "sup_convolution", "eps": self.eps})


def _lattice_offsets(radius_cells: float) -> np.ndarray:
    r = int(math.floor(radius_cells))
    i, j = np.mgrid[-r:r + 1, -r:r + 1]
    keep = i * i + j * j <= radius_cells ** 2 + 1e-9
    return np.column_stack([i[keep], j[keep]])


def sup_convolution_values(values: np.ndarray, h: float, eps: float, radius: float) -> np.ndarray:
    """max over lattice offsets z with |z| <= radius of values(x + z) - |z|^2 / (2 eps), zero padding."""
    offs = _lattice_offsets(radius / h)
    r = int(np.abs(offs).max()) if len(offs) else 0
    padded = np.pad(values, r, constant_values=0.0)
    nx, ny = values.shape
    out = np.full_like(values, -np.inf)
    for di, dj in offs:
        pen = (di * di + dj * dj) * h * h / (2.0 * eps)
        np.maximum(out, padded[r + di:r + di + nx, r + dj:r + dj + ny] - pen, out=out)
    return out


def _central_gradient(v: np.ndarray, h: float) -> np.ndarray:
    g = np.full(v.shape + (2,), np.nan)
    g[1:-1, :, 0] = (v[2:, :] - v[:-2, :]) / (2 * h)
    g[:, 1:-1, 1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    return g


def _mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Nodes of the mask with a 4-neighbour outside it."""
    pad = np.pad(mask, 1, constant_values=False)
    inner = pad[2:, 1:-1] & pad[:-2, 1:-1] & pad[1:-1, 2:] & pad[1:-1, :-2]
    return mask & ~inner


def sup_convolution(u: ScalarField, eps: float, normalized: bool = True,
                    reach_factor: float = 2.0) -> SupConvBundle:
    """Supremal convolution on the lattice together with its level-set bookkeeping.

    The maximiser of u(y) - |x - y|^2/(2 eps) lies within 2 eps Lip of x, so
    the default window R = 2 Lip loses nothing. Masks:

    * U: nodes with u > eps;
    * A: nodes of U farther than eps R from the complement of U;
    * m_eps: the largest u_eps over the edge nodes of A;
    * Omega: nodes of A with u_eps > m_eps.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    h = g.h
    lip = field_lipschitz(u)
    R = reach_factor * lip
    vals = u.values
    ue = sup_convolution_values(vals, h, eps, eps * R + 1e-12)
    active = g.index >= 0
    U = active & (vals > eps)
    A = U & (distance_transform_edt(U) * h > eps * R)
    edge = _mask_boundary(A)
    m_eps = float(ue[edge].max()) if edge.any() else math.inf
    omega = A & (ue > m_eps)
    grad = _central_gradient(ue, h)
    g2 = np.einsum("ijk,ijk->ij", grad, grad)
    P = 0.5 * g2 + ue if normalized else 0.25 * g2 * g2 + ue
    return SupConvBundle(eps, lip, R, g, vals, ue, U, A, m_eps, omega, P, grad)


def semiconvexity_defect(bundle: SupConvBundle) -> float:
    """Smallest axis second difference of u_eps plus h^2/eps over nodes whose axis neighbours are in A.

    The bound from the construction makes this nonnegative.
    """
    ue, A, h = bundle.u_eps, bundle.A_mask, bundle.grid.h
    inner = A.copy()
    inner[1:-1, :] &= A[2:, :] & A[:-2, :]
    inner[:, 1:-1] &= A[:, 2:] & A[:, :-2]
    inner[[0, -1], :] = False
    inner[:, [0, -1]] = False
    if not inner.any():
        return math.inf
    dxx = ue[2:, 1:-1] + ue[:-2, 1:-1] - 2 * ue[1:-1, 1:-1]
    dyy = ue[1:-1, 2:] + ue[1:-1, :-2] - 2 * ue[1:-1, 1:-1]
    m = inner[1:-1, 1:-1]
    return float(min(dxx[m].min(), dyy[m].min()) + h * h / bundle.eps)


@dataclass
class MonotonicityReport:
    n_starts: int
    n_monotone: int
    fraction: float
    worst_drop: float
    slack_per_time: float
    reasons: dict


def p_eps_flow_monotonicity(bundle: SupConvBundle, n_starts: int = 100, dt: float = 1e-3,
                            t_max: float = 3.0, slack_c: float = 1.0) -> MonotonicityReport:
    """Follow the flow of u_eps from points of ∂Ω_eps and test that P_eps does not decrease.

    A drop from an earlier time t1 to a later t2 is tolerated up to
    1e-6 + slack_c h max(t2 - t1, 1).
    """
    if not bundle.omega_mask.any():
        return MonotonicityReport(0, 0, 1.0, 0.0, slack_c * bundle.grid.h, {})
    g = bundle.grid
    h = g.h
    edge = np.argwhere(_mask_boundary(bundle.omega_mask))
    # order the edge nodes by angle about their centroid and take evenly spaced ones
    pts = np.column_stack([g.xs[edge[:, 0]], g.ys[edge[:, 1]]])
    ctr = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - ctr[1], pts[:, 0] - ctr[0]))
    pick = order[np.linspace(0, len(order), n_starts, endpoint=False).astype(int)]
    starts = pts[pick]
    grad = np.nan_to_num(bundle.grad_eps)
    P = np.nan_to_num(bundle.P_eps)
    sampler = _Sampler(g, bundle.u_eps, grad)
    trajs = _rk4_batch(sampler, starts, dt, t_max, h, True)
    n_ok, worst = 0, 0.0
    reasons: dict = {}
    for tr in trajs:
        reasons[tr.reason] = reasons.get(tr.reason, 0) + 1
        p = sampler._bilinear(P, tr.X)
        run_max = np.maximum.accumulate(p)
        # index where the running maximum was attained
        arg = np.maximum.accumulate(np.where(p >= run_max, np.arange(len(p)), 0))
        elapsed = tr.t - tr.t[arg]
        allowed = 1e-6 + slack_c * h * np.maximum(elapsed, 1.0)
        drop = float(np.max(run_max - p - allowed))
        worst = max(worst, drop)
        n_ok += drop <= 0
    return MonotonicityReport(len(starts), n_ok, n_ok / len(starts), worst, slack_c * h, reasons)


# ----------------------------------------------------------------------------
# level sets and regularity


@dataclass
class LevelReport:
    m: float
    expected: float | None
    mean: float | None
    spread: float | None
    mismatch: float | None
    skipped: str | None = None


def level_set_serrin_scan(u: ScalarField, levels, n_samples: int | None = None) -> list[LevelReport]:
    """|∇u| along the extracted boundary of {u > m}, against √(2(μ - m)) with μ = max u."""
    mu = float(u.values.max())
    grad = gradient_field(u)
    # carry the nearest active gradient outward so cells straddling the boundary interpolate sensibly
    _, (fi, fj) = distance_transform_edt(u.grid.index < 0, return_indices=True)
    interp = RegularGridInterpolator((u.grid.xs, u.grid.ys), grad[fi, fj])
    out = []
    for m in levels:
        try:
            dom = geo.level_set_domain(u, float(m))
        except geo.GeometryError as exc:
            out.append(LevelReport(float(m), None, None, None, None, skipped=str(exc)))
            continue
        ring = dom.boundary_samples(n_samples or max(64, int(4 * dom._poly.length / u.h)))
        gn = np.hypot(*interp(ring).T)
        expected = math.sqrt(2.0 * (mu - m))
        out.append(LevelReport(float(m), expected, float(gn.mean()), float(gn.max() - gn.min()),
                               float(np.max(np.abs(gn - expected)))))
    return out


def gradient_seminorm(u: ScalarField, collar: float | None = None) -> float:
    """max |∇u(x) - ∇u(y)| / |x - y| over axis-adjacent active nodes at distance >= collar from the boundary."""
    g = u.grid
    collar = COLLAR * g.h if collar is None else collar
    grad = discrete_gradient(u)
    ok = _interior(g, collar)
    best = 0.0
    for k in (0, 2):  # +x and +y neighbours cover every adjacent pair once
        j = g.axis_nbr[:, k]
        pair = ok & (j >= 0)
        pair[pair] &= ok[j[pair]]
        if pair.any():
            diff = np.hypot(*(grad[j[pair]] - grad[pair]).T) / g.h
            best = max(best, float(diff.max()))
    return best


def c11_proxy(domain: geo.ConvexDomain, problem: str = "normalized", hs=(1.0 / 32, 1.0 / 64),
              fields: tuple[ScalarField, ScalarField] | None = None, config=None) -> dict:
    """Gradient Lipschitz seminorm at h and h/2 and their ratio."""
    h1, h2 = hs
    if fields is None:
        fields = (solve(domain, h1, problem, config), solve(domain, h2, problem, config))
    s1, s2 = (gradient_seminorm(f) for f in fields)
    return {"h": h1, "h_half": h2, "seminorm_h": s1, "seminorm_h_half": s2,
            "ratio": s2 / s1 if s1 > 0 else math.inf}


__all__ = [
    "PField", "p_function", "p_bounds_check", "PBoundsReport", "hamiltonian_residual",
    "FlowTrajectory", "gradient_flow", "p_along_flow", "FlowLawReport", "LeftGridError",
    "SupConvBundle", "sup_convolution", "sup_convolution_values", "semiconvexity_defect",
    "p_eps_flow_monotonicity", "MonotonicityReport", "boundary_gradient_stats", "boundary_gradient",
    "level_set_serrin_scan", "LevelReport", "gradient_seminorm", "c11_proxy", "field_lipschitz",
]
