"""Monotone wide-stencil solver for the Dirichlet problems -Δ∞u = 1 and -Δ∞ᴺu = 1.

Stencil directions are the primitive lattice vectors up to a fixed length,
so every neighbour value is an exact nodal value. Along direction k the
reach ``l_k`` is the lattice length, or the distance to the boundary when
the ray leaves the domain first (the value there is the Dirichlet 0).
With slopes ``s_k = (U_k - u) / l_k`` the discrete equation at a node is

    max_k (s_k + c l_k / 2) + min_k (s_k + c l_k / 2) = 0,

where ``c = 1`` for the normalized operator and ``c = 1 / q^2`` for the
non-normalized one, ``q`` being a gradient surrogate frozen from the
current iterate. In the interior, with both extremal directions on one
lattice line of length l, this is the familiar update
``u = (U_max + U_min) / 2 + c l^2 / 2``.

The map is nondecreasing in every neighbour value and strictly decreasing
in ``u``, so the scheme is monotone. It reproduces any quadratic with
Hessian ``-I`` exactly, boundary cuts included.

Fixed points are found by policy iteration. The arg-max player is held
fixed in an outer loop and the arg-min player is solved by Howard's method
inside it, each step being one sparse linear solve. Plain sweeps then
confirm the fixed point to the requested sup-norm tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from .geometry import ConvexDomain, GeometryError, distance_to_boundary

log = logging.getLogger(__name__)

EXTERIOR, INTERIOR, BOUNDARY_ADJACENT = 0, 1, 2

# direction count -> largest squared length of the primitive lattice vectors used
_STENCILS = {8: 2, 16: 5}

# 1/(2 c0^3) with c0 = 3^(4/3)/4: weight that makes the discrete equation exact
# at the vertex of the profile c0 (1 - |t|^(4/3))
VERTEX_WEIGHT = math.sqrt(32.0 / 81.0)

_TIE = 1e-13

# shortcut iterations without a new smallest change before exact policy solves take over
_STALL = 40


class SolverError(RuntimeError):
    pass


class GridTooCoarseError(SolverError, GeometryError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, residual: float, field: "ScalarField | None" = None):
        super().__init__(message)
        self.residual = residual
        self.field = field


def stencil_vectors(n_dirs: int) -> np.ndarray:
    """Primitive integer vectors of squared length <= 2 (8 dirs) or <= 5 (16 dirs), by angle."""
    if n_dirs not in _STENCILS:
        raise ValueError(f"stencil must be one of {sorted(_STENCILS)}, got {n_dirs}")
    r2 = _STENCILS[n_dirs]
    m = math.isqrt(r2)
    vecs = [(i, j) for i in range(-m, m + 1) for j in range(-m, m + 1)
            if 0 < i * i + j * j <= r2 and math.gcd(i, j) == 1]
    vecs.sort(key=lambda w: math.atan2(w[1], w[0]) % (2 * math.pi))
    return np.array(vecs, dtype=np.int64)


@dataclass
class SolverConfig:
    stencil: int = 16
    max_sweeps: int | None = None  # None -> 50 * nx * ny
    tol: float = 1e-10
    sweep: str = "jacobi"  # or "gs": Gauss-Seidel, alternating forward/backward
    damping: float = 0.0
    accelerate: bool = True
    warm_start: bool = True
    max_policy_iters: int = 400
    q_floor: float | None = None  # None -> h
    q_surrogate: str = "vertex"  # or "half-range" or "max"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.sweep not in ("jacobi", "gs"):
            raise ValueError("sweep must be 'jacobi' or 'gs'")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.q_surrogate not in ("vertex", "half-range", "max"):
            raise ValueError("q_surrogate must be 'vertex', 'half-range' or 'max'")
        stencil_vectors(self.stencil)


@dataclass
class Grid2D:
    """Lattice nodes ``((i0 + i) h, (j0 + j) h)`` covering the domain.

    Active nodes (positive distance to the boundary) are numbered in C
    order; ``nbr[a, k]`` is the active number of the k-th neighbour, or -1
    when the ray leaves the domain after ``reach[a, k]``.
    """

    domain: ConvexDomain
    h: float
    i0: int
    j0: int
    nx: int
    ny: int
    dist: np.ndarray
    status: np.ndarray
    directions: np.ndarray
    active: np.ndarray
    index: np.ndarray
    nbr: np.ndarray
    reach: np.ndarray
    axis_nbr: np.ndarray  # +x, -x, +y, -y
    axis_reach: np.ndarray

    @property
    def origin(self) -> tuple[float, float]:
        return self.i0 * self.h, self.j0 * self.h

    @property
    def dims(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def xs(self) -> np.ndarray:
        return (self.i0 + np.arange(self.nx)) * self.h

    @property
    def ys(self) -> np.ndarray:
        return (self.j0 + np.arange(self.ny)) * self.h

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @property
    def n_active(self) -> int:
        return len(self.active)

    def active_points(self) -> np.ndarray:
        return np.column_stack([(self.i0 + self.active[:, 0]) * self.h,
                                (self.j0 + self.active[:, 1]) * self.h])

    def to_full(self, vals: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full((self.nx, self.ny), fill, dtype=float)
        out[self.active[:, 0], self.active[:, 1]] = vals
        return out

    def cut_nodes(self) -> np.ndarray:
        """Active numbers of nodes whose axis neighbourhood reaches the boundary."""
        return np.nonzero((self.axis_nbr < 0).any(axis=1))[0]


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray  # (nx, ny); zero off the active set for Dirichlet fields
    meta: dict = field(default_factory=dict)

    @property
    def active_values(self) -> np.ndarray:
        a = self.grid.active
        return self.values[a[:, 0], a[:, 1]]

    @property
    def h(self) -> float:
        return self.grid.h

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.grid.xs, self.grid.ys), self.values,
                                       bounds_error=False, fill_value=None)

    def __call__(self, x):
        """Bilinear interpolation of the nodal values."""
        pts = np.asarray(x, dtype=float)
        out = self.interpolator()(pts.reshape(-1, 2))
        return float(out[0]) if pts.ndim == 1 else out.reshape(pts.shape[:-1])


def field_from_function(grid: Grid2D, fn, meta: dict | None = None) -> ScalarField:
    """Sample ``fn`` at the active nodes; zero elsewhere."""
    vals = np.asarray(fn(grid.active_points()), dtype=float)
    return ScalarField(grid, grid.to_full(vals), dict(meta or {}))


# ----------------------------------------------------------------------------
# grid construction


def _bisect_cuts(domain: ConvexDomain, start: np.ndarray, unit: np.ndarray, length: float) -> np.ndarray:
    """Distance from interior ``start`` along ``unit`` to the boundary, known to lie below ``length``."""
    lo = np.zeros(len(start))
    hi = np.full(len(start), float(length))
    # 45 halvings bring the bracket under 1e-12 * length
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        inside = domain._inside(start + mid[:, None] * unit)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def _ray_tables(domain, pts, h, vecs, index_pad, pad, ii, jj):
    nbr = np.empty((len(pts), len(vecs)), dtype=np.int64)
    reach = np.empty((len(pts), len(vecs)))
    for k, w in enumerate(vecs):
        nb = index_pad[ii + w[0] + pad, jj + w[1] + pad]
        length = h * math.hypot(*w)
        nbr[:, k] = nb
        reach[:, k] = length
        cut = nb < 0
        if cut.any():
            unit = np.asarray(w, float) / math.hypot(*w)
            reach[cut, k] = _bisect_cuts(domain, pts[cut], unit, length)
    return nbr, reach


def build_grid(domain: ConvexDomain, h: float, stencil: int = 16) -> Grid2D:
    """Classify lattice nodes and tabulate neighbours and boundary cuts."""
    if not h > 0:
        raise ValueError("h must be positive")
    rho, _ = domain.inradius()
    if h >= 2 * rho:
        raise GridTooCoarseError(f"h = {h:g} is not below twice the inradius {rho:g}")
    vecs = stencil_vectors(stencil)
    x0, x1, y0, y1 = domain.bbox()
    i0, i1 = math.floor(x0 / h) - 1, math.ceil(x1 / h) + 1
    j0, j1 = math.floor(y0 / h) - 1, math.ceil(y1 / h) + 1
    nx, ny = i1 - i0 + 1, j1 - j0 + 1
    X, Y = np.meshgrid((i0 + np.arange(nx)) * h, (j0 + np.arange(ny)) * h, indexing="ij")
    dist = np.asarray(distance_to_boundary(domain, np.stack([X, Y], axis=-1)))
    act = dist > 0
    if not act.any():
        raise GridTooCoarseError(f"no lattice node of spacing {h:g} lies inside the domain")
    ii, jj = np.nonzero(act)
    index = np.full((nx, ny), -1, dtype=np.int64)
    index[ii, jj] = np.arange(len(ii))
    pad = int(np.abs(vecs).max()) + 1
    index_pad = np.pad(index, pad, constant_values=-1)
    pts = np.column_stack([X[ii, jj], Y[ii, jj]])
    nbr, reach = _ray_tables(domain, pts, h, vecs, index_pad, pad, ii, jj)
    axes = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    axis_nbr, axis_reach = _ray_tables(domain, pts, h, axes, index_pad, pad, ii, jj)
    status = np.full((nx, ny), EXTERIOR, dtype=np.int8)
    status[ii, jj] = np.where((nbr >= 0).all(axis=1), INTERIOR, BOUNDARY_ADJACENT)
    return Grid2D(domain=domain, h=h, i0=i0, j0=j0, nx=nx, ny=ny, dist=dist, status=status,
                  directions=vecs, active=np.column_stack([ii, jj]), index=index,
                  nbr=nbr, reach=reach, axis_nbr=axis_nbr, axis_reach=axis_reach)


# ----------------------------------------------------------------------------
# discrete operator


def _gather(u: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    return np.where(nbr >= 0, u[np.maximum(nbr, 0)], 0.0)


def _scores(u, grid, c):
    return (_gather(u, grid.nbr) - u[:, None]) / grid.reach + 0.5 * c[:, None] * grid.reach


def scheme_residual(u: np.ndarray, grid: Grid2D, c: np.ndarray | float = 1.0) -> np.ndarray:
    """max_k + min_k of the directional scores at active nodes; zero at a solution."""
    c = np.broadcast_to(np.asarray(c, float), (grid.n_active,))
    t = _scores(u, grid, c)
    return t.max(axis=1) + t.min(axis=1)


def gradient_surrogate(u: np.ndarray, grid: Grid2D, kind: str = "vertex") -> np.ndarray:
    """Per-node |∇u| estimate from the extreme one-sided slopes.

    ``half-range`` is (s_max - s_min)/2. ``vertex`` adds a floor proportional
    to |s_max + s_min|, which is what survives at a maximum where both
    slopes point down. ``max`` is max(|s_max|, |s_min|).
    """
    s = (_gather(u, grid.nbr) - u[:, None]) / grid.reach
    hi, lo = s.max(axis=1), s.min(axis=1)
    if kind == "half-range":
        return 0.5 * (hi - lo)
    if kind == "max":
        return np.maximum(np.abs(hi), np.abs(lo))
    return np.maximum(0.5 * (hi - lo), VERTEX_WEIGHT * 0.5 * np.abs(hi + lo))


def _pair_solve(Up, Um, lp, lm, c):
    return (lm * Up + lp * Um + c * lp * lm * (lp + lm) / 2) / (lp + lm)


def local_update(U: np.ndarray, reach: np.ndarray, c: np.ndarray, u_guess: np.ndarray) -> np.ndarray:
    """Root in u of max_k t_k + min_k t_k = 0, with t_k = (U_k - u)/l_k + c l_k / 2.

    The left side is continuous, piecewise linear and strictly decreasing in
    u; a few policy steps find the active piece, with bisection as backstop.
    """
    rows = np.arange(len(U))
    u = np.array(u_guess, dtype=float)
    done = np.zeros(len(U), dtype=bool)
    for _ in range(10):
        t = (U - u[:, None]) / reach + 0.5 * c[:, None] * reach
        kp, km = t.argmax(axis=1), t.argmin(axis=1)
        new = _pair_solve(U[rows, kp], U[rows, km], reach[rows, kp], reach[rows, km], c)
        done = new == u
        u = new
        if done.all():
            return u
    # rare cycling between pieces: bracket and bisect
    bad = np.nonzero(~done)[0]
    Ub, rb, cb = U[bad], reach[bad], c[bad]
    lo = Ub.min(axis=1) - 1.0 - cb * rb.max(axis=1) ** 2
    hi = Ub.max(axis=1) + 1.0 + cb * rb.max(axis=1) ** 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        t = (Ub - mid[:, None]) / rb + 0.5 * cb[:, None] * rb
        pos = t.max(axis=1) + t.min(axis=1) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    u[bad] = 0.5 * (lo + hi)
    return u


def jacobi_update(u: np.ndarray, grid: Grid2D, c: np.ndarray | float = 1.0) -> np.ndarray:
    """One Jacobi update of every active node for the given source weights."""
    c = np.broadcast_to(np.asarray(c, float), (grid.n_active,)).copy()
    return local_update(_gather(u, grid.nbr), grid.reach, c, u)


def _gs_sweep(u, grid, c, reverse):
    order = range(len(u) - 1, -1, -1) if reverse else range(len(u))
    nbr, reach = grid.nbr, grid.reach
    for a in order:
        U = np.where(nbr[a] >= 0, u[np.maximum(nbr[a], 0)], 0.0)
        u[a] = local_update(U[None], reach[a][None], c[a:a + 1], u[a:a + 1])[0]
    return u


def _linear_solve(grid, kp, km, c):
    n = grid.n_active
    rows = np.arange(n)
    lp, lm = grid.reach[rows, kp], grid.reach[rows, km]
    jp, jm = grid.nbr[rows, kp], grid.nbr[rows, km]
    r_idx, c_idx, vals = [rows], [rows], [1.0 / lp + 1.0 / lm]
    for j, l in ((jp, lp), (jm, lm)):
        ok = j >= 0
        r_idx.append(rows[ok])
        c_idx.append(j[ok])
        vals.append(-1.0 / l[ok])
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(r_idx), np.concatenate(c_idx))), shape=(n, n))
    # the lattice ordering is already banded; fill-reducing permutations only slow it down
    return spsolve(A, 0.5 * c * (lp + lm), permc_spec="NATURAL")


def _sticky(t, old, new, sign):
    """Keep the previous choice where it is still optimal up to roundoff."""
    rows = np.arange(len(t))
    keep = sign * (t[rows, old] - t[rows, new]) >= -_TIE
    return np.where(keep, old, new)


def _policy_solve(grid, c, u, budget):
    """Hoffman-Karp iteration for fixed source weights ``c``; returns (u, converged, linear solves)."""
    rows = np.arange(grid.n_active)
    solves = 0
    t = _scores(u, grid, c)
    kp, km = t.argmax(axis=1), t.argmin(axis=1)
    while solves < budget:
        for _ in range(budget):
            u = _linear_solve(grid, kp, km, c)
            solves += 1
            t = _scores(u, grid, c)
            km_new = _sticky(t, km, t.argmin(axis=1), -1)
            if np.array_equal(km_new, km) or solves >= budget:
                break
            km = km_new
        res = t.max(axis=1) + t.min(axis=1)
        if np.max(np.abs(res)) <= 1e-12 * max(1.0, float(np.max(np.abs(u)))):
            return u, True, solves
        kp_new = _sticky(t, kp, t.argmax(axis=1), 1)
        if np.array_equal(kp_new, kp):
            return u, True, solves
        kp = kp_new
    return u, False, solves


def _source_weights(u, grid, problem, cfg):
    if problem == "normalized":
        return np.ones(grid.n_active), 0
    q_floor = grid.h if cfg.q_floor is None else cfg.q_floor
    q = gradient_surrogate(u, grid, cfg.q_surrogate)
    return 1.0 / np.maximum(q, q_floor) ** 2, int(np.count_nonzero(q < q_floor))


def _relaxed_nonnormalized(grid, u, cfg, budget):
    """Outer iteration on the source weights, relaxed geometrically.

    Scaling u by a factor a scales the frozen-weight solution by a^-2, so
    the plain fixed-point map is unstable in that mode; the geometric mean
    u^(2/3) T^(1/3) cancels it exactly.

    The target T is first taken from a single linear solve with the policy
    read off the current iterate. On fine grids that shortcut can wander
    without settling; after ``_STALL`` iterations with no new smallest
    change the loop restarts from ``u`` and solves each frozen-weight
    problem exactly by policy iteration. Returns (u, converged, solves).
    """
    start = np.maximum(u, 1e-300)
    solves = 0
    for exact in (False, True):
        u = start.copy()
        target = u.copy()
        best, since_best = math.inf, 0
        for _ in range(budget):
            c, _ = _source_weights(u, grid, "nonnormalized", cfg)
            if exact:
                target, _, n = _policy_solve(grid, c, target, budget)
                solves += n
            else:
                t = _scores(u, grid, c)
                target = _linear_solve(grid, t.argmax(axis=1), t.argmin(axis=1), c)
                solves += 1
            new = u ** (2.0 / 3.0) * np.maximum(target, 1e-300) ** (1.0 / 3.0)
            change = float(np.max(np.abs(new - u)))
            u = new
            if change <= 0.1 * cfg.tol:
                return u, True, solves
            if change < best:
                best, since_best = change, 0
            else:
                since_best += 1
                if not exact and since_best >= _STALL:
                    log.info("shortcut iteration stalled at change %.2e; switching to exact policy solves", best)
                    break
    return u, False, solves


def _coarse_start(domain, grid, cfg, problem):
    """Prolongate the solution on the grid of spacing 2h, recursively, as a starting iterate."""
    h2 = 2 * grid.h
    rho, _ = domain.inradius()
    if h2 > rho / 4:
        return None
    coarse = _solve(domain, build_grid(domain, h2, cfg.stencil), cfg, problem, verify=False)
    return np.maximum(coarse.interpolator()(grid.active_points()), 0.0)


def _solve(domain, grid, cfg: SolverConfig, problem: str, u0=None, verify: bool = True) -> ScalarField:
    if grid is None:
        raise ValueError("a grid is required")
    if len(grid.directions) != cfg.stencil:
        grid = build_grid(grid.domain, grid.h, cfg.stencil)
    n = grid.n_active
    meta = {"problem": problem, "h": grid.h, "stencil": cfg.stencil, "sweep": cfg.sweep,
            "linear_solves": 0, "accelerated": False, "degenerate_gradient_warnings": 0}
    u = None if u0 is None else np.array(u0, dtype=float)
    if u is None and cfg.accelerate and cfg.warm_start:
        u = _coarse_start(domain, grid, cfg, problem)
    if u is None:
        u = np.zeros(n)
    if cfg.accelerate:
        if problem == "normalized":
            u_acc, ok, solves = _policy_solve(grid, np.ones(n), u, cfg.max_policy_iters)
        else:
            if not np.any(u > 0):
                # start from the normalized shape; the surrogate needs a nonzero slope
                u, _, s0 = _policy_solve(grid, np.ones(n), u, cfg.max_policy_iters)
                meta["linear_solves"] += s0
                u = 2.0 * u
            u_acc, ok, solves = _relaxed_nonnormalized(grid, u, cfg, cfg.max_policy_iters)
        meta["linear_solves"] += solves
        meta["accelerated"] = bool(ok)
        if np.all(np.isfinite(u_acc)):
            u = u_acc
        if not ok:
            log.warning("policy iteration stopped without settling (%s, h=%g); continuing with sweeps",
                        problem, grid.h)

    max_sweeps = cfg.max_sweeps or 50 * grid.nx * grid.ny
    if not verify:
        max_sweeps = min(max_sweeps, 1)
    change, sweeps, warnings = math.inf, 0, 0
    while sweeps < max_sweeps:
        c, binding = _source_weights(u, grid, problem, cfg)
        if sweeps >= 10:
            warnings += binding
        if cfg.sweep == "jacobi":
            new = local_update(_gather(u, grid.nbr), grid.reach, c, u)
        else:
            new = _gs_sweep(u.copy(), grid, c, reverse=bool(sweeps % 2))
        if cfg.damping:
            new = cfg.damping * u + (1.0 - cfg.damping) * new
        change = float(np.max(np.abs(new - u))) if n else 0.0
        u = new
        sweeps += 1
        if change <= cfg.tol:
            break
    c, _ = _source_weights(u, grid, problem, cfg)
    meta.update(sweeps=sweeps, final_change=change, degenerate_gradient_warnings=warnings,
                max_residual=float(np.max(np.abs(scheme_residual(u, grid, c)))) if n else 0.0)
    out = ScalarField(grid, grid.to_full(u), meta)
    if verify and change > cfg.tol:
        raise NonConvergenceError(
            f"{problem} solve stopped at sweep {sweeps} with change {change:.3e} > tol {cfg.tol:g}",
            change, out)
    return out


def solve_dirichlet_normalized(domain: ConvexDomain, grid: Grid2D | None = None,
                               config: SolverConfig | None = None, u0=None) -> ScalarField:
    """Discrete solution of -Δ∞ᴺu = 1 in the domain with u = 0 on the boundary."""
    cfg = config or SolverConfig()
    if grid is None:
        grid = build_grid(domain, 1.0 / 64, cfg.stencil)
    return _solve(domain, grid, cfg, "normalized", u0)


def solve_dirichlet_nonnormalized(domain: ConvexDomain, grid: Grid2D | None = None,
                                  config: SolverConfig | None = None, u0=None) -> ScalarField:
    """Discrete solution of -Δ∞u = 1 in the domain with u = 0 on the boundary."""
    cfg = config or SolverConfig()
    if grid is None:
        grid = build_grid(domain, 1.0 / 64, cfg.stencil)
    return _solve(domain, grid, cfg, "nonnormalized", u0)


def solve(domain: ConvexDomain, h: float, problem: str = "normalized",
          config: SolverConfig | None = None) -> ScalarField:
    cfg = config or SolverConfig()
    grid = build_grid(domain, h, cfg.stencil)
    if problem == "normalized":
        return solve_dirichlet_normalized(domain, grid, cfg)
    if problem == "nonnormalized":
        return solve_dirichlet_nonnormalized(domain, grid, cfg)
    raise ValueError(f"unknown problem kind {problem!r}")


# ----------------------------------------------------------------------------
# post-processing


def discrete_gradient(f: ScalarField) -> np.ndarray:
    """Gradient at active nodes, shape (n_active, 2).

    Three-point differences on the axis neighbours; where a neighbour lies
    beyond the boundary the cut point (value 0) takes its place, giving the
    non-uniform formula (a^2 (f+ - f0) - b^2 (f- - f0)) / (a b (a + b)) with
    b, a the forward and backward reaches.
    """
    g = f.grid
    u = f.active_values
    vals = _gather(u, g.axis_nbr)
    out = np.empty((g.n_active, 2))
    for axis in range(2):
        fp, fm = vals[:, 2 * axis], vals[:, 2 * axis + 1]
        b, a = g.axis_reach[:, 2 * axis], g.axis_reach[:, 2 * axis + 1]
        out[:, axis] = (a * a * (fp - u) - b * b * (fm - u)) / (a * b * (a + b))
    return out


def gradient_field(f: ScalarField) -> np.ndarray:
    """Discrete gradient on the full lattice, (nx, ny, 2), zero off the active set."""
    g = f.grid
    grad = discrete_gradient(f)
    out = np.zeros((g.nx, g.ny, 2))
    out[g.active[:, 0], g.active[:, 1]] = grad
    return out


@dataclass
class ConvergenceRow:
    h: float
    error: float
    order: float | None
    solve_info: dict


class OracleUnavailableError(SolverError):
    pass


def convergence_study(domain: ConvexDomain, problem: str, hs, config: SolverConfig | None = None,
                      stadium_tol: float | None = None) -> list[ConvergenceRow]:
    """Sup-norm error against the web-function oracle over a list of spacings."""
    from .geometry import is_stadium_like
    from .webfuncs import WebProfile, web_value

    hs = sorted(hs, reverse=True)
    like, haus = is_stadium_like(domain, min(hs), stadium_tol or 0.0)
    if not like:
        raise OracleUnavailableError(
            f"{domain.kind} is not stadium-like (Hausdorff {haus:.3g}); no closed-form oracle")
    rho, _ = domain.inradius()
    prof = WebProfile("normalized" if problem == "normalized" else "nonnormalized", rho)
    rows: list[ConvergenceRow] = []
    for h in hs:
        fld = solve(domain, h, problem, config)
        exact = web_value(domain, fld.grid.active_points(), prof)
        err = float(np.max(np.abs(fld.active_values - exact)))
        order = None
        if rows and rows[-1].error > 0 and err > 0:
            order = math.log(rows[-1].error / err) / math.log(rows[-1].h / h)
        rows.append(ConvergenceRow(h, err, order, dict(fld.meta)))
    return rows
