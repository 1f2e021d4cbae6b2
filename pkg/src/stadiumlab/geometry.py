"""Convex planar domains and their distance-to-boundary geometry.

Sign convention: ``signed_distance`` is positive inside, so the inradius is
the maximum of the field, and equals ``-dist(x, closure)`` outside.

All point arguments accept either a single point ``(2,)`` or an array
``(..., 2)``; scalar outputs follow the leading shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import directed_hausdorff
import shapely
from shapely.ops import polylabel
from skimage.measure import find_contours

# two feet are distinct when seen from x at an angle above this
FOOT_ANGLE_TOL = 1e-3


class GeometryError(ValueError):
    """Invalid domain parameters or a query outside the domain."""


class EmptyLevelSetError(GeometryError):
    pass


@dataclass
class NearestBoundaryData:
    x: np.ndarray
    feet: np.ndarray  # (k, 2)
    distance: float
    nu: np.ndarray | None = None

    @property
    def n_feet(self) -> int:
        return len(self.feet)


@dataclass
class RidgeReport:
    inradius: float
    high_ridge: np.ndarray
    cut_locus: np.ndarray
    hausdorff: float


def _as_points(x) -> tuple[np.ndarray, tuple]:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != 2:
        raise GeometryError(f"points must have trailing dimension 2, got {arr.shape}")
    lead = arr.shape[:-1]
    return arr.reshape(-1, 2), lead


def _restore(values: np.ndarray, lead: tuple):
    out = values.reshape(lead + values.shape[1:])
    if out.ndim == 0:
        return float(out)
    return out


def _segment_closest(pts: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Closest points on segment [a, b]; returns (points, parameter in [0, 1])."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        t = np.zeros(len(pts))
    else:
        t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return a + t[:, None] * ab, t


def _angular_separation(x: np.ndarray, feet: np.ndarray) -> float:
    if len(feet) < 2:
        return 0.0
    v = feet - x
    ang = np.arctan2(v[:, 1], v[:, 0])
    best = 0.0
    for i in range(len(ang)):
        diff = np.abs(np.angle(np.exp(1j * (ang[i + 1:] - ang[i]))))
        if diff.size:
            best = max(best, float(diff.max()))
    return best


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for q in points:
        if all(np.hypot(*(q - k)) > tol for k in kept):
            kept.append(q)
    return np.array(kept).reshape(-1, 2)


class ConvexDomain:
    """Bounded convex planar region with an exact distance oracle."""

    kind = "abstract"

    def signed_distance(self, x):
        pts, lead = _as_points(x)
        return _restore(self._signed_distance(pts), lead)

    def _signed_distance(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _candidate_feet(self, x: np.ndarray) -> np.ndarray:
        """Boundary points that are local minimisers of |x - q|."""
        raise NotImplementedError

    def _feet_batch(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Candidate feet for many points at once: ``(N, K, 2)`` and a validity mask."""
        raise NotImplementedError

    def nearest_feet_and_normal(self, x):
        """Vectorised single nearest foot and unit direction (x - q)/|x - q|.

        Ties are broken arbitrarily; use :func:`nearest_boundary_points`
        when the full foot set matters.
        """
        raise NotImplementedError

    def inradius(self) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def boundary_samples(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 0.0):
        return np.asarray(self.signed_distance(x)) > tol

    def _inside(self, pts: np.ndarray) -> np.ndarray:
        """Open-set membership; shapes with a cheap implicit form override this."""
        return self._signed_distance(pts) > 0

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        x0, x1, y0, y1 = self.bbox()
        return max(x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Disk(ConvexDomain):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def _c(self) -> np.ndarray:
        return np.asarray(self.center)

    def _signed_distance(self, pts):
        return self.radius - np.hypot(*(pts - self._c).T)

    def _candidate_feet(self, x):
        v = x - self._c
        r = float(np.hypot(*v))
        if r < 1e-300:
            th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
            return self._c + self.radius * np.column_stack([np.cos(th), np.sin(th)])
        return (self._c + self.radius * v / r)[None, :]

    def _feet_batch(self, pts):
        v = pts - self._c
        r = np.hypot(*v.T)
        centre = r < 1e-14 * self.radius
        u = v / np.where(centre, 1.0, r)[:, None]
        u[centre] = (1.0, 0.0)
        feet = np.stack([self._c + self.radius * u, self._c - self.radius * u], axis=1)
        return feet, np.column_stack([np.ones(len(pts), bool), centre])

    def nearest_feet_and_normal(self, x):
        pts, lead = _as_points(x)
        v = pts - self._c
        r = np.hypot(*v.T)
        safe = np.where(r > 0, r, 1.0)
        u = np.where(r[:, None] > 0, v / safe[:, None], np.array([1.0, 0.0]))
        feet = self._c + self.radius * u
        return _restore(feet, lead), _restore(-u, lead)

    def inradius(self):
        return self.radius, self._c.copy()

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def boundary_samples(self, n):
        th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return self._c + self.radius * np.column_stack([np.cos(th), np.sin(th)])

    def to_json(self):
        return {"shape": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Stadium(ConvexDomain):
    """Tubular neighbourhood of the segment [p0, p1]."""

    p0: tuple = (-1.0, 0.0)
    p1: tuple = (1.0, 0.0)
    radius: float = 1.0
    kind = "stadium"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("stadium radius must be positive")
        object.__setattr__(self, "p0", tuple(float(c) for c in self.p0))
        object.__setattr__(self, "p1", tuple(float(c) for c in self.p1))

    @property
    def _a(self):
        return np.asarray(self.p0)

    @property
    def _b(self):
        return np.asarray(self.p1)

    @property
    def spine_length(self) -> float:
        return float(np.hypot(*(self._b - self._a)))

    def _signed_distance(self, pts):
        proj, _ = _segment_closest(pts, self._a, self._b)
        return self.radius - np.hypot(*(pts - proj).T)

    def _candidate_feet(self, x):
        a, b, R = self._a, self._b, self.radius
        L = self.spine_length
        if L == 0.0:
            return Disk(self.p0, R)._candidate_feet(x)
        e = (b - a) / L
        n = np.array([-e[1], e[0]])
        s = float((x - a) @ e)
        cands = []
        # straight edges: perpendicular feet inside the edge range
        if 0.0 <= s <= L:
            base = a + s * e
            cands.append(base + R * n)
            cands.append(base - R * n)
        # caps: the radial foot on each semicircle if it lies on the cap side
        for centre, outward in ((a, -e), (b, e)):
            v = x - centre
            r = float(np.hypot(*v))
            if r < 1e-300:
                th = np.linspace(-np.pi / 2, np.pi / 2, 33)
                base_ang = math.atan2(outward[1], outward[0])
                for t in th:
                    cands.append(centre + R * np.array([math.cos(base_ang + t), math.sin(base_ang + t)]))
                continue
            if float(v @ outward) >= -1e-15 * max(1.0, r):
                cands.append(centre + R * v / r)
        return np.array(cands).reshape(-1, 2)

    def _feet_batch(self, pts):
        a, b, R = self._a, self._b, self.radius
        L = self.spine_length
        if L == 0.0:
            return Disk(self.p0, R)._feet_batch(pts)
        e = (b - a) / L
        n = np.array([-e[1], e[0]])
        s = (pts - a) @ e
        on_edge = (s >= 0.0) & (s <= L)
        base = a + s[:, None] * e
        cands = [base + R * n, base - R * n]
        valid = [on_edge, on_edge]
        for centre, outward in ((a, -e), (b, e)):
            v = pts - centre
            r = np.hypot(*v.T)
            degenerate = r < 1e-14 * R
            u = v / np.where(degenerate, 1.0, r)[:, None]
            u[degenerate] = outward
            cands.append(centre + R * u)
            valid.append((v @ outward) >= -1e-15 * np.maximum(1.0, r))
        return np.stack(cands, axis=1), np.column_stack(valid)

    def nearest_feet_and_normal(self, x):
        pts, lead = _as_points(x)
        proj, _ = _segment_closest(pts, self._a, self._b)
        v = pts - proj
        r = np.hypot(*v.T)
        L = self.spine_length
        if L > 0:
            e = (self._b - self._a) / L
            fallback = np.array([-e[1], e[0]])
        else:
            fallback = np.array([1.0, 0.0])
        safe = np.where(r > 0, r, 1.0)
        u = np.where(r[:, None] > 0, v / safe[:, None], fallback)
        feet = proj + self.radius * u
        return _restore(feet, lead), _restore(-u, lead)

    def inradius(self):
        return self.radius, 0.5 * (self._a + self._b)

    def bbox(self):
        R = self.radius
        xs = (self.p0[0], self.p1[0])
        ys = (self.p0[1], self.p1[1])
        return min(xs) - R, max(xs) + R, min(ys) - R, max(ys) + R

    def boundary_samples(self, n):
        a, b, R = self._a, self._b, self.radius
        L = self.spine_length
        if L == 0.0:
            return Disk(self.p0, R).boundary_samples(n)
        e = (b - a) / L
        nrm = np.array([-e[1], e[0]])
        perim = 2 * L + 2 * np.pi * R
        s = np.linspace(0.0, perim, n, endpoint=False)
        out = np.empty((n, 2))
        base = math.atan2(nrm[1], nrm[0])
        for i, si in enumerate(s):
            if si < L:
                out[i] = a + si * e + R * nrm
            elif si < L + np.pi * R:
                ang = base - (si - L) / R
                out[i] = b + R * np.array([math.cos(ang), math.sin(ang)])
            elif si < 2 * L + np.pi * R:
                out[i] = b - (si - L - np.pi * R) * e - R * nrm
            else:
                ang = base + np.pi - (si - 2 * L - np.pi * R) / R
                out[i] = a + R * np.array([math.cos(ang), math.sin(ang)])
        return out

    def to_json(self):
        return {"shape": "stadium", "p0": list(self.p0), "p1": list(self.p1), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(ConvexDomain):
    """Axis-aligned ellipse with semi-axes a >= b > 0."""

    center: tuple = (0.0, 0.0)
    a: float = 2.0
    b: float = 1.0
    kind = "ellipse"

    newton_iters = 60

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise GeometryError("ellipse needs a >= b > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def _stationary(self, loc: np.ndarray) -> np.ndarray:
        """Foot angles theta of the critical points of |x - q(theta)|, 4 starts each.

        q(theta) = (a cos, b sin); stationarity
        f = (b^2 - a^2) sin cos + a x sin - b y cos = 0.
        """
        a, b = self.a, self.b
        X = loc[:, 0:1]
        Y = loc[:, 1:2]
        th = np.tile(np.array([0.25, 0.75, 1.25, 1.75]) * np.pi, (len(loc), 1))
        c2 = b * b - a * a
        for _ in range(self.newton_iters):
            s, c = np.sin(th), np.cos(th)
            f = c2 * s * c + a * X * s - b * Y * c
            df = c2 * (c * c - s * s) + a * X * c + b * Y * s
            # keep Newton on the minimisation branch: f' is the second derivative
            # of the squared distance / 2 and must be positive at a minimum
            df_safe = np.where(df > 1e-14 * a * a, df, np.abs(df) + a * a)
            step = np.clip(f / df_safe, -0.5, 0.5)
            th = th - step
            if np.all(np.abs(step) < 1e-16):
                break
        return th

    def _local(self, pts):
        return pts - np.asarray(self.center)

    def _inside(self, pts):
        loc = self._local(pts)
        return (loc[:, 0] / self.a) ** 2 + (loc[:, 1] / self.b) ** 2 < 1.0

    def _signed_distance(self, pts):
        loc = self._local(pts)
        th = self._stationary(loc)
        qx = self.a * np.cos(th)
        qy = self.b * np.sin(th)
        dist = np.hypot(qx - loc[:, 0:1], qy - loc[:, 1:2]).min(axis=1)
        inside = (loc[:, 0] / self.a) ** 2 + (loc[:, 1] / self.b) ** 2 < 1.0
        return np.where(inside, dist, -dist)

    def _candidate_feet(self, x):
        loc = self._local(x[None, :])
        th = self._stationary(loc)[0]
        a, b = self.a, self.b
        # keep only converged critical points that are local minima
        s, c = np.sin(th), np.cos(th)
        f = (b * b - a * a) * s * c + a * loc[0, 0] * s - b * loc[0, 1] * c
        df = (b * b - a * a) * (c * c - s * s) + a * loc[0, 0] * c + b * loc[0, 1] * s
        ok = (np.abs(f) <= 1e-10 * a * a) & (df > -1e-12 * a * a)
        th = th[ok] if ok.any() else th
        q = np.column_stack([a * np.cos(th), b * np.sin(th)]) + np.asarray(self.center)
        return _dedupe(q, 1e-9 * a)

    def _feet_batch(self, pts):
        loc = self._local(pts)
        th = self._stationary(loc)
        a, b = self.a, self.b
        X, Y = loc[:, 0:1], loc[:, 1:2]
        s, c = np.sin(th), np.cos(th)
        f = (b * b - a * a) * s * c + a * X * s - b * Y * c
        df = (b * b - a * a) * (c * c - s * s) + a * X * c + b * Y * s
        ok = (np.abs(f) <= 1e-10 * a * a) & (df > -1e-12 * a * a)
        feet = np.stack([a * c, b * s], axis=-1) + np.asarray(self.center)
        return feet, ok

    def nearest_feet_and_normal(self, x):
        pts, lead = _as_points(x)
        loc = self._local(pts)
        th = self._stationary(loc)
        qx = self.a * np.cos(th)
        qy = self.b * np.sin(th)
        dist = np.hypot(qx - loc[:, 0:1], qy - loc[:, 1:2])
        k = dist.argmin(axis=1)
        rows = np.arange(len(pts))
        q = np.column_stack([qx[rows, k], qy[rows, k]])
        v = loc - q
        r = np.hypot(*v.T)
        nrm = np.column_stack([q[:, 0] / self.a**2, q[:, 1] / self.b**2])
        nrm = -nrm / np.hypot(*nrm.T)[:, None]
        safe = np.where(r > 0, r, 1.0)
        u = np.where(r[:, None] > 1e-14 * self.a, v / safe[:, None], nrm)
        inside = (loc[:, 0] / self.a) ** 2 + (loc[:, 1] / self.b) ** 2 < 1.0
        u = np.where(inside[:, None], u, -u)
        return _restore(q + np.asarray(self.center), lead), _restore(u, lead)

    def inradius(self):
        return self.b, np.asarray(self.center, dtype=float)

    def bbox(self):
        cx, cy = self.center
        return cx - self.a, cx + self.a, cy - self.b, cy + self.b

    def boundary_samples(self, n):
        th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.column_stack([self.a * np.cos(th), self.b * np.sin(th)]) + np.asarray(self.center)

    def to_json(self):
        return {"shape": "ellipse", "center": list(self.center), "a": self.a, "b": self.b}


@dataclass(frozen=True)
class ConvexPolygon(ConvexDomain):
    """Strictly convex polygon with counter-clockwise vertices."""

    vertices: tuple = ()
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        e1 = np.roll(v, -1, axis=0) - v
        e2 = np.roll(e1, -1, axis=0)
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if not np.all(cross > 0):
            raise GeometryError("polygon vertices must be CCW with strictly convex turns")
        object.__setattr__(self, "vertices", tuple(tuple(map(float, p)) for p in v))

    @property
    def _v(self) -> np.ndarray:
        return np.asarray(self.vertices)

    def _edges(self):
        v = self._v
        return v, np.roll(v, -1, axis=0)

    def _edge_normals(self):
        a, b = self._edges()
        e = b - a
        n = np.column_stack([-e[:, 1], e[:, 0]])  # inward for CCW
        return n / np.hypot(*n.T)[:, None]

    def _signed_distance(self, pts):
        a, b = self._edges()
        nrm = self._edge_normals()
        best = np.full(len(pts), np.inf)
        for i in range(len(a)):
            proj, _ = _segment_closest(pts, a[i], b[i])
            best = np.minimum(best, np.hypot(*(pts - proj).T))
        inside = np.all(np.einsum("pkd,kd->pk", pts[:, None, :] - a[None], nrm) > 0, axis=1)
        return np.where(inside, best, -best)

    def _candidate_feet(self, x):
        a, b = self._edges()
        out = []
        for i in range(len(a)):
            proj, _ = _segment_closest(x[None, :], a[i], b[i])
            out.append(proj[0])
        return _dedupe(np.array(out), 1e-12 * self.scale)

    def _feet_batch(self, pts):
        a, b = self._edges()
        feet = np.stack([_segment_closest(pts, a[i], b[i])[0] for i in range(len(a))], axis=1)
        return feet, np.ones(feet.shape[:2], bool)

    def nearest_feet_and_normal(self, x):
        pts, lead = _as_points(x)
        a, b = self._edges()
        nrm = self._edge_normals()
        best = np.full(len(pts), np.inf)
        feet = np.zeros_like(pts)
        edge_n = np.zeros_like(pts)
        for i in range(len(a)):
            proj, _ = _segment_closest(pts, a[i], b[i])
            dist = np.hypot(*(pts - proj).T)
            better = dist < best
            best = np.where(better, dist, best)
            feet[better] = proj[better]
            edge_n[better] = nrm[i]
        v = pts - feet
        safe = np.where(best > 0, best, 1.0)
        inside = np.asarray(self._signed_distance(pts)) > 0
        u = np.where(best[:, None] > 0, v / safe[:, None], edge_n)
        u = np.where(inside[:, None] | (best[:, None] == 0), u, -u)
        return _restore(feet, lead), _restore(u, lead)

    def inradius(self):
        """Largest inscribed circle as an LP over the edge half-planes."""
        a, _ = self._edges()
        nrm = self._edge_normals()
        # maximise r s.t. n_i . (c - a_i) >= r
        A_ub = np.column_stack([-nrm, np.ones(len(a))])
        b_ub = -np.einsum("kd,kd->k", nrm, a)
        res = linprog(c=[0.0, 0.0, -1.0], A_ub=A_ub, b_ub=b_ub,
                      bounds=[(None, None), (None, None), (0, None)], method="highs")
        if not res.success:
            raise GeometryError(f"inscribed-circle LP failed: {res.message}")
        centre = res.x[:2]
        # the LP optimum is only accurate to solver tolerance; report the
        # exact distance at the witness centre
        r = float(self._signed_distance(centre[None, :])[0])
        if abs(r - res.x[2]) > 1e-10 * max(1.0, self.scale):
            raise GeometryError("inscribed-circle LP residual above 1e-10")
        return r, centre

    def bbox(self):
        v = self._v
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()

    def boundary_samples(self, n):
        a, b = self._edges()
        lens = np.hypot(*(b - a).T)
        s = np.linspace(0.0, lens.sum(), n, endpoint=False)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(a) - 1)
        t = (s - cum[idx]) / lens[idx]
        return a[idx] + t[:, None] * (b[idx] - a[idx])

    def to_json(self):
        return {"shape": "polygon", "vertices": [list(p) for p in self.vertices]}


def unit_square() -> ConvexPolygon:
    return ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


@dataclass(frozen=True)
class ParallelBody(ConvexDomain):
    """Outer parallel body {dist(x, base) < eps} of a convex domain."""

    base: ConvexDomain = field(default_factory=Disk)
    eps: float = 0.0
    kind = "parallel_body"

    def _signed_distance(self, pts):
        return self.base._signed_distance(pts) + self.eps

    def _candidate_feet(self, x):
        d = float(self.base._signed_distance(x[None, :])[0])
        if d > 0:
            q = self.base._candidate_feet(x)
            v = q - x
            r = np.hypot(*v.T)
            return q + self.eps * v / r[:, None]
        feet, nu = self.base.nearest_feet_and_normal(x)
        return (np.asarray(feet) - self.eps * np.asarray(nu)).reshape(1, 2)

    def _feet_batch(self, pts):
        # only used for interior points of the base, where feet move outward along x - q
        feet, ok = self.base._feet_batch(pts)
        v = feet - pts[:, None, :]
        r = np.hypot(v[..., 0], v[..., 1])
        return feet + self.eps * v / np.where(r > 0, r, 1.0)[..., None], ok

    def nearest_feet_and_normal(self, x):
        feet, nu = self.base.nearest_feet_and_normal(x)
        return np.asarray(feet) - self.eps * np.asarray(nu), nu

    def inradius(self):
        r, c = self.base.inradius()
        return r + self.eps, c

    def bbox(self):
        x0, x1, y0, y1 = self.base.bbox()
        e = self.eps
        return x0 - e, x1 + e, y0 - e, y1 + e

    def boundary_samples(self, n):
        q = self.base.boundary_samples(n)
        _, nu = self.base.nearest_feet_and_normal(q - 1e-9 * (q - self.base.inradius()[1]))
        return q - self.eps * np.asarray(nu)

    def to_json(self):
        return {"shape": "parallel_body", "base": self.base.to_json(), "eps": self.eps}


# ----------------------------------------------------------------------------
# module-level operations


def distance_to_boundary(domain: ConvexDomain, x):
    """d(x) >= 0 inside, -dist(x, closure) outside."""
    return domain.signed_distance(x)


def nearest_boundary_points(domain: ConvexDomain, x, tol: float = 1e-9) -> NearestBoundaryData:
    """All boundary feet of an interior point within ``tol`` of the minimal distance.

    Feet are local minimisers of |x - q| along the boundary, so ``tol``
    widens the tie test without admitting a whole arc of near-feet.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    d = float(domain._signed_distance(x[None, :])[0])
    if d <= 0:
        raise GeometryError(f"point {x.tolist()} is not interior (d = {d:.3g})")
    cands = domain._candidate_feet(x)
    dist = np.hypot(*(cands - x).T)
    dmin = float(dist.min())
    feet = cands[dist <= dmin + tol]
    feet = _dedupe(feet, max(1e-12, 1e-9 * domain.scale))
    # collapse feet that are indistinguishable in angle
    if len(feet) > 1 and _angular_separation(x, feet) < FOOT_ANGLE_TOL:
        feet = feet[:1]
    nu = None
    if len(feet) == 1:
        v = x - feet[0]
        nu = v / np.hypot(*v)
    return NearestBoundaryData(x=x, feet=feet, distance=d, nu=nu)


def inradius(domain: ConvexDomain) -> tuple[float, np.ndarray]:
    return domain.inradius()


def _sample_grid(domain: ConvexDomain, spacing: float):
    x0, x1, y0, y1 = domain.bbox()
    i0, i1 = math.floor(x0 / spacing), math.ceil(x1 / spacing)
    j0, j1 = math.floor(y0 / spacing), math.ceil(y1 / spacing)
    xs = np.arange(i0, i1 + 1) * spacing
    ys = np.arange(j0, j1 + 1) * spacing
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return X, Y


def high_ridge(domain: ConvexDomain, tol: float | None = None, spacing: float = 1.0 / 128) -> np.ndarray:
    """Lattice samples where d is within ``tol`` of the inradius.

    Kept samples must also be (non-strict) maxima of d along both
    coordinate lines, which thins the near-maximal band to the ridge.
    """
    if tol is None:
        tol = spacing
    rho, _ = domain.inradius()
    X, Y = _sample_grid(domain, spacing)
    D = domain.signed_distance(np.stack([X, Y], axis=-1))
    Dp = np.pad(D, 1, constant_values=-np.inf)
    eq = 1e-12 * max(1.0, rho)
    cen = Dp[1:-1, 1:-1]
    locx = (cen >= Dp[2:, 1:-1] - eq) & (cen >= Dp[:-2, 1:-1] - eq)
    locy = (cen >= Dp[1:-1, 2:] - eq) & (cen >= Dp[1:-1, :-2] - eq)
    keep = (D >= rho - tol) & locx & locy
    pts = np.column_stack([X[keep], Y[keep]])
    if len(pts) == 0:
        raise GeometryError("empty high ridge: tol too small for the sampling spacing")
    return pts


def multi_foot_mask(domain: ConvexDomain, pts: np.ndarray, tol: float) -> np.ndarray:
    """True where a point has two feet within ``tol`` of the minimum, apart by the angular tolerance."""
    feet, ok = domain._feet_batch(pts)
    v = feet - pts[:, None, :]
    dist = np.where(ok, np.hypot(v[..., 0], v[..., 1]), np.inf)
    near = ok & (dist <= dist.min(axis=1, keepdims=True) + tol)
    ang = np.arctan2(v[..., 1], v[..., 0])
    diff = np.abs(np.angle(np.exp(1j * (ang[:, :, None] - ang[:, None, :]))))
    pair = near[:, :, None] & near[:, None, :]
    return np.any(pair & (diff >= FOOT_ANGLE_TOL), axis=(1, 2))


def cut_locus(domain: ConvexDomain, h: float, tol: float | None = None) -> np.ndarray:
    """Lattice samples of spacing h with two or more distinct nearest feet.

    ``tol`` (default h) is the distance slack for counting a second foot.
    """
    if tol is None:
        tol = h
    X, Y = _sample_grid(domain, h)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[domain._signed_distance(pts) > 0]
    return pts[multi_foot_mask(domain, pts, tol)].reshape(-1, 2)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 or len(b) == 0:
        return math.inf
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def ridge_report(domain: ConvexDomain, h: float, tol: float | None = None) -> RidgeReport:
    rho, _ = domain.inradius()
    hr = high_ridge(domain, tol=tol if tol is not None else h, spacing=h)
    cl = cut_locus(domain, h, tol)
    return RidgeReport(inradius=rho, high_ridge=hr, cut_locus=cl, hausdorff=hausdorff(cl, hr))


def is_stadium_like(domain: ConvexDomain, h: float, tol: float = 0.0) -> tuple[bool, float]:
    rep = ridge_report(domain, h)
    return rep.hausdorff <= max(2 * h, tol), rep.hausdorff


def outer_parallel_body(domain: ConvexDomain, eps: float) -> ConvexDomain:
    if eps < 0:
        raise GeometryError("parallel body needs eps >= 0")
    if isinstance(domain, Disk):
        return Disk(domain.center, domain.radius + eps)
    if isinstance(domain, Stadium):
        return Stadium(domain.p0, domain.p1, domain.radius + eps)
    if isinstance(domain, ParallelBody):
        return ParallelBody(domain.base, domain.eps + eps)
    return ParallelBody(domain, eps)


def domain_from_json(data: dict) -> ConvexDomain:
    shape = data.get("shape")
    if shape == "disk":
        return Disk(tuple(data.get("center", (0.0, 0.0))), float(data["radius"]))
    if shape == "stadium":
        return Stadium(tuple(data["p0"]), tuple(data["p1"]), float(data["radius"]))
    if shape == "ellipse":
        return Ellipse(tuple(data.get("center", (0.0, 0.0))), float(data["a"]), float(data["b"]))
    if shape == "polygon":
        return ConvexPolygon(tuple(tuple(p) for p in data["vertices"]))
    if shape == "square":
        s = float(data.get("side", 1.0))
        x, y = data.get("origin", (0.0, 0.0))
        return ConvexPolygon(((x, y), (x + s, y), (x + s, y + s), (x, y + s)))
    if shape == "parallel_body":
        return outer_parallel_body(domain_from_json(data["base"]), float(data["eps"]))
    raise GeometryError(f"unknown shape {shape!r}")


# ----------------------------------------------------------------------------
# level sets of grid fields


@dataclass(eq=False)
class LevelSetDomain(ConvexDomain):
    """Region {u > m} of a grid field, bounded by a marching-squares polyline.

    Distances are exact for the polyline, so they carry the O(h^2) error of
    the piecewise-linear contour.
    """

    vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    level: float = 0.0
    kind = "level_set"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise EmptyLevelSetError("level set contour has fewer than three vertices")
        self.vertices = v
        self._poly = shapely.Polygon(v)
        self._a = v
        self._b = np.roll(v, -1, axis=0)

    def _closest(self, pts):
        """Nearest polyline point for each query, (N, 2)."""
        ab = self._b - self._a
        L2 = np.einsum("ij,ij->i", ab, ab)
        out = np.empty_like(pts)
        best = np.full(len(pts), np.inf)
        for k in range(0, len(pts), 2048):
            p = pts[k:k + 2048]
            rel = p[:, None, :] - self._a[None]
            t = np.clip(np.einsum("nkj,kj->nk", rel, ab) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
            q = self._a[None] + t[..., None] * ab[None]
            d2 = np.einsum("nkj,nkj->nk", p[:, None, :] - q, p[:, None, :] - q)
            j = d2.argmin(axis=1)
            out[k:k + 2048] = q[np.arange(len(p)), j]
            best[k:k + 2048] = d2[np.arange(len(p)), j]
        return out, np.sqrt(best)

    def _signed_distance(self, pts):
        _, d = self._closest(pts)
        inside = shapely.contains_xy(self._poly, pts[:, 0], pts[:, 1])
        return np.where(inside, d, -d)

    def _candidate_feet(self, x):
        q, _ = self._closest(np.asarray(x, float).reshape(1, 2))
        return q

    def _feet_batch(self, pts):
        q, _ = self._closest(pts)
        return q[:, None, :], np.ones((len(pts), 1), dtype=bool)

    def nearest_feet_and_normal(self, x):
        pts, lead = _as_points(x)
        q, d = self._closest(pts)
        nu = (pts - q) / np.where(d > 0, d, 1.0)[:, None]
        inside = shapely.contains_xy(self._poly, pts[:, 0], pts[:, 1])
        nu = np.where(inside[:, None], nu, -nu)
        return q.reshape(lead + (2,)), nu.reshape(lead + (2,))

    def inradius(self):
        c = polylabel(self._poly, tolerance=1e-6 * self.scale)
        centre = np.array([c.x, c.y])
        return float(self._poly.exterior.distance(c)), centre

    def bbox(self):
        x0, y0, x1, y1 = self._poly.bounds
        return x0, x1, y0, y1

    def boundary_samples(self, n):
        ring = self._poly.exterior
        s = np.linspace(0.0, ring.length, n, endpoint=False)
        return np.array([[p.x, p.y] for p in (ring.interpolate(t) for t in s)])

    def to_json(self):
        return {"shape": "level_set", "level": self.level, "vertices": self.vertices.tolist()}


def level_set_domain(u, m: float) -> LevelSetDomain:
    """Superlevel set {u > m} of a grid field as a polygonal domain.

    ``u`` needs ``values`` (nx, ny) and a ``grid`` with ``xs``, ``ys``; the
    solver's ScalarField qualifies. The longest contour is kept.
    """
    vals = np.asarray(u.values, dtype=float)
    top = float(np.max(vals))
    if not m > 0:
        raise GeometryError("level must be positive")
    if m >= top:
        raise EmptyLevelSetError(f"level {m:g} is not below the field maximum {top:g}")
    contours = find_contours(vals, m)
    if not contours:
        raise EmptyLevelSetError(f"no contour at level {m:g}")
    c = max(contours, key=len)
    xs, ys = u.grid.xs, u.grid.ys
    h = u.grid.h
    pts = np.column_stack([xs[0] + c[:, 0] * h, ys[0] + c[:, 1] * h])
    return LevelSetDomain(pts, float(m))
