"""Web profiles, web functions and their closed-form by-products.

A web function is ``g(d(x))`` with ``d`` the distance to the boundary.
Three one-dimensional profiles are provided:

* ``nonnormalized``: ``C0 (rho^(4/3) - (rho - t)^(4/3))``, which solves
  ``-g'^2 g'' = 1``;
* ``normalized``: ``(rho^2 - (rho - t)^2) / 2``, which solves ``-g'' = 1``;
* ``radial``: ``(r^2 - (r - t)^2) / 2`` for an outer radius ``r >= rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import geometry as geo
from .infinity_ops import Jet2, SamplerConfig, certify_supersolution

C0 = 3.0 ** (4.0 / 3.0) / 4.0

KINDS = ("nonnormalized", "normalized", "radial")


class ProfileDomainError(ValueError):
    pass


@dataclass(frozen=True)
class WebProfile:
    kind: str
    rho: float
    r: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"profile kind must be one of {KINDS}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.kind == "radial":
            if self.r is None or self.r < self.rho:
                raise ValueError("radial profile needs r >= rho")

    @property
    def c0(self) -> float:
        return C0

    @property
    def t_max(self) -> float:
        return self.r if self.kind == "radial" else self.rho

    def to_json(self) -> dict:
        out = {"profile": self.kind, "rho": self.rho}
        if self.r is not None:
            out["r"] = self.r
        return out

    @classmethod
    def from_json(cls, data: dict) -> "WebProfile":
        return cls(data["profile"], float(data["rho"]), data.get("r"))


def _check_range(p: WebProfile, t: np.ndarray, slack: float = 1e-12):
    top = p.t_max
    if np.any(t < -slack * top) or np.any(t > top * (1 + slack)):
        raise ProfileDomainError(f"argument outside [0, {top:g}]")


def profile_value(p: WebProfile, t):
    t = np.asarray(t, dtype=float)
    _check_range(p, t)
    t = np.clip(t, 0.0, p.t_max)
    if p.kind == "nonnormalized":
        # rho^(4/3) (1 - (1 - t/rho)^(4/3)) without cancellation for small t
        with np.errstate(divide="ignore"):
            val = -p.rho ** (4.0 / 3.0) * np.expm1((4.0 / 3.0) * np.log1p(-t / p.rho))
        val = np.where(t >= p.rho, p.rho ** (4.0 / 3.0), val)
        out = C0 * val
    else:
        top = p.t_max
        out = t * (top - 0.5 * t)  # (top^2 - (top - t)^2) / 2
    return float(out) if out.ndim == 0 else out


def profile_derivative(p: WebProfile, t):
    t = np.asarray(t, dtype=float)
    _check_range(p, t)
    t = np.clip(t, 0.0, p.t_max)
    if p.kind == "nonnormalized":
        out = 3.0 ** (1.0 / 3.0) * np.cbrt(p.rho - t)
    else:
        out = p.t_max - t
    return float(out) if out.ndim == 0 else out


def profile_second_derivative(p: WebProfile, t):
    """g''; infinite at t = rho for the non-normalized profile."""
    t = np.asarray(t, dtype=float)
    _check_range(p, t)
    t = np.clip(t, 0.0, p.t_max)
    if p.kind == "nonnormalized":
        with np.errstate(divide="ignore"):
            out = -(3.0 ** (-2.0 / 3.0)) / np.cbrt(p.rho - t) ** 2
    else:
        out = -np.ones_like(t)
    return float(out) if out.ndim == 0 else out


def profile_for(domain: geo.ConvexDomain, kind: str = "normalized") -> WebProfile:
    rho, _ = domain.inradius()
    return WebProfile(kind, rho)


def web_value(domain: geo.ConvexDomain, x, p: WebProfile):
    d = np.asarray(geo.distance_to_boundary(domain, x), dtype=float)
    if np.any(d < -1e-12 * domain.scale):
        raise geo.GeometryError("web function evaluated outside the closed domain")
    return profile_value(p, np.clip(d, 0.0, p.t_max))


def web_gradient(domain: geo.ConvexDomain, x, p: WebProfile, ridge_tol: float = 1e-12):
    """g'(d) ν at a point with one nearest foot; zero on the high ridge; None on the cut locus."""
    x = np.asarray(x, dtype=float).reshape(2)
    nb = geo.nearest_boundary_points(domain, x)
    if p.kind != "radial" and nb.distance >= p.rho - ridge_tol:
        return np.zeros(2)
    if nb.nu is None:
        return None
    return profile_derivative(p, nb.distance) * nb.nu


def web_gradient_field(domain: geo.ConvexDomain, pts, p: WebProfile, cut_tol: float = 1e-9) -> np.ndarray:
    """Vectorised gradient; rows on the cut locus are NaN, high-ridge rows are zero."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    d = np.asarray(domain.signed_distance(pts), dtype=float)
    _, nu = domain.nearest_feet_and_normal(pts)
    nu = np.asarray(nu).reshape(-1, 2)
    grad = profile_derivative(p, np.clip(d, 0.0, p.t_max))[:, None] * nu
    inside = d > 0
    multi = np.zeros(len(pts), dtype=bool)
    if inside.any():
        multi[inside] = geo.multi_foot_mask(domain, pts[inside], cut_tol)
    grad[multi] = np.nan
    if p.kind != "radial":
        grad[d >= p.rho - 1e-12] = 0.0
    return grad


def serrin_constant(p: WebProfile) -> float:
    """|∇φ| on the boundary, i.e. g'(0)."""
    if p.kind == "radial":
        raise ValueError("no Serrin constant for the radial profile")
    return float(profile_derivative(p, 0.0))


def p_constant(p: WebProfile) -> float:
    """The constant value of the P-function on the web solution, also its maximum."""
    if p.kind == "radial":
        raise ValueError("no P constant for the radial profile")
    if p.kind == "nonnormalized":
        return C0 * p.rho ** (4.0 / 3.0)
    return 0.5 * p.rho ** 2


def radial_solution_value(r: float, rho: float, z):
    """g_r(rho - |z|) for |z| <= rho <= r."""
    z = np.asarray(z, dtype=float)
    nz = np.hypot(z[..., 0], z[..., 1])
    if np.any(nz > rho * (1 + 1e-12)):
        raise ProfileDomainError("|z| must not exceed rho")
    return profile_value(WebProfile("radial", rho, r), np.clip(rho - nz, 0.0, r))


def web_jet(domain: geo.ConvexDomain, x, p: WebProfile) -> Jet2 | None:
    """Analytic jet of the web function at a point off the cut locus and the high ridge.

    With ν the inward normal and κ the boundary curvature at the foot, the
    distance has Hessian -κ/(1 - κ d) τ⊗τ, so
    ∇²φ = g'' ν⊗ν + g' (-κ/(1 - κ d)) τ⊗τ.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    nb = geo.nearest_boundary_points(domain, x)
    if nb.nu is None or nb.distance >= p.rho - 1e-12:
        return None
    d = nb.distance
    kappa = boundary_curvature(domain, nb.feet[0])
    nu = nb.nu
    tau = np.array([-nu[1], nu[0]])
    g1 = profile_derivative(p, d)
    g2 = profile_second_derivative(p, d)
    hess_d = -kappa / (1.0 - kappa * d) if kappa > 0 else 0.0
    X = g2 * np.outer(nu, nu) + g1 * hess_d * np.outer(tau, tau)
    return Jet2(g1 * nu, X)


def boundary_curvature(domain: geo.ConvexDomain, q) -> float:
    q = np.asarray(q, dtype=float)
    if isinstance(domain, geo.Disk):
        return 1.0 / domain.radius
    if isinstance(domain, geo.Stadium):
        a, b = np.asarray(domain.p0), np.asarray(domain.p1)
        proj, t = geo._segment_closest(q[None, :], a, b)
        L = domain.spine_length
        on_cap = L == 0 or t[0] <= 0.0 or t[0] >= 1.0
        return 1.0 / domain.radius if on_cap else 0.0
    if isinstance(domain, geo.Ellipse):
        A, B = domain.a, domain.b
        loc = q - np.asarray(domain.center)
        th = math.atan2(loc[1] / B, loc[0] / A)
        s, c = math.sin(th), math.cos(th)
        return A * B / (A * A * s * s + B * B * c * c) ** 1.5
    if isinstance(domain, geo.ParallelBody):
        k = boundary_curvature(domain.base, q)
        return k / (1.0 + k * domain.eps) if k > 0 else 0.0
    return 0.0  # polygons: flat edges (vertices are never feet of interior off-cut points)


# ----------------------------------------------------------------------------
# supersolution certification by the three-case split


@dataclass
class SupersolutionReport:
    domain: str
    profile: str
    n_samples: int
    counts: dict = field(default_factory=lambda: {"ridge": 0, "regular": 0, "cut": 0})
    violations: list = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return len(self.violations)

    def to_json(self) -> dict:
        return {"domain": self.domain, "profile": self.profile, "n_samples": self.n_samples,
                "counts": dict(self.counts), "n_violations": self.n_violations,
                "violations": self.violations[:20]}


def _structured_samples(domain, n, seed_offset=0):
    """Interior samples: a Halton cloud plus points on the high ridge and the cut locus."""
    rho, centre = domain.inradius()
    x0, x1, y0, y1 = domain.bbox()
    n_ridge = max(1, n // 20)
    n_cut = max(1, n // 10)
    n_cloud = n - n_ridge - n_cut
    h = max(domain.scale / 256, 1e-3)
    try:
        ridge = geo.high_ridge(domain, tol=1e-12, spacing=h)
    except geo.GeometryError:
        ridge = centre[None, :]
    cut = geo.cut_locus(domain, h, tol=1e-9)
    pick = lambda arr, m: arr[np.linspace(0, len(arr) - 1, m).round().astype(int)] if len(arr) else arr
    ridge_pts = pick(ridge, n_ridge)
    cut_pts = pick(cut, n_cut) if len(cut) else np.empty((0, 2))
    sampler = qmc.Halton(d=2, scramble=False)
    sampler.fast_forward(1 + seed_offset)
    cloud = []
    got = 0
    while got < n_cloud:
        pts = qmc.scale(sampler.random(2 * (n_cloud - got) + 16), [x0, y0], [x1, y1])
        pts = pts[np.asarray(domain.signed_distance(pts)) > 1e-9 * domain.scale]
        cloud.append(pts[: n_cloud - got])
        got += len(cloud[-1])
    pts = np.vstack([ridge_pts, cut_pts] + cloud)
    return pts[: n]


def _step_inside(domain, x, e, s):
    return float(domain.signed_distance(x + s * e)) > 0 and float(domain.signed_distance(x - s * e)) > 0


def certify_web_supersolution(domain: geo.ConvexDomain, p: WebProfile, n_samples: int = 10_000,
                              lam: float = 10.0, tol: float = 1e-9) -> SupersolutionReport:
    """Check the supersolution property of the web function at structured sample points.

    ridge   (d = rho): the drop towards a nearest foot bounds every
            sub-jet; quadratic drop s^2/2 (normalized) forces λ_min <= -1,
            the super-quadratic drop of the non-normalized profile leaves the
            sub-jet empty.
    regular (single foot, d < rho): along the normal segment the function
            equals g, g' > 0, and the one-dimensional equation holds with
            the right sign.
    cut     (several feet, d < rho): a concave kink of the distance empties
            the sub-jet.
    """
    if p.kind == "radial":
        raise ValueError("certification applies to the web profiles, not the radial one")
    rep = SupersolutionReport(domain.kind, p.kind, n_samples)
    rho = p.rho
    f = lambda y: web_value(domain, y, p)
    pts = _structured_samples(domain, n_samples)
    d_all = np.asarray(domain.signed_distance(pts))
    multi = geo.multi_foot_mask(domain, pts, 1e-9)
    for x, d, is_multi in zip(pts, d_all, multi):
        if d >= rho - 1e-12:
            rep.counts["ridge"] += 1
            ok, info = _ridge_case(domain, f, x, p, lam, tol)
        elif not is_multi:
            rep.counts["regular"] += 1
            ok, info = _regular_case(domain, f, x, d, p, tol)
        else:
            rep.counts["cut"] += 1
            ok, info = _cut_case(domain, f, x, lam)
        if not ok:
            rep.violations.append({"point": x.tolist(), **info})
    return rep


def _ridge_case(domain, f, x, p, lam, tol):
    nb = geo.nearest_boundary_points(domain, x, tol=1e-9)
    e = nb.feet[0] - x
    e = e / np.hypot(*e)
    fx = f(x)
    for s in (1e-1, 1e-2, 1e-3):
        s = s * p.rho
        drop = fx - f(x + s * e)
        if p.kind == "normalized":
            back = x - s * e
            back_ok = float(domain.signed_distance(back)) <= 0 or f(back) <= fx + tol
            if drop < 0.5 * s * s - tol or not back_ok:
                return False, {"case": "ridge", "s": s, "drop": drop}
        else:
            # drop c0 s^(4/3) beats every quadratic once s is small enough
            if s < (C0 / (2 * lam)) ** 1.5 and drop <= lam * s * s:
                return False, {"case": "ridge", "s": s, "drop": drop}
    return True, {}


def _regular_case(domain, f, x, d, p, tol):
    nb = geo.nearest_boundary_points(domain, x, tol=1e-9)
    q, nu = nb.feet[0], nb.nu
    g1 = profile_derivative(p, d)
    g2 = profile_second_derivative(p, d)
    if not g1 > 0:
        return False, {"case": "regular", "reason": "g' <= 0"}
    lhs = -g2 if p.kind == "normalized" else -g1 * g1 * g2
    if lhs < 1.0 - 1e-10:
        return False, {"case": "regular", "reason": "1d equation", "value": lhs}
    # along the normal segment the function is exactly the profile
    for t in (0.5 * d, d):
        if abs(f(q + t * nu) - profile_value(p, t)) > tol * max(1.0, p_constant(p)):
            return False, {"case": "regular", "reason": "profile mismatch", "t": t}
    return True, {}


def _cut_case(domain, f, x, lam):
    nb = geo.nearest_boundary_points(domain, x, tol=1e-9)
    if nb.n_feet < 2:
        return True, {}
    u1 = x - nb.feet[0]
    u2 = x - nb.feet[1]
    u1, u2 = u1 / np.hypot(*u1), u2 / np.hypot(*u2)
    e = u1 - u2
    e = e / np.hypot(*e)
    fx = f(x)
    # near the ridge the kink is O(rho - d) and the best margin (rho - d)^2 / lam
    # sits far below a fixed tolerance, so only guard against round-off here
    guard = 16 * np.finfo(float).eps * max(1.0, abs(fx))
    s = 0.25 * nb.distance
    for _ in range(40):
        if _step_inside(domain, x, e, s):
            second = f(x + s * e) + f(x - s * e) - 2 * fx
            if second < -lam * s * s - guard:
                return True, {}
        s *= 0.5
    return False, {"case": "cut", "reason": "no concave kink detected"}


def certify_field_supersolution(fn, points, normalized: bool = True,
                                config: SamplerConfig | None = None) -> list:
    """Sampled falsifier for functions known only numerically (e.g. interpolated grid fields)."""
    return [certify_supersolution(fn, x, normalized=normalized, config=config) for x in np.asarray(points)]
