"""Infinity-Laplace operators on second-order jets and a touching-quadratic falsifier.

For a jet ``(p, X)``:

* ``infinity_laplacian``            <X p, p>
* ``normalized_infinity_laplacian`` <X p, p> / |p|^2
* ``delta_plus`` / ``delta_minus``  the normalized value when p != 0 and
  λ_max(X) / λ_min(X) when p = 0.

"p = 0" means ``|p| <= ZERO_GRAD_REL * ||X||`` (Frobenius norm), which keeps
the switch scale free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ZERO_GRAD_REL = 1e-14


class ZeroGradientError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Jet2:
    p: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(2)
        X = np.asarray(self.X, dtype=float).reshape(2, 2)
        scale = max(1.0, float(np.abs(X).max()))
        if abs(X[0, 1] - X[1, 0]) > 1e-14 * scale:
            raise ValueError("jet matrix must be symmetric")
        X = 0.5 * (X + X.T)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "X", X)

    def to_json(self) -> dict:
        return {"p": self.p.tolist(), "X": self.X.tolist()}


def sym_eigvals(a, b, c):
    """Eigenvalues (lo, hi) of [[a, b], [b, c]]; vectorised over arrays."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return mean - rad, mean + rad


def eigenvalues(X) -> tuple[float, float]:
    X = np.asarray(X, dtype=float)
    lo, hi = sym_eigvals(X[0, 0], X[0, 1], X[1, 1])
    return float(lo), float(hi)


def _is_zero_grad(j: Jet2) -> bool:
    return float(np.hypot(*j.p)) <= ZERO_GRAD_REL * float(np.linalg.norm(j.X))


def infinity_laplacian(j: Jet2) -> float:
    return float(j.p @ j.X @ j.p)


def normalized_infinity_laplacian(j: Jet2) -> float:
    n = float(np.hypot(*j.p))
    if _is_zero_grad(j) or n == 0.0:
        raise ZeroGradientError("normalized infinity Laplacian undefined at zero gradient")
    e = j.p / n  # unit direction first, so tiny gradients do not underflow
    return float(e @ j.X @ e)


def delta_plus(j: Jet2) -> float:
    if _is_zero_grad(j) or not np.any(j.p):
        return eigenvalues(j.X)[1]
    return normalized_infinity_laplacian(j)


def delta_minus(j: Jet2) -> float:
    if _is_zero_grad(j) or not np.any(j.p):
        return eigenvalues(j.X)[0]
    return normalized_infinity_laplacian(j)


# ----------------------------------------------------------------------------
# falsifier


@dataclass
class SamplerConfig:
    """Deterministic search lattice for touching quadratics.

    ``r_touch`` defaults to 4 h with h = 1/64.
    """

    lam: float = 10.0
    n_eig: int = 21
    n_angle: int = 32
    r_touch: float = 4.0 / 64.0
    n_dir: int = 16
    n_rad: int = 8
    touch_tol: float = 1e-10
    margin_tol: float = 1e-9
    fd_step: float = 1e-6
    grad_snap: float = 1e-8


@dataclass
class ViscosityVerdict:
    point: np.ndarray
    kind: str  # "subsolution-check" | "supersolution-check"
    satisfied: bool
    margin: float  # worst (test value - 1) with the sign making >= 0 good; inf if no jet touched
    witness: Jet2 | None = None
    empty_jet: bool = False
    n_touching: int = 0

    def to_json(self) -> dict:
        return {"point": np.asarray(self.point).tolist(), "kind": self.kind,
                "satisfied": bool(self.satisfied),
                "margin": None if math.isinf(self.margin) else float(self.margin)}


def _matrix_lattice(cfg: SamplerConfig) -> np.ndarray:
    ev = np.linspace(-cfg.lam, cfg.lam, cfg.n_eig)
    out = []
    for k in range(cfg.n_angle):
        th = math.pi * k / cfg.n_angle
        c, s = math.cos(th), math.sin(th)
        R = np.array([[c, -s], [s, c]])
        for i, l1 in enumerate(ev):
            for l2 in ev[i:]:
                out.append(R @ np.diag([l1, l2]) @ R.T)
    # rotations of multiples of the identity repeat; drop exact duplicates
    arr = np.round(np.array(out), 13)
    _, idx = np.unique(arr.reshape(len(arr), -1), axis=0, return_index=True)
    return np.array(out)[np.sort(idx)]


_LATTICE_CACHE: dict = {}


def _lattice(cfg: SamplerConfig) -> np.ndarray:
    key = (cfg.lam, cfg.n_eig, cfg.n_angle)
    if key not in _LATTICE_CACHE:
        _LATTICE_CACHE[key] = _matrix_lattice(cfg)
    return _LATTICE_CACHE[key]


def _offsets(cfg: SamplerConfig) -> np.ndarray:
    th = 2 * math.pi * np.arange(cfg.n_dir) / cfg.n_dir
    rad = cfg.r_touch * np.arange(1, cfg.n_rad + 1) / cfg.n_rad
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    return (rad[:, None, None] * dirs[None]).reshape(-1, 2)


def _eval(f, pts):
    try:
        out = f(pts)
        out = np.asarray(out, dtype=float)
        if out.shape == (len(pts),):
            return out
    except Exception:
        pass
    return np.array([float(f(p)) for p in pts])


def _candidate_gradient(f, x, grad, cfg: SamplerConfig) -> np.ndarray:
    if grad is not None:
        p = np.asarray(grad(x) if callable(grad) else grad, dtype=float)
    else:
        s = cfg.fd_step
        e = np.eye(2)
        vals = _eval(f, np.array([x + s * e[0], x - s * e[0], x + s * e[1], x - s * e[1]]))
        p = np.array([vals[0] - vals[1], vals[2] - vals[3]]) / (2 * s)
    if np.hypot(*p) <= cfg.grad_snap:
        p = np.zeros(2)
    return p


def _kink_rules_out(f, x, fx, sign, cfg: SamplerConfig) -> bool:
    """True if some symmetric second difference beats every quadratic of the lattice.

    From below (sign=+1) a touching quadratic needs
    f(x+z) + f(x-z) - 2 f(x) >= -lam |z|^2; from above the mirror bound.
    """
    z = _offsets(cfg)
    plus = _eval(f, x + z)
    minus = _eval(f, x - z)
    second = plus + minus - 2 * fx
    r2 = np.einsum("ij,ij->i", z, z)
    if sign > 0:
        return bool(np.any(second < -cfg.lam * r2 - cfg.touch_tol))
    return bool(np.any(second > cfg.lam * r2 + cfg.touch_tol))


def _certify(f, x, normalized, cfg, grad, sign):
    x = np.asarray(x, dtype=float).reshape(2)
    kind = "supersolution-check" if sign > 0 else "subsolution-check"
    fx = float(_eval(f, x[None, :])[0])
    if _kink_rules_out(f, x, fx, sign, cfg):
        return ViscosityVerdict(x, kind, True, math.inf, None, empty_jet=True)
    p = _candidate_gradient(f, x, grad, cfg)
    z = _offsets(cfg)
    diff = _eval(f, x + z) - fx - z @ p  # f(x+z) - affine part
    quad = 0.5 * np.einsum("ni,mij,nj->mn", z, _lattice(cfg), z)
    mats = _lattice(cfg)
    # from below: quadratic <= f; from above: quadratic >= f
    touching = np.all(sign * (diff[None, :] - quad) >= -cfg.touch_tol, axis=1)
    idx = np.nonzero(touching)[0]
    if len(idx) == 0:
        return ViscosityVerdict(x, kind, True, math.inf, None, empty_jet=True)
    worst, witness = math.inf, None
    for m in idx:
        jet = Jet2(p, mats[m])
        if sign > 0:
            if normalized:
                margin = -delta_minus(jet) - 1.0  # need -Δ⁻ >= 1
            else:
                margin = -infinity_laplacian(jet) - 1.0
        else:
            if normalized:
                margin = 1.0 - (-delta_plus(jet))  # need -Δ⁺ <= 1
            else:
                margin = 1.0 + infinity_laplacian(jet)
        if margin < worst:
            worst, witness = margin, jet
    ok = worst >= -cfg.margin_tol
    return ViscosityVerdict(x, kind, ok, worst, None if ok else witness, empty_jet=False,
                            n_touching=len(idx))


def certify_supersolution(f: Callable, x, normalized: bool = True, config: SamplerConfig | None = None,
                          grad=None) -> ViscosityVerdict:
    """Search quadratics touching ``f`` from below at ``x`` for a violation of -Δ⁻ >= 1.

    A satisfied verdict only speaks for the sampled family of test jets.
    """
    return _certify(f, x, normalized, config or SamplerConfig(), grad, +1)


def certify_subsolution(f: Callable, x, normalized: bool = True, config: SamplerConfig | None = None,
                        grad=None) -> ViscosityVerdict:
    """Search quadratics touching ``f`` from above at ``x`` for a violation of -Δ⁺ <= 1.

    In the non-normalized test a zero-gradient jet gives -Δ∞ = 0 <= 1 and so
    never fails.
    """
    return _certify(f, x, normalized, config or SamplerConfig(), grad, -1)
