"""Scenario runner, fixtures and command line for stadiumlab.

A scenario is a JSON document naming a domain, a problem kind, a grid
spacing, solver options and a list of diagnostics. Running it solves once,
evaluates each diagnostic, writes ``report.json`` plus CSV and ``.dat``
files, and maps the outcome to an exit code:

* 0: every asserted diagnostic passed
* 1: an asserted diagnostic failed
* 2: the scenario does not validate
* 3: the solver did not converge
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import diagnostics as dg
from . import geometry as geo
from . import solver as sv
from . import webfuncs as wf

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NONCONVERGENCE = 0, 1, 2, 3

DIAGNOSTICS = (
    "p_function", "p_bounds_check", "boundary_gradient_stats", "is_stadium_like",
    "hamiltonian_residual", "level_set_serrin_scan", "sup_convolution", "p_eps_flow_monotonicity",
    "flow_law", "c11_proxy", "certify_web_supersolution", "convergence_study", "separation",
    "parallel_body",
)

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["domain", "problem", "h"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "domain": {"type": "object", "required": ["shape"]},
        "problem": {"enum": ["normalized", "nonnormalized"]},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stencil": {"enum": [8, 16]},
                "max_sweeps": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "sweep": {"enum": ["jacobi", "gs"]},
                "damping": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "accelerate": {"type": "boolean"},
                "warm_start": {"type": "boolean"},
                "q_surrogate": {"enum": ["vertex", "half-range", "max"]},
            },
        },
        "diagnostics": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"enum": list(DIAGNOSTICS)},
                    "params": {"type": "object"},
                    "assert": {"type": "boolean"},
                },
            },
        },
        "out": {"type": "string"},
    },
}


class ScenarioError(ValueError):
    pass


# ----------------------------------------------------------------------------
# fixtures


FIXTURE_FILE = "derived.json"


def load_fixtures(path: str | Path | None = None) -> dict:
    """The committed pilot-derived values, keyed by name."""
    if path is None:
        text = resources.files("stadiumlab").joinpath("fixtures", FIXTURE_FILE).read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)["entries"]


def fixture_value(name: str, fixtures: dict | None = None) -> float:
    return float((fixtures or load_fixtures())[name]["value"])


def fixture_threshold(name: str, fixtures: dict | None = None) -> float:
    return float((fixtures or load_fixtures())[name]["threshold"])


def fixture_delta(name: str, measured: float, fixtures: dict | None = None) -> dict:
    """Compare a fresh measurement with its committed value; ``drift`` flags a relative change above rel_tol."""
    entry = (fixtures or load_fixtures())[name]
    ref = float(entry["value"])
    rel = (measured - ref) / abs(ref) if ref else measured - ref
    return {"name": name, "committed": ref, "measured": float(measured), "relative_delta": float(rel),
            "drift": bool(abs(rel) > float(entry.get("rel_tol", 0.25)))}


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else math.inf


def measure_fixtures(h: float = 1.0 / 64, config: sv.SolverConfig | None = None) -> dict:
    """Recompute every pilot-derived quantity: stadium against Ellipse(2, 1), normalized problem."""
    st = geo.domain_from_json(NAMED_DOMAINS["stadium"])
    el = geo.domain_from_json(NAMED_DOMAINS["ellipse"])
    out = {}
    per = {}
    for name, dom in (("stadium", st), ("ellipse", el)):
        coarse = sv.solve(dom, 2 * h, "normalized", config)
        f = sv.solve(dom, h, "normalized", config)
        rho = dom.inradius()[0]
        mu = float(f.values.max())
        ham = dg.hamiltonian_residual(f, mu).active_values[dg._interior(f.grid, dg.COLLAR * h)]
        levels = dg.level_set_serrin_scan(f, [k * mu for k in (0.1, 0.2, 0.3, 0.4)])
        trajs = dg.gradient_flows(f, _flow_starts(dom, 50, h), 1e-3, 3.0)
        per[name] = {
            "boundary_spread": dg.boundary_gradient_stats(f)["spread"],
            "p_spread": dg.p_function(f, True, rho).summary()["spread"],
            "hamiltonian_sup": float(ham.max()),
            "level_mismatch": max(r.mismatch for r in levels if r.skipped is None),
            "flow_p_variation": max(dg.p_along_flow(t, mu).p_deviation for t in trajs),
            "c11_ratio": dg.c11_proxy(dom, "normalized", (2 * h, h), fields=(coarse, f))["ratio"],
        }
    s, e = per["stadium"], per["ellipse"]
    out["separation_boundary_spread_ratio"] = _ratio(e["boundary_spread"], s["boundary_spread"])
    out["separation_p_spread_ratio"] = _ratio(e["p_spread"], s["p_spread"])
    out["separation_hamiltonian_ratio"] = _ratio(e["hamiltonian_sup"], s["hamiltonian_sup"])
    out["separation_level_mismatch_ratio"] = _ratio(e["level_mismatch"], s["level_mismatch"])
    out["separation_flow_p_ratio"] = _ratio(e["flow_p_variation"], s["flow_p_variation"])
    out["ellipse_hamiltonian_sup"] = e["hamiltonian_sup"]
    out["c11_ratio_stadium"] = s["c11_ratio"]
    out["c11_ratio_ellipse"] = e["c11_ratio"]
    return out


def check_fixtures(measured: dict | None = None, fixtures: dict | None = None) -> list[dict]:
    """Deltas between fresh measurements and the committed file, one per entry."""
    fixtures = fixtures or load_fixtures()
    measured = measured if measured is not None else measure_fixtures()
    return [fixture_delta(k, measured[k], fixtures) for k in sorted(fixtures) if k in measured]


# ----------------------------------------------------------------------------
# scenario model


@dataclass
class Scenario:
    domain: geo.ConvexDomain
    problem: str
    h: float
    solver: sv.SolverConfig
    diagnostics: list
    out: Path | None
    name: str = "scenario"
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ScenarioError(f"scenario does not validate: {exc.message}") from exc
        try:
            domain = geo.domain_from_json(data["domain"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad domain: {exc}") from exc
        rho, _ = domain.inradius()
        h = float(data["h"])
        if not h < rho / 4:
            raise ScenarioError(f"h = {h:g} must be below a quarter of the inradius {rho:g}")
        try:
            cfg = sv.SolverConfig(**data.get("solver", {}))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad solver options: {exc}") from exc
        out = Path(data["out"]) if "out" in data else None
        return cls(domain, data["problem"], h, cfg, list(data.get("diagnostics", [])), out,
                   data.get("name", domain.kind), data)


@dataclass
class DiagnosticResult:
    name: str
    asserted: bool
    passed: bool | None
    metrics: dict
    rows: list | None = None  # per-item CSV rows, first row is the header
    series: np.ndarray | None = None  # two-column plot data

    @property
    def verdict(self) -> str:
        if not self.asserted or self.passed is None:
            return "metric"
        return "pass" if self.passed else "fail"


@dataclass
class CampaignReport:
    scenario: str
    verdicts: dict
    environment: dict
    fixture_deltas: list
    solve: dict
    exit_code: int

    def to_json(self) -> dict:
        return asdict(self)


def environment_stamp() -> dict:
    return {"stadiumlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "determinism": "no random numbers are drawn; reruns reproduce every CSV byte for byte"}


# ----------------------------------------------------------------------------
# diagnostics


class _Context:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self._field = None
        self.fixtures = None

    @property
    def field(self) -> sv.ScalarField:
        if self._field is None:
            self._field = sv.solve(self.sc.domain, self.sc.h, self.sc.problem, self.sc.solver)
        return self._field

    @property
    def normalized(self) -> bool:
        return self.sc.problem == "normalized"

    @property
    def rho(self) -> float:
        return self.sc.domain.inradius()[0]

    def fixture(self, name: str) -> float:
        if self.fixtures is None:
            self.fixtures = load_fixtures()
        return fixture_threshold(name, self.fixtures)


def _node_rows(f: sv.ScalarField, values: np.ndarray, label: str) -> list:
    g = f.grid
    pts = g.active_points()
    rows = [["i", "j", "x", "y", label]]
    rows += [[int(i), int(j), x, y, v] for (i, j), (x, y), v in zip(g.active, pts, values)]
    return rows


def _d_p_function(ctx, p):
    pf = dg.p_function(ctx.field, ctx.normalized, ctx.rho)
    s = pf.summary()
    ok = s["spread"] <= p.get("max_spread", 0.05) and abs(s["mean"] - pf.lam) <= p.get("mean_tol", 0.05)
    return ok, s, _node_rows(ctx.field, pf.values, "P"), None


def _d_p_bounds(ctx, p):
    pf = dg.p_function(ctx.field, ctx.normalized, ctx.rho)
    rep = dg.p_bounds_check(ctx.field, pf, ctx.sc.domain, p.get("delta_factor", 5.0))
    m = rep.to_json()
    m.pop("violations")
    return rep.passed, m, None, None


def _d_boundary(ctx, p):
    s = dg.boundary_gradient_stats(ctx.field)
    kind = "normalized" if ctx.normalized else "nonnormalized"
    expected = wf.serrin_constant(wf.WebProfile(kind, ctx.rho))
    s["expected"] = expected
    ok = s["spread"] <= p.get("max_spread", 0.05) and abs(s["mean"] - expected) <= p.get("mean_tol", 0.05)
    idx, est = dg.boundary_gradient(ctx.field)
    pts = ctx.field.grid.active_points()[idx]
    rows = [["x", "y", "grad_norm"]] + [[x, y, v] for (x, y), v in zip(pts, est)]
    return ok, s, rows, None


def _d_stadium_like(ctx, p):
    like, haus = geo.is_stadium_like(ctx.sc.domain, ctx.sc.h, p.get("tol", 0.0))
    ok = like == p.get("expect", True)
    if not like and "min_hausdorff" in p:
        ok = ok and haus >= p["min_hausdorff"]
    return ok, {"stadium_like": like, "hausdorff": haus}, None, None


def _d_hamiltonian(ctx, p):
    lam = p.get("lambda", float(ctx.field.values.max()))
    res = dg.hamiltonian_residual(ctx.field, lam)
    vals = res.active_values[dg._interior(ctx.field.grid, dg.COLLAR * ctx.sc.h)]
    m = {"lambda": lam, "sup": float(vals.max()), "mean": float(vals.mean())}
    ok = True
    if "max_sup" in p:
        ok = m["sup"] <= p["max_sup"]
    if "min_sup" in p:
        ok = ok and m["sup"] >= p["min_sup"]
    return ok, m, _node_rows(ctx.field, res.active_values, "residual"), None


def _d_level_scan(ctx, p):
    mu = float(ctx.field.values.max())
    levels = [f * mu for f in p.get("fractions", [0.1, 0.2, 0.3, 0.4])]
    reps = dg.level_set_serrin_scan(ctx.field, levels)
    tol = p.get("tol", 0.05 + 5 * ctx.sc.h)
    done = [r for r in reps if r.skipped is None]
    ok = bool(done) and all(r.mismatch <= tol for r in done)
    rows = [["m", "expected", "mean", "spread", "mismatch"]]
    rows += [[r.m, r.expected, r.mean, r.spread, r.mismatch] for r in done]
    m = {"mu": mu, "tol": tol, "worst_mismatch": max((r.mismatch for r in done), default=math.nan),
         "skipped": [r.m for r in reps if r.skipped]}
    return ok, m, rows, np.array([[r.m, r.mismatch] for r in done])


def supconv_metrics(f: sv.ScalarField, eps: float, normalized: bool = True) -> tuple[dict, dg.SupConvBundle]:
    b = dg.sup_convolution(f, eps, normalized)
    h = f.h
    a = f.grid.active
    gap = b.u_eps[a[:, 0], a[:, 1]] - b.u[a[:, 0], a[:, 1]]
    bound = eps * b.lipschitz ** 2 / 2 + h * b.lipschitz
    m = {"eps": eps, "lipschitz": b.lipschitz, "min_gap": float(gap.min()), "max_gap": float(gap.max()),
         "gap_bound": bound, "semiconvexity_defect": dg.semiconvexity_defect(b), "m_eps": b.m_eps,
         "empty": b.empty}
    m["dominates"] = m["min_gap"] >= 0
    m["within_bound"] = m["max_gap"] <= bound
    m["semiconvex"] = m["semiconvexity_defect"] >= -1e-10
    return m, b


def _d_supconv(ctx, p):
    m, _ = supconv_metrics(ctx.field, p.get("eps", 4 * ctx.sc.h), ctx.normalized)
    return m["dominates"] and m["within_bound"] and m["semiconvex"], m, None, None


def _d_monotone(ctx, p):
    _, b = supconv_metrics(ctx.field, p.get("eps", 4 * ctx.sc.h), ctx.normalized)
    rep = dg.p_eps_flow_monotonicity(b, p.get("n_starts", 100), p.get("dt", 1e-3), p.get("t_max", 3.0),
                                     p.get("slack_c", 1.0))
    m = asdict(rep)
    return rep.fraction >= p.get("min_fraction", 0.99), m, None, None


def _flow_starts(domain: geo.ConvexDomain, n: int, h: float) -> np.ndarray:
    """Points one and a half spacings inside the boundary, evenly spread along it."""
    q = domain.boundary_samples(n)
    _, centre = domain.inradius()
    x = q + 1e-9 * (centre - q)
    _, nu = domain.nearest_feet_and_normal(x)
    return q + 1.5 * h * np.asarray(nu)


def _d_flow(ctx, p):
    if not ctx.normalized:
        raise ScenarioError("flow_law needs the normalized problem")
    h = ctx.sc.h
    if p.get("exact", False):
        prof = wf.WebProfile("normalized", ctx.rho)
        fld = sv.field_from_function(ctx.field.grid if ctx._field else sv.build_grid(ctx.sc.domain, h),
                                     lambda x: wf.web_value(ctx.sc.domain, x, prof))
        lam = prof.rho ** 2 / 2
    else:
        fld = ctx.field
        lam = float(fld.values.max())
    starts = _flow_starts(ctx.sc.domain, p.get("n_starts", 50), h)
    trajs = dg.gradient_flows(fld, starts, p.get("dt", 1e-3), p.get("t_max", 3.0))
    reps = [dg.p_along_flow(t, lam) for t in trajs]
    tol = p.get("tol", 1e-3 + 5 * h)
    worst = max(r.ode_residual for r in reps)
    m = {"lambda": lam, "tol": tol, "worst_ode_residual": worst,
         "worst_p_deviation": max(r.p_deviation for r in reps), "n": len(reps)}
    t0 = trajs[0]
    return worst <= tol, m, None, np.column_stack([t0.t, t0.u])


def _d_c11(ctx, p):
    h2 = p.get("h_half", ctx.sc.h / 2)
    f2 = sv.solve(ctx.sc.domain, h2, ctx.sc.problem, ctx.sc.solver)
    r = dg.c11_proxy(ctx.sc.domain, ctx.sc.problem, (ctx.sc.h, h2), fields=(ctx.field, f2))
    ok = True
    if "max_ratio" in p:
        ok = r["ratio"] <= p["max_ratio"]
    if "min_ratio" in p:
        ok = ok and r["ratio"] >= p["min_ratio"]
    return ok, r, None, None


def _d_web_super(ctx, p):
    kind = "normalized" if ctx.normalized else "nonnormalized"
    rep = wf.certify_web_supersolution(ctx.sc.domain, wf.WebProfile(kind, ctx.rho), p.get("n_samples", 10000))
    m = rep.to_json()
    return rep.n_violations == 0, m, None, None


def _d_convergence(ctx, p):
    rows = sv.convergence_study(ctx.sc.domain, ctx.sc.problem, p.get("hs", [1 / 16, 1 / 32, 1 / 64]),
                                ctx.sc.solver)
    errs = [r.error for r in rows]
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    if "max_error" in p:
        ok = ok and errs[-1] <= p["max_error"]
    table = [["h", "error", "order"]] + [[r.h, r.error, r.order if r.order is not None else ""] for r in rows]
    return ok, {"errors": errs, "orders": [r.order for r in rows]}, table, np.array([[r.h, r.error] for r in rows])


def _d_separation(ctx, p):
    """Ratio of boundary-gradient and P spreads against a reference domain at the same h."""
    ref_dom = geo.domain_from_json(p.get("reference", {"shape": "stadium", "p0": [-1, 0], "p1": [1, 0],
                                                      "radius": 1.0}))
    ref = sv.solve(ref_dom, ctx.sc.h, ctx.sc.problem, ctx.sc.solver)
    out = {}
    for label, fld, dom in (("target", ctx.field, ctx.sc.domain), ("reference", ref, ref_dom)):
        out[f"{label}_boundary_spread"] = dg.boundary_gradient_stats(fld)["spread"]
        out[f"{label}_p_spread"] = dg.p_function(fld, ctx.normalized, dom.inradius()[0]).summary()["spread"]
    out["boundary_ratio"] = out["target_boundary_spread"] / out["reference_boundary_spread"]
    out["p_ratio"] = out["target_p_spread"] / out["reference_p_spread"]
    need_b = p.get("min_ratio", ctx.fixture("separation_boundary_spread_ratio"))
    need_p = p.get("min_ratio", ctx.fixture("separation_p_spread_ratio"))
    out["min_boundary_ratio"], out["min_p_ratio"] = need_b, need_p
    return out["boundary_ratio"] >= need_b and out["p_ratio"] >= need_p, out, None, None


def parallel_body_bound(rho: float, eps: float) -> float:
    return wf.C0 * ((rho + eps) ** (4.0 / 3.0) - rho ** (4.0 / 3.0))


def parallel_body_convergence(domain: geo.ConvexDomain, eps_ladder, h: float,
                              config: sv.SolverConfig | None = None, n_boundary: int = 720,
                              delta_factor: float = 5.0) -> dict:
    """Boundary maxima of the non-normalized solution on outer parallel bodies.

    For each eps the solve runs on the parallel body and is read off at
    samples of the original boundary; the bound uses the inradius of the
    original domain and a slack of ``delta_factor h Lip``.
    """
    rho, _ = domain.inradius()
    q = domain.boundary_samples(n_boundary)
    rows = []
    for eps in sorted(eps_ladder, reverse=True):
        body = geo.outer_parallel_body(domain, eps)
        f = sv.solve(body, h, "nonnormalized", config)
        bmax = float(np.max(f(q)))
        delta = delta_factor * h * dg.field_lipschitz(f)
        bound = parallel_body_bound(rho, eps)
        rows.append({"eps": eps, "boundary_max": bmax, "bound": bound, "delta": delta,
                     "within": bmax <= bound + delta})
    maxima = [r["boundary_max"] for r in rows]
    return {"rows": rows, "all_within": all(r["within"] for r in rows),
            "monotone": all(b <= a for a, b in zip(maxima, maxima[1:]))}


def _d_parallel(ctx, p):
    rep = parallel_body_convergence(ctx.sc.domain, p.get("eps", [0.2, 0.1, 0.05]), ctx.sc.h, ctx.sc.solver)
    rows = [["eps", "boundary_max", "bound", "delta"]] + [[r["eps"], r["boundary_max"], r["bound"], r["delta"]]
                                                          for r in rep["rows"]]
    return rep["all_within"] and rep["monotone"], rep, rows, np.array([[r["eps"], r["boundary_max"]]
                                                                       for r in rep["rows"]])


# diagnostics whose metrics are always compared with committed pilot values
_FIXTURE_METRICS = {
    "separation": (("separation_boundary_spread_ratio", "boundary_ratio"),
                   ("separation_p_spread_ratio", "p_ratio")),
}

_RUNNERS = {
    "p_function": _d_p_function, "p_bounds_check": _d_p_bounds, "boundary_gradient_stats": _d_boundary,
    "is_stadium_like": _d_stadium_like, "hamiltonian_residual": _d_hamiltonian,
    "level_set_serrin_scan": _d_level_scan, "sup_convolution": _d_supconv,
    "p_eps_flow_monotonicity": _d_monotone, "flow_law": _d_flow, "c11_proxy": _d_c11,
    "certify_web_supersolution": _d_web_super, "convergence_study": _d_convergence,
    "separation": _d_separation, "parallel_body": _d_parallel,
}


# ----------------------------------------------------------------------------
# outputs


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_dat(path: Path, data: np.ndarray) -> None:
    np.savetxt(path, np.asarray(data, dtype=float), fmt="%.17g")


def write_field(path_stem: Path, f: sv.ScalarField) -> None:
    """Field CSV ``i,j,x,y,u`` and a JSON sidecar with grid and solve metadata."""
    write_csv(path_stem.with_suffix(".csv"), _node_rows(f, f.active_values, "u"))
    g = f.grid
    side = {"h": g.h, "origin": list(g.origin), "dims": [g.nx, g.ny], "stencil": len(g.directions),
            "domain": g.domain.to_json(), "meta": _jsonable(f.meta)}
    path_stem.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ----------------------------------------------------------------------------
# running


def run_scenario(source, out: str | Path | None = None) -> CampaignReport:
    """Run one scenario given as a path, a JSON string or a dict."""
    try:
        if isinstance(source, dict):
            data = source
        else:
            text = Path(source).read_text() if Path(str(source)).exists() else str(source)
            data = json.loads(text)
        sc = Scenario.from_dict(data)
    except (json.JSONDecodeError, ScenarioError, OSError) as exc:
        log.error("%s", exc)
        return CampaignReport(str(source)[:80], {}, environment_stamp(), [], {"error": str(exc)}, EXIT_SCHEMA)
    out_dir = Path(out) if out is not None else sc.out
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    ctx = _Context(sc)
    verdicts, deltas = {}, []
    try:
        field_ = ctx.field
    except sv.NonConvergenceError as exc:
        log.error("%s", exc)
        return CampaignReport(sc.name, {}, environment_stamp(), [], {"error": str(exc),
                                                                     "residual": exc.residual},
                              EXIT_NONCONVERGENCE)
    if out_dir is not None:
        write_field(out_dir / "field", field_)
    failed = []
    for d in sc.diagnostics:
        name, params, asserted = d["name"], d.get("params", {}), d.get("assert", True)
        try:
            ok, metrics, rows, series = _RUNNERS[name](ctx, params)
        except sv.NonConvergenceError as exc:
            log.error("%s: %s", name, exc)
            return CampaignReport(sc.name, verdicts, environment_stamp(), deltas,
                                  {"error": str(exc)}, EXIT_NONCONVERGENCE)
        except ScenarioError as exc:
            log.error("%s: %s", name, exc)
            return CampaignReport(sc.name, verdicts, environment_stamp(), deltas,
                                  {"error": str(exc)}, EXIT_SCHEMA)
        res = DiagnosticResult(name, asserted, bool(ok), metrics, rows, series)
        pairs = list(_FIXTURE_METRICS.get(name, ()))
        if "fixture" in params:
            pairs.append((params["fixture"], params.get("fixture_metric", "ratio")))
        for key, metric in pairs:
            if metric in metrics:
                deltas.append(fixture_delta(key, float(metrics[metric])))
        verdicts[name] = {"verdict": res.verdict, "metrics": _jsonable(metrics)}
        if asserted and not ok:
            failed.append(name)
        if out_dir is not None:
            if rows:
                write_csv(out_dir / f"{name}.csv", rows)
            if series is not None and len(series):
                write_dat(out_dir / f"{name}.dat", series)
    code = EXIT_FAIL if failed else EXIT_OK
    solve_info = _jsonable(dict(field_.meta))
    if failed:
        solve_info["failed"] = failed
        for name in failed:
            log.error("diagnostic failed: %s", name)
    report = CampaignReport(sc.name, verdicts, environment_stamp(), deltas, solve_info, code)
    if out_dir is not None:
        (out_dir / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return report


def run_campaign(paths, jobs: int = 1) -> list[CampaignReport]:
    """Run scenarios in order, or ``jobs`` at a time in separate processes."""
    paths = list(paths)
    if jobs <= 1 or len(paths) <= 1:
        return [run_scenario(p) for p in paths]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_scenario, paths))


# ----------------------------------------------------------------------------
# claim map


THEOREM_MAP = (
    ("stadium-like domains are exactly the Serrin-solvable ones (non-normalized)",
     "boundary_gradient_stats + p_function on nonnormalized solves; separation"),
    ("stadium-like domains are exactly the Serrin-solvable ones (normalized)",
     "boundary_gradient_stats + p_function + is_stadium_like; separation"),
    ("solution gradient Lipschitz only on stadium-like domains", "c11_proxy"),
    ("constant P-function forces the web solution", "p_function + hamiltonian_residual"),
    ("web function solves the Dirichlet problem iff cut locus equals high ridge",
     "convergence_study + is_stadium_like"),
    ("P-function bounds on convex domains", "p_bounds_check"),
    ("web functions are viscosity supersolutions", "certify_web_supersolution"),
    ("sup-convolution regularity and level sets", "sup_convolution"),
    ("approximate P increases along the regularized flow", "p_eps_flow_monotonicity"),
    ("value law along the gradient flow", "flow_law (p_along_flow)"),
    ("outer parallel body bound", "outer_parallel_body + parallel_body boundary convergence"),
    ("level-set Serrin systems", "level_set_serrin_scan"),
)


def theorem_map() -> list[tuple[str, str]]:
    return list(THEOREM_MAP)


def format_theorem_map() -> str:
    width = max(len(a) for a, _ in THEOREM_MAP)
    return "\n".join(f"{a.ljust(width)}  ->  {b}" for a, b in THEOREM_MAP)


# ----------------------------------------------------------------------------
# command line


NAMED_DOMAINS = {
    "disk": {"shape": "disk", "center": [0.0, 0.0], "radius": 1.0},
    "stadium": {"shape": "stadium", "p0": [-1.0, 0.0], "p1": [1.0, 0.0], "radius": 1.0},
    "ellipse": {"shape": "ellipse", "center": [0.0, 0.0], "a": 2.0, "b": 1.0},
    "square": {"shape": "square", "side": 1.0, "origin": [0.0, 0.0]},
}


def _domain_arg(text: str) -> dict:
    if text in NAMED_DOMAINS:
        return dict(NAMED_DOMAINS[text])
    p = Path(text)
    try:
        return json.loads(p.read_text() if p.exists() else text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"domain must be a name, JSON or a JSON file: {exc}") from exc


def _solver_opts(a) -> dict:
    opts = {"stencil": a.stencil, "tol": a.tol, "sweep": a.sweep}
    if a.max_sweeps is not None:
        opts["max_sweeps"] = a.max_sweeps
    return opts


def _add_common(p, domain="stadium", problem="normalized", h=1 / 64):
    p.add_argument("--domain", type=_domain_arg, default=_domain_arg(domain),
                   help="disk | stadium | ellipse | square | JSON text | JSON file")
    p.add_argument("--problem", choices=["normalized", "nonnormalized"], default=problem)
    p.add_argument("--h", type=float, default=h)
    p.add_argument("--stencil", type=int, choices=[8, 16], default=16)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--sweep", choices=["jacobi", "gs"], default="jacobi")
    p.add_argument("--out", default=None)


def _scenario(a, diagnostics) -> dict:
    data = {"domain": a.domain, "problem": a.problem, "h": a.h, "solver": _solver_opts(a),
            "diagnostics": diagnostics}
    if a.out:
        data["out"] = a.out
    return data


def _print_report(rep: CampaignReport) -> None:
    print(json.dumps(_jsonable({"scenario": rep.scenario, "exit_code": rep.exit_code,
                                "verdicts": rep.verdicts, "fixture_deltas": rep.fixture_deltas}),
                     indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stadiumlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run scenario JSON files")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("solve", help="solve and write the field")
    _add_common(p)

    p = sub.add_parser("verify-stadium", help="Serrin witness diagnostics on a domain")
    _add_common(p)

    p = sub.add_parser("serrin-scan", help="gradient along level sets of the solution")
    _add_common(p)
    p.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4])

    p = sub.add_parser("supconv", help="sup-convolution checks and P monotonicity along flows")
    _add_common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--starts", type=int, default=100)

    p = sub.add_parser("flow", help="value law along gradient-flow trajectories")
    _add_common(p)
    p.add_argument("--starts", type=int, default=50)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=3.0)
    p.add_argument("--exact", action="store_true", help="use the sampled web function instead of a solve")

    p = sub.add_parser("convergence", help="error against the web oracle under refinement")
    _add_common(p, domain="disk")
    p.add_argument("--hs", type=float, nargs="+", default=[1 / 16, 1 / 32, 1 / 64])

    p = sub.add_parser("parallel-body", help="boundary maxima on outer parallel bodies")
    _add_common(p, domain="disk", problem="nonnormalized")
    p.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05])

    sub.add_parser("theorem-map", help="print the claim-to-diagnostic table")

    p = sub.add_parser("fixtures", help="re-measure pilot values and report drift against the committed file")
    p.add_argument("--h", type=float, default=1 / 64)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if a.command == "theorem-map":
        print(format_theorem_map())
        return EXIT_OK
    if a.command == "fixtures":
        deltas = check_fixtures(measure_fixtures(a.h))
        print(json.dumps(deltas, indent=2))
        return EXIT_FAIL if any(d["drift"] for d in deltas) else EXIT_OK
    if a.command == "run":
        reps = run_campaign(a.scenarios, a.jobs)
        for r in reps:
            _print_report(r)
        return max((r.exit_code for r in reps), default=EXIT_OK)
    diag = {
        "solve": [],
        "verify-stadium": [{"name": "is_stadium_like"}, {"name": "p_function"},
                           {"name": "boundary_gradient_stats"}],
        "serrin-scan": [{"name": "level_set_serrin_scan", "params": {"fractions": getattr(a, "fractions", None)}}],
        "supconv": [{"name": "sup_convolution", "params": {}},
                    {"name": "p_eps_flow_monotonicity", "params": {"n_starts": getattr(a, "starts", 100)}}],
        "flow": [{"name": "flow_law", "params": {"n_starts": getattr(a, "starts", 50), "dt": getattr(a, "dt", 1e-3),
                                                 "t_max": getattr(a, "t_max", 3.0),
                                                 "exact": getattr(a, "exact", False)}}],
        "convergence": [{"name": "convergence_study", "params": {"hs": getattr(a, "hs", None)}}],
        "parallel-body": [{"name": "parallel_body", "params": {"eps": getattr(a, "eps", None)}}],
    }[a.command]
    if a.command == "supconv" and a.eps is not None:
        for d in diag:
            d["params"]["eps"] = a.eps
    rep = run_scenario(_scenario(a, diag))
    _print_report(rep)
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
