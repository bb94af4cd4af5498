"""Run configurations, the task pipeline, structured reports and plot-data emission."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .conditions import ConditionSpec, check_condition, ellipsoid_pole_margin, lambda_lower_bound, threshold_solve
from .domains import GeodesicDomain, domain_from_dict
from .eigen import SpectralSolution, assemble, read_field, solve_dirichlet, write_field
from .errors import ConfigError, NoSignChange, SurfgapError
from .geometry import surface_from_dict, surface_info
from .ricci import simulate
from .verify import barrier_margin, verify_gap, verify_log_concavity

REPORT_DIR_ENV = "SURFGAP_REPORT_DIR"
SELECTORS = ("margin_vs_epsilon", "flow_trace", "hessian_max_eig")

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


# ---------------------------------------------------------------------------
# JSON helpers


def _plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def canonical_json(report):
    """Report JSON without the timing object, for reproducibility checks."""
    body = {k: v for k, v in report.items() if k != "timings"}
    return dumps(body)


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_surface(spec, base_dir="."):
    """Surface from an inline spec or a path to a surface JSON file."""
    if isinstance(spec, str):
        spec = load_json(Path(base_dir) / spec)
    return surface_from_dict(spec)


def load_domain(spec, base_dir=".", default_surface=None):
    if isinstance(spec, str):
        path = Path(base_dir) / spec
        spec = load_json(path)
        base_dir = path.parent
    spec = dict(spec)
    if "surface" not in spec and default_surface is not None:
        spec["surface"] = default_surface
    return domain_from_dict(spec, lambda s: load_surface(s, base_dir))


# ---------------------------------------------------------------------------
# configuration


_DEFAULT_SOLVER = {"h": 0.05, "k": 2, "tol": 1e-8}
_DEFAULT_VERIFY = {"C": 0.0, "logconcavity": True, "gap": True, "barrier": False}


@dataclass
class RunConfig:
    surface: Optional[object] = None
    domains: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    solver: dict = field(default_factory=lambda: dict(_DEFAULT_SOLVER))
    verify: dict = field(default_factory=lambda: dict(_DEFAULT_VERIFY))
    flow: Optional[dict] = None
    sweep: Optional[dict] = None
    output: dict = field(default_factory=lambda: {"report": "report.json"})
    base_dir: Path = field(default=Path("."), compare=False)

    _KEYS = ("surface", "domains", "conditions", "solver", "verify", "flow", "sweep", "output")

    @classmethod
    def from_dict(cls, data, base_dir="."):
        unknown = set(data) - set(cls._KEYS) - {"deterministic"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(base_dir=Path(base_dir))
        for key in cls._KEYS:
            if key in data:
                setattr(cfg, key, copy.deepcopy(data[key]))
        cfg.solver = {**_DEFAULT_SOLVER, **cfg.solver}
        cfg.verify = {**_DEFAULT_VERIFY, **cfg.verify}
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(load_json(path), path.parent)

    def to_dict(self):
        out = {key: copy.deepcopy(getattr(self, key)) for key in self._KEYS}
        out["deterministic"] = True
        return {k: v for k, v in out.items() if v is not None}

    def _file_refs(self):
        if isinstance(self.surface, str):
            yield self.surface
        for d in self.domains:
            if isinstance(d, str):
                yield d
            elif isinstance(d, dict) and isinstance(d.get("surface"), str):
                yield d["surface"]
        for c in self.conditions:
            if isinstance(c.get("surface"), str):
                yield c["surface"]

    def validate(self):
        for ref in self._file_refs():
            if not (self.base_dir / ref).is_file():
                raise ConfigError(f"referenced file does not exist: {ref}")
        for key in ("h", "tol"):
            if not float(self.solver[key]) > 0:
                raise ConfigError(f"solver.{key} must be positive")
        if int(self.solver["k"]) < 2:
            raise ConfigError("solver.k must be at least 2")
        if self.flow is not None:
            for key in ("alpha", "dt", "horizon"):
                if key not in self.flow or not float(self.flow[key]) > 0:
                    raise ConfigError(f"flow.{key} must be given and positive")
        for c in self.conditions:
            if "kind" not in c:
                raise ConfigError("every condition needs a kind")
        names = [self._domain_name(i, d) for i, d in enumerate(self.domains)]
        if len(set(names)) != len(names):
            raise ConfigError("domain names must be unique")

    @staticmethod
    def _domain_name(i, spec):
        if isinstance(spec, dict) and "name" in spec:
            return str(spec["name"])
        return f"domain{i}"

    def output_dir(self):
        env = os.environ.get(REPORT_DIR_ENV)
        if env:
            return Path(env)
        return self.base_dir / self.output.get("dir", ".")


# ---------------------------------------------------------------------------
# persisted solutions


def save_solution(solution: SpectralSolution, domain: GeodesicDomain, path):
    """Solution JSON plus one GSVF field file per eigenvector."""
    path = Path(path)
    stem = path.with_suffix("")
    refs = []
    for i, vec in enumerate(solution.vectors):
        ref = f"{stem.name}.u{i + 1}.gsvf"
        write_field(path.parent / ref, vec)
        refs.append(ref)
    doc = {
        "domain": domain.to_dict(),
        "lambda": [float(x) for x in solution.eigenvalues],
        "residuals": [float(x) for x in solution.residuals],
        "near_degenerate": solution.near_degenerate,
        "mesh_meta": solution.meta(),
        "fields": refs,
    }
    path.write_text(dumps(doc))
    return doc


def load_solution(path):
    """Rebuild ``(solution, domain)`` from a solution JSON; the mesh is regenerated deterministically."""
    path = Path(path)
    doc = load_json(path)
    domain = load_domain(doc["domain"], path.parent)
    mesh = domain.triangulate(float(doc["mesh_meta"]["h"]))
    if mesh.n_vertices != doc["mesh_meta"]["n_vertices"]:
        raise ConfigError("regenerated mesh does not match the stored solution")
    vectors = np.stack([read_field(path.parent / ref) for ref in doc["fields"]])
    sol = SpectralSolution(
        np.array(doc["lambda"]), vectors, np.array(doc["residuals"]), mesh, doc.get("near_degenerate", [])
    )
    return sol, domain


# ---------------------------------------------------------------------------
# individual tasks


def condition_task(surface, spec, domain=None):
    """Build a :class:`ConditionSpec` from a config entry (``lambda_lb`` may be a number, ``"ling"`` or ``"myers"``)."""
    lam = spec.get("lambda_lb")
    source = "user-supplied"
    if isinstance(lam, str):
        mode = lam.lower()
        if mode == "myers":
            lam, source = lambda_lower_bound(surface.kappa_min, mode="Myers-combined"), "Myers-combined"
        elif mode == "ling":
            if domain is None:
                raise ConfigError("the Ling bound needs a domain (for its inscribed diameter)")
            d = domain.diameters.d_lower
            lam, source = lambda_lower_bound(surface.kappa_min, d, mode="Ling"), "Ling"
        else:
            raise ConfigError(f"unknown lambda_lb mode {lam!r}")
    kind = spec["kind"]
    C = spec.get("C", 0.0)
    if kind in ("pinched-Chalf", "spectral-dominance", "triaxial-quantity") and "C" not in spec:
        C = -0.5 * surface.kappa_min
    return ConditionSpec(kind, float(C), None if lam is None else float(lam), source)


def margin_sweep(coefficient=11.0, lo=0.5, hi=1.0, n=64, weighted=False):
    """Pole margin of the revolution-ellipsoid family against ``eps`` plus its root."""
    eps = np.linspace(lo, hi, int(n))
    vals = np.array([ellipsoid_pole_margin(e, coefficient, weighted) for e in eps])
    out = {"coefficient": coefficient, "weighted": weighted, "samples": [[float(e), float(v)] for e, v in zip(eps, vals)]}
    try:
        res = threshold_solve(lambda e: ellipsoid_pole_margin(e, coefficient, weighted), lo, hi, n_samples=int(n))
        out["root"] = res.root
        out["bracket"] = list(res.bracket)
    except NoSignChange:
        out["root"] = None
    return out


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _points_csv(points, values, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for p, v in zip(points, values):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(v))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# the pipeline


class _Pipeline:
    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.tasks = {}
        self.timings = {}
        self.verdicts = {}

    def attempt(self, name, fn, needs=()):
        """Run ``fn``; on failure mark the task and let dependents skip."""
        missing = [n for n in needs if self.tasks.get(n, {}).get("status") != "ok"]
        if missing:
            self.tasks[name] = {"status": "skipped", "reason": f"dependency failed: {', '.join(missing)}"}
            return None
        start = time.perf_counter()
        try:
            result, body = fn()
        except (SurfgapError, ValueError, KeyError, ArithmeticError, OSError) as exc:
            self.tasks[name] = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
            result = None
        else:
            self.tasks[name] = {"status": "ok", **body}
            if "verdict" in body and body["verdict"] is not None:
                self.verdicts[name] = bool(body["verdict"])
        self.timings[name] = time.perf_counter() - start
        return result

    def run(self):
        cfg = self.cfg
        surface = None
        if cfg.surface is not None:
            surface = self.attempt("surface", lambda: (s := load_surface(cfg.surface, cfg.base_dir), surface_info(s)))
        for i, spec in enumerate(cfg.conditions):
            self._condition(i, spec, surface)
        for i, spec in enumerate(cfg.domains):
            self._domain(RunConfig._domain_name(i, spec), spec)
        if cfg.flow is not None:
            self._flow()
        if cfg.sweep is not None:
            self.attempt("sweep", lambda: (None, margin_sweep(**cfg.sweep)))

    def _condition(self, i, spec, surface):
        name = f"condition:{spec.get('name', i)}"
        own = "surface" in spec
        needs = () if own else ("surface",)

        def go():
            s = load_surface(spec["surface"], self.cfg.base_dir) if own else surface
            dom = None
            if isinstance(spec.get("lambda_lb"), str) and spec["lambda_lb"].lower() == "ling":
                dom = load_domain(spec["domain"], self.cfg.base_dir, self.cfg.surface)
            cs = condition_task(s, spec, dom)
            rep = check_condition(s, cs, int(spec.get("resolution", 256)), bool(spec.get("recheck", False)))
            return rep, rep.to_dict()

        if not own and self.cfg.surface is None:
            self.tasks[name] = {"status": "skipped", "reason": "no surface configured"}
            return
        self.attempt(name, go, needs)

    def _domain(self, name, spec):
        cfg = self.cfg
        solver, ver = cfg.solver, cfg.verify
        spec_d = {k: v for k, v in spec.items() if k != "name"} if isinstance(spec, dict) else spec
        domain = self.attempt(
            f"domain:{name}",
            lambda: (d := load_domain(spec_d, cfg.base_dir, cfg.surface), d.info()),
        )

        def solve():
            mesh = domain.triangulate(float(solver["h"]))
            sol = solve_dirichlet(assemble(mesh), int(solver["k"]), float(solver["tol"]))
            body = {"lambda": sol.eigenvalues, "residuals": sol.residuals, "near_degenerate": sol.near_degenerate, "mesh_meta": sol.meta()}
            return sol, body

        sol = self.attempt(f"eigen:{name}", solve, (f"domain:{name}",))
        C = float(ver.get("C", 0.0))
        needs = (f"eigen:{name}",)
        if ver.get("gap", True):
            self.attempt(f"gap:{name}", lambda: (None, verify_gap(sol, domain, C).to_dict()), needs)
        if ver.get("logconcavity", True):

            def concavity():
                rep = verify_log_concavity(sol, domain, C)
                body = rep.to_dict()
                sidecar = f"hessian_max_eig_{name}.csv"
                _write_text(self.out_dir / sidecar, _points_csv(rep.points, rep.max_eig, ("u", "v", "value")))
                body["hessian_max_eig_csv"] = sidecar
                if rep.wang_verdict is not None:
                    self.verdicts[f"logconcavity:{name}:wang"] = rep.wang_verdict
                return rep, body

            self.attempt(f"logconcavity:{name}", concavity, needs)
        if ver.get("barrier", False):
            self.attempt(f"barrier:{name}", lambda: (None, barrier_margin(sol, domain, C=C).to_dict()), needs)

    def _flow(self):
        fl = self.cfg.flow

        def go():
            trace, final = simulate(float(fl["alpha"]), int(fl.get("grid", 128)), float(fl["dt"]), float(fl["horizon"]))
            name = fl.get("trace", "flow_trace.csv")
            _write_text(self.out_dir / name, trace.to_csv())
            body = trace.summary()
            body["trace_csv"] = name
            body["verdict"] = _flow_verdict(trace)
            return trace, body

        self.attempt("flow", go)

    def report(self):
        errors = sorted(n for n, t in self.tasks.items() if t["status"] == "error")
        skipped = sorted(n for n, t in self.tasks.items() if t["status"] == "skipped")
        failed = sorted(n for n, v in self.verdicts.items() if not v)
        return {
            "version": __version__,
            "config": self.cfg.to_dict(),
            "tasks": self.tasks,
            "summary": {
                "verdicts": dict(sorted(self.verdicts.items())),
                "failed": failed,
                "errors": errors,
                "skipped": skipped,
                "overall": not failed and not errors,
            },
            "timings": self.timings,
        }


def _flow_verdict(trace, harnack_slack=1e-2, area_rtol=1e-4):
    from .ricci import ode_bounds
    from .errors import BoundsInvalid

    ok = True
    for row in trace.rows[1:]:
        t, kmin, kmax = row[0], row[1], row[2]
        try:
            b = ode_bounds(trace.alpha, t)
        except BoundsInvalid:
            continue
        ok &= kmax < b.kappa_max and kmin > b.kappa_min
    gaps = trace.column("harnack_floor_gap")
    ok &= bool(np.nanmin(gaps) >= -harnack_slack) if np.any(np.isfinite(gaps)) else True
    ok &= trace.summary()["max_area_drift"] <= area_rtol
    return bool(ok)


def exit_code(report):
    s = report["summary"]
    if s["errors"]:
        return EXIT_ERROR
    return EXIT_FAIL if s["failed"] else EXIT_PASS


def run(config, out_dir=None, write=True):
    """Execute a run; returns ``(report, exit_code)`` and writes the report JSON."""
    cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config)
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    pipe = _Pipeline(cfg, out)
    pipe.run()
    report = pipe.report()
    if write:
        _write_text(out / cfg.output.get("report", "report.json"), dumps(report))
    return report, exit_code(report)


# ---------------------------------------------------------------------------
# plot data


def emit_plot_data(report, selector, out_dir, report_dir=None):
    """Write tidy CSV files for ``selector``; returns the written paths."""
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector {selector!r}; choose from {', '.join(SELECTORS)}")
    out_dir = Path(out_dir)
    report_dir = Path(report_dir) if report_dir is not None else out_dir
    tasks = report.get("tasks", {})
    written = []
    if selector == "margin_vs_epsilon":
        sweep = tasks.get("sweep")
        if not sweep or sweep.get("status") != "ok":
            raise ConfigError("report has no completed sweep task")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("eps", "margin"))
        for e, v in sweep["samples"]:
            w.writerow((repr(float(e)), repr(float(v))))
        path = out_dir / "margin_vs_epsilon.csv"
        _write_text(path, buf.getvalue())
        written.append(path)
    elif selector == "flow_trace":
        flow = tasks.get("flow")
        if not flow or flow.get("status") != "ok":
            raise ConfigError("report has no completed flow task")
        src = report_dir / flow["trace_csv"]
        path = out_dir / "flow_trace.csv"
        if src.resolve() != path.resolve():
            out_dir.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, path)
        written.append(path)
    else:
        found = [(n, t) for n, t in sorted(tasks.items()) if n.startswith("logconcavity:") and t.get("status") == "ok"]
        if not found:
            raise ConfigError("report has no completed log-concavity task")
        for name, t in found:
            src = report_dir / t["hessian_max_eig_csv"]
            path = out_dir / t["hessian_max_eig_csv"]
            if src.resolve() != path.resolve():
                out_dir.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(src, path)
            written.append(path)
    return written
