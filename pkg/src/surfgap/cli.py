"""Command-line entry point: ``surfgap <group> <command> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .errors import NoSignChange, SurfgapError
from .report import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    REPORT_DIR_ENV,
    SELECTORS,
    RunConfig,
    _points_csv,
    condition_task,
    dumps,
    emit_plot_data,
    load_domain,
    load_json,
    load_solution,
    load_surface,
    run,
    save_solution,
)


def _out_path(path):
    """Relative output paths land in the report directory when it is overridden."""
    if path is None:
        return None
    p = Path(path)
    env = os.environ.get(REPORT_DIR_ENV)
    if env and not p.is_absolute():
        p = Path(env) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


class _Output:
    def __init__(self, args):
        self.quiet = args.quiet
        self.json = args.json

    def emit(self, payload, lines=()):
        if self.quiet:
            return
        if self.json:
            sys.stdout.write(dumps(payload))
        else:
            for line in lines:
                print(line)


def _fmt(x):
    return "n/a" if x is None else f"{x:.10g}"


def _verdict_code(ok):
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# handlers


def cmd_surface_info(args, out):
    from .geometry import surface_info

    info = surface_info(load_surface(args.surface), args.resolution)
    lines = [
        f"kappa_min      {_fmt(info['kappa_min'])}",
        f"kappa_max      {_fmt(info['kappa_max'])}",
        f"min(dlogk-5k)  {_fmt(info['min_delta_log_kappa_minus_5kappa'])}",
    ]
    if "gauss_bonnet_residual" in info:
        lines.append(f"gauss-bonnet   {info['gauss_bonnet_residual']:.3e}")
    out.emit(info, lines)
    return EXIT_PASS


def cmd_domain_build(args, out):
    domain = load_domain(args.domain)
    mesh = domain.triangulate(args.h)
    path = _out_path(args.out)
    if path is not None:
        path.write_text(mesh.to_text())
    meta = {"n_vertices": mesh.n_vertices, "n_triangles": len(mesh.tris), "h": mesh.h, "mesh": str(path) if path else None}
    out.emit(meta, [f"{meta['n_vertices']} nodes, {meta['n_triangles']} triangles" + (f" -> {path}" if path else "")])
    return EXIT_PASS


def cmd_domain_info(args, out):
    info = load_domain(args.domain).info()
    lines = [
        f"k_g        {_fmt(info['k_g'])}" + (f" ({info['closure']})" if info["closure"] else ""),
        f"D bracket  [{_fmt(info['D_bracket'][0])}, {_fmt(info['D_bracket'][1])}]",
        f"d          {_fmt(info['d'])}",
        f"area       {_fmt(info['area'])}",
    ]
    out.emit(info, lines)
    return EXIT_PASS


def cmd_check_condition(args, out):
    from .conditions import check_condition

    surface = load_surface(args.surface)
    lam = args.lambda_lb
    if lam is not None and lam.lower() not in ("ling", "myers"):
        lam = float(lam)
    spec = {"kind": args.kind, "lambda_lb": lam}
    if args.C is not None:
        spec["C"] = args.C
    domain = load_domain(args.domain) if args.domain else None
    rep = check_condition(surface, condition_task(surface, spec, domain), args.resolution, args.recheck)
    body = rep.to_dict()
    if args.samples:
        path = _out_path(args.samples)
        path.write_text(_points_csv(rep.points, rep.margins, ("u", "v", "margin")))
        body["samples_path"] = str(path)
    if args.report:
        _out_path(args.report).write_text(dumps(body))
    lines = [
        f"min margin  {_fmt(rep.min_margin)} at ({rep.argmin[0]:.6g}, {rep.argmin[1]:.6g})",
        f"verdict     {'satisfied' if rep.verdict else 'violated'}",
    ]
    out.emit(body, lines)
    return _verdict_code(rep.verdict)


def cmd_eigen_solve(args, out):
    from .eigen import assemble, solve_dirichlet

    domain = load_domain(args.domain)
    mesh = domain.triangulate(args.h)
    sol = solve_dirichlet(assemble(mesh), args.k, args.tol)
    doc = save_solution(sol, domain, _out_path(args.out))
    lines = [f"lambda{i + 1}  {lam:.10g}  (residual {res:.2e})" for i, (lam, res) in enumerate(zip(sol.eigenvalues, sol.residuals))]
    out.emit(doc, lines)
    return EXIT_PASS


def cmd_verify(args, out):
    from .verify import barrier_margin, verify_gap, verify_log_concavity

    sol, domain = load_solution(args.solution)
    if args.what == "gap":
        rep = verify_gap(sol, domain, args.C)
        body = rep.to_dict()
        lines = [f"gap {_fmt(rep.gap)}  curvature bound {_fmt(rep.curvature_bound)}"]
        if rep.sphere_mode:
            lines.append(f"sphere bound {_fmt(rep.sphere_bound)}")
        points = values = None
    elif args.what == "logconcavity":
        rep = verify_log_concavity(sol, domain, args.C)
        body = rep.to_dict()
        lines = [f"max eig {_fmt(rep.global_max)}  tau_c {_fmt(float(rep.tau_c[rep.argmax_index]))}"]
        points, values = rep.points, rep.max_eig
    else:
        rep = barrier_margin(sol, domain, C=args.C)
        body = rep.to_dict()
        lines = [f"min margin {_fmt(rep.min_margin)}"]
        points, values = rep.points, rep.margin
    lines.append(f"verdict {'verified' if rep.verdict else 'refuted'}")
    if args.csv and points is not None:
        path = _out_path(args.csv)
        path.write_text(_points_csv(points, values, ("u", "v", "value")))
        body["csv"] = str(path)
    if args.report:
        _out_path(args.report).write_text(dumps(body))
    out.emit(body, lines)
    return _verdict_code(rep.verdict)


def cmd_ricci_bounds(args, out):
    from .ricci import ode_bounds

    b = asdict(ode_bounds(args.alpha, args.t))
    body = {"alpha": args.alpha, "t": args.t, **b}
    out.emit(body, [f"{k:<14}{_fmt(v)}" for k, v in b.items()])
    return EXIT_PASS


def cmd_ricci_onset(args, out):
    from .ricci import onset_times

    t_on, t_off = onset_times(args.alpha)
    body = {"alpha": args.alpha, "t_on": t_on, "t_off": t_off}
    out.emit(body, [f"t_on   {_fmt(t_on)}", f"t_off  {_fmt(t_off)}"])
    return EXIT_PASS


def cmd_ricci_simulate(args, out):
    from .ricci import simulate

    trace, _ = simulate(args.alpha, args.grid, args.dt, args.horizon)
    path = _out_path(args.trace)
    if path is not None:
        path.write_text(trace.to_csv())
    body = trace.summary()
    lines = [f"{k:<28}{v}" for k, v in body.items()]
    out.emit(body, lines)
    return EXIT_PASS


def cmd_run(args, out):
    cfg = RunConfig.load(args.config)
    report, code = run(cfg)
    s = report["summary"]
    lines = [f"{name:<40}{t['status']}" + (f"  {t['error']}" if "error" in t else "") for name, t in sorted(report["tasks"].items())]
    lines += [f"failed verdicts: {', '.join(s['failed']) or 'none'}", f"exit {code}"]
    out.emit(report["summary"], lines)
    return code


def cmd_emit(args, out):
    report_path = Path(args.report)
    report = load_json(report_path)
    target = Path(args.out) if args.out else Path(os.environ.get(REPORT_DIR_ENV, report_path.parent))
    paths = emit_plot_data(report, args.selector, target, report_path.parent)
    out.emit({"written": [str(p) for p in paths]}, [str(p) for p in paths])
    return EXIT_PASS


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress output; rely on the exit code")
    common.add_argument("--json", action="store_true", help="print machine-readable JSON")

    p = argparse.ArgumentParser(prog="surfgap", parents=[common], description="Spectral gap and log-concavity toolkit for convex surface domains.")
    p.add_argument("--version", action="version", version=f"surfgap {__version__}")
    groups = p.add_subparsers(dest="group", required=True)

    def sub(parent, name, fn, help_):
        sp = parent.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    g = groups.add_parser("surface", help="surface models").add_subparsers(dest="cmd", required=True)
    sp = sub(g, "info", cmd_surface_info, "curvature summary of a surface file")
    sp.add_argument("--surface", required=True)
    sp.add_argument("--resolution", type=int, default=512)

    g = groups.add_parser("domain", help="geodesic domains").add_subparsers(dest="cmd", required=True)
    sp = sub(g, "build", cmd_domain_build, "triangulate a domain")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--h", type=float, default=0.05)
    sp.add_argument("--out")
    sp = sub(g, "info", cmd_domain_info, "boundary curvature, diameters and area")
    sp.add_argument("--domain", required=True)

    g = groups.add_parser("check", help="pointwise curvature conditions").add_subparsers(dest="cmd", required=True)
    sp = sub(g, "condition", cmd_check_condition, "evaluate a curvature condition")
    sp.add_argument("--surface", required=True)
    sp.add_argument("--kind", default="general-C")
    sp.add_argument("--C", type=float)
    sp.add_argument("--lambda-lb", help="a number, 'ling' or 'myers'")
    sp.add_argument("--domain", help="domain file (needed for the Ling bound)")
    sp.add_argument("--resolution", type=int, default=256)
    sp.add_argument("--recheck", action="store_true")
    sp.add_argument("--report")
    sp.add_argument("--samples", help="write (u, v, margin) samples to this CSV")

    g = groups.add_parser("eigen", help="Dirichlet eigenproblems").add_subparsers(dest="cmd", required=True)
    sp = sub(g, "solve", cmd_eigen_solve, "solve for the lowest Dirichlet eigenpairs")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--h", type=float, default=0.05)
    sp.add_argument("-k", type=int, default=2)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--out", default="solution.json")

    g = groups.add_parser("verify", help="certify inequalities on a solution").add_subparsers(dest="cmd", required=True)
    for what in ("logconcavity", "gap", "barrier"):
        sp = sub(g, what, cmd_verify, f"{what} check")
        sp.set_defaults(what=what)
        sp.add_argument("--solution", required=True)
        sp.add_argument("--C", type=float, default=0.0)
        sp.add_argument("--report")
        sp.add_argument("--csv", help="write (u, v, value) plot data")

    g = groups.add_parser("ricci", help="normalized Ricci flow").add_subparsers(dest="cmd", required=True)
    sp = sub(g, "bounds", cmd_ricci_bounds, "comparison bounds at time t")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp = sub(g, "onset", cmd_ricci_onset, "times where the closed-form margin turns positive")
    sp.add_argument("--alpha", type=float, required=True)
    sp = sub(g, "simulate", cmd_ricci_simulate, "flow pinched initial data")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--grid", type=int, default=128)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=0.6)
    sp.add_argument("--trace")

    sp = sub(groups, "run", cmd_run, "execute a run configuration")
    sp.add_argument("--config", required=True)

    sp = sub(groups, "emit", cmd_emit, "plot-data CSV from a report")
    sp.add_argument("--report", required=True)
    sp.add_argument("--selector", required=True, choices=SELECTORS)
    sp.add_argument("--out", help="output directory")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Output(args)
    try:
        return args.fn(args, out)
    except NoSignChange as exc:
        print(f"surfgap: no sign change: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SurfgapError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"surfgap: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
