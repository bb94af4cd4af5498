"""The ten acceptance criteria at their stated tolerances and runtime budgets."""

import math
import time

import numpy as np
import pytest

from helpers import CAP_ANGLES, cap_field, cap_solution, control, ellipsoid_cap, solve, sphere_cap
from oracles import bessel_zero
from surfgap.conditions import ellipsoid_pole_margin, general_margin, threshold_solve, triaxial_scan
from surfgap.eigen import radial_oracle, recover_derivatives
from surfgap.geometry import TriaxialEllipsoid, revolution_ellipsoid
from surfgap.report import RunConfig, canonical_json, run
from surfgap.ricci import ode_bounds, onset_times, round_state, advance, simulate
from surfgap.verify import barrier_identity_terms, barrier_margin, verify_gap, verify_log_concavity

criterion = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# 1 ---------------------------------------------------------------------------


@criterion(1, "ellipsoid pole closed form, analytic 1e-8 and finite-difference 1e-4")
def test_pole_closed_form(note):
    with Timer() as t:
        worst_a = worst_fd = 0.0
        for eps in (0.7, 0.8064, 0.9, 1.0):
            s = revolution_ellipsoid(eps)
            p = np.array([[0.0, 0.0]])
            target = -(eps ** -2) - 4 * eps ** -4
            k = float(s.gaussian_curvature(p)[0])
            a = float(s.delta_log_kappa(p)[0]) - 5 * k
            fd = float(s.delta_log_kappa(p, method="fd")[0]) - 5 * k
            worst_a = max(worst_a, abs(a - target) / abs(target))
            worst_fd = max(worst_fd, abs(fd - target) / abs(target))
            if eps == 1.0:
                assert a == pytest.approx(-5.0, abs=1e-9)
    note(f"max relative error: analytic {worst_a:.2e}, finite difference {worst_fd:.2e}; {t.elapsed:.2f} s")
    assert worst_a <= 1e-8
    assert worst_fd <= 1e-4
    assert t.elapsed < 1.0


# 2 ---------------------------------------------------------------------------


@criterion(2, "threshold root ((1+sqrt 177)/22)^(1/2) within 1e-5")
def test_threshold(note):
    with Timer() as t:
        res = threshold_solve(lambda e: ellipsoid_pole_margin(e, 11.0), 0.5, 1.0)
    exact = math.sqrt((1 + math.sqrt(177)) / 22)
    note(f"root {res.root:.8f} vs {exact:.8f}; {t.elapsed * 1e3:.1f} ms")
    assert abs(res.root - exact) <= 1e-5
    assert abs(res.root - 0.80634) <= 1e-5
    assert t.elapsed < 1.0


# 3 ---------------------------------------------------------------------------


def triaxial_min(ratio, resolution=512):
    return triaxial_scan(TriaxialEllipsoid(1.0, 1.0, ratio), resolution).min_margin


@criterion(3, "triaxial scan: sign at 1.132 and 1.3, cutoff inside [1.10, 1.16]")
def test_triaxial_cutoff(note):
    with Timer() as t:
        kmin_scale = TriaxialEllipsoid(1.0, 1.0, 1.132).kappa_min
        at_1132 = triaxial_min(1.132)
        at_13 = triaxial_min(1.3)
        cutoff = threshold_solve(triaxial_min, 1.05, 1.4, n_samples=8, xtol=1e-4).root
    note(f"min at c/a=1.132: {at_1132:.4f}; at 1.3: {at_13:.4f}; cutoff {cutoff:.4f} (squared axes, b = a)")
    note(f"the same cutoff in semi-axis ratio is sqrt({cutoff:.4f}) = {math.sqrt(cutoff):.4f}")
    note(f"{t.elapsed:.1f} s")
    assert at_1132 >= -1e-2 * kmin_scale
    assert at_13 < 0
    assert t.elapsed < 30.0
    assert 1.10 <= cutoff <= 1.16


# 4 ---------------------------------------------------------------------------


@criterion(4, "eigen solver against Bessel, Legendre and radial oracles")
def test_eigen_oracles(note):
    with Timer() as t_disk:
        disk = solve(control("disk"), 0.02)[1]
    j01 = bessel_zero(0, 2.0, 3.0) ** 2
    with Timer() as t_hemi:
        hemi = cap_solution(math.pi / 2, 0.02)
    with Timer() as t_conv:
        ref = radial_oracle(sphere_cap(math.pi / 2).chart, math.pi / 2)
        hs = (0.08, 0.04, 0.02)
        errs = np.array([[cap_solution(math.pi / 2, h).eigenvalues[i] - (ref.lambda1, ref.lambda2)[i] for h in hs] for i in (0, 1)])
        orders = np.log2(errs[:, :-1] / errs[:, 1:])
    note(f"disk lambda1 {disk.lambda1:.5f} ({abs(disk.lambda1 / j01 - 1):.2e}); hemisphere {hemi.lambda1:.5f}, {hemi.lambda2:.5f}")
    note(f"observed orders lambda1 {orders[0].round(3).tolist()}, lambda2 {orders[1].round(3).tolist()}")
    note(f"runtimes {t_disk.elapsed:.1f} s, {t_hemi.elapsed:.1f} s, {t_conv.elapsed:.1f} s")
    assert abs(disk.lambda1 / j01 - 1) <= 5e-3
    assert abs(hemi.lambda1 / 2 - 1) <= 1e-2
    assert abs(hemi.lambda2 / 6 - 1) <= 1.5e-2
    assert np.min(orders) >= 1.8
    assert max(t_disk.elapsed, t_hemi.elapsed, t_conv.elapsed) < 60.0


# 5 ---------------------------------------------------------------------------


@criterion(5, "gap verdicts on the hemisphere and the cap sweep")
def test_gap_verdicts(note):
    with Timer() as t:
        hemi = verify_gap(radial_oracle(sphere_cap(math.pi / 2).chart, math.pi / 2), sphere_cap(math.pi / 2))
        sweep = {}
        for theta0 in CAP_ANGLES:
            d = sphere_cap(theta0)
            sweep[theta0] = verify_gap(radial_oracle(d.chart, d.radius), d)
    note(f"hemisphere gap {hemi.gap:.6f}, curvature bound {hemi.curvature_bound:.4f}, sphere bound {hemi.sphere_bound:.4f}")
    for theta0, rep in sweep.items():
        note(f"theta0={theta0:.4f}: gap {rep.gap:.4f}  bounds {rep.curvature_bound:.4f} / {rep.sphere_bound:.4f}")
    note(f"{t.elapsed:.1f} s")
    assert hemi.gap == pytest.approx(4.0, abs=1e-6)
    assert hemi.curvature_bound == pytest.approx(2.0, rel=0.02)
    # pi^2/D^2 + sqrt(4 + 4 lam1) - 3/2 with D = pi, lam1 = 2
    assert hemi.sphere_bound == pytest.approx(1 + math.sqrt(12) - 1.5, abs=0.03)
    assert hemi.curvature_verdict and hemi.sphere_verdict
    assert all(r.curvature_verdict and r.sphere_verdict for r in sweep.values())
    assert t.elapsed < 120.0


# 6 ---------------------------------------------------------------------------


@criterion(6, "log-concavity and Wang certificates on caps, shrinking under refinement")
def test_log_concavity_certificates(note):
    hs = (0.04, 0.02)
    ok = True
    with Timer() as t:
        for theta0 in CAP_ANGLES:
            d = sphere_cap(theta0)
            reps = [verify_log_concavity(cap_field(theta0, h), d, C=0.0) for h in hs]
            cert = all(r.verdict for r in reps)
            wang = all(r.wang_verdict for r in reps)
            # raw excess before the tolerance; a positive excess has to be a discretisation artefact
            concave_raw = [float(np.max(r.max_eig)) for r in reps]
            wang_raw = [float(np.max(r.hess_max_eig - r.wang_bound)) for r in reps]
            shrink = all(raw[1] <= 0 or raw[1] < 0.75 * raw[0] for raw in (concave_raw, wang_raw))
            note(
                f"theta0={theta0:.4f}: certificate {cert}, Wang {wang}; raw excess C=0 {concave_raw[0]:+.4f} -> {concave_raw[1]:+.4f}, "
                f"Wang {wang_raw[0]:+.4f} -> {wang_raw[1]:+.4f}; half-bound {all(r.wang_half_verdict for r in reps)}"
            )
            ok &= cert and wang and shrink
    note(f"{t.elapsed:.1f} s")
    assert t.elapsed < 120.0
    assert ok


# 7 ---------------------------------------------------------------------------


@criterion(7, "barrier expansion identity on ellipsoid caps within 1e-8")
def test_barrier_identity(note):
    with Timer() as t:
        worst = literal = 0.0
        for eps, r0 in ((0.8, 0.6), (1.2, 0.5), (0.9, 0.4)):
            d = ellipsoid_cap(eps, r0)
            fld = recover_derivatives(solve(d, 0.04)[1], d.distance_to_boundary)
            for C in (0.0, -0.25 * d.surface.kappa_min):
                rep = barrier_margin(fld, d, C=C)
                expansion, general, square, _ = barrier_identity_terms(rep, d, C)
                scale = np.maximum(1.0, np.abs(rep.margin))
                worst = max(worst, float(np.max(np.abs(rep.margin - expansion) / scale)))
                literal = max(literal, float(np.max(np.abs(rep.margin - (general + square)) / scale)))
    note(f"identity residual {worst:.2e}; literal 'general + square' residual {literal:.2e} (kappa/2 factor and kappa2 term omitted)")
    note(f"{t.elapsed:.1f} s")
    assert worst <= 1e-8
    assert t.elapsed < 30.0


# 8 ---------------------------------------------------------------------------


@criterion(8, "Ricci closed forms: 1/11, t_off, alpha -> 1 onset")
def test_ricci_closed_forms(note):
    with Timer() as t:
        m = ode_bounds(6 / 7, math.log(1.5)).margin
        t_on, t_off = onset_times(6 / 7)
        t_lim, _ = onset_times(1 - 1e-4)
    note(f"margin - 1/11 = {m - 1 / 11:.1e}; onset window ({t_on:.6f}, {t_off:.6f}); alpha=1-1e-4 onset {t_lim:.6f}; {t.elapsed:.2f} s")
    assert abs(m - 1 / 11) <= 1e-12
    assert abs(t_off - 0.67485) <= 1e-4
    assert abs(t_lim - math.log(6 / 5)) <= 1e-3
    assert t.elapsed < 1.0


# 9 ---------------------------------------------------------------------------


@criterion(9, "flow simulation at grid 512, dt 1e-4")
def test_flow_simulation(note):
    r0 = round_state(512)
    r1, _ = advance(r0, 0.05)
    stationary = float(np.max(np.abs(r1.phi - r0.phi)))
    with Timer() as t:
        trace, _ = simulate(6 / 7, n=512, dt=1e-4, horizon=0.6)
    s = trace.summary()
    bounds_ok = True
    for row in trace.rows[1:]:
        b = ode_bounds(6 / 7, row[0])
        bounds_ok &= row[2] < b.kappa_max and row[1] > b.kappa_min
    tcol = trace.column("t")
    late = tcol >= 0.1
    harnack = float(np.min(trace.column("harnack_floor_gap")[late]))
    harnack_half = float(np.min(trace.column("harnack_half_floor_gap")[late]))
    note(f"round drift {stationary:.1e}; area drift {s['max_area_drift']:.1e}; bounds {bounds_ok}; residual {s['max_residual']:.1e}")
    note(f"Harnack floor gap: unit form {harnack:.3f}, half form {harnack_half:.3f}; first positive measured {s['first_positive_measured']}, closed form {s['first_positive_closed_form']}")
    note(f"{s['steps']} substeps in {t.elapsed:.1f} s")
    assert stationary <= 1e-12
    assert s["max_area_drift"] <= 1e-4
    assert bounds_ok
    assert harnack >= -1e-2 and harnack_half >= -1e-2
    assert t.elapsed < 180.0


# 10 --------------------------------------------------------------------------


@criterion(10, "byte-identical reports from repeated runs")
def test_determinism(note, tmp_path):
    from pathlib import Path

    cfg = RunConfig.load(Path(__file__).resolve().parents[1] / "configs" / "hemisphere_run.json")
    a, code_a = run(cfg, out_dir=tmp_path / "a")
    with Timer() as t:
        b, code_b = run(cfg, out_dir=tmp_path / "b")
    compute = sum(b["timings"].values())
    note(f"exit codes {code_a}, {code_b}; run {t.elapsed:.2f} s of which tasks {compute:.2f} s (overhead {t.elapsed - compute:.3f} s)")
    assert code_a == code_b == 0
    assert canonical_json(a) == canonical_json(b)
    assert (tmp_path / "a" / "report.json").exists()
    assert t.elapsed - compute < 1.0
