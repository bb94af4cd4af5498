import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import cap_field, cap_solution, control, ellipsoid_cap, solve, sphere_cap
from oracles import cap_eigenvalue
from surfgap.eigen import recover_derivatives
from surfgap.errors import ModelError
from surfgap.geometry import TriaxialEllipsoid
from surfgap.verify import (
    barrier_identity_terms,
    barrier_margin,
    generalized_eig2,
    verify_gap,
    verify_log_concavity,
    wang_bounds,
)


# ---------------------------------------------------------------- eigen-structure


@settings(max_examples=80)
@given(
    a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5),
    p=st.floats(0.2, 4), q=st.floats(-0.9, 0.9), r=st.floats(0.2, 4),
)
def test_generalized_eig2_matches_lapack(a, b, c, p, q, r):
    A = np.array([[a, b], [b, c]])
    off = q * math.sqrt(p * r)
    g = np.array([[p, off], [off, r]])
    mu_max, mu_min, e_max, e_min, _ = generalized_eig2(A[None], g[None])
    ref = scipy.linalg.eigh(A, g, eigvals_only=True)
    scale = max(1.0, np.max(np.abs(ref)))
    assert abs(mu_max[0] - ref[1]) <= 1e-9 * scale
    assert abs(mu_min[0] - ref[0]) <= 1e-9 * scale
    assert e_max[0] @ g @ e_max[0] == pytest.approx(1.0, abs=1e-9)
    assert abs(e_max[0] @ g @ e_min[0]) <= 1e-9


def test_non_spd_metric_rejected():
    with pytest.raises(ModelError):
        generalized_eig2(np.eye(2)[None], np.array([[[1.0, 2.0], [2.0, 1.0]]]))


def _ambient_hessian(s, pts, which, coeffs):
    """Covariant Hessian in chart ``which`` of ``f(X) = c.X + X^T Q X`` restricted to the ellipsoid."""
    lin, Q = coeffs
    ch = s.chart(pts, which)
    grad_amb = lin + 2 * np.einsum("ij,...j->...i", Q, ch.X)
    tang = np.stack([ch.Xu, ch.Xv], -2)
    second = np.stack([np.stack([ch.Xuu, ch.Xuv], -2), np.stack([ch.Xuv, ch.Xvv], -2)], -3)
    d1 = np.einsum("...id,...d->...i", tang, grad_amb)
    d2 = np.einsum("...ijd,...d->...ij", second, grad_amb) + 2 * np.einsum("...id,de,...je->...ij", tang, Q, tang)
    gam = s.chart_christoffel(pts, which)
    return d2 - np.einsum("...kij,...k->...ij", gam, d1), s.chart_metric(pts, which)


@settings(max_examples=40, deadline=None)
@given(
    th=st.floats(0.7, 2.4), ph=st.floats(0.5, 2.6),
    c=st.lists(st.floats(-2, 2), min_size=9, max_size=9),
)
def test_frame_independence_across_triaxial_charts(th, ph, c):
    s = TriaxialEllipsoid(1.0, 1.2, 1.5)
    lin = np.array(c[:3])
    Q = np.array([[c[3], c[4], c[5]], [c[4], c[6], c[7]], [c[5], c[7], c[8]]])
    pa = np.array([[th, ph]])
    pb = s.to_chart(s.chart(pa, "A").X, "B")
    ha, ga = _ambient_hessian(s, pa, "A", (lin, Q))
    hb, gb = _ambient_hessian(s, pb, "B", (lin, Q))
    ea = generalized_eig2(ha, ga)[:2]
    eb = generalized_eig2(hb, gb)[:2]
    scale = max(1.0, abs(ea[0][0]), abs(ea[1][0]))
    assert abs(ea[0][0] - eb[0][0]) <= 1e-6 * scale
    assert abs(ea[1][0] - eb[1][0]) <= 1e-6 * scale


# ---------------------------------------------------------------- log-concavity


def test_hemisphere_log_concavity():
    d = sphere_cap(math.pi / 2)
    rep = verify_log_concavity(cap_solution(math.pi / 2, 0.02), d)
    assert rep.verdict
    # analytic worst value -1 + 1/2
    assert rep.global_max == pytest.approx(-0.5, abs=0.05)
    body = rep.to_dict()
    assert len(body["argmax"]) == 2 and len(body["direction"]) == 2
    assert np.all(rep.tau_c > 0)


def test_hemisphere_wang_check_reports_binding_direction():
    d = sphere_cap(math.pi / 2)
    rep = verify_log_concavity(cap_solution(math.pi / 2, 0.02), d)
    full, half = wang_bounds(rep.lambda1)
    assert full == pytest.approx(2 - math.sqrt(4 + 4 * rep.lambda1), rel=1e-15)
    assert 2 - math.sqrt(12) == pytest.approx(-1.4641016, abs=1e-7)
    w = rep.to_dict()["wang"]
    assert w["verdict"] == rep.wang_verdict
    assert w["half_verdict"]
    assert len(w["binding_direction"]) == 2
    # continuum excess of the stated bound: max Hess v = -1 against -1.4641
    assert w["continuum_excess"] == pytest.approx(-1 - full, abs=0.05)


def test_flat_disk_classical_log_concavity():
    d = control("disk")
    rep = verify_log_concavity(solve(d, 0.02)[1], d)
    assert rep.verdict
    assert rep.wang_bound is None


@settings(max_examples=20, deadline=None)
@given(c_hi=st.floats(-2, 2), drop=st.floats(0, 3))
def test_verdict_monotone_in_c(c_hi, drop):
    d = sphere_cap(math.pi / 3)
    fld = cap_field(math.pi / 3, 0.04)
    hi = verify_log_concavity(fld, d, C=c_hi)
    lo = verify_log_concavity(fld, d, C=c_hi - drop)
    assert np.allclose(hi.max_eig - lo.max_eig, drop, rtol=0, atol=1e-13)
    if hi.verdict:
        assert lo.verdict


def test_verdict_recomputable_from_stored_fields():
    d = sphere_cap(math.pi / 4)
    rep = verify_log_concavity(cap_solution(math.pi / 4, 0.04), d)
    assert rep.verdict == bool(np.all(rep.max_eig <= rep.tau_c))
    assert rep.global_max == float(np.max(rep.max_eig))


# ---------------------------------------------------------------- barrier


def test_zero_barrier_on_sphere():
    d = sphere_cap(math.pi / 3)
    fld = cap_field(math.pi / 3, 0.04)
    rep = barrier_margin(fld, d, barrier=0.0)
    v1 = rep.v_frame[:, 0]
    assert np.allclose(rep.margin, 2 * fld.lambda1 + 2 * v1 ** 2, rtol=1e-12, atol=1e-12)
    assert rep.verdict


def test_critical_constant_barrier_on_sphere():
    d = sphere_cap(math.pi / 2)
    fld = cap_field(math.pi / 2, 0.04)
    lam = fld.lambda1
    v1 = barrier_margin(fld, d, barrier=0.0).v_frame[:, 0]
    critical = math.sqrt(1 + lam) - 1
    rep = barrier_margin(fld, d, barrier=critical)
    assert np.allclose(rep.margin, 2 * v1 ** 2, atol=1e-12)
    assert rep.min_margin >= -1e-12
    # the constant sqrt(4 + 4 lam) - 2 overshoots: margin drops by 2(b^2 + 2b - lam)
    b = math.sqrt(4 + 4 * lam) - 2
    rep2 = barrier_margin(fld, d, barrier=b)
    assert np.allclose(rep2.margin, 2 * v1 ** 2 - 2 * (b * b + 2 * b - lam), atol=1e-12)
    assert rep2.min_margin < 0


@pytest.mark.parametrize("eps,r0", [(0.8, 0.6), (1.2, 0.5)])
@pytest.mark.parametrize("C", [0.0, -0.2])
def test_barrier_expansion_identity(eps, r0, C):
    d = ellipsoid_cap(eps, r0)
    fld = recover_derivatives(solve(d, 0.04)[1], d.distance_to_boundary)
    rep = barrier_margin(fld, d, C=C)
    expansion, _, square, transverse = barrier_identity_terms(rep, d, C)
    scale = np.maximum(1.0, np.abs(rep.margin))
    assert np.max(np.abs(rep.margin - expansion) / scale) <= 1e-8
    assert np.all(square >= 0) and np.all(transverse >= 0)


# ---------------------------------------------------------------- gap


class Oracle:
    def __init__(self, lambda1, lambda2):
        self.lambda1, self.lambda2 = lambda1, lambda2


def test_hemisphere_gap_bounds():
    rep = verify_gap(Oracle(2.0, 6.0), sphere_cap(math.pi / 2))
    assert rep.gap == 4.0
    assert rep.curvature_bound == pytest.approx(2.0, rel=0.02)
    assert rep.sphere_bound == pytest.approx(1 + math.sqrt(12) - 1.5, abs=0.03)
    assert rep.verdict


def test_pi3_cap_gap_reports_margins():
    d = sphere_cap(math.pi / 3)
    rep = verify_gap(Oracle(cap_eigenvalue(math.pi / 3, 0), cap_eigenvalue(math.pi / 3, 1)), d)
    body = rep.to_dict()
    assert body["curvature_margin"] == pytest.approx(rep.gap - rep.curvature_bound)
    assert body["sphere_margin"] == pytest.approx(rep.gap - rep.sphere_bound)
    assert rep.verdict == (rep.curvature_verdict and rep.sphere_verdict)


def test_gap_must_be_positive():
    with pytest.raises(ModelError):
        verify_gap(Oracle(3.0, 3.0), sphere_cap(math.pi / 3))
