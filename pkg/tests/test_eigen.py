import math
import struct

import numpy as np
import pytest

from helpers import CAP_ANGLES, SPHERE, cap_solution, control, ellipsoid_cap, solve, sphere_cap
from oracles import bessel_zero, cap_eigenvalue
from surfgap.domains import FlatPlane, PolarChart, TriMesh, make_cap
from surfgap.eigen import (
    assemble,
    local_poly_fit,
    radial_oracle,
    rayleigh_quotient,
    read_field,
    recover_derivatives,
    write_field,
)
from surfgap.errors import SolverError

J01_SQ = bessel_zero(0, 2.0, 3.0) ** 2
J11_SQ = bessel_zero(1, 3.5, 4.2) ** 2


def test_bessel_oracle_frozen_values():
    assert J01_SQ == pytest.approx(5.783185962946802, rel=1e-13)
    assert J11_SQ == pytest.approx(14.681970642123899, rel=1e-13)


def test_legendre_oracle_frozen_values():
    assert cap_eigenvalue(math.pi / 2, 0) == pytest.approx(2.0, rel=1e-12)
    assert cap_eigenvalue(math.pi / 2, 1) == pytest.approx(6.0, rel=1e-12)
    assert cap_eigenvalue(math.pi / 3, 0) == pytest.approx(4.936041865403534, rel=1e-12)
    assert cap_eigenvalue(math.pi / 3, 1) == pytest.approx(13.408133083669979, rel=1e-12)


# ---------------------------------------------------------------- assembly


class _Flat:
    def metric(self, pts):
        return np.broadcast_to(np.eye(2), np.shape(pts)[:-1] + (2, 2)).copy()


def test_reference_triangle_stiffness():
    mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.3, 0.3]]), np.array([[0, 1, 2]]), np.array([True, True, True, False]), 1.0, _Flat())
    K = assemble(mesh, dirichlet=False).stiffness.toarray()[:3, :3]
    assert np.allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


@pytest.mark.parametrize("theta0", [math.pi / 3, math.pi / 2])
def test_mass_total_is_area(theta0):
    d = sphere_cap(theta0)
    exact = 2 * math.pi * (1 - math.cos(theta0))
    errs = []
    for h in (0.08, 0.04):
        M = assemble(d.triangulate(h), dirichlet=False).mass
        errs.append(abs(M.sum() - exact) / exact)
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-3


def test_conformal_scaling_of_operators():
    d = sphere_cap(math.pi / 3)
    mesh = d.triangulate(0.08)
    rho = 1.7

    class Scaled:
        def metric(self, pts):
            return rho ** 2 * d.chart.metric(pts)

    scaled = TriMesh(mesh.params, mesh.tris, mesh.boundary, mesh.h, Scaled())
    a, b = assemble(mesh, dirichlet=False), assemble(scaled, dirichlet=False)
    assert abs(b.stiffness - a.stiffness).max() <= 1e-12 * abs(a.stiffness).max()
    assert abs(b.mass - rho ** 2 * a.mass).max() <= 1e-12 * abs(b.mass).max()


# ---------------------------------------------------------------- solver vs oracles


def test_flat_disk_eigenvalues():
    sol = solve(control("disk"), 0.02)[1]
    assert sol.lambda1 == pytest.approx(J01_SQ, rel=5e-3)
    assert sol.lambda2 == pytest.approx(J11_SQ, rel=5e-3)


def test_hemisphere_eigenvalues():
    sol = cap_solution(math.pi / 2, 0.02)
    assert sol.lambda1 == pytest.approx(2.0, rel=1e-2)
    assert sol.lambda2 == pytest.approx(6.0, rel=1.5e-2)


def test_flat_square_eigenvalues():
    sol = solve(control("square"), 0.02)[1]
    assert sol.lambda1 == pytest.approx(2 * math.pi ** 2, rel=5e-3)
    assert sol.lambda2 == pytest.approx(5 * math.pi ** 2, rel=5e-3)


def test_radial_oracle_hemisphere():
    res = radial_oracle(sphere_cap(math.pi / 2).chart, math.pi / 2)
    assert res.lambda1 == pytest.approx(2.0, abs=1e-6)
    assert res.lambda2 == pytest.approx(6.0, abs=1e-6)
    assert res.lambda1 < res.lambda2


def test_radial_oracle_flat_disk():
    res = radial_oracle(PolarChart(FlatPlane()), 1.0)
    assert res.lambda1 == pytest.approx(J01_SQ, rel=1e-8)
    assert res.lambda2 == pytest.approx(J11_SQ, rel=1e-8)


@pytest.mark.parametrize("theta0", CAP_ANGLES)
def test_radial_oracle_matches_legendre(theta0):
    res = radial_oracle(sphere_cap(theta0).chart, theta0)
    assert res.lambda1 == pytest.approx(cap_eigenvalue(theta0, 0), rel=1e-8)
    assert res.lambda2 == pytest.approx(cap_eigenvalue(theta0, 1), rel=1e-8)


@pytest.mark.parametrize("theta0", [math.pi / 3, math.pi / 2])
def test_fem_converges_quadratically_to_oracle(theta0):
    ref = radial_oracle(sphere_cap(theta0).chart, theta0)
    hs = np.array([0.08, 0.04, 0.02])
    sols = [cap_solution(theta0, h) for h in hs]
    for which, exact in ((0, ref.lambda1), (1, ref.lambda2)):
        err = np.array([s.eigenvalues[which] - exact for s in sols])
        assert np.all(err > 0)  # conforming elements overestimate
        orders = np.log2(err[:-1] / err[1:])
        assert min(orders) >= 1.8
        c = np.sum(err * hs ** 2) / np.sum(hs ** 4)
        r2 = 1 - np.sum((err - c * hs ** 2) ** 2) / np.sum((err - err.mean()) ** 2)
        assert r2 > 0.9


def test_ellipsoid_cap_matches_oracle():
    d = ellipsoid_cap(0.8, 0.6)
    ref = radial_oracle(d.chart, d.radius)
    sol = solve(d, 0.02)[1]
    assert sol.lambda1 == pytest.approx(ref.lambda1, rel=5e-3)
    assert sol.lambda2 == pytest.approx(ref.lambda2, rel=1e-2)


def test_lambda1_decreases_with_cap_size():
    lams = [cap_solution(t, 0.04).lambda1 for t in CAP_ANGLES]
    assert all(a > b for a, b in zip(lams, lams[1:]))


@pytest.mark.parametrize("theta0", CAP_ANGLES[:3])
def test_ling_bound_holds(theta0):
    d = sphere_cap(theta0)
    lam = cap_solution(theta0, 0.04).lambda1
    assert lam >= 0.5 * SPHERE.kappa_min + math.pi ** 2 / d.diameters.d ** 2 - 1e-2


@pytest.mark.parametrize("theta0", [math.pi / 3, math.pi / 2])
def test_solution_invariants(theta0):
    ops, sol = solve(sphere_cap(theta0), 0.04)
    u = sol.u1[ops.interior]
    assert u @ (ops.mass @ u) == pytest.approx(1.0, abs=1e-8)
    assert np.min(u) > 0
    assert rayleigh_quotient(ops, sol.u1) == pytest.approx(sol.lambda1, rel=1e-10)
    assert sol.lambda2 - sol.lambda1 > 1e-6
    assert np.all(sol.residuals < 1e-8)


def test_too_few_dofs_rejected():
    d = sphere_cap(math.pi / 3)
    mesh = d.triangulate(0.25)
    with pytest.raises(SolverError):
        from surfgap.eigen import solve_dirichlet

        solve_dirichlet(assemble(mesh), k=40)


# ---------------------------------------------------------------- derivative recovery


def test_interval_log_sine_second_derivative():
    # v = log sin x on (0, pi): v'' = -1/sin^2 x, recovered from samples of sin x
    h = 0.02
    xs = np.arange(h, math.pi - h / 2, h)
    ys = np.arange(0.0, 10 * h, h)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    params = np.stack([X.ravel(), Y.ravel()], -1)
    u = np.sin(params[:, 0])
    centre = np.nonzero((np.abs(params[:, 1] - 5 * h) < 1e-12) & (params[:, 0] > 0.5) & (params[:, 0] < math.pi - 0.5))[0]
    val, grad, hess = local_poly_fit(params, u, centre)
    v2 = hess[:, 0, 0] / val - (grad[:, 0] / val) ** 2
    x = params[centre, 0]
    assert np.max(np.abs(v2 + 1 / np.sin(x) ** 2)) < 1e-5


def test_hemisphere_hessian_of_log_cosine():
    sol = cap_solution(math.pi / 2, 0.02)
    d = sphere_cap(math.pi / 2)
    fld = recover_derivatives(sol, d.distance_to_boundary)
    theta = np.hypot(fld.points[:, 0], fld.points[:, 1])
    from surfgap.verify import generalized_eig2

    mu_max, mu_min, *_ = generalized_eig2(fld.hess, fld.metric)
    assert np.max(np.abs(mu_max + 1.0)) < 0.05
    assert np.max(np.abs(mu_min + 1 / np.cos(theta) ** 2) * np.cos(theta) ** 2) < 0.05


def test_log_identity_residual_small_and_decreasing():
    d = sphere_cap(math.pi / 2)
    fine = recover_derivatives(cap_solution(math.pi / 2, 0.02), d.distance_to_boundary)
    assert np.max(np.abs(fine.log_identity_residual)) <= 1e-2
    res = [np.max(np.abs(recover_derivatives(cap_solution(math.pi / 2, h), d.distance_to_boundary, delta=0.1).log_identity_residual)) for h in (0.04, 0.02)]
    assert res[1] < res[0]


def test_w_equation_residual_decreases():
    d = sphere_cap(math.pi / 3)
    res = [np.max(np.abs(recover_derivatives(cap_solution(math.pi / 3, h), d.distance_to_boundary, delta=0.1).w_residual)) for h in (0.04, 0.02)]
    assert res[1] < res[0]


def test_offset_starvation_raises():
    d = sphere_cap(math.pi / 6)
    with pytest.raises(SolverError):
        recover_derivatives(cap_solution(math.pi / 6, 0.04), d.distance_to_boundary, delta=1.0)


# ---------------------------------------------------------------- field files


def test_field_file_round_trip(tmp_path):
    values = np.linspace(-1, 1, 17)
    path = tmp_path / "u.gsvf"
    write_field(path, values)
    raw = path.read_bytes()
    assert raw[:4] == b"GSVF"
    assert struct.unpack("<IQ", raw[4:16]) == (1, 17)
    assert len(raw) == 16 + 8 * 17
    assert np.array_equal(read_field(path), values)


def test_field_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.gsvf"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        read_field(path)
