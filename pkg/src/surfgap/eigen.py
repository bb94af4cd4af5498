"""Dirichlet Laplace--Beltrami eigenpairs: P1 finite elements and a radial shooting oracle."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import linalg as spla
from scipy.spatial import cKDTree

from . import kernels
from .errors import SolverError
from .geometry import inverse_2x2

RESIDUAL_TOL = 1e-8


# ---------------------------------------------------------------------------
# assembly and solve


@dataclass(eq=False)
class Operators:
    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    interior: np.ndarray
    mesh: object = field(repr=False)

    @property
    def n_dof(self):
        return len(self.interior)


def element_blocks(mesh, backend=None):
    """Per-triangle stiffness and mass blocks with the vertex-averaged metric."""
    ginv_det = inverse_2x2(mesh.metric[mesh.tris].mean(axis=1))[1]
    if np.any(ginv_det <= 0):
        raise SolverError("singular triangle metric")
    return kernels.element_matrices(mesh.params, mesh.metric, mesh.tris, backend=backend)


def assemble(mesh, backend=None, dirichlet=True):
    """Global P1 stiffness and mass; Dirichlet rows/columns removed by default."""
    ke, me = element_blocks(mesh, backend)
    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sparse.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sparse.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    keep = mesh.interior if dirichlet else np.arange(n)
    return Operators(K[keep][:, keep].tocsr(), M[keep][:, keep].tocsr(), keep, mesh)


@dataclass(eq=False)
class SpectralSolution:
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)  # (k, n_vertices), zero on the boundary
    residuals: np.ndarray
    mesh: object = field(repr=False)
    near_degenerate: list = field(default_factory=list)

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    @property
    def lambda2(self):
        return float(self.eigenvalues[1])

    @property
    def gap(self):
        return self.lambda2 - self.lambda1

    @property
    def u1(self):
        return self.vectors[0]

    @property
    def u2(self):
        return self.vectors[1]

    @property
    def h(self):
        return self.mesh.h

    def v(self):
        """``log u1`` on interior vertices (``nan`` on the boundary)."""
        out = np.full(self.mesh.n_vertices, np.nan)
        idx = self.mesh.interior
        out[idx] = np.log(self.u1[idx])
        return out

    def meta(self):
        return {
            "h": self.mesh.h,
            "n_vertices": int(self.mesh.n_vertices),
            "n_interior": int(len(self.mesh.interior)),
            "n_triangles": int(len(self.mesh.tris)),
        }


def solve_dirichlet(ops: Operators, k=2, tol=RESIDUAL_TOL):
    """The ``k`` smallest Dirichlet eigenpairs by shift-invert Lanczos about zero."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if ops.n_dof < 10 * k:
        raise SolverError(f"{ops.n_dof} interior dofs is too few for k = {k}")
    K, M = ops.stiffness, ops.mass
    v0 = np.ones(ops.n_dof)
    try:
        vals, vecs = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=0.0, which="LM", v0=v0, tol=0.0)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"shift-invert iteration did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    residuals = np.empty(k)
    for i in range(k):
        u = vecs[:, i]
        Mu = M @ u
        u /= math.sqrt(u @ Mu)
        if u.sum() < 0:
            u = -u
        vecs[:, i] = u
        Mu = M @ u
        residuals[i] = np.linalg.norm(K @ u - vals[i] * Mu) / (abs(vals[i]) * np.linalg.norm(Mu))
    if np.any(residuals >= tol):
        raise SolverError(f"eigen residuals {residuals.tolist()} exceed {tol}")
    flags = []
    for i in range(k - 1):
        if vals[i + 1] - vals[i] <= 1e3 * tol * abs(vals[i + 1]):
            flags.append([i + 1, i + 2])
    if flags and flags[0][0] == 1:
        raise SolverError("lambda1 is not numerically simple")
    full = np.zeros((k, ops.mesh.n_vertices))
    full[:, ops.interior] = vecs.T
    return SpectralSolution(vals, full, residuals, ops.mesh, flags)


def rayleigh_quotient(ops, u):
    ui = u[ops.interior]
    return float(ui @ (ops.stiffness @ ui) / (ui @ (ops.mass @ ui)))


# ---------------------------------------------------------------------------
# radial oracle


@dataclass(frozen=True)
class RadialOracleResult:
    lambda1: float
    lambda2: float
    r: np.ndarray = field(repr=False)
    profile_m0: np.ndarray = field(repr=False)
    profile_m1: np.ndarray = field(repr=False)
    tolerance: float = 1e-10
    steps: int = 0


def _segments(r0, r_start):
    """Doublings of ``r`` from ``r_start``; each is integrated with a uniform step."""
    edges = [r_start]
    while edges[-1] * 2 < r0:
        edges.append(edges[-1] * 2)
    edges.append(r0)
    return list(zip(edges[:-1], edges[1:]))


def _shoot(radial_f, r0, lam, m, pole_kappa, n, backend=None, keep=False):
    r_start = 1e-4 * r0
    rs = r_start
    if m == 0:
        u = 1.0 - lam * rs ** 2 / 4.0
        w = -lam * rs ** 2 / 2.0
    else:
        a = (2.0 * pole_kappa / 3.0 - lam) / 8.0
        u = rs + a * rs ** 3
        w = rs + (3.0 * a - pole_kappa / 6.0) * rs ** 3
    segs = _segments(r0, r_start)
    rr, uu = [np.array([rs])], [np.array([u])]
    for lo, hi in segs:
        grid = np.linspace(lo, hi, 2 * n + 1)
        f = radial_f(grid)
        out, w = kernels.shoot_radial(f, (hi - lo) / n, lam, m, u, w, backend=backend)
        u = out[-1]
        if keep:
            rr.append(grid[2::2])
            uu.append(out[1:])
    if keep:
        return u, np.concatenate(rr), np.concatenate(uu)
    return u


def _ground_lambda(radial_f, r0, m, pole_kappa, n, rtol, backend):
    fn = lambda lam: _shoot(radial_f, r0, lam, m, pole_kappa, n, backend)  # noqa: E731
    lam = 0.05 / r0 ** 2
    prev = fn(lam)
    for _ in range(2000):
        nxt = lam * 1.05
        cur = fn(nxt)
        if np.sign(cur) != np.sign(prev):
            return optimize.brentq(fn, lam, nxt, xtol=1e-300, rtol=max(rtol, 4e-16), maxiter=200)
        lam, prev = nxt, cur
    raise SolverError(f"no eigenvalue bracket found for mode m = {m}")


def radial_oracle(chart, r0, rtol=1e-10, steps=200, max_steps=12800, backend=None):
    """Ground eigenvalues of the ``m = 0`` and ``m = 1`` modes on a geodesic cap.

    Shoots ``u' = w/f``, ``w' = (m^2/f - lam f) u`` from a series start near
    the pole with fixed-step RK4 on a geometrically graded grid; the step
    count doubles until two successive eigenvalues agree to ``rtol``.
    """
    radial_f = lambda r: chart.radial(r)[0]  # noqa: E731
    pole_kappa = float(chart.curvature_fields(np.zeros((1, 2)))[0][0])
    n = steps
    prev = None
    while True:
        lams = tuple(_ground_lambda(radial_f, r0, m, pole_kappa, n, rtol * 1e-2, backend) for m in (0, 1))
        if prev is not None and all(abs(a - b) <= rtol * abs(a) for a, b in zip(lams, prev)):
            break
        if n >= max_steps:
            raise SolverError("radial shooting did not converge under step halving")
        prev, n = lams, 2 * n
    _, r, p0 = _shoot(radial_f, r0, lams[0], 0, pole_kappa, n, backend, keep=True)
    _, _, p1 = _shoot(radial_f, r0, lams[1], 1, pole_kappa, n, backend, keep=True)
    return RadialOracleResult(lams[0], lams[1], r, p0, p1, rtol, n)


# ---------------------------------------------------------------------------
# derivative recovery


@dataclass(eq=False)
class DerivativeField:
    """Recovered derivatives of ``v = log u1`` on interior evaluation nodes."""

    nodes: np.ndarray
    points: np.ndarray
    v: np.ndarray
    grad: np.ndarray  # chart covector
    hess: np.ndarray  # covariant Hessian, chart components
    metric: np.ndarray
    christoffel: np.ndarray
    log_identity_residual: np.ndarray
    w_residual: Optional[np.ndarray]
    delta: float
    lambda1: float
    lambda2: float
    h: float = float("nan")

    @property
    def laplacian(self):
        ginv = inverse_2x2(self.metric)[0]
        return np.einsum("...ij,...ij->...", ginv, self.hess)


def _monomials(degree):
    return [(i, n - i) for n in range(degree + 1) for i in range(n, -1, -1)]


FIT_DEGREE = 4


def local_poly_fit(params, values, centers_idx, n_neighbors=30, tree=None, degree=FIT_DEGREE):
    """Least-squares polynomial fit about each centre; returns value, gradient, second partials."""
    mons = _monomials(degree)
    if n_neighbors < len(mons):
        raise ValueError(f"degree {degree} fit needs at least {len(mons)} neighbours")
    tree = cKDTree(params) if tree is None else tree
    _, nb = tree.query(params[centers_idx], k=n_neighbors)
    d = params[nb] - params[centers_idx][:, None, :]
    scale = np.max(np.abs(d), axis=(1, 2))[:, None, None]
    ds = d / scale
    A = np.stack([ds[..., 0] ** i * ds[..., 1] ** j for i, j in mons], -1)
    rhs = values[nb]
    pinv = np.linalg.pinv(A)
    c = np.einsum("mkn,mn->mk", pinv, rhs)
    s = scale[:, 0, 0]
    val = c[:, 0]
    grad = np.stack([c[:, 1], c[:, 2]], -1) / s[:, None]
    hess = np.empty((len(centers_idx), 2, 2))
    hess[:, 0, 0] = 2 * c[:, 3]
    hess[:, 0, 1] = hess[:, 1, 0] = c[:, 4]
    hess[:, 1, 1] = 2 * c[:, 5]
    hess /= (s ** 2)[:, None, None]
    return val, grad, hess


def recover_derivatives(solution, distance_to_boundary, delta=None, n_neighbors=30):
    """Gradient, covariant Hessian and identity residuals of ``v = log u1``.

    ``u1`` (smooth up to the boundary) is fitted by local least-squares
    quartics; derivatives of ``v`` follow from ``dv = du/u`` and
    ``Hess v = Hess u/u - du du^T/u^2``. ``distance_to_boundary`` maps chart
    points to their geodesic distance from the boundary; evaluation uses
    interior nodes at distance at least ``delta`` (default ``5 h``).
    """
    mesh = solution.mesh
    delta = 5 * mesh.h if delta is None else delta
    dist = distance_to_boundary(mesh.params)
    nodes = np.nonzero((~mesh.boundary) & (dist >= delta - 1e-12))[0]
    if len(nodes) < 3:
        raise SolverError("evaluation grid starved: no interior nodes beyond the offset")
    u1 = solution.u1
    if np.any(u1[mesh.interior] <= 0):
        raise SolverError("u1 changes sign in the interior")
    tree = cKDTree(mesh.params)
    u, du, d2u = local_poly_fit(mesh.params, u1, nodes, n_neighbors, tree)
    if np.any(u <= 0):
        raise SolverError("fitted u1 is not positive on the evaluation set")
    pts = mesh.params[nodes]
    g = mesh.chart.metric(pts)
    gam = mesh.chart.christoffel(pts)
    ginv = inverse_2x2(g)[0]
    hu = d2u - np.einsum("mkij,mk->mij", gam, du)
    dv = du / u[:, None]
    hess = hu / u[:, None, None] - np.einsum("mi,mj->mij", dv, dv)
    grad_sq = np.einsum("mi,mij,mj->m", dv, ginv, dv)
    lap = np.einsum("mij,mij->m", ginv, hess)
    lam1 = solution.lambda1
    log_res = grad_sq + lam1 + lap
    w_res = None
    if solution.vectors.shape[0] >= 2:
        u2, du2, d2u2 = local_poly_fit(mesh.params, solution.u2, nodes, n_neighbors, tree)
        hu2 = d2u2 - np.einsum("mkij,mk->mij", gam, du2)
        w = u2 / u
        dw = (du2 - w[:, None] * du) / u[:, None]
        hw = (
            hu2
            - w[:, None, None] * hu
            - np.einsum("mi,mj->mij", dw, du)
            - np.einsum("mi,mj->mij", du, dw)
        ) / u[:, None, None]
        lap_w = np.einsum("mij,mij->m", ginv, hw)
        cross = np.einsum("mi,mij,mj->m", dv, ginv, dw)
        scale = max(float(np.max(np.abs(w))), 1e-300)
        w_res = (lap_w + 2 * cross + (solution.lambda2 - lam1) * w) / scale
    return DerivativeField(nodes, pts, np.log(u), dv, hess, g, gam, log_res, w_res, float(delta), lam1, solution.lambda2, float(mesh.h))


# ---------------------------------------------------------------------------
# binary nodal fields

_MAGIC = b"GSVF"
_VERSION = 1


def write_field(path, values):
    arr = np.ascontiguousarray(values, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQ", _VERSION, arr.size))
        fh.write(arr.tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _MAGIC:
            raise ValueError(f"{path}: not a GSVF field file")
        version, count = struct.unpack("<IQ", head[4:])
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported GSVF version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return data.copy()
