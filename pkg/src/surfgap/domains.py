"""Geodesic caps and flat test domains, structured triangulations, intrinsic diameters.

Caps are meshed in polar-projected coordinates ``(X, Y) = r (cos t, sin t)``
about the cap centre, with ``r`` the geodesic distance. For a rotation metric
``dr^2 + f(r)^2 dt^2`` this chart has metric
``g = n n^T + (f(r)/r)^2 (I - n n^T)``, ``n = (X, Y)/r``, which is smooth
through the centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import optimize, sparse
from scipy.special import hyp2f1
from scipy.sparse import csgraph

from .errors import DomainError
from .geometry import RoundSphere, SurfaceOfRevolution, fd_christoffel, inverse_2x2

_GEODESIC_TOL = 1e-12


# ---------------------------------------------------------------------------
# charts


def _cheb_eval(coef, y):
    """Chebyshev series by the cosine form; faster than Clenshaw for many points."""
    y = np.asarray(y, dtype=float)
    ang = np.arccos(np.clip(y, -1.0, 1.0))
    return np.cos(np.multiply.outer(ang, np.arange(len(coef)))) @ coef


class FlatPlane:
    """The Euclidean plane; a chart for control domains, not a surface model."""

    kind = "plane"
    closed = False

    def to_dict(self):
        return {"kind": "plane"}


class PolarChart:
    """Polar-projected chart about a rotation pole of ``surface``."""

    def __init__(self, surface):
        if isinstance(surface, FlatPlane):
            self.surface = surface
            self.limit = math.inf
        elif isinstance(surface, RoundSphere):
            self.surface = surface
            self.limit = math.pi * surface.radius
        elif isinstance(surface, SurfaceOfRevolution):
            if not surface.closed:
                raise DomainError("cap centre must be a rotation pole of a closed profile")
            self.surface = surface
            self.limit = surface.profile.length
        else:
            raise DomainError(f"caps are not available on {surface.kind} models")

    # radial data ---------------------------------------------------------
    @cached_property
    def _radial_series(self):
        # f(r)/r is smooth and even-regular on [0, L]; fitting it keeps relative accuracy near the pole
        L = self.limit

        def ratio(y):
            r = 0.5 * L * (y + 1.0)
            return self._radial_exact(r)[0] / r

        return C.chebinterpolate(ratio, 160)

    def _radial_exact(self, r):
        p = self.surface.profile
        t = p.t_of_arclength(np.clip(r, 0.0, self.limit))
        with np.errstate(divide="ignore", invalid="ignore"):
            F = p.jet_at(t)[0]
        F1 = p.jet_at(np.clip(t, 1e-6, math.pi - 1e-6))[1]
        f1 = np.where(t < 1e-6, 1.0, np.where(t > math.pi - 1e-6, -1.0, F1 / np.sqrt(1.0 + F1 * F1)))
        return F, f1

    def radial(self, r):
        """``f(r), f'(r)`` for the rotation metric about the pole."""
        r = np.asarray(r, dtype=float)
        s = self.surface
        if isinstance(s, FlatPlane):
            return r.copy(), np.ones_like(r)
        if isinstance(s, RoundSphere):
            R = s.radius
            return R * np.sin(r / R), np.cos(r / R)
        coef = self._radial_series
        y = 2.0 * r / self.limit - 1.0
        q = _cheb_eval(coef, y)
        dq = _cheb_eval(C.chebder(coef, scl=2.0 / self.limit), y)
        return r * q, q + r * dq

    def f_over_r(self, r):
        r = np.asarray(r, dtype=float)
        if isinstance(self.surface, SurfaceOfRevolution):
            return _cheb_eval(self._radial_series, 2.0 * r / self.limit - 1.0)
        small = r < 1e-8
        f = self.radial(np.where(small, 1.0, r))[0]
        return np.where(small, 1.0, f / np.where(small, 1.0, r))

    def surface_coords(self, pts):
        """Map chart points to the surface model's own chart."""
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        ang = np.arctan2(pts[..., 1], pts[..., 0])
        s = self.surface
        if isinstance(s, FlatPlane):
            return pts.copy()
        if isinstance(s, RoundSphere):
            return np.stack([r / s.radius, ang], -1)
        x = s.profile.x_of_t(s.profile.t_of_arclength(np.clip(r, 0.0, self.limit)))
        return np.stack([x, ang], -1)

    def embed(self, pts):
        pts = np.asarray(pts, dtype=float)
        if isinstance(self.surface, FlatPlane):
            return np.concatenate([pts, np.zeros(pts.shape[:-1] + (1,))], -1)
        return self.surface.embed(self.surface_coords(pts))

    # metric -------------------------------------------------------------
    def metric(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        if np.any(r >= self.limit):
            raise DomainError("point beyond the antipodal pole of the chart")
        ratio2 = self.f_over_r(r) ** 2
        safe = np.where(r > 0, r, 1.0)
        n = pts / safe[..., None]
        nn = np.einsum("...i,...j->...ij", n, n)
        g = nn + ratio2[..., None, None] * (np.eye(2) - nn)
        g[r == 0] = np.eye(2)
        return g

    def christoffel(self, pts):
        if isinstance(self.surface, FlatPlane):
            return np.zeros(np.shape(pts)[:-1] + (2, 2, 2))
        return fd_christoffel(self.metric, pts, 1e-5)

    # curvature ---------------------------------------------------------
    def curvature_fields(self, pts):
        """``kappa``, chart gradient of ``kappa`` and ``Delta log kappa`` at chart points."""
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        s = self.surface
        if isinstance(s, FlatPlane):
            z = np.zeros(r.shape)
            return z, np.zeros(pts.shape), z
        if isinstance(s, RoundSphere):
            k = np.full(r.shape, 1.0 / s.radius ** 2)
            return k, np.zeros(pts.shape), np.zeros(r.shape)
        t = s.profile.t_of_arclength(np.clip(r, 0.0, self.limit))
        kappa, k1, _, dlk = s.radial_quantities_t(t)
        safe = np.where(r > 0, r, 1.0)
        grad = (k1 / safe)[..., None] * pts
        return kappa, grad, dlk

    def curvature_laplacian(self, pts):
        """``Delta kappa`` at chart points, computed directly rather than through ``log kappa``."""
        pts = np.asarray(pts, dtype=float)
        s = self.surface
        if isinstance(s, (FlatPlane, RoundSphere)):
            return np.zeros(pts.shape[:-1])
        r = np.hypot(pts[..., 0], pts[..., 1])
        t = s.profile.t_of_arclength(np.clip(r, 0.0, self.limit))
        return s.radial_quantities_t(t)[2]


# ---------------------------------------------------------------------------
# meshes


@dataclass(eq=False)
class TriMesh:
    params: np.ndarray
    tris: np.ndarray
    boundary: np.ndarray
    h: float
    chart: object = field(repr=False)

    def __post_init__(self):
        p = self.params[self.tris]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise DomainError("inverted or degenerate triangle in parameter space")
        if not np.any(~self.boundary):
            raise DomainError("mesh has no interior vertices")

    @cached_property
    def metric(self):
        return self.chart.metric(self.params)

    @cached_property
    def embedded(self):
        return self.chart.embed(self.params)

    @property
    def n_vertices(self):
        return len(self.params)

    @property
    def interior(self):
        return np.nonzero(~self.boundary)[0]

    def edges(self):
        e = np.concatenate([self.tris[:, [0, 1]], self.tris[:, [1, 2]], self.tris[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def area(self):
        """Metric-weighted area with per-triangle vertex-averaged metric."""
        p = self.params[self.tris]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        flat = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        g = self.metric[self.tris].mean(axis=1)
        return float(np.sum(flat * np.sqrt(inverse_2x2(g)[1])))

    def edge_lengths(self, edges=None):
        edges = self.edges() if edges is None else edges
        a, b = self.params[edges[:, 0]], self.params[edges[:, 1]]
        d = b - a
        g = self.chart.metric(0.5 * (a + b))
        return np.sqrt(np.einsum("ei,eij,ej->e", d, g, d))

    def to_text(self):
        lines = ["# surfgap mesh v1", f"h {self.h!r}", f"nodes {self.n_vertices}"]
        lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in zip(self.params.tolist(), self.boundary.tolist())]
        lines.append(f"triangles {len(self.tris)}")
        lines += [f"{i} {j} {k}" for i, j, k in self.tris.tolist()]
        return "\n".join(lines) + "\n"


def read_mesh_text(text, chart):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    h = float(lines[0].split()[1])
    n = int(lines[1].split()[1])
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[2 : 2 + n]])
    m = int(lines[2 + n].split()[1])
    tris = np.array([[int(v) for v in ln.split()] for ln in lines[3 + n : 3 + n + m]], dtype=np.int64)
    return TriMesh(nodes[:, :2], tris, nodes[:, 2].astype(bool), h, chart)


def _zipper(inner, inner_ang, outer, outer_ang):
    """Triangulate the annulus between two closed rings sorted by angle."""
    tris = []
    ni, no = len(inner), len(outer)
    ai = np.append(inner_ang, inner_ang[0] + 2 * math.pi)
    ao = np.append(outer_ang, outer_ang[0] + 2 * math.pi)
    i = j = 0
    while i < ni or j < no:
        if j >= no or (i < ni and ai[i + 1] <= ao[j + 1]):
            tris.append((inner[i], inner[(i + 1) % ni], outer[j % no]))
            i += 1
        else:
            tris.append((inner[i % ni], outer[(j + 1) % no], outer[j]))
            j += 1
    return tris


def polar_mesh(radius, h, chart):
    """Structured polar grid: rings of ``6k`` nodes, a fan at the centre."""
    rings = int(math.ceil(radius / (h * math.sqrt(3) / 2)))
    pts = [(0.0, 0.0)]
    ring_idx = [np.array([0])]
    ring_ang = [np.array([0.0])]
    for k in range(1, rings + 1):
        rho = radius * k / rings
        ang = 2 * math.pi * np.arange(6 * k) / (6 * k)
        start = len(pts)
        pts.extend(zip(rho * np.cos(ang), rho * np.sin(ang)))
        ring_idx.append(np.arange(start, start + 6 * k))
        ring_ang.append(ang)
    tris = [(0, ring_idx[1][j], ring_idx[1][(j + 1) % 6]) for j in range(6)]
    for k in range(1, rings):
        tris.extend(_zipper(ring_idx[k], ring_ang[k], ring_idx[k + 1], ring_ang[k + 1]))
    tris = np.array(tris, dtype=np.int64)
    params = np.array(pts)
    boundary = np.zeros(len(params), dtype=bool)
    boundary[ring_idx[-1]] = True
    return TriMesh(params, tris_oriented(params, tris), boundary, float(h), chart)


def tris_oriented(params, tris):
    p = params[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    out = tris.copy()
    flip = det < 0
    out[flip, 1], out[flip, 2] = tris[flip, 2], tris[flip, 1]
    return out


_SQUARE_DISK_SCALE = 1.0 / hyp2f1(0.25, 0.5, 1.25, -1.0)


def square_to_disk(z, tol=1e-14, max_iter=60):
    """Conformal map of the square ``[-1, 1]^2`` (as complex ``z``) onto the unit disk.

    Inverts ``z = s w 2F1(1/4, 1/2; 5/4; -w^4)`` by Newton's method from the
    elliptical square-to-disk map.
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    w = x * np.sqrt(1 - 0.5 * y ** 2) + 1j * y * np.sqrt(1 - 0.5 * x ** 2)
    for _ in range(max_iter):
        step = (_SQUARE_DISK_SCALE * w * hyp2f1(0.25, 0.5, 1.25, -w ** 4) - z) * np.sqrt(1 + w ** 4) / _SQUARE_DISK_SCALE
        w = w - step
        outside = np.abs(w) > 1
        w[outside] /= np.abs(w[outside])
        if np.max(np.abs(step)) < tol:
            break
    return w


def mapped_disk_mesh(radius, h, chart):
    """Uniform square grid carried conformally onto the disk of ``radius``.

    The map is analytic in the open square, so the grid lines and the P1
    nodal error are smooth throughout the interior; cells shrink toward the
    four boundary images of the square's corners. ``n`` is chosen so the
    longest edge (at the midpoints of the sides) is about ``h``.
    """
    n = max(int(math.ceil(math.sqrt(2.0) / _SQUARE_DISK_SCALE * radius / h)), 2)
    s = np.linspace(-1.0, 1.0, 2 * n + 1)
    U, V = np.meshgrid(s, s, indexing="ij")
    edge = np.zeros(U.shape, dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    W = square_to_disk(U + 1j * V)
    W[edge] /= np.abs(W[edge])
    params = radius * np.stack([W.real.ravel(), W.imag.ravel()], -1)
    idx = np.arange((2 * n + 1) ** 2).reshape(2 * n + 1, 2 * n + 1)
    a, b = idx[:-1, :-1], idx[1:, :-1]
    c, d = idx[1:, 1:], idx[:-1, 1:]
    # split on a-c except in the two corner cells where that leaves a flat all-boundary triangle
    flip = np.zeros(a.shape, dtype=bool)
    flip[-1, 0] = flip[0, -1] = True
    first = np.where(flip[..., None], np.stack([a, b, d], -1), np.stack([a, b, c], -1))
    second = np.where(flip[..., None], np.stack([b, c, d], -1), np.stack([a, c, d], -1))
    tris = np.concatenate([first.reshape(-1, 3), second.reshape(-1, 3)])
    return TriMesh(params, tris_oriented(params, tris), edge.ravel(), float(h), chart)


def square_mesh(side, h, chart):
    """Uniform grid on ``[0, side]^2`` with alternating diagonals."""
    n = int(math.ceil(side / h))
    xs = np.linspace(0.0, side, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    params = np.stack([X.ravel(), Y.ravel()], -1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = tris_oriented(params, np.array(tris, dtype=np.int64))
    boundary = (np.isclose(params, 0.0) | np.isclose(params, side)).any(axis=1)
    return TriMesh(params, tris, boundary, float(side / n), chart)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DiameterEstimate:
    D: float
    D_lower: float
    D_upper: float
    d: float
    d_lower: float
    d_upper: float
    h: float


@dataclass(eq=False)
class GeodesicDomain:
    """Convexity-certified test domain.

    ``shape`` is ``"cap"`` (geodesic ball about a rotation pole),
    ``"disk"`` or ``"square"`` (flat controls). ``radius`` is the geodesic
    cap radius, the disk radius or the square side.
    """

    surface: object
    shape: str
    radius: float
    k_g: float
    closure: Optional[str] = None
    diameter_h: Optional[float] = None

    @cached_property
    def chart(self):
        return PolarChart(self.surface)

    @property
    def kappa_min_surface(self):
        return 0.0 if isinstance(self.surface, FlatPlane) else self.surface.kappa_min

    @property
    def inf_kappa(self):
        """Infimum of curvature over the closed domain (radial for caps)."""
        if isinstance(self.surface, FlatPlane):
            return 0.0
        r = np.linspace(0.0, self.radius, 2001)
        pts = np.stack([r, np.zeros_like(r)], -1)
        return float(np.min(self.chart.curvature_fields(pts)[0]))

    def distance_to_boundary(self, pts):
        """Geodesic distance from chart points to the boundary."""
        pts = np.asarray(pts, dtype=float)
        if self.shape == "square":
            x, y = pts[..., 0], pts[..., 1]
            return np.minimum.reduce([x, y, self.radius - x, self.radius - y])
        return self.radius - np.hypot(pts[..., 0], pts[..., 1])

    def triangulate(self, h, layout="mapped"):
        """Mesh of characteristic edge length ``h``.

        Round domains default to the conformally mapped square grid; ``layout="polar"``
        gives rings of ``6k`` nodes with a six-triangle fan at the centre.
        """
        if not h > 0:
            raise DomainError("mesh size must be positive")
        inradius = 0.5 * self.radius if self.shape == "square" else self.radius
        if h >= inradius / 4:
            raise DomainError(f"h = {h} too coarse for inradius {inradius:.4g} (need h < inradius/4)")
        if self.shape == "square":
            return square_mesh(self.radius, h, self.chart)
        if layout == "polar":
            return polar_mesh(self.radius, h, self.chart)
        if layout != "mapped":
            raise ValueError(f"unknown mesh layout {layout!r}")
        return mapped_disk_mesh(self.radius, h, self.chart)

    def analytic_area(self):
        if self.shape == "square":
            return self.radius ** 2
        r = np.linspace(0.0, self.radius, 4097)
        f = self.chart.radial(r)[0]
        from scipy.integrate import simpson

        return 2 * math.pi * float(simpson(f, x=r))

    @cached_property
    def diameters(self) -> DiameterEstimate:
        h = self.diameter_h or default_diameter_h(self)
        return geodesic_diameter(self, h)

    def info(self):
        est = self.diameters
        return {
            "shape": self.shape,
            "radius": self.radius,
            "k_g": self.k_g,
            "closure": self.closure,
            "D": est.D,
            "D_bracket": [est.D_lower, est.D_upper],
            "d": est.d,
            "d_bracket": [est.d_lower, est.d_upper],
            "area": self.analytic_area(),
            "inf_kappa": self.inf_kappa,
        }

    def to_dict(self):
        out = {"surface": self.surface.to_dict()}
        if self.shape == "cap":
            if isinstance(self.surface, RoundSphere):
                out["cap"] = {"theta0": self.radius / self.surface.radius}
            else:
                out["cap"] = {"r0": self.radius}
        else:
            out[self.shape] = {"size": self.radius}
        return out


def default_diameter_h(domain):
    return min(domain.radius / 12.0, 0.05)


def make_cap(surface, r0=None, theta0=None):
    """Geodesic cap about a rotation pole, certified by boundary geodesic curvature."""
    if (r0 is None) == (theta0 is None):
        raise DomainError("give exactly one of r0 or theta0")
    if theta0 is not None:
        if not isinstance(surface, RoundSphere):
            raise DomainError("theta0 caps are defined on the round sphere")
        r0 = theta0 * surface.radius
    chart = PolarChart(surface)
    if not (0 < r0 < chart.limit):
        raise DomainError(f"cap radius {r0} outside the profile (0, {chart.limit:.6g})")
    f, f1 = chart.radial(np.array([r0]))
    k_g = float(f1[0] / f[0])
    if abs(k_g) <= _GEODESIC_TOL:
        return GeodesicDomain(surface, "cap", float(r0), k_g, "totally-geodesic-boundary")
    if k_g < 0:
        raise DomainError(f"cap is not convex: boundary geodesic curvature {k_g:.6g} < 0")
    return GeodesicDomain(surface, "cap", float(r0), k_g)


def flat_disk(radius=1.0):
    return GeodesicDomain(FlatPlane(), "disk", float(radius), 1.0 / radius)


def flat_square(side=1.0):
    # corners are convex; straight edges carry zero geodesic curvature
    return GeodesicDomain(FlatPlane(), "square", float(side), 0.0, "polygonal")


def domain_from_dict(spec, surface_loader):
    if "cap" in spec:
        surface = surface_loader(spec["surface"])
        cap = spec["cap"]
        if "theta0" in cap:
            return make_cap(surface, theta0=float(cap["theta0"]))
        return make_cap(surface, r0=float(cap["r0"]))
    if "disk" in spec:
        return flat_disk(float(spec["disk"].get("size", spec["disk"].get("radius", 1.0))))
    if "square" in spec:
        return flat_square(float(spec["square"].get("size", spec["square"].get("side", 1.0))))
    raise DomainError("domain spec needs one of cap, disk, square")


# ---------------------------------------------------------------------------
# geodesic distances


def _graph(mesh):
    edges = mesh.edges()
    w = mesh.edge_lengths(edges)
    n = mesh.n_vertices
    G = sparse.coo_matrix((np.r_[w, w], (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])), shape=(n, n))
    G = G.tocsr()
    ncomp, _ = csgraph.connected_components(G, directed=False)
    if ncomp != 1:
        raise DomainError("mesh graph is disconnected")
    return G


def _path(pred, src_row, target):
    out = [target]
    while out[-1] != src_row:
        nxt = pred[out[-1]]
        if nxt < 0:
            raise DomainError("no path between vertices")
        out.append(nxt)
    return out[::-1]


def _resample(poly, n):
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.r_[0.0, np.cumsum(seg)]
    if s[-1] == 0:
        return np.repeat(poly[:1], n, axis=0)
    t = np.linspace(0.0, s[-1], n)
    return np.stack([np.interp(t, s, poly[:, i]) for i in range(2)], -1)


def polyline_length(chart, poly):
    d = np.diff(poly, axis=0)
    g = chart.metric(0.5 * (poly[1:] + poly[:-1]))
    return float(np.sum(np.sqrt(np.einsum("ei,eij,ej->e", d, g, d))))


def straighten(chart, poly, n=65):
    """Shorten a chart polyline with fixed endpoints.

    Minimises the discrete energy ``sum |d_i|_g^2`` with L-BFGS; its minimisers
    are constant-speed discrete geodesics, which keeps the problem well
    conditioned. The resulting length bounds the geodesic distance between
    the endpoints from above.
    """
    poly = _resample(np.asarray(poly, float), n)
    a, b = poly[0].copy(), poly[-1].copy()
    # optimise in units of the endpoint separation so tolerances are scale-free
    scale = max(float(np.linalg.norm(b - a)), 1e-12)
    fd = 1e-6 * scale
    eye = np.eye(2) * fd
    nseg = n - 1

    def fun(z):
        P = np.vstack([a, z.reshape(-1, 2) * scale, b])
        d = np.diff(P, axis=0)
        m = 0.5 * (P[1:] + P[:-1])
        gd = np.einsum("eij,ej->ei", chart.metric(m), d)
        dg = np.stack([(chart.metric(m + eye[k]) - chart.metric(m - eye[k])) / (2 * fd) for k in range(2)], 1)
        quad = 0.5 * np.einsum("ei,ekij,ej->ek", d, dg, d)
        grad = np.zeros_like(P)
        grad[1:] += 2 * gd + quad
        grad[:-1] += -2 * gd + quad
        energy = nseg * np.einsum("ei,ei->", d, gd) / scale ** 2
        return energy, nseg * grad[1:-1].ravel() / scale

    res = optimize.minimize(
        fun, poly[1:-1].ravel() / scale, jac=True, method="L-BFGS-B",
        options={"maxiter": 2000, "gtol": 1e-11, "ftol": 1e-15},
    )
    return np.vstack([a, res.x.reshape(-1, 2) * scale, b])


def geodesic_diameter(domain, h, n_sources=48, top_pairs=4):
    """Intrinsic diameter ``D`` and inscribed-ball diameter ``d`` of a domain.

    Graph Dijkstra on metric edge lengths over a mesh of size ``h`` gives
    candidate pairs; the best few paths are straightened. The straightened
    lengths are the estimates; brackets are ``+-2 (h/R)^2`` relative with
    ``R`` the domain radius.
    """
    mesh = domain.triangulate(h)
    chart = mesh.chart
    G = _graph(mesh)
    bnd = np.nonzero(mesh.boundary)[0]
    step = max(1, len(bnd) // n_sources)
    sources = bnd[::step]
    dist, pred = csgraph.dijkstra(G, indices=sources, return_predecessors=True)
    sub = dist[:, bnd]
    order = np.argsort(sub, axis=None)[::-1]
    seen, pairs = set(), []
    for flat in order:
        i, j = np.unravel_index(flat, sub.shape)
        key = (min(sources[i], bnd[j]), max(sources[i], bnd[j]))
        if key in seen:
            continue
        seen.add(key)
        pairs.append((i, bnd[j]))
        if len(pairs) >= top_pairs:
            break
    lengths = []
    for i, j in pairs:
        path = mesh.params[_path(pred[i], sources[i], j)]
        lengths.append(polyline_length(chart, straighten(chart, path)))
    D = max(lengths)

    # inscribed diameter: farthest interior vertex from the boundary
    dist_b = csgraph.dijkstra(G, indices=bnd, min_only=True, return_predecessors=True)
    db, predb, srcb = dist_b
    far = int(np.argmax(np.where(mesh.boundary, -np.inf, db)))
    near = np.argsort(np.linalg.norm(mesh.params[bnd] - mesh.params[far], axis=1))[:8]
    cand_targets = set(bnd[near].tolist()) | {int(srcb[far])}
    dist_far, pred_far = csgraph.dijkstra(G, indices=[far], return_predecessors=True)
    best = math.inf
    for tgt in sorted(cand_targets):
        path = mesh.params[_path(pred_far[0], far, tgt)]
        best = min(best, polyline_length(chart, straighten(chart, path)))
    d = 2.0 * best
    rel = 2.0 * (mesh.h / domain.radius) ** 2
    return DiameterEstimate(D, D * (1 - rel), D * (1 + rel), d, d * (1 - rel), d * (1 + rel), mesh.h)
