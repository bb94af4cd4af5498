"""Analytic surface models, Gaussian curvature and intrinsic operators.

Every model works in a two-dimensional chart and evaluates vectorised over
point arrays of shape ``(..., 2)``:

* :class:`RoundSphere` -- polar angle and azimuth ``(theta, phi)``.
* :class:`SurfaceOfRevolution` -- profile abscissa and rotation angle ``(x, theta)``.
* :class:`TriaxialEllipsoid` -- spherical angles ``(theta, phi)`` about the z-axis.
  A second chart about the x-axis covers the poles of the first.
* :class:`ParametricSurface` -- user chart ``(u, v)`` with metric ``E, F, G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import ModelError

#: Resolution used for the cached model-level curvature extrema.
EXTREMA_RESOLUTION = 512
#: Default finite-difference step for the chart-generic paths.
FD_STEP = 1e-4
# Samples closer than this (in the profile angle t) to a rotation pole are
# evaluated by even extrapolation from outside the cut.
_POLE_CUT = 2e-2


# ---------------------------------------------------------------------------
# profile curves


def revolution_jet(F, F1, F2, F3, F4):
    """Arclength derivatives ``(f, f', f'', f''', f'''')`` from graph derivatives.

    Uses ``d/dr = (1/s) d/dx`` with ``s = sqrt(1 + F'^2)``; exact, no numerical
    differentiation.
    """
    s2 = 1.0 + F1 * F1
    s = np.sqrt(s2)
    f1 = F1 / s
    f2 = F2 / (s2 * s2)
    f3 = F3 / (s2 * s2 * s) - 4.0 * F1 * F2 * F2 / (s2 ** 3 * s)
    f4 = (
        F4 / s2 ** 3
        - 13.0 * F1 * F2 * F3 / s2 ** 4
        - 4.0 * F2 ** 3 / s2 ** 4
        + 28.0 * F1 * F1 * F2 ** 3 / s2 ** 5
    )
    return F, f1, f2, f3, f4


def curvature_from_jet(f, f1, f2):
    """Gaussian curvature ``-f''/f`` of ``dr^2 + f(r)^2 dtheta^2``."""
    del f1
    return -f2 / f


def delta_log_kappa_from_jet(f, f1, f2, f3, f4):
    """Closed-form ``Delta log kappa`` for a rotation metric, radial functions only."""
    return f4 / f2 - (f3 / f2) ** 2 + f1 * f3 / (f * f2) - f2 / f


def kappa_radial_derivs(f, f1, f2, f3, f4):
    """``(kappa, dkappa/dr, d2kappa/dr2)`` by the quotient rule."""
    k = -f2 / f
    k1 = -f3 / f + f2 * f1 / f ** 2
    k2 = -f4 / f + 2.0 * f3 * f1 / f ** 2 + f2 * f2 / f ** 2 - 2.0 * f2 * f1 * f1 / f ** 3
    return k, k1, k2


@dataclass(frozen=True)
class ProfileCurve:
    """Graph ``F(x) > 0`` on ``[x_lo, x_hi]`` rotated about the x-axis.

    ``jet(x)`` returns ``(F, F', F'', F''', F'''')``. When ``closed`` is true the
    graph must vanish at both ends (the surface closes up at two poles).
    Internally the curve is also parametrised by ``t in [0, pi]`` with
    ``x = mid - half*cos(t)``, which keeps arclength smooth at the poles.
    """

    jet: Callable[[np.ndarray], tuple]
    x_lo: float
    x_hi: float
    closed: bool = True
    params: dict = field(default_factory=dict, compare=False)
    # optional jet as a function of t; avoids cancellation in x(t) near the poles
    jet_t: Optional[Callable[[np.ndarray], tuple]] = field(default=None, compare=False)

    @property
    def mid(self):
        return 0.5 * (self.x_lo + self.x_hi)

    @property
    def half(self):
        return 0.5 * (self.x_hi - self.x_lo)

    def x_of_t(self, t):
        return self.mid - self.half * np.cos(t)

    def t_of_x(self, x):
        return np.arccos(np.clip((self.mid - np.asarray(x, float)) / self.half, -1.0, 1.0))

    def r_jet(self, x):
        return revolution_jet(*self.jet(np.asarray(x, dtype=float)))

    def jet_at(self, t):
        """Graph derivatives at profile parameter ``t``."""
        t = np.asarray(t, dtype=float)
        if self.jet_t is not None:
            return self.jet_t(t)
        return self.jet(self.x_of_t(t))

    def r_jet_at(self, t):
        return revolution_jet(*self.jet_at(t))

    def ds_dt(self, t):
        # smooth in t; nudging off the poles avoids 0 * inf
        t = np.clip(np.asarray(t, dtype=float), 1e-6, math.pi - 1e-6)
        F1 = self.jet_at(t)[1]
        sin_t = np.sin(t)
        return self.half * np.sqrt(sin_t ** 2 + (sin_t * F1) ** 2)

    @cached_property
    def _arclength_series(self):
        # ds/dt is smooth in t for pole-regular profiles; Chebyshev in y = 2t/pi - 1
        deg = 256
        coef = C.chebinterpolate(lambda y: self.ds_dt(0.5 * math.pi * (y + 1.0)), deg)
        integ = C.chebint(coef, lbnd=-1.0, scl=0.5 * math.pi)
        return coef, integ

    @property
    def length(self):
        return float(C.chebval(1.0, self._arclength_series[1]))

    def arclength(self, t):
        """Arclength from the ``x_lo`` end to parameter ``t``."""
        y = 2.0 * np.asarray(t, dtype=float) / math.pi - 1.0
        return C.chebval(y, self._arclength_series[1])

    def t_of_arclength(self, r):
        """Invert :meth:`arclength` by Newton iteration."""
        r = np.asarray(r, dtype=float)
        total = self.length
        if np.any(r < -1e-12) or np.any(r > total + 1e-12):
            raise ModelError("arclength outside the profile")
        grid = np.linspace(0.0, math.pi, 2049)
        t = np.interp(r, self.arclength(grid), grid)
        for _ in range(50):
            ds = self.ds_dt(t)
            step = (self.arclength(t) - r) / np.where(ds > 0, ds, 1.0)
            t = np.clip(t - step, 0.0, math.pi)
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return t

    def scaled(self, rho):
        jet = self.jet

        def rescale(F, F1, F2, F3, F4):
            return rho * F, F1, F2 / rho, F3 / rho ** 2, F4 / rho ** 3

        def scaled_jet(x):
            return rescale(*jet(np.asarray(x) / rho))

        scaled_jet_t = None
        if self.jet_t is not None:
            base_t = self.jet_t

            def scaled_jet_t(t):
                return rescale(*base_t(t))

        params = {**self.params, "scale": self.params.get("scale", 1.0) * rho}
        return ProfileCurve(scaled_jet, rho * self.x_lo, rho * self.x_hi, self.closed, params, scaled_jet_t)


def spheroid_profile(axial, equatorial=1.0):
    """``F(x) = B sqrt(1 - x^2/A^2)`` on ``[-A, A]``: the ellipsoid x^2/A^2 + (y^2+z^2)/B^2 = 1."""
    A, B = float(axial), float(equatorial)
    if A <= 0 or B <= 0:
        raise ModelError("semi-axes must be positive")

    def jet(x):
        x = np.asarray(x, dtype=float)
        G = np.sqrt(np.maximum(1.0 - (x / A) ** 2, 0.0))
        A2 = A * A
        return (
            B * G,
            -B * x / (A2 * G),
            -B / (A2 * G ** 3),
            -3.0 * B * x / (A2 * A2 * G ** 5),
            -3.0 * B / (A2 * A2 * G ** 5) - 15.0 * B * x * x / (A2 ** 3 * G ** 7),
        )

    def jet_t(t):
        # x = -A cos t, so sqrt(1 - x^2/A^2) = sin t exactly
        t = np.asarray(t, dtype=float)
        G = np.sin(t)
        x = -A * np.cos(t)
        A2 = A * A
        with np.errstate(divide="ignore", invalid="ignore"):
            return (
                B * G,
                -B * x / (A2 * G),
                -B / (A2 * G ** 3),
                -3.0 * B * x / (A2 * A2 * G ** 5),
                -3.0 * B / (A2 * A2 * G ** 5) - 15.0 * B * x * x / (A2 ** 3 * G ** 7),
            )

    return ProfileCurve(jet, -A, A, True, {"axial": A, "equatorial": B}, jet_t)


# ---------------------------------------------------------------------------
# samples and fields


class CurvatureSample(NamedTuple):
    point: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    christoffel: np.ndarray  # [k, i, j] = Gamma^k_ij
    kappa: float
    grad_kappa: np.ndarray  # chart covector
    delta_log_kappa: float
    kappa_min: float
    kappa_max: float


@dataclass(frozen=True)
class Field:
    """Scalar field on a chart, optionally with exact first and second derivatives."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None


class Extrema(NamedTuple):
    kappa_min: float
    kappa_max: float
    argmin: np.ndarray
    argmax: np.ndarray


# ---------------------------------------------------------------------------
# generic chart calculus


def inverse_2x2(g):
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1] / det
    inv[..., 1, 1] = g[..., 0, 0] / det
    inv[..., 0, 1] = -g[..., 0, 1] / det
    inv[..., 1, 0] = -g[..., 1, 0] / det
    return inv, det


def _fd_grad(fn, pts, h):
    e = np.eye(2) * h
    return np.stack([(fn(pts + e[i]) - fn(pts - e[i])) / (2 * h) for i in range(2)], axis=-1)


def fd_laplacian(metric_fn, fn, pts, h=FD_STEP):
    """Divergence-form Laplace--Beltrami by nested centred differences (O(h^2))."""
    pts = np.asarray(pts, dtype=float)

    def flux(q):
        g = metric_fn(q)
        ginv, det = inverse_2x2(g)
        return np.sqrt(det)[..., None] * np.einsum("...ij,...j->...i", ginv, _fd_grad(fn, q, h))

    e = np.eye(2) * h
    div = sum((flux(pts + e[i])[..., i] - flux(pts - e[i])[..., i]) / (2 * h) for i in range(2))
    det = inverse_2x2(metric_fn(pts))[1]
    return div / np.sqrt(det)


def fd_christoffel(metric_fn, pts, h=1e-5):
    """Christoffel symbols ``Gamma[k, i, j]`` from centred differences of the metric."""
    pts = np.asarray(pts, dtype=float)
    g = metric_fn(pts)
    ginv = inverse_2x2(g)[0]
    e = np.eye(2) * h
    dg = np.stack([(metric_fn(pts + e[l]) - metric_fn(pts - e[l])) / (2 * h) for l in range(2)], axis=-1)
    # dg[..., i, j, l] = d_l g_ij
    first = 0.5 * (
        np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    )
    return np.einsum("...kl,...lij->...kij", ginv, first)


def covariant_laplacian(metric, christoffel, grad, hess):
    """``g^ij (f_ij - Gamma^k_ij f_k)`` pointwise."""
    ginv = inverse_2x2(metric)[0]
    cov = hess - np.einsum("...kij,...k->...ij", christoffel, grad)
    return np.einsum("...ij,...ij->...", ginv, cov)


def brioschi(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu):
    """Gaussian curvature from the first fundamental form (Brioschi formula)."""
    m1 = np.stack(
        [
            np.stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev], -1),
            np.stack([Fv - 0.5 * Gu, E, F], -1),
            np.stack([0.5 * Gv, F, G], -1),
        ],
        -2,
    )
    zero = np.zeros_like(E)
    m2 = np.stack(
        [
            np.stack([zero, 0.5 * Ev, 0.5 * Gu], -1),
            np.stack([0.5 * Ev, E, F], -1),
            np.stack([0.5 * Gu, F, G], -1),
        ],
        -2,
    )
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (E * G - F * F) ** 2


# ---------------------------------------------------------------------------
# models


class SurfaceModel:
    """Common behaviour; subclasses supply the chart-specific pieces."""

    kind = "abstract"
    closed = True

    # subclass API -------------------------------------------------------
    def gaussian_curvature(self, pts):
        raise NotImplementedError

    def metric(self, pts):
        raise NotImplementedError

    def christoffel(self, pts):
        return fd_christoffel(self.metric, pts)

    def grad_kappa(self, pts):
        return _fd_grad(self.gaussian_curvature, np.asarray(pts, float), FD_STEP)

    def _delta_log_kappa_analytic(self, pts):
        raise NotImplementedError

    def sample_points(self, resolution):
        """Chart points covering the surface, shape ``(n, 2)``."""
        raise NotImplementedError

    def scaled(self, rho):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    # shared -------------------------------------------------------------
    def _check_chart(self, pts, margin=0.0):
        pass

    def delta_log_kappa(self, pts, method="analytic", h=None, richardson=False):
        """``Delta log kappa`` at chart points.

        ``method="fd"`` applies the divergence-form Laplacian with centred
        differences (step ``h``) to ``log kappa``; ``richardson`` combines
        steps ``h`` and ``h/2``.
        """
        pts = np.asarray(pts, dtype=float)
        if method == "analytic":
            k = self.gaussian_curvature(pts)
            if np.any(k <= 0):
                raise ModelError("non-positive curvature at evaluation point")
            return self._delta_log_kappa_analytic(pts)
        if method != "fd":
            raise ValueError(f"unknown method {method!r}")
        h = FD_STEP if h is None else h
        self._check_chart(pts, 2 * h)

        def logk(q):
            k = self.gaussian_curvature(q)
            if np.any(k <= 0):
                raise ModelError("non-positive curvature at evaluation point")
            return np.log(k)

        lap = fd_laplacian(self.metric, logk, pts, h)
        if richardson:
            lap = (4.0 * fd_laplacian(self.metric, logk, pts, h / 2) - lap) / 3.0
        return lap

    def laplace_beltrami(self, fld, pts, h=None):
        """Laplace--Beltrami of a scalar field (exact when ``fld`` has derivatives)."""
        pts = np.asarray(pts, dtype=float)
        if isinstance(fld, Field) and fld.grad is not None and fld.hess is not None:
            return covariant_laplacian(self.metric(pts), self.christoffel(pts), fld.grad(pts), fld.hess(pts))
        fn = fld.value if isinstance(fld, Field) else fld
        h = FD_STEP if h is None else h
        self._check_chart(pts, 2 * h)
        return fd_laplacian(self.metric, fn, pts, h)

    def curvature_extrema(self, resolution=EXTREMA_RESOLUTION):
        if resolution < 64:
            raise ValueError("resolution must be at least 64")
        return self._extrema(resolution)

    @cached_property
    def _cached_extrema(self):
        return self.curvature_extrema(EXTREMA_RESOLUTION)

    @property
    def kappa_min(self):
        return self._cached_extrema.kappa_min

    @property
    def kappa_max(self):
        return self._cached_extrema.kappa_max

    def curvature_sample(self, point):
        p = np.asarray(point, dtype=float)
        g = self.metric(p)
        return CurvatureSample(
            point=p,
            metric=g,
            metric_inv=inverse_2x2(g)[0],
            christoffel=self.christoffel(p),
            kappa=float(self.gaussian_curvature(p)),
            grad_kappa=np.asarray(self.grad_kappa(p)),
            delta_log_kappa=float(self.delta_log_kappa(p)),
            kappa_min=self.kappa_min,
            kappa_max=self.kappa_max,
        )

    def _validate_positive(self, resolution=64):
        k = self.gaussian_curvature(self.sample_points(resolution))
        if not np.all(np.isfinite(k)) or np.any(k <= 0):
            raise ModelError(f"{self.kind}: Gaussian curvature is not strictly positive")


def _refine_parabola(values, i, coords):
    """Vertex of the parabola through three neighbouring samples, clipped to the bracket."""
    if i <= 0 or i >= len(values) - 1:
        return None
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return None
    shift = 0.5 * (y0 - y2) / denom
    shift = min(max(shift, -1.0), 1.0)
    step = coords[i + 1] - coords[i] if shift >= 0 else coords[i] - coords[i - 1]
    return coords[i] + shift * step


@dataclass(frozen=True, eq=False)
class RoundSphere(SurfaceModel):
    radius: float = 1.0

    kind = "sphere"

    def __post_init__(self):
        if self.radius <= 0:
            raise ModelError("radius must be positive")

    def _check_chart(self, pts, margin=0.0):
        th = np.asarray(pts)[..., 0]
        if np.any(th - margin < 0) or np.any(th + margin > math.pi):
            raise ModelError("point outside the (theta, phi) chart or stencil crosses a pole")

    def gaussian_curvature(self, pts):
        pts = np.asarray(pts, dtype=float)
        th = pts[..., 0]
        if np.any(th < -1e-12) or np.any(th > math.pi + 1e-12):
            raise ModelError("point outside chart")
        return np.full(th.shape, 1.0 / self.radius ** 2)

    def grad_kappa(self, pts):
        return np.zeros(np.shape(pts))

    def metric(self, pts):
        pts = np.asarray(pts, dtype=float)
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = self.radius ** 2
        g[..., 1, 1] = (self.radius * np.sin(pts[..., 0])) ** 2
        return g

    def christoffel(self, pts):
        pts = np.asarray(pts, dtype=float)
        th = pts[..., 0]
        gam = np.zeros(pts.shape[:-1] + (2, 2, 2))
        gam[..., 0, 1, 1] = -np.sin(th) * np.cos(th)
        gam[..., 1, 0, 1] = gam[..., 1, 1, 0] = np.cos(th) / np.sin(th)
        return gam

    def _delta_log_kappa_analytic(self, pts):
        return np.zeros(np.shape(pts)[:-1])

    def sample_points(self, resolution):
        th = np.linspace(0.0, math.pi, resolution + 1)
        ph = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        return np.stack([T.ravel(), P.ravel()], -1)

    def _extrema(self, resolution):
        k = 1.0 / self.radius ** 2
        pole = np.array([0.0, 0.0])
        return Extrema(k, k, pole, pole)

    def gauss_bonnet(self, resolution=512):
        x, w = np.polynomial.legendre.leggauss(resolution)
        th = 0.5 * math.pi * (x + 1)
        integrand = self.gaussian_curvature(np.stack([th, 0 * th], -1)) * self.radius ** 2 * np.sin(th)
        return 2 * math.pi * 0.5 * math.pi * float(np.dot(w, integrand))

    def embed(self, pts):
        pts = np.asarray(pts, dtype=float)
        th, ph = pts[..., 0], pts[..., 1]
        return self.radius * np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)

    def scaled(self, rho):
        return RoundSphere(self.radius * rho)

    def to_dict(self):
        return {"kind": "sphere", "radius": self.radius}


@dataclass(frozen=True, eq=False)
class SurfaceOfRevolution(SurfaceModel):
    """Rotation of a :class:`ProfileCurve`; metric ``dr^2 + f(r)^2 dtheta^2``."""

    profile: ProfileCurve
    validate: bool = True

    kind = "revolution"

    def __post_init__(self):
        if self.validate:
            t = np.linspace(0.0, math.pi, 257)[1:-1]
            if np.any(self.profile.jet_at(t)[0] <= 0):
                raise ModelError("degenerate profile: F vanishes at an interior point")
            self._validate_positive()

    @property
    def closed(self):
        return self.profile.closed

    # --- point handling ---------------------------------------------------
    def _t(self, pts):
        x = np.asarray(pts, dtype=float)[..., 0]
        p = self.profile
        if np.any(x < p.x_lo - 1e-12) or np.any(x > p.x_hi + 1e-12):
            raise ModelError("point outside the profile chart")
        return p.t_of_x(x)

    def _check_chart(self, pts, margin=0.0):
        x = np.asarray(pts)[..., 0]
        p = self.profile
        if np.any(x - margin <= p.x_lo) or np.any(x + margin >= p.x_hi):
            raise ModelError("finite-difference stencil leaves the chart")

    def _jet_t(self, t):
        t = np.clip(t, 1e-7, math.pi - 1e-7)
        return self.profile.r_jet_at(t)

    def kappa_t(self, t):
        f, f1, f2, _, _ = self._jet_t(np.asarray(t, float))
        return curvature_from_jet(f, f1, f2)

    def _pole_regular(self, fn, t):
        """Evaluate radial ``fn(t)``; near a pole use an even fit in arclength."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        inner = (t >= _POLE_CUT) & (t <= math.pi - _POLE_CUT)
        if np.any(inner):
            out[inner] = fn(t[inner])
        for near, sign in (((t < _POLE_CUT), 1.0), ((t > math.pi - _POLE_CUT), -1.0)):
            if not np.any(near):
                continue
            base = 0.0 if sign > 0 else math.pi
            ts = base + sign * _POLE_CUT * np.array([1.0, 1.5, 2.0, 2.5])
            rs = np.abs(self.profile.arclength(ts) - self.profile.arclength(base))
            coef = np.polyfit(rs ** 2, fn(ts), 3)
            r_here = np.abs(self.profile.arclength(t[near]) - self.profile.arclength(base))
            out[near] = np.polyval(coef, r_here ** 2)
        return out

    def radial_quantities_t(self, t):
        """``kappa, dkappa/dr, Delta kappa, Delta log kappa`` at profile parameter ``t``.

        ``dkappa/dr`` is measured from the ``x_lo`` pole.
        """
        t = np.asarray(t, dtype=float)

        def parts(tt):
            f, f1, f2, f3, f4 = self._jet_t(tt)
            k, k1, k2 = kappa_radial_derivs(f, f1, f2, f3, f4)
            return k, k1, k2 + f1 / f * k1, delta_log_kappa_from_jet(f, f1, f2, f3, f4)

        kappa = self.kappa_t(t)
        k1 = self._pole_regular(lambda tt: parts(tt)[1], t)
        near = (t < _POLE_CUT) | (t > math.pi - _POLE_CUT)
        if np.any(near):
            # odd in r: fit k1/r instead
            r0 = self.profile.arclength(t)
            rlen = self.profile.length
            r_pole = np.where(t < 0.5 * math.pi, r0, r0 - rlen)

            def k1_over_r(tt):
                rr = self.profile.arclength(tt)
                rr = np.where(tt < 0.5 * math.pi, rr, rr - rlen)
                return parts(tt)[1] / rr

            k1[near] = self._pole_regular(k1_over_r, t[near]) * r_pole[near]
        lap_k = self._pole_regular(lambda tt: parts(tt)[2], t)
        dlk = self._pole_regular(lambda tt: parts(tt)[3], t)
        return kappa, k1, lap_k, dlk

    # --- model API --------------------------------------------------------
    def gaussian_curvature(self, pts):
        return self.kappa_t(self._t(pts))

    def grad_kappa(self, pts):
        pts = np.asarray(pts, dtype=float)
        t = self._t(pts)
        _, k1, _, _ = self.radial_quantities_t(t)
        F1 = self.profile.jet_at(np.clip(t, 1e-7, math.pi - 1e-7))[1]
        s = np.sqrt(1 + F1 ** 2)
        return np.stack([k1 * s, np.zeros_like(k1)], -1)

    def metric(self, pts):
        pts = np.asarray(pts, dtype=float)
        F, F1 = self.profile.jet(pts[..., 0])[:2]
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1 + F1 ** 2
        g[..., 1, 1] = F ** 2
        return g

    def christoffel(self, pts):
        pts = np.asarray(pts, dtype=float)
        F, F1, F2 = self.profile.jet(pts[..., 0])[:3]
        s2 = 1 + F1 ** 2
        gam = np.zeros(pts.shape[:-1] + (2, 2, 2))
        gam[..., 0, 0, 0] = F1 * F2 / s2
        gam[..., 0, 1, 1] = -F * F1 / s2
        gam[..., 1, 0, 1] = gam[..., 1, 1, 0] = F1 / F
        return gam

    def _delta_log_kappa_analytic(self, pts):
        t = self._t(pts)
        return self._pole_regular(
            lambda tt: delta_log_kappa_from_jet(*self._jet_t(tt)), t
        )

    def sample_points(self, resolution):
        t = np.linspace(0.0, math.pi, resolution + 1)
        x = self.profile.x_of_t(t)
        return np.stack([x, np.zeros_like(x)], -1)

    def _extrema(self, resolution):
        t = np.linspace(0.0, math.pi, resolution + 1)
        k = self.kappa_t(t)
        out = []
        for sign in (1.0, -1.0):
            i = int(np.argmin(sign * k))
            best_t, best = t[i], k[i]
            tv = _refine_parabola(sign * k, i, t)
            if tv is not None:
                kv = float(self.kappa_t(np.array([tv]))[0])
                if sign * kv < sign * best:
                    best_t, best = tv, kv
            out.append((float(best), np.array([float(self.profile.x_of_t(best_t)), 0.0])))
        (kmin, amin), (kmax, amax) = out
        return Extrema(kmin, kmax, amin, amax)

    def gauss_bonnet(self, resolution=512):
        if not self.closed:
            raise ModelError("Gauss-Bonnet check needs a closed surface")
        y, w = np.polynomial.legendre.leggauss(resolution)
        t = 0.5 * math.pi * (y + 1)
        p = self.profile
        _, F1, F2 = p.jet_at(t)[:3]
        s = np.sqrt(1 + F1 ** 2)
        integrand = -F2 / s ** 3 * p.half * np.sin(t)
        return 2 * math.pi * 0.5 * math.pi * float(np.dot(w, integrand))

    def embed(self, pts):
        pts = np.asarray(pts, dtype=float)
        F = self.profile.jet(pts[..., 0])[0]
        return np.stack([pts[..., 0], F * np.cos(pts[..., 1]), F * np.sin(pts[..., 1])], -1)

    def scaled(self, rho):
        return SurfaceOfRevolution(self.profile.scaled(rho), self.validate)

    def to_dict(self):
        prm = self.profile.params
        if "axial" not in prm:
            raise ModelError("only spheroid profiles serialise")
        scale = prm.get("scale", 1.0)
        return {"kind": "revolution_ellipsoid", "eps": prm["axial"] * scale, "equatorial": prm["equatorial"] * scale}


def revolution_ellipsoid(eps, equatorial=1.0):
    """The ellipsoid ``x^2/eps^2 + y^2 + z^2 = 1`` as a surface of revolution."""
    return SurfaceOfRevolution(spheroid_profile(eps, equatorial))


class _Chart(NamedTuple):
    X: np.ndarray
    Xu: np.ndarray
    Xv: np.ndarray
    Xuu: np.ndarray
    Xuv: np.ndarray
    Xvv: np.ndarray


@dataclass(frozen=True, eq=False)
class TriaxialEllipsoid(SurfaceModel):
    """``x^2/a + y^2/b + z^2/c = 1`` with squared semi-axes ``a <= b <= c``."""

    a: float
    b: float
    c: float

    kind = "triaxial"

    def __post_init__(self):
        if not (0 < self.a <= self.b <= self.c):
            raise ModelError("need 0 < a <= b <= c (squared semi-axes)")

    @property
    def semi_axes(self):
        return np.sqrt(np.array([self.a, self.b, self.c]))

    # charts -----------------------------------------------------------
    def chart(self, pts, which="A"):
        """Embedding and derivatives; chart A has poles on the z-axis, chart B on the x-axis."""
        pts = np.asarray(pts, dtype=float)
        al, be, ga = self.semi_axes
        th, ph = pts[..., 0], pts[..., 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        z = np.zeros_like(th)
        if which == "A":
            X = np.stack([al * st * cp, be * st * sp, ga * ct], -1)
            Xu = np.stack([al * ct * cp, be * ct * sp, -ga * st], -1)
            Xv = np.stack([-al * st * sp, be * st * cp, z], -1)
            Xuu = np.stack([-al * st * cp, -be * st * sp, -ga * ct], -1)
            Xuv = np.stack([-al * ct * sp, be * ct * cp, z], -1)
            Xvv = np.stack([-al * st * cp, -be * st * sp, z], -1)
        elif which == "B":
            X = np.stack([al * ct, be * st * cp, ga * st * sp], -1)
            Xu = np.stack([-al * st, be * ct * cp, ga * ct * sp], -1)
            Xv = np.stack([z, -be * st * sp, ga * st * cp], -1)
            Xuu = np.stack([-al * ct, -be * st * cp, -ga * st * sp], -1)
            Xuv = np.stack([z, -be * ct * sp, ga * ct * cp], -1)
            Xvv = np.stack([z, -be * st * cp, -ga * st * sp], -1)
        else:
            raise ValueError(which)
        return _Chart(X, Xu, Xv, Xuu, Xuv, Xvv)

    def to_chart(self, X, which):
        al, be, ga = self.semi_axes
        X = np.asarray(X, dtype=float)
        x, y, z = X[..., 0] / al, X[..., 1] / be, X[..., 2] / ga
        if which == "A":
            return np.stack([np.arccos(np.clip(z, -1, 1)), np.arctan2(y, x)], -1)
        return np.stack([np.arccos(np.clip(x, -1, 1)), np.arctan2(z, y)], -1)

    def chart_metric(self, pts, which="A"):
        ch = self.chart(pts, which)
        g = np.empty(np.shape(pts)[:-1] + (2, 2))
        g[..., 0, 0] = np.einsum("...i,...i", ch.Xu, ch.Xu)
        g[..., 0, 1] = g[..., 1, 0] = np.einsum("...i,...i", ch.Xu, ch.Xv)
        g[..., 1, 1] = np.einsum("...i,...i", ch.Xv, ch.Xv)
        return g

    def chart_christoffel(self, pts, which="A"):
        ch = self.chart(pts, which)
        ginv = inverse_2x2(self.chart_metric(pts, which))[0]
        second = np.stack([np.stack([ch.Xuu, ch.Xuv], -2), np.stack([ch.Xuv, ch.Xvv], -2)], -3)
        tang = np.stack([ch.Xu, ch.Xv], -2)
        first = np.einsum("...ijd,...ld->...lij", second, tang)
        return np.einsum("...kl,...lij->...kij", ginv, first)

    # ambient closed forms -----------------------------------------------
    def kappa_ambient(self, X):
        A2 = np.array([self.a, self.b, self.c])
        q = np.einsum("...i,i->...", np.asarray(X) ** 2, 1 / A2 ** 2)
        return 1.0 / (self.a * self.b * self.c * q ** 2)

    def grad_kappa_ambient(self, X):
        A2 = np.array([self.a, self.b, self.c])
        X = np.asarray(X)
        q = np.einsum("...i,i->...", X ** 2, 1 / A2 ** 2)
        k = 1.0 / (self.a * self.b * self.c * q ** 2)
        return (-2.0 * k / q)[..., None] * (2 * X / A2 ** 2)

    def delta_log_kappa_ambient(self, X):
        """Exact surface Laplacian of ``log kappa`` via its ambient extension.

        ``Delta_S phi = Delta phi - n.Hess(phi).n - H dphi/dn`` with
        ``phi = -log(abc) - 2 log q``, ``q = sum x_i^2 / a_i^2``.
        """
        A2 = np.array([self.a, self.b, self.c])
        X = np.asarray(X, dtype=float)
        grad_G = 2 * X / A2
        norm = np.linalg.norm(grad_G, axis=-1)
        n = grad_G / norm[..., None]
        hess_G = 2 / A2
        mean = hess_G.sum() / norm - np.einsum("...i,i->...", grad_G ** 2, hess_G) / norm ** 3
        q = np.einsum("...i,i->...", X ** 2, 1 / A2 ** 2)
        gq = 2 * X / A2 ** 2
        hq = 2 / A2 ** 2
        grad_phi = -2 * gq / q[..., None]
        n_hess_n = -2 * np.einsum("...i,i->...", n ** 2, hq) / q + 2 * np.einsum("...i,...i", gq, n) ** 2 / q ** 2
        lap = -2 * hq.sum() / q + 2 * np.einsum("...i,...i", gq, gq) / q ** 2
        return lap - n_hess_n - mean * np.einsum("...i,...i", grad_phi, n)

    # model API (chart A coordinates) ------------------------------------
    def embed(self, pts):
        return self.chart(pts, "A").X

    def gaussian_curvature(self, pts):
        return self.kappa_ambient(self.embed(pts))

    def metric(self, pts):
        return self.chart_metric(pts, "A")

    def christoffel(self, pts):
        return self.chart_christoffel(pts, "A")

    def grad_kappa(self, pts):
        ch = self.chart(pts, "A")
        gk = self.grad_kappa_ambient(ch.X)
        return np.stack([np.einsum("...i,...i", gk, ch.Xu), np.einsum("...i,...i", gk, ch.Xv)], -1)

    def _delta_log_kappa_analytic(self, pts):
        return self.delta_log_kappa_ambient(self.embed(pts))

    def delta_log_kappa(self, pts, method="analytic", h=None, richardson=False):
        if method != "fd":
            return super().delta_log_kappa(pts, method, h, richardson)
        pts = np.asarray(pts, dtype=float)
        h = FD_STEP if h is None else h
        X = self.embed(pts)
        out = np.empty(pts.shape[:-1])
        use_a = np.abs(X[..., 2] / self.semi_axes[2]) <= 0.75
        for which, mask in (("A", use_a), ("B", ~use_a)):
            if not np.any(mask):
                continue
            q = self.to_chart(X[mask], which)
            logk = lambda p, w=which: np.log(self.kappa_ambient(self.chart(p, w).X))  # noqa: E731
            met = lambda p, w=which: self.chart_metric(p, w)  # noqa: E731
            lap = fd_laplacian(met, logk, q, h)
            if richardson:
                lap = (4.0 * fd_laplacian(met, logk, q, h / 2) - lap) / 3.0
            out[mask] = lap
        return out

    def sample_points(self, resolution):
        th = np.linspace(0.0, math.pi, resolution + 1)
        ph = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        return np.stack([T.ravel(), P.ravel()], -1)

    def _extrema(self, resolution):
        th = np.linspace(0.0, math.pi, resolution + 1)
        ph = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        k = self.gaussian_curvature(np.stack([T, P], -1))
        out = []
        for sign in (1.0, -1.0):
            i, j = np.unravel_index(np.argmin(sign * k), k.shape)
            best = (float(k[i, j]), np.array([th[i], ph[j]]))
            tv = _refine_parabola(sign * k[:, j], i, th)
            ext = np.concatenate([ph - 2 * math.pi, ph, ph + 2 * math.pi])
            row = np.concatenate([k[i], k[i], k[i]])
            pv = _refine_parabola(sign * row, j + len(ph), ext)
            cand = np.array([tv if tv is not None else th[i], pv if pv is not None else ph[j]])
            kv = float(self.gaussian_curvature(cand))
            if sign * kv < sign * best[0]:
                best = (kv, cand)
            out.append(best)
        (kmin, amin), (kmax, amax) = out
        return Extrema(kmin, kmax, amin, amax)

    def gauss_bonnet(self, resolution=512):
        y, w = np.polynomial.legendre.leggauss(resolution)
        th = 0.5 * math.pi * (y + 1)
        ph = np.linspace(0.0, 2 * math.pi, 2 * resolution, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        pts = np.stack([T, P], -1)
        ch = self.chart(pts, "A")
        dA = np.linalg.norm(np.cross(ch.Xu, ch.Xv), axis=-1)
        integrand = self.kappa_ambient(ch.X) * dA
        return float(0.5 * math.pi * np.dot(w, integrand.sum(axis=1)) * (2 * math.pi / len(ph)))

    def scaled(self, rho):
        r2 = rho * rho
        return TriaxialEllipsoid(self.a * r2, self.b * r2, self.c * r2)

    def to_dict(self):
        return {"kind": "triaxial", "a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True, eq=False)
class ParametricSurface(SurfaceModel):
    """Chart with metric coefficients ``metric_fn(u, v) -> (E, F, G)``.

    ``derivs_fn`` may return ``(Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu)``;
    otherwise those are taken by centred differences. ``kappa_fn`` overrides
    the Brioschi formula when an exact curvature is known.
    """

    metric_fn: Callable
    u_range: tuple
    v_range: tuple
    derivs_fn: Optional[Callable] = None
    kappa_fn: Optional[Callable] = None
    closed: bool = False
    source: Optional[dict] = None

    kind = "parametric"

    def __post_init__(self):
        self._validate_positive(16)

    def _check_chart(self, pts, margin=0.0):
        p = np.asarray(pts)
        (u0, u1), (v0, v1) = self.u_range, self.v_range
        if (
            np.any(p[..., 0] - margin < u0)
            or np.any(p[..., 0] + margin > u1)
            or np.any(p[..., 1] - margin < v0)
            or np.any(p[..., 1] + margin > v1)
        ):
            raise ModelError("point or stencil outside the parametric chart")

    def metric(self, pts):
        pts = np.asarray(pts, dtype=float)
        E, F, G = (np.broadcast_to(np.asarray(c, float), pts.shape[:-1]) for c in self.metric_fn(pts[..., 0], pts[..., 1]))
        g = np.empty(pts.shape[:-1] + (2, 2))
        g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1] = E, F, F, G
        return g

    def _metric_derivs(self, pts):
        if self.derivs_fn is not None:
            return [np.broadcast_to(np.asarray(d, float), pts.shape[:-1]) for d in self.derivs_fn(pts[..., 0], pts[..., 1])]
        h = 1e-4
        e = np.eye(2) * h
        g0 = self.metric(pts)
        gp = [self.metric(pts + e[i]) for i in range(2)]
        gm = [self.metric(pts - e[i]) for i in range(2)]
        d1 = [(gp[i] - gm[i]) / (2 * h) for i in range(2)]
        Evv = (gp[1][..., 0, 0] - 2 * g0[..., 0, 0] + gm[1][..., 0, 0]) / h ** 2
        Guu = (gp[0][..., 1, 1] - 2 * g0[..., 1, 1] + gm[0][..., 1, 1]) / h ** 2
        Fuv = (
            self.metric(pts + e[0] + e[1])[..., 0, 1]
            - self.metric(pts + e[0] - e[1])[..., 0, 1]
            - self.metric(pts - e[0] + e[1])[..., 0, 1]
            + self.metric(pts - e[0] - e[1])[..., 0, 1]
        ) / (4 * h * h)
        return [
            d1[0][..., 0, 0], d1[1][..., 0, 0], d1[0][..., 0, 1], d1[1][..., 0, 1],
            d1[0][..., 1, 1], d1[1][..., 1, 1], Evv, Fuv, Guu,
        ]

    def gaussian_curvature(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.kappa_fn is not None:
            return np.broadcast_to(np.asarray(self.kappa_fn(pts[..., 0], pts[..., 1]), float), pts.shape[:-1]).copy()
        g = self.metric(pts)
        Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu = self._metric_derivs(pts)
        return brioschi(g[..., 0, 0], g[..., 0, 1], g[..., 1, 1], Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu)

    def _delta_log_kappa_analytic(self, pts):
        return self.delta_log_kappa(pts, method="fd", richardson=True)

    def sample_points(self, resolution):
        (u0, u1), (v0, v1) = self.u_range, self.v_range
        du, dv = (u1 - u0) * 1e-3, (v1 - v0) * 1e-3
        U, V = np.meshgrid(
            np.linspace(u0 + du, u1 - du, resolution + 1), np.linspace(v0 + dv, v1 - dv, resolution + 1), indexing="ij"
        )
        return np.stack([U.ravel(), V.ravel()], -1)

    def _extrema(self, resolution):
        pts = self.sample_points(resolution)
        k = self.gaussian_curvature(pts)
        i, j = int(np.argmin(k)), int(np.argmax(k))
        return Extrema(float(k[i]), float(k[j]), pts[i], pts[j])

    def gauss_bonnet(self, resolution=512):
        raise ModelError("Gauss-Bonnet check needs a closed surface")

    def scaled(self, rho):
        r2 = rho * rho
        mf = self.metric_fn
        kf = self.kappa_fn
        df = self.derivs_fn
        return ParametricSurface(
            lambda u, v: tuple(r2 * np.asarray(c) for c in mf(u, v)),
            self.u_range,
            self.v_range,
            None if df is None else (lambda u, v: tuple(r2 * np.asarray(c) for c in df(u, v))),
            None if kf is None else (lambda u, v: np.asarray(kf(u, v)) / r2),
            self.closed,
        )

    @classmethod
    def from_expressions(cls, E, F, G, u_range, v_range, kappa=None):
        """Build from metric expressions in ``u, v``; derivatives are taken symbolically."""
        import sympy as sp

        u, v = sp.symbols("u v")
        exprs = [sp.sympify(e) for e in (E, F, G)]
        Es, Fs, Gs = exprs
        dlist = [
            sp.diff(Es, u), sp.diff(Es, v), sp.diff(Fs, u), sp.diff(Fs, v),
            sp.diff(Gs, u), sp.diff(Gs, v), sp.diff(Es, v, 2), sp.diff(Fs, u, v), sp.diff(Gs, u, 2),
        ]
        mf = sp.lambdify((u, v), exprs, "numpy")
        df = sp.lambdify((u, v), dlist, "numpy")
        kf = None if kappa is None else sp.lambdify((u, v), sp.sympify(kappa), "numpy")
        src = {"kind": "parametric", "E": str(E), "F": str(F), "G": str(G), "u": list(u_range), "v": list(v_range)}
        if kappa is not None:
            src["kappa"] = str(kappa)
        return cls(mf, tuple(u_range), tuple(v_range), df, kf, False, src)

    def to_dict(self):
        if self.source is None:
            raise ModelError("parametric surface built from callables does not serialise")
        return dict(self.source)


# ---------------------------------------------------------------------------
# model construction from JSON-like dicts


def surface_from_dict(spec):
    kind = spec.get("kind")
    if kind == "sphere":
        return RoundSphere(float(spec.get("radius", 1.0)))
    if kind == "revolution_ellipsoid":
        return revolution_ellipsoid(float(spec["eps"]), float(spec.get("equatorial", 1.0)))
    if kind == "triaxial":
        return TriaxialEllipsoid(float(spec["a"]), float(spec["b"]), float(spec["c"]))
    if kind == "parametric":
        return ParametricSurface.from_expressions(
            spec["E"], spec.get("F", "0"), spec["G"], tuple(spec["u"]), tuple(spec["v"]), spec.get("kappa")
        )
    raise ModelError(f"unknown surface kind {kind!r}")


def surface_info(surface, resolution=EXTREMA_RESOLUTION):
    """Summary used by ``surfgap surface info``."""
    ext = surface.curvature_extrema(resolution)
    pts = surface.sample_points(resolution)
    k = surface.gaussian_curvature(pts)
    q = surface.delta_log_kappa(pts) - 5.0 * k
    i = int(np.argmin(q))
    info = {
        "surface": surface.to_dict(),
        "kappa_min": ext.kappa_min,
        "kappa_max": ext.kappa_max,
        "argmin_kappa": ext.argmin.tolist(),
        "argmax_kappa": ext.argmax.tolist(),
        "min_delta_log_kappa_minus_5kappa": float(q[i]),
        "argmin_delta_log_kappa_minus_5kappa": pts[i].tolist(),
    }
    if surface.closed:
        gb = surface.gauss_bonnet(resolution)
        info["gauss_bonnet_residual"] = gb / (4 * math.pi) - 1.0
    return info
