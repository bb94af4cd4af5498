"""Certification of log-concavity estimates, barrier inequalities and gap bounds on computed solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conditions import general_margin
from .eigen import DerivativeField, SpectralSolution, recover_derivatives
from .errors import ModelError
from .geometry import RoundSphere, inverse_2x2

TAU_FACTOR = 5.0
DEGENERATE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# 2x2 generalized symmetric eigenproblems


def generalized_eig2(A, g):
    """Eigenvalues and ``g``-unit eigenvectors of ``A x = mu g x`` for stacks of 2x2 matrices.

    Returns ``(mu_max, mu_min, e_max, e_min, degenerate)``. ``e_max`` and
    ``e_min`` are ``g``-orthonormal chart vectors. When the two eigenvalues
    coincide (relative to ``DEGENERATE_RTOL``) ``e_max`` is the ``g``-unit
    vector along the first chart axis, which has the smallest parameter
    angle, and the pair is flagged.
    """
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    ginv, det_g = inverse_2x2(g)
    if np.any(det_g <= 0) or np.any(g[..., 0, 0] <= 0):
        raise ModelError("metric is not positive definite at an evaluation point")
    # mu^2 det g - mu (a11 g22 + a22 g11 - 2 a12 g12) + det A = 0
    tr = (A[..., 0, 0] * g[..., 1, 1] + A[..., 1, 1] * g[..., 0, 0] - 2 * A[..., 0, 1] * g[..., 0, 1]) / det_g
    det_a = (A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] ** 2) / det_g
    half = 0.5 * tr
    disc = np.sqrt(np.maximum(half ** 2 - det_a, 0.0))
    mu_max, mu_min = half + disc, half - disc
    scale = np.maximum(np.abs(mu_max) + np.abs(mu_min), 1e-300)
    degenerate = (mu_max - mu_min) <= DEGENERATE_RTOL * scale

    B = A - mu_max[..., None, None] * g
    # null vector of B from whichever row is larger
    r0 = np.stack([-B[..., 0, 1], B[..., 0, 0]], -1)
    r1 = np.stack([-B[..., 1, 1], B[..., 1, 0]], -1)
    use1 = np.linalg.norm(r1, axis=-1) > np.linalg.norm(r0, axis=-1)
    e = np.where(use1[..., None], r1, r0)
    axis = np.zeros_like(e)
    axis[..., 0] = 1.0
    e = np.where(degenerate[..., None], axis, e)
    e = e / np.sqrt(np.einsum("...i,...ij,...j->...", e, g, e))[..., None]
    # g-orthogonal complement, oriented by the chart area form
    gi_e = np.einsum("...ij,...j->...i", g, e)
    perp = np.stack([-gi_e[..., 1], gi_e[..., 0]], -1)
    perp = perp / np.sqrt(np.einsum("...i,...ij,...j->...", perp, g, perp))[..., None]
    return mu_max, mu_min, e, perp, degenerate


def spectral_norm_g(A, g):
    mu_max, mu_min, *_ = generalized_eig2(A, g)
    return np.maximum(np.abs(mu_max), np.abs(mu_min))


# ---------------------------------------------------------------------------
# log-concavity


@dataclass
class ConcavityReport:
    C: float
    points: np.ndarray = field(repr=False)
    max_eig: np.ndarray = field(repr=False)  # of Hess v + (C + kappa/2) g
    hess_max_eig: np.ndarray = field(repr=False)  # of Hess v alone
    directions: np.ndarray = field(repr=False)
    tau_c: np.ndarray = field(repr=False)
    delta: float = 0.0
    h: float = 0.0
    lambda1: float = float("nan")
    wang_bound: Optional[float] = None
    wang_half_bound: Optional[float] = None

    @property
    def excess(self):
        """``max_eig - tau_c`` per point; the certificate holds where this is ``<= 0``."""
        return self.max_eig - self.tau_c

    @property
    def argmax_index(self):
        return int(np.argmax(self.max_eig))

    @property
    def global_max(self):
        return float(self.max_eig[self.argmax_index])

    @property
    def verdict(self):
        return bool(np.all(self.max_eig <= self.tau_c))

    def _wang_excess(self, bound):
        return self.hess_max_eig - bound - self.tau_c

    @property
    def wang_verdict(self):
        if self.wang_bound is None:
            return None
        return bool(np.all(self._wang_excess(self.wang_bound) <= 0))

    @property
    def wang_half_verdict(self):
        if self.wang_half_bound is None:
            return None
        return bool(np.all(self._wang_excess(self.wang_half_bound) <= 0))

    @property
    def hess_global_max(self):
        return float(np.max(self.hess_max_eig))

    def to_dict(self):
        i = self.argmax_index
        out = {
            "C": self.C,
            "h": self.h,
            "delta": self.delta,
            "lambda1": self.lambda1,
            "n_points": int(len(self.max_eig)),
            "global_max": self.global_max,
            "tau_c_at_argmax": float(self.tau_c[i]),
            "max_excess": float(np.max(self.excess)),
            "argmax": [float(c) for c in self.points[i]],
            "direction": [float(c) for c in self.directions[i]],
            "verdict": self.verdict,
        }
        if self.wang_bound is not None:
            j = int(np.argmax(self.hess_max_eig - self.tau_c))
            out["wang"] = {
                "bound": self.wang_bound,
                "hess_global_max": self.hess_global_max,
                "continuum_excess": self.hess_global_max - self.wang_bound,
                "verdict": self.wang_verdict,
                "half_bound": self.wang_half_bound,
                "half_verdict": self.wang_half_verdict,
                "binding_point": [float(c) for c in self.points[j]],
                "binding_direction": [float(c) for c in self.directions[j]],
            }
        return out


def _field(solution, domain, delta=None):
    if isinstance(solution, DerivativeField):
        return solution
    if isinstance(solution, SpectralSolution):
        return recover_derivatives(solution, domain.distance_to_boundary, delta)
    raise TypeError("expected a SpectralSolution or DerivativeField")


def _unit_sphere(domain):
    return isinstance(domain.surface, RoundSphere) and abs(domain.surface.radius - 1.0) < 1e-12


def wang_bounds(lambda1, n=2):
    """``n - sqrt(n^2 + 4 lam)`` and half of it (the constant-barrier critical value)."""
    full = n - math.sqrt(n * n + 4.0 * lambda1)
    return full, 0.5 * full


def verify_log_concavity(solution, domain, C=0.0, tau_c=None, delta=None, sphere_mode=None):
    """Check ``Hess log u1 <= -(C + kappa/2) g`` pointwise on the interior grid.

    The default tolerance is ``5 (h + delta)`` times the local ``g``-norm of
    ``Hess v``. ``sphere_mode`` (default: on for the unit sphere) adds the
    constant-curvature comparison ``Hess v <= 2 - sqrt(4 + 4 lam1)`` and its
    half.
    """
    fld = _field(solution, domain, delta)
    g = fld.metric
    hess_max, _, e_max, _, _ = generalized_eig2(fld.hess, g)
    kappa = domain.chart.curvature_fields(fld.points)[0]
    # the shift commutes with the eigenproblem, so the C dependence is exact
    max_eig = hess_max + (C + 0.5 * kappa)
    h = fld.h
    if tau_c is None:
        tau = TAU_FACTOR * (h + fld.delta) * spectral_norm_g(fld.hess, g)
    else:
        tau = np.full(len(max_eig), float(tau_c))
    if sphere_mode is None:
        sphere_mode = _unit_sphere(domain)
    wang = wang_bounds(fld.lambda1) if sphere_mode else (None, None)
    return ConcavityReport(
        C=float(C),
        points=fld.points,
        max_eig=max_eig,
        hess_max_eig=hess_max,
        directions=e_max,
        tau_c=tau,
        delta=float(fld.delta),
        h=h,
        lambda1=fld.lambda1,
        wang_bound=wang[0],
        wang_half_bound=wang[1],
    )


# ---------------------------------------------------------------------------
# barrier inequality


@dataclass(frozen=True)
class Barrier:
    """Scalar barrier ``b`` with its chart gradient and Laplacian at evaluation points."""

    value: np.ndarray
    grad: np.ndarray
    laplacian: np.ndarray
    label: str = ""
    C: Optional[float] = None


def constant_barrier(points, value):
    n = len(points)
    return Barrier(np.full(n, float(value)), np.zeros((n, 2)), np.zeros(n), f"constant {value:.12g}")


def curvature_barrier(domain, points, C=0.0):
    """``b = kappa/2 + C``, with ``Delta b`` from the direct Laplacian of ``kappa``."""
    kappa, dk, _ = domain.chart.curvature_fields(points)
    lap = domain.chart.curvature_laplacian(points)
    return Barrier(0.5 * kappa + C, 0.5 * dk, 0.5 * lap, f"kappa/2 + {C:.12g}", float(C))


@dataclass
class BarrierReport:
    points: np.ndarray = field(repr=False)
    margin: np.ndarray = field(repr=False)
    frame: np.ndarray = field(repr=False)  # (m, 2, 2): rows e1, e2 in chart components
    v_frame: np.ndarray = field(repr=False)  # (m, 2): v1, v2
    kappa_frame: np.ndarray = field(repr=False)  # (m, 2): kappa1, kappa2
    kappa: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)
    lambda1: float = float("nan")
    barrier: str = ""

    @property
    def min_margin(self):
        return float(np.min(self.margin))

    @property
    def argmin_index(self):
        return int(np.argmin(self.margin))

    @property
    def verdict(self):
        return bool(self.min_margin > 0)

    def to_dict(self):
        i = self.argmin_index
        return {
            "barrier": self.barrier,
            "lambda1": self.lambda1,
            "n_points": int(len(self.margin)),
            "min_margin": self.min_margin,
            "argmin": [float(c) for c in self.points[i]],
            "frame_e1": [float(c) for c in self.frame[i, 0]],
            "degenerate_frames": int(np.count_nonzero(self.degenerate)),
            "verdict": self.verdict,
        }


def barrier_margin(solution, domain, barrier=None, lambda1=None, delta=None, C=0.0):
    """Pointwise ``Delta b - RHS`` of the two-dimensional barrier inequality.

    ``RHS = 2 b^2 - 2 <grad b, grad v> - 2 kappa (lam + v1^2) + 4 b kappa + v2 kappa2 - v1 kappa1``
    in the ``g``-orthonormal frame whose first vector maximises ``Hess v``.
    ``barrier`` defaults to ``kappa/2 + C``; pass a :class:`Barrier` or a
    number for a constant barrier.
    """
    fld = _field(solution, domain, delta)
    pts = fld.points
    lam = fld.lambda1 if lambda1 is None else float(lambda1)
    if barrier is None:
        barrier = curvature_barrier(domain, pts, C)
    elif not isinstance(barrier, Barrier):
        barrier = constant_barrier(pts, float(barrier))
    g = fld.metric
    ginv = inverse_2x2(g)[0]
    _, _, e1, e2, degenerate = generalized_eig2(fld.hess, g)
    kappa, dk, _ = domain.chart.curvature_fields(pts)
    v1 = np.einsum("mi,mi->m", fld.grad, e1)
    v2 = np.einsum("mi,mi->m", fld.grad, e2)
    k1 = np.einsum("mi,mi->m", dk, e1)
    k2 = np.einsum("mi,mi->m", dk, e2)
    b = barrier.value
    grad_b_v = np.einsum("mi,mij,mj->m", barrier.grad, ginv, fld.grad)
    rhs = 2 * b ** 2 - 2 * grad_b_v - 2 * kappa * (lam + v1 ** 2) + 4 * b * kappa + v2 * k2 - v1 * k1
    return BarrierReport(
        points=pts,
        margin=barrier.laplacian - rhs,
        frame=np.stack([e1, e2], 1),
        v_frame=np.stack([v1, v2], -1),
        kappa_frame=np.stack([k1, k2], -1),
        kappa=kappa,
        degenerate=degenerate,
        lambda1=lam,
        barrier=barrier.label,
    )


def barrier_identity_terms(report, domain, C):
    """Expansion of the ``b = kappa/2 + C`` margin through the general condition margin.

    Returns ``(expansion, general, square, transverse)`` with
    ``expansion = (kappa/2) general + square + transverse``,
    ``square = 2 kappa (v1 + kappa1/(2 kappa))^2`` and
    ``transverse = kappa2^2 / (2 kappa)``; the last two are non-negative.
    """
    kappa = report.kappa
    dlk = domain.chart.curvature_fields(report.points)[2]
    general = general_margin(dlk, kappa, C, report.lambda1)
    v1 = report.v_frame[:, 0]
    k1, k2 = report.kappa_frame[:, 0], report.kappa_frame[:, 1]
    square = 2 * kappa * (v1 + k1 / (2 * kappa)) ** 2
    transverse = k2 ** 2 / (2 * kappa)
    return 0.5 * kappa * general + square + transverse, general, square, transverse


# ---------------------------------------------------------------------------
# gap bounds


@dataclass
class GapReport:
    lambda1: float
    lambda2: float
    D_lower: float
    D_upper: float
    inf_kappa: float
    kappa_min_surface: float
    C: float
    sphere_mode: bool

    @property
    def gap(self):
        return self.lambda2 - self.lambda1

    @property
    def curvature_bound(self):
        """``pi^2/D^2 + inf kappa + C`` at the conservative diameter."""
        return math.pi ** 2 / self.D_upper ** 2 + self.inf_kappa + self.C

    @property
    def sphere_bound(self):
        """``pi^2/D^2 + sqrt(4 + 4 lam1) - 3/2`` (unit sphere, two dimensions)."""
        if not self.sphere_mode:
            return None
        return math.pi ** 2 / self.D_upper ** 2 + math.sqrt(4 + 4 * self.lambda1) - 1.5

    @property
    def curvature_verdict(self):
        return bool(self.gap > self.curvature_bound)

    @property
    def sphere_verdict(self):
        return None if not self.sphere_mode else bool(self.gap > self.sphere_bound)

    @property
    def constraints(self):
        """Both admissibility readings of ``C``, reported side by side."""
        return {
            "C_ge_minus_kappa_min": bool(self.C >= -self.kappa_min_surface),
            "C_ge_minus_half_inf_kappa": bool(self.C >= -0.5 * self.inf_kappa),
        }

    @property
    def verdict(self):
        checks = [self.curvature_verdict] + ([self.sphere_verdict] if self.sphere_mode else [])
        return all(checks)

    def to_dict(self):
        out = {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "gap": self.gap,
            "D_bracket": [self.D_lower, self.D_upper],
            "inf_kappa": self.inf_kappa,
            "C": self.C,
            "constraints": self.constraints,
            "curvature_bound": self.curvature_bound,
            "curvature_margin": self.gap - self.curvature_bound,
            "curvature_verdict": self.curvature_verdict,
            "verdict": self.verdict,
        }
        if self.sphere_mode:
            out["sphere_bound"] = self.sphere_bound
            out["sphere_margin"] = self.gap - self.sphere_bound
            out["sphere_verdict"] = self.sphere_verdict
        return out


def verify_gap(eigen, domain, C=0.0, sphere_mode=None):
    """Compare ``lambda2 - lambda1`` with the curvature and sphere gap bounds.

    ``eigen`` is anything carrying ``lambda1`` and ``lambda2`` (a solver or
    oracle result).
    """
    est = domain.diameters
    if sphere_mode is None:
        sphere_mode = _unit_sphere(domain)
    report = GapReport(
        lambda1=float(eigen.lambda1),
        lambda2=float(eigen.lambda2),
        D_lower=float(est.D_lower),
        D_upper=float(est.D_upper),
        inf_kappa=float(domain.inf_kappa),
        kappa_min_surface=float(domain.kappa_min_surface),
        C=float(C),
        sphere_mode=bool(sphere_mode),
    )
    if not report.gap > 0:
        raise ModelError(f"non-positive gap {report.gap:.6g}: first eigenvalue not simple")
    return report
