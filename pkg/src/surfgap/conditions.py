"""Pointwise curvature conditions, eigenvalue lower bounds and threshold search."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ModelError, NoSignChange

KINDS = ("general-C", "pinched-C0", "pinched-Chalf", "spectral-dominance", "triaxial-quantity")
LAMBDA_SOURCES = ("user-supplied", "Ling", "Myers-combined")


@dataclass(frozen=True)
class ConditionSpec:
    kind: str = "general-C"
    C: float = 0.0
    lambda_lb: Optional[float] = None
    lambda_source: str = "user-supplied"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.lambda_source not in LAMBDA_SOURCES:
            raise ValueError(f"unknown lambda source {self.lambda_source!r}")
        if self.lambda_lb is not None and not self.lambda_lb > 0:
            raise ValueError("lambda_lb must be positive")


@dataclass
class ConditionReport:
    spec: ConditionSpec
    resolution: int
    points: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)
    kappa_min: float = float("nan")
    conclusion: str = ""
    refined_min_margin: Optional[float] = None

    @property
    def argmin_index(self):
        return int(np.argmin(self.margins))

    @property
    def min_margin(self):
        return float(self.margins[self.argmin_index])

    @property
    def argmin(self):
        return self.points[self.argmin_index]

    @property
    def verdict(self):
        return bool(self.min_margin > 0)

    def to_dict(self):
        out = {
            "spec": asdict(self.spec),
            "resolution": self.resolution,
            "kappa_min": self.kappa_min,
            "min_margin": self.min_margin,
            "argmin": [float(c) for c in self.argmin],
            "verdict": self.verdict,
        }
        if self.conclusion:
            out["conclusion"] = self.conclusion
        if self.refined_min_margin is not None:
            out["refined_min_margin"] = self.refined_min_margin
        return out


# ---------------------------------------------------------------------------
# margin formulas (pure arithmetic on sampled fields)


def general_margin(dlk, kappa, C, lam):
    """``Delta log kappa + 4 lam - 5 kappa - 4 C (C/kappa + 3)``."""
    return dlk + 4.0 * lam - 5.0 * kappa - 4.0 * C * (C / kappa + 3.0)


def spectral_dominance_margin(dlk, kappa, kappa_min, lam):
    """``Delta log kappa - (4/kappa)(kappa/2 - kmin/2)^2 + 4 lam - 8 (kappa/2 - kmin/2)``."""
    excess = 0.5 * (kappa - kappa_min)
    return dlk - 4.0 / kappa * excess ** 2 + 4.0 * lam - 8.0 * excess


def triaxial_quantity(dlk, kappa, kappa_min):
    """``Delta log kappa - 5 kappa + 12 kmin - kmin^2/kappa``."""
    return dlk - 5.0 * kappa + 12.0 * kappa_min - kappa_min ** 2 / kappa


def pinched_margins(dlk, kappa, kappa_min):
    """Margins of the two pinched conditions (``+6 kmin`` and ``+11 kmin``)."""
    base = dlk - 5.0 * kappa
    return base + 6.0 * kappa_min, base + 11.0 * kappa_min


def lambda_lower_bound(kappa_min, d=None, n=2, mode="Myers-combined"):
    """First Dirichlet eigenvalue lower bound.

    ``Ling``: ``(n-1) kmin / 2 + pi^2/d^2`` with ``d`` the inscribed-ball
    diameter. ``Myers-combined``: ``(n+1) kmin / 2``.
    """
    if mode in ("myers", "Myers-combined"):
        if not kappa_min > 0:
            raise ValueError("kappa_min must be positive")
        return 0.5 * (n + 1) * kappa_min
    if mode in ("ling", "Ling"):
        if d is None or not d > 0:
            raise ValueError("Ling bound needs an inscribed diameter d > 0")
        if kappa_min < 0:
            raise ValueError("kappa_min must be non-negative")
        if kappa_min > 0 and d >= math.pi / math.sqrt(kappa_min):
            raise ModelError(
                f"inscribed diameter {d:.6g} >= pi/sqrt(kappa_min) = {math.pi / math.sqrt(kappa_min):.6g}"
            )
        return 0.5 * (n - 1) * kappa_min + math.pi ** 2 / d ** 2
    raise ValueError(f"unknown lambda bound mode {mode!r}")


# ---------------------------------------------------------------------------
# grid checks


def _fields(surface, resolution):
    pts = surface.sample_points(resolution)
    kappa = surface.gaussian_curvature(pts)
    if np.any(kappa <= 0):
        raise ModelError("non-positive curvature encountered")
    return pts, kappa, surface.delta_log_kappa(pts)


def _margins(spec, dlk, kappa, kappa_min):
    lam = spec.lambda_lb
    if spec.kind == "general-C":
        return general_margin(dlk, kappa, spec.C, lam)
    if spec.kind == "spectral-dominance":
        return spectral_dominance_margin(dlk, kappa, kappa_min, lam)
    if spec.kind == "triaxial-quantity":
        return triaxial_quantity(dlk, kappa, kappa_min)
    first, second = pinched_margins(dlk, kappa, kappa_min)
    return first if spec.kind == "pinched-C0" else second


_CONCLUSIONS = {
    "general-C": "Hess log u1 <= -C - kappa/2",
    "pinched-C0": "Hess log u1 <= -kappa/2",
    "pinched-Chalf": "Hess log u1 <= (kappa_min - kappa)/2 <= 0",
    "spectral-dominance": "Hess log u1 <= (kappa_min - kappa)/2",
    "triaxial-quantity": "Hess log u1 <= (kappa_min - kappa)/2",
}


def check_condition(surface, spec: ConditionSpec, resolution=256, recheck=False):
    """Evaluate one condition on the model's sample grid.

    With ``recheck`` the minimum is recomputed at twice the resolution.
    """
    if spec.kind in ("general-C", "spectral-dominance") and spec.lambda_lb is None:
        raise ValueError(f"{spec.kind} needs lambda_lb")
    kmin = surface.kappa_min
    pts, kappa, dlk = _fields(surface, resolution)
    margins = _margins(spec, dlk, kappa, kmin)
    report = ConditionReport(spec, resolution, pts, margins, kmin, _CONCLUSIONS[spec.kind])
    if recheck:
        _, k2, d2 = _fields(surface, 2 * resolution)
        report.refined_min_margin = float(np.min(_margins(spec, d2, k2, kmin)))
    return report


def check_condition_general(surface, C, lambda_lb, resolution=256, recheck=False):
    return check_condition(surface, ConditionSpec("general-C", C, lambda_lb), resolution, recheck)


def check_pinched_conditions(surface, resolution=256):
    lam = lambda_lower_bound(surface.kappa_min)
    return (
        check_condition(surface, ConditionSpec("pinched-C0", 0.0, lam, "Myers-combined"), resolution),
        check_condition(surface, ConditionSpec("pinched-Chalf", -0.5 * surface.kappa_min, lam, "Myers-combined"), resolution),
    )


def check_spectral_dominance(surface, lambda_lb, resolution=256, identity_rtol=1e-12):
    """Spectral-dominance margin; also cross-checks it against the general margin at ``C = -kmin/2``."""
    kmin = surface.kappa_min
    report = check_condition(
        surface, ConditionSpec("spectral-dominance", -0.5 * kmin, lambda_lb), resolution
    )
    pts = report.points
    kappa = surface.gaussian_curvature(pts)
    general = general_margin(surface.delta_log_kappa(pts), kappa, -0.5 * kmin, lambda_lb)
    scale = np.maximum(np.abs(general), 1.0)
    if np.max(np.abs(general - report.margins) / scale) > identity_rtol:
        raise AssertionError("spectral-dominance margin disagrees with the general margin at C = -kmin/2")
    return report


def triaxial_scan(surface, resolution=512):
    """Grid minimum of ``Delta log kappa - 5 kappa + 12 kmin - kmin^2/kappa``."""
    return check_condition(surface, ConditionSpec("triaxial-quantity", -0.5 * surface.kappa_min, None), resolution)


# ---------------------------------------------------------------------------
# threshold search


@dataclass(frozen=True)
class ThresholdResult:
    root: float
    bracket: tuple
    sign_changes: int
    samples: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def threshold_solve(margin_fn: Callable[[float], float], lo, hi, n_samples=64, xtol=1e-10):
    """Locate the parameter where ``margin_fn`` changes sign.

    The sweep is sampled first; the first sign change is refined by
    bisection. Raises :class:`NoSignChange` when the sweep has none.
    """
    xs = np.linspace(lo, hi, n_samples)
    vals = np.array([float(margin_fn(x)) for x in xs])
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    flips = [i for i in flips if not (sign[i] == 0 and sign[i + 1] == 0)]
    if not flips:
        raise NoSignChange(f"no sign change of the margin on [{lo}, {hi}]")
    i = flips[0]
    a, b = xs[i], xs[i + 1]
    fa = vals[i]
    if fa == 0:
        return ThresholdResult(float(a), (float(a), float(b)), len(flips), xs, vals)
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = float(margin_fn(m))
        if fm == 0:
            a = b = m
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return ThresholdResult(0.5 * (a + b), (float(xs[i]), float(xs[i + 1])), len(flips), xs, vals)


def ellipsoid_pole_margin(eps, coefficient=11.0, weighted=False):
    """``-eps^-2 - 4 eps^-4 + coefficient`` (times ``kmin = eps^2`` when ``weighted``)."""
    extra = coefficient * eps ** 2 if weighted else coefficient
    return -(eps ** -2) - 4.0 * eps ** -4 + extra


def ellipsoid_threshold_closed_form(coefficient=11.0):
    """Positive root in ``eps`` of ``coefficient * eps^4 - eps^2 - 4 = 0``."""
    return math.sqrt((1.0 + math.sqrt(1.0 + 16.0 * coefficient)) / (2.0 * coefficient))
