"""Normalized Ricci flow on rotationally symmetric spheres and its closed-form comparison bounds.

The metric is ``exp(2 phi(theta)) g_round`` with ``theta`` the polar angle.
Then ``kappa = exp(-2 phi) (1 - Delta_round phi)`` and the normalized flow
``d/dt g = (1 - kappa) g`` becomes ``d/dt phi = (1 - kappa)/2``. ``phi`` is
even about both poles, so it is expanded in ``cos(k theta)`` on the
Chebyshev--Lobatto angles ``theta_j = j pi / N`` and differentiated
spectrally.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import fft, optimize

from .errors import BoundsInvalid, CFLViolation, ModelError, NoSignChange, SolverError

CFL_SAFETY = 0.25
RESIDUAL_TOL = 1e-3


# ---------------------------------------------------------------------------
# closed-form bounds


@dataclass(frozen=True)
class BoundCurve:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("pinching ratio alpha must lie in (0, 1]")

    @property
    def C0(self):
        return 1.0 - self.alpha

    @property
    def C1(self):
        return 1.0 / self.alpha - 1.0

    @property
    def t_max(self):
        return math.inf if self.alpha == 1 else math.log(1.0 / (1.0 - self.alpha))


@dataclass(frozen=True)
class OdeBounds:
    kappa_max: float
    kappa_min: float
    pinching: float
    harnack_floor: float
    margin: float


def ode_bounds(alpha, t):
    """Comparison bounds along the normalized flow from ``alpha``-pinched data.

    ``kappa_max < 1/(1 - C0 e^t)``, ``kappa_min > 1/(1 + C1 e^t)``, their
    difference, the Harnack floor ``-e^t/(e^t - 1)`` and the dominance margin
    ``1 - e^t/(e^t - 1) - 6 C1 e^t/(1 - C0 e^t) + 5/(1 + C1 e^t)``.
    """
    curve = BoundCurve(float(alpha))
    if not t > 0:
        raise BoundsInvalid("bounds need t > 0")
    if t >= curve.t_max:
        raise BoundsInvalid(f"t = {t:.6g} is past the validity horizon log(1/(1-alpha)) = {curve.t_max:.6g}")
    et = math.exp(t)
    upper = 1.0 / (1.0 - curve.C0 * et)
    lower = 1.0 / (1.0 + curve.C1 * et)
    spread = curve.C1 * et / (1.0 - curve.C0 * et)
    floor = -et / math.expm1(t)
    margin = 1.0 + floor - 6.0 * spread + 5.0 * lower
    return OdeBounds(upper, lower, spread, floor, margin)


def margin_function(alpha, t):
    return ode_bounds(alpha, t).margin


def onset_times(alpha, n_samples=4000, xtol=1e-9, horizon=50.0):
    """First and last sign changes of the dominance margin on ``(0, t_max)``.

    Returns ``(t_on, t_off)``; ``t_off`` is ``None`` if the margin stays
    positive up to the horizon (only possible for ``alpha = 1``).
    """
    curve = BoundCurve(float(alpha))
    end = min(curve.t_max, horizon)
    ts = end * (np.arange(1, n_samples + 1) / (n_samples + 1))
    vals = np.array([margin_function(alpha, t) for t in ts])
    pos = vals > 0
    if not np.any(pos):
        raise NoSignChange(f"margin never positive on (0, {end:.6g}) for alpha = {alpha}")

    def root(i):
        return optimize.bisect(lambda t: margin_function(alpha, t), ts[i], ts[i + 1], xtol=xtol)

    first = int(np.argmax(pos))
    t_on = float(ts[0]) if first == 0 else root(first - 1)
    last = len(pos) - 1 - int(np.argmax(pos[::-1]))
    t_off = None if last == len(pos) - 1 else root(last)
    return t_on, t_off


# ---------------------------------------------------------------------------
# spectral calculus on [0, pi]


def _cos_coeffs(values):
    n = len(values) - 1
    a = fft.dct(values, type=1) / n
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


def _cos_synth(coef):
    n = len(coef) - 1
    y = coef * n
    y[0] *= 2.0
    y[-1] *= 2.0
    return fft.dct(y, type=1) / (2 * n)


def _sin_synth(coef):
    """``sum_k coef_k sin(k theta_j)`` at interior nodes ``j = 1..N-1``."""
    return 0.5 * fft.dst(coef[1:-1], type=1)


def round_laplacian(values):
    """Axisymmetric Laplacian on the unit sphere, ``f'' + cot(theta) f'``, spectrally."""
    n = len(values) - 1
    a = _cos_coeffs(values)
    k = np.arange(n + 1, dtype=float)
    f2 = _cos_synth(-(k ** 2) * a)
    theta = np.pi * np.arange(n + 1) / n
    out = f2.copy()
    out[1:-1] += np.cos(theta[1:-1]) * _sin_synth(-k * a) / np.sin(theta[1:-1])
    # cot(theta) f' -> f'' at both poles
    out[0] = 2.0 * f2[0]
    out[-1] = 2.0 * f2[-1]
    return out


def sphere_integral(values):
    """``int_0^pi f(theta) sin(theta) d theta`` from the cosine coefficients."""
    a = _cos_coeffs(values)
    k = np.arange(len(a))
    weights = np.zeros(len(a))
    even = k % 2 == 0
    weights[even] = 2.0 / (1.0 - k[even].astype(float) ** 2)
    return float(a @ weights)


# ---------------------------------------------------------------------------
# flow state


@dataclass
class FlowState:
    t: float
    phi: np.ndarray = field(repr=False)
    residual: Optional[float] = None

    @property
    def n(self):
        return len(self.phi) - 1

    @property
    def theta(self):
        return np.pi * np.arange(self.n + 1) / self.n

    @property
    def spacing(self):
        return math.pi / self.n

    @cached_property
    def kappa(self):
        return np.exp(-2.0 * self.phi) * (1.0 - round_laplacian(self.phi))

    @property
    def kappa_min(self):
        return float(np.min(self.kappa))

    @property
    def kappa_max(self):
        return float(np.max(self.kappa))

    @property
    def area(self):
        return 2.0 * math.pi * sphere_integral(np.exp(2.0 * self.phi))

    def laplacian(self, values):
        """Laplace--Beltrami operator of the current metric."""
        return np.exp(-2.0 * self.phi) * round_laplacian(values)

    def _log_kappa_laplacian(self):
        k = self.kappa
        if np.any(k <= 0):
            raise ModelError("curvature lost positivity")
        return self.laplacian(np.log(k)), k

    @property
    def harnack(self):
        """``Delta log kappa + kappa - 1`` on the grid."""
        lap, k = self._log_kappa_laplacian()
        return lap + k - 1.0

    @property
    def harnack_half(self):
        """``Delta log kappa / 2 + kappa - 1``, the Harnack quantity matched to this flow's speed."""
        lap, k = self._log_kappa_laplacian()
        return 0.5 * lap + k - 1.0

    @property
    def delta_log_kappa_minus_5kappa(self):
        k = self.kappa
        return self.laplacian(np.log(k)) - 5.0 * k

    @cached_property
    def _kappa_laplacian(self):
        return self.laplacian(self.kappa)

    def curvature_rhs(self, diffusion=0.5):
        """``diffusion * Delta kappa + kappa^2 - kappa``.

        ``d/dt g = (1 - kappa) g`` moves curvature with diffusion ``1/2``;
        ``diffusion=1`` gives the unit-diffusion form for comparison.
        """
        k = self.kappa
        return diffusion * self._kappa_laplacian + k * k - k

    def cfl_limit(self):
        return CFL_SAFETY * self.spacing ** 2 / max(self.kappa_max, 1e-300)


def round_state(n=128):
    return FlowState(0.0, np.zeros(n + 1))


def _legendre2(x):
    return 0.5 * (3.0 * x * x - 1.0)


def _pinching_of(beta):
    # kappa of phi = beta P2(cos theta) is proportional to exp(-2 beta P2)(1 + 6 beta P2), P2 in [-1/2, 1]
    p = np.linspace(-0.5, 1.0, 4001)
    k = np.exp(-2.0 * beta * p) * (1.0 + 6.0 * beta * p)
    return float(k.min() / k.max())


def pinched_state(alpha, n=128):
    """Axisymmetric data ``phi = beta P2(cos theta) + c`` with curvature ratio ``alpha`` and area ``4 pi``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    theta = np.pi * np.arange(n + 1) / n
    if alpha == 1:
        return FlowState(0.0, np.zeros(n + 1))
    beta = optimize.brentq(lambda b: _pinching_of(b) - alpha, 1e-12, 0.2, xtol=1e-15)
    phi = beta * _legendre2(np.cos(theta))
    area = 2.0 * math.pi * sphere_integral(np.exp(2.0 * phi))
    phi = phi + 0.5 * math.log(4.0 * math.pi / area)
    return FlowState(0.0, phi)


# ---------------------------------------------------------------------------
# time stepping


def _phi_rate(phi):
    kappa = np.exp(-2.0 * phi) * (1.0 - round_laplacian(phi))
    return 0.5 * (1.0 - kappa)


def flow_step(state: FlowState, dt, check_residual=True):
    """One classical RK4 step of ``d/dt phi = (1 - kappa)/2``.

    Raises :class:`CFLViolation` if ``dt`` exceeds
    ``0.25 (pi/N)^2 / max kappa``. The returned state carries the sup-norm
    of ``d/dt kappa - (Delta kappa / 2 + kappa^2 - kappa)``, with the time
    derivative from the step difference and the right side averaged over
    the step.
    """
    limit = state.cfl_limit()
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:.3g} exceeds the explicit limit {limit:.3g}")
    phi = state.phi
    k1 = _phi_rate(phi)
    k2 = _phi_rate(phi + 0.5 * dt * k1)
    k3 = _phi_rate(phi + 0.5 * dt * k2)
    k4 = _phi_rate(phi + dt * k3)
    new = FlowState(state.t + dt, phi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    kappa_new = new.kappa
    if np.any(kappa_new <= 0):
        raise ModelError(f"curvature lost positivity at t = {new.t:.6g}")
    if check_residual:
        dk = (kappa_new - state.kappa) / dt
        rhs = 0.5 * (state.curvature_rhs() + new.curvature_rhs())
        scale = 1.0 + float(np.max(np.abs(rhs)))
        new.residual = float(np.max(np.abs(dk - rhs)))
        if new.residual > RESIDUAL_TOL * scale:
            raise SolverError(f"curvature evolution residual {new.residual:.3g} at t = {new.t:.6g}")
    return new


def advance(state, dt, check_residual=True):
    """Advance by ``dt`` in equal substeps that respect the explicit limit.

    Returns ``(state, substeps)``; the state's residual is the worst over
    the substeps.
    """
    n_sub = max(1, math.ceil(dt / state.cfl_limit() * (1 + 1e-9)))
    h = dt / n_sub
    worst = 0.0
    for i in range(n_sub):
        try:
            state = flow_step(state, h, check_residual)
        except CFLViolation:
            # curvature grew inside the interval; finish with smaller steps
            state, more = advance(state, dt - i * h, check_residual)
            if state.residual is not None:
                state.residual = max(worst, state.residual)
            return state, i + more
        if state.residual is not None:
            worst = max(worst, state.residual)
    state.residual = worst if check_residual else None
    return state, n_sub


# ---------------------------------------------------------------------------
# traces


TRACE_COLUMNS = (
    "t",
    "kappa_min",
    "kappa_max",
    "area",
    "harnack_floor_gap",
    "margin_closed_form",
    "margin_measured",
    "margin_pointwise",
    "harnack_half_floor_gap",
)


@dataclass
class FlowTrace:
    alpha: float
    rows: list = field(default_factory=list)
    steps: int = 0
    max_residual: float = 0.0
    initial_area: float = 4 * math.pi

    def column(self, name):
        i = TRACE_COLUMNS.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def first_positive(self, name):
        t = self.column("t")
        v = self.column(name)
        ok = np.nonzero(v > 0)[0]
        return None if len(ok) == 0 else float(t[ok[0]])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(["" if x is None else repr(float(x)) for x in r])
        return buf.getvalue()

    def summary(self):
        area = self.column("area")
        return {
            "alpha": self.alpha,
            "n_rows": len(self.rows),
            "steps": self.steps,
            "max_residual": self.max_residual,
            "max_area_drift": float(np.max(np.abs(area - self.initial_area)) / self.initial_area),
            "first_positive_closed_form": self.first_positive("margin_closed_form"),
            "first_positive_measured": self.first_positive("margin_measured"),
            "min_harnack_floor_gap": float(np.nanmin(self.column("harnack_floor_gap"))),
            "min_harnack_half_floor_gap": float(np.nanmin(self.column("harnack_half_floor_gap"))),
        }


def _row(state, alpha):
    t = state.t
    kmin, kmax = state.kappa_min, state.kappa_max
    pointwise_core = float(np.min(state.delta_log_kappa_minus_5kappa))
    if t > 0:
        floor = -math.exp(t) / math.expm1(t)
        gap = float(np.min(state.harnack)) - floor
        gap_half = float(np.min(state.harnack_half)) - floor
        measured = 1.0 + floor - 6.0 * kmax + 11.0 * kmin
        try:
            closed = ode_bounds(alpha, t).margin
        except BoundsInvalid:
            closed = None
    else:
        gap = gap_half = measured = closed = None
    return (t, kmin, kmax, state.area, gap, closed, measured, pointwise_core + 11.0 * kmin, gap_half)


def dominance_trace(state, alpha, horizon, dt, check_residual=True):
    """Flow ``state`` to ``horizon`` recording one trace row every ``dt``."""
    trace = FlowTrace(float(alpha), initial_area=state.area)
    trace.rows.append(_row(state, alpha))
    n_out = int(round(horizon / dt))
    for i in range(n_out):
        target = (i + 1) * dt
        state, taken = advance(state, target - state.t, check_residual)
        state.t = target
        trace.steps += taken
        if state.residual is not None:
            trace.max_residual = max(trace.max_residual, state.residual)
        trace.rows.append(_row(state, alpha))
    return trace, state


def simulate(alpha, n=512, dt=1e-4, horizon=0.6, check_residual=True):
    """Flow ``alpha``-pinched data on a grid of ``n`` intervals; returns ``(trace, final state)``."""
    return dominance_trace(pinched_state(alpha, n), alpha, horizon, dt, check_residual)
