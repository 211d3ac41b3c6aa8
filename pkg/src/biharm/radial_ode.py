"""Radial profile equation as a first-order system.

For a radial function in three dimensions the equation Δ²u = -u^{-q} becomes,
with v = Δu = u'' + 2u'/r,

    u' = du,  du' = v - 2 du / r,  v' = dv,  dv' = -u^{-q} - 2 dv / r.

Integration starts from a Taylor expansion at a small radius ``r0`` because
the system is singular at the origin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BPoly, CubicHermiteSpline, CubicSpline

from . import _backend, _stencil
from .errors import (
    NonPositiveU,
    PreconditionError,
    StepBudgetExceeded,
    TooFewSamples,
    ZeroRadius,
)

REACHED_TARGET = "reached_target"
EXTINCTION = "extinction"
STEP_UNDERFLOW = "step_underflow"

MAX_SERIES_RADIUS = 1e-3

_STATUS = {0: REACHED_TARGET, 1: EXTINCTION, 2: STEP_UNDERFLOW}


@dataclass(frozen=True)
class RadialState:
    r: float
    u: float
    du: float
    v: float
    dv: float

    def as_array(self):
        return np.array([self.u, self.du, self.v, self.dv])


@dataclass(frozen=True)
class Termination:
    kind: str
    radius: float


@dataclass(frozen=True)
class IntegratorControls:
    """Step control and stopping parameters.

    ``r0=None`` picks the series-start radius from the horizon:
    ``1e-6 * r_target`` clamped to ``[1e-6, 1e-3]``. ``max_step_ratio`` caps
    each step at that fraction of the current radius so traces stay densely
    sampled in ``ln r`` (0 disables the cap).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r0: float | None = None
    r_target: float = 1e3
    u_floor: float = 1e-8
    max_steps: int = 10_000_000
    max_step_ratio: float = 0.05

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "r_target", "u_floor", "max_steps"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise PreconditionError(f"{name} must be positive and finite, got {val!r}")
        if self.r0 is not None and not self.r0 > 0:
            raise ZeroRadius(f"r0 must be positive, got {self.r0!r}")
        if self.start_radius >= self.r_target:
            raise PreconditionError("r0 must be below r_target")
        if self.u_floor >= 1:
            raise PreconditionError("u_floor must be below 1")
        if not 0 <= self.max_step_ratio < 1:
            raise PreconditionError("max_step_ratio must lie in [0, 1)")

    @property
    def start_radius(self) -> float:
        if self.r0 is not None:
            return float(self.r0)
        return min(max(1e-6 * self.r_target, 1e-6), MAX_SERIES_RADIUS)

    def replace(self, **changes) -> IntegratorControls:
        return replace(self, **changes)

    def to_dict(self):
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "r0": self.start_radius,
            "r_target": self.r_target,
            "u_floor": self.u_floor,
            "max_steps": self.max_steps,
            "max_step_ratio": self.max_step_ratio,
        }


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Samples of an integration, stored column-wise.

    Iterating or indexing yields :class:`RadialState` objects.
    """

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    q: float
    beta: float
    termination: Termination
    controls: IntegratorControls | None = None
    err_sum: float = 0.0
    n_rejected: int = 0
    _interp: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        for name in ("r", "u", "du", "v", "dv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, r, u, du=None, v=None, dv=None, *, q=1.0, beta=float("nan")):
        """Build a trace from sampled data (synthetic profiles, CSV imports).

        Missing derivative columns are reconstructed from a cubic spline of
        ``u`` in ``ln r``.
        """
        r = np.asarray(r, dtype=float)
        u = np.asarray(u, dtype=float)
        if du is None or v is None or dv is None:
            spl = CubicSpline(np.log(r), u)
            d1 = spl(np.log(r), 1)
            d2 = spl(np.log(r), 2)
            du_est = d1 / r
            if du is None:
                du = du_est
            if v is None:
                # u'' + 2u'/r = (d2 + d1) / r^2 in log variables
                v = (d2 + d1) / r**2
            if dv is None:
                dv = np.gradient(np.asarray(v, dtype=float), r)
        term = Termination(REACHED_TARGET, float(r[-1]))
        return cls(r, u, np.asarray(du, float), np.asarray(v, float), np.asarray(dv, float), float(q), float(beta), term)

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i):
        return RadialState(
            float(self.r[i]), float(self.u[i]), float(self.du[i]), float(self.v[i]), float(self.dv[i])
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def samples(self):
        return list(self)

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    @property
    def is_global(self) -> bool:
        return self.termination.kind == REACHED_TARGET

    @property
    def estimated_error(self) -> float:
        """Accumulated relative local error in u, scaled to the end value."""
        return self.err_sum * abs(float(self.u[-1]))

    def interpolant(self):
        """Callable ``u(r)``: cubic Hermite in ``ln r`` using the stored slopes."""
        if not self._interp:
            x = np.log(self.r)
            keep = np.concatenate([[True], np.diff(x) > 0])
            spl = CubicHermiteSpline(x[keep], self.u[keep], (self.r * self.du)[keep])
            self._interp.append(lambda rr: spl(np.log(rr)))
        return self._interp[0]

    def hermite_r(self):
        """Callable ``u(r)``: cubic Hermite in r using the stored slopes."""
        if len(self._interp) < 2:
            self.interpolant()
            keep = np.concatenate([[True], np.diff(self.r) > 0])
            self._interp.append(CubicHermiteSpline(self.r[keep], self.u[keep], self.du[keep]))
        return self._interp[1]

    def dense(self):
        """Quintic Hermite ``u(r)`` matching u, u' and u'' = v - 2u'/r at every sample."""
        keep = np.concatenate([[True], np.diff(self.r) > 0])
        y = np.column_stack([self.u, self.du, self.v - 2.0 * self.du / self.r])[keep]
        return BPoly.from_derivatives(self.r[keep], y)


def rhs(state: RadialState, q: float) -> np.ndarray:
    """Derivative of ``(u, du, v, dv)`` with respect to r."""
    if state.u <= 0:
        raise NonPositiveU(f"u must be positive, got {state.u!r}")
    if state.r == 0:
        raise ZeroRadius("rhs is singular at r = 0; start from series_start")
    r = state.r
    return np.array(
        [
            state.du,
            state.v - 2.0 * state.du / r,
            state.dv,
            -(state.u ** -q) - 2.0 * state.dv / r,
        ]
    )


def series_start(beta: float, q: float, r0: float, u0: float = 1.0) -> RadialState:
    """State at ``r0`` from the Taylor expansion about the origin.

    u(r) = u0 + (beta/6) r^2 - u0^{-q}/120 r^4 + q beta u0^{-q-1}/5040 r^6 + O(r^8)
    """
    if not r0 > 0:
        raise ZeroRadius(f"series start radius must be positive, got {r0!r}")
    if r0 > MAX_SERIES_RADIUS:
        raise PreconditionError(f"series start radius must be <= {MAX_SERIES_RADIUS}, got {r0!r}")
    if not u0 > 0:
        raise NonPositiveU(f"u(0) must be positive, got {u0!r}")
    c4 = -(u0 ** -q) / 120.0
    c6 = q * beta * u0 ** (-q - 1.0) / 5040.0
    r2 = r0 * r0
    return RadialState(
        r=r0,
        u=u0 + beta / 6.0 * r2 + c4 * r2 * r2 + c6 * r2 * r2 * r2,
        du=beta / 3.0 * r0 + 4.0 * c4 * r2 * r0 + 6.0 * c6 * r2 * r2 * r0,
        v=beta + 20.0 * c4 * r2 + 42.0 * c6 * r2 * r2,
        dv=40.0 * c4 * r0 + 168.0 * c6 * r2 * r0,
    )


def integrate(beta: float, q: float, controls: IntegratorControls | None = None, u0: float = 1.0) -> SolutionTrace:
    """Integrate outward from the series start until the horizon or extinction."""
    if not (q > 0 and math.isfinite(q)):
        raise PreconditionError(f"q must be positive, got {q!r}")
    if not math.isfinite(beta):
        raise PreconditionError(f"beta must be finite, got {beta!r}")
    controls = controls or IntegratorControls()
    start = series_start(beta, q, controls.start_radius, u0)
    r, y, status, r_event, err_sum, n_rej = _backend.integrate_core(
        (start.u, start.du, start.v, start.dv),
        start.r,
        float(q),
        float(controls.r_target),
        float(controls.rel_tol),
        float(controls.abs_tol),
        float(controls.u_floor),
        int(controls.max_steps),
        float(controls.max_step_ratio),
    )
    if status == 3:
        raise StepBudgetExceeded(
            f"step budget {controls.max_steps} exhausted at r={r_event:.6g} (q={q}, beta={beta})"
        )
    return SolutionTrace(
        r, y[:, 0], y[:, 1], y[:, 2], y[:, 3],
        q=float(q),
        beta=float(beta),
        termination=Termination(_STATUS[status], float(r_event)),
        controls=controls,
        err_sum=float(err_sum),
        n_rejected=int(n_rej),
    )


@dataclass(frozen=True)
class ResidualProfile:
    x: np.ndarray
    residual: np.ndarray
    relative: np.ndarray

    @property
    def max_relative(self) -> float:
        return float(np.max(self.relative))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual)))


RESIDUAL_MIN_RADIUS = 0.1


def residual_window(trace: SolutionTrace, window=None):
    """Default residual window ``[max(2 r0, 0.1), 0.9 r_end]``.

    Below r = 0.1 the fourth difference of u ~ 1 sinks under rounding noise.
    """
    if window is not None:
        return float(window[0]), float(window[1])
    return max(2.0 * float(trace.r[0]), RESIDUAL_MIN_RADIUS), 0.9 * trace.r_end


def residual_biharmonic(
    trace: SolutionTrace,
    window=None,
    include_source=True,
    n_points=400,
    eta=_stencil.DEFAULT_ETA,
) -> ResidualProfile:
    """Pointwise residual of u'''' + 4u'''/r + u^{-q} from the sampled u alone.

    ``u`` is interpolated by a cubic Hermite spline in r (using the stored
    slopes) and resampled on 7-point stencils of spacing ``eta * r`` around
    each evaluation point; every stencil lies inside ``window``. The relative
    residual divides by the largest of the three terms at each point.
    """
    if len(trace) < 7:
        raise TooFewSamples(f"need >= 7 samples, got {len(trace)}")
    lo, hi = residual_window(trace, window)
    lo = max(lo, float(trace.r[0]))
    hi = min(hi, trace.r_end)
    rr = _stencil.stencil_points(lo, hi, n_points, eta)
    if len(rr) == 0:
        raise TooFewSamples("window too narrow for a 7-point stencil")
    u = trace.hermite_r()
    d = _stencil.local_derivatives(u, rr, eta)
    t1 = d[4]
    t2 = 4.0 * d[3] / rr
    t3 = u(rr) ** -trace.q if include_source else np.zeros_like(rr)
    res = t1 + t2 + t3
    scale = np.maximum.reduce([np.abs(t1), np.abs(t2), np.abs(t3)])
    rel = np.abs(res) / np.where(scale > 0, scale, 1.0)
    return ResidualProfile(rr, res, rel)


def laplacian_consistency(trace: SolutionTrace, window=None) -> float:
    """Max |v - (u'' + 2u'/r)| over samples in the residual window.

    u' and u'' come from 7-point finite differences on the raw (nonuniform)
    samples of u. The default window of :func:`residual_window` skips the
    core, where differences of u ~ 1 over steps ~ r0 are rounding-limited,
    and the blow-down before extinction.
    """
    r, u = trace.r, trace.u
    if len(r) < 7:
        raise TooFewSamples(f"need >= 7 samples, got {len(r)}")
    lo, hi = residual_window(trace, window)
    idx = np.arange(3, len(r) - 3)
    idx = idx[(r[idx] >= lo) & (r[idx] <= hi)]
    if len(idx) == 0:
        raise TooFewSamples("no interior samples in the window")
    nodes = idx[:, None] + np.arange(-3, 4)[None, :]
    offsets = r[nodes] - r[idx][:, None]
    vals = u[nodes]
    d1 = np.sum(_stencil.nonuniform_weights(offsets, 1) * vals, axis=1)
    d2 = np.sum(_stencil.nonuniform_weights(offsets, 2) * vals, axis=1)
    lap = d2 + 2.0 * d1 / r[idx]
    return float(np.max(np.abs(trace.v[idx] - lap)))


CSV_COLUMNS = ("r", "u", "du", "v", "dv")


def write_trace_csv(trace: SolutionTrace, path, metadata=None):
    """CSV with header ``r,u,du,v,dv``; metadata goes in leading ``#`` lines."""
    with open(path, "w", newline="") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in zip(trace.r, trace.u, trace.du, trace.v, trace.dv):
            w.writerow([f"{x:.17g}" for x in row])


def read_trace_csv(path, q=1.0, beta=float("nan")) -> SolutionTrace:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if tuple(rows[0]) != CSV_COLUMNS:
        raise PreconditionError(f"unexpected CSV header {rows[0]!r}")
    data = np.array(rows[1:], dtype=float)
    return SolutionTrace.from_arrays(*data.T, q=q, beta=beta)
