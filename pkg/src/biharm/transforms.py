"""Kelvin inversion and the logarithmic change of variables for radial traces.

With s = 1/r and v̄(s) = u(r)/r - L, a radial solution of Δ²u = -u^{-q}
satisfies

    v̄'''' + (4/s) v̄''' + s^{q-7} (v̄ + L)^{-q} = 0,

for any constant L, since the linear function L·r is biharmonic and
v̄ + L = u/r does not depend on L. Setting t = -ln s moves s -> 0 to t -> ∞.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import _stencil
from .errors import NonPositiveL, NotGlobal, SOutOfRange, TooFewSamples
from .radial_ode import ResidualProfile, SolutionTrace

MIN_SAMPLES = 9
# the transformed checks look at s -> 0
CHECK_MIN_RADIUS = 10.0


@dataclass(frozen=True, eq=False)
class KelvinTrace:
    """Samples ordered by increasing r, so ``s`` is strictly decreasing.

    ``dvbar`` is dv̄/ds when it is known (from the stored u' of a trace).
    """

    s: np.ndarray
    vbar: np.ndarray
    L: float
    q: float
    dvbar: np.ndarray | None = None

    def __len__(self):
        return len(self.s)

    def interpolant(self):
        order = np.argsort(self.s)
        s = self.s[order]
        keep = np.concatenate([[True], np.diff(s) > 0])
        if self.dvbar is not None:
            return CubicHermiteSpline(s[keep], self.vbar[order][keep], self.dvbar[order][keep])
        return CubicSpline(s[keep], self.vbar[order][keep])


@dataclass(frozen=True, eq=False)
class EmdenTrace:
    t: np.ndarray
    zbar: np.ndarray
    L: float
    q: float


@dataclass(frozen=True, eq=False)
class XiProfile:
    r: np.ndarray
    xi: np.ndarray
    L: float


def _check_L(L):
    if not L > 0:
        raise NonPositiveL(f"L must be positive, got {L!r}")


def kelvin(trace: SolutionTrace, L: float, r_min: float = 1.0) -> KelvinTrace:
    """Map the samples with r >= ``r_min`` to ``s = 1/r``, ``vbar = u/r - L``."""
    _check_L(L)
    if not trace.is_global:
        raise NotGlobal(f"trace terminated by {trace.termination.kind}")
    keep = trace.r >= r_min
    r, u, du = trace.r[keep], trace.u[keep], trace.du[keep]
    return KelvinTrace(1.0 / r, u / r - L, float(L), trace.q, u - r * du)


def inverse_kelvin(ktrace: KelvinTrace) -> SolutionTrace:
    """Rebuild ``(r, u)`` from a Kelvin trace; u' comes from dv̄/ds when present."""
    r = 1.0 / ktrace.s
    u = r * (ktrace.vbar + ktrace.L)
    du = None if ktrace.dvbar is None else (u - ktrace.dvbar) / r
    return SolutionTrace.from_arrays(r, u, du, q=ktrace.q)


def residual_avg_ode(
    ktrace: KelvinTrace,
    window=None,
    include_source=True,
    n_points=400,
    eta=_stencil.DEFAULT_ETA,
) -> ResidualProfile:
    """Pointwise residual of the transformed equation on an s-window.

    Derivatives come from 7-point stencils of spacing ``eta * s`` on the
    cubic interpolant of v̄. ``window`` is ``(s_lo, s_hi)`` and defaults to
    the samples with r >= 10. Relative residuals divide by the largest term.
    """
    if len(ktrace) < MIN_SAMPLES:
        raise TooFewSamples(f"need >= {MIN_SAMPLES} samples, got {len(ktrace)}")
    s_min, s_max = float(np.min(ktrace.s)), float(np.max(ktrace.s))
    if window is None:
        window = (s_min, min(s_max, 1.0 / CHECK_MIN_RADIUS))
    lo, hi = max(window[0], s_min), min(window[1], s_max)
    ss = _stencil.stencil_points(lo, hi, n_points, eta)
    if len(ss) == 0:
        raise TooFewSamples("window too narrow for a 7-point stencil")
    f = ktrace.interpolant()
    d = _stencil.local_derivatives(f, ss, eta)
    t1 = d[4]
    t2 = 4.0 * d[3] / ss
    if include_source:
        t3 = ss ** (ktrace.q - 7.0) * (f(ss) + ktrace.L) ** -ktrace.q
    else:
        t3 = np.zeros_like(ss)
    res = t1 + t2 + t3
    scale = np.maximum.reduce([np.abs(t1), np.abs(t2), np.abs(t3)])
    rel = np.abs(res) / np.where(scale > 0, scale, 1.0)
    return ResidualProfile(ss, res, rel)


def emden(ktrace: KelvinTrace) -> EmdenTrace:
    """``t = -ln s`` with values copied, ordered by increasing t."""
    s = np.asarray(ktrace.s, dtype=float)
    if np.any(s > 1) or np.any(s <= 0):
        raise SOutOfRange("all s must lie in (0, 1]")
    order = np.argsort(-s, kind="stable")
    return EmdenTrace(-np.log(s[order]), np.asarray(ktrace.vbar)[order], ktrace.L, ktrace.q)


def extract_xi(trace: SolutionTrace, L: float) -> XiProfile:
    """ξ(r) = u(r)/r - L on every sample; same arithmetic as :func:`kelvin`."""
    _check_L(L)
    if not trace.is_global:
        raise NotGlobal(f"trace terminated by {trace.termination.kind}")
    return XiProfile(trace.r.copy(), trace.u / trace.r - L, float(L))


def decay_exponent(x, y):
    """Least-squares slope of ln|y| against ln x (zeros dropped)."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = y > 0
    if keep.sum() < 2:
        raise TooFewSamples("need >= 2 nonzero values")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _write(path, header, cols, metadata):
    with open(path, "w") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}: {val}\n")
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def write_kelvin_csv(ktrace: KelvinTrace, path, metadata=None):
    _write(path, ("s", "vbar"), (ktrace.s, ktrace.vbar), metadata)


def write_emden_csv(etrace: EmdenTrace, path, metadata=None):
    _write(path, ("t", "zbar"), (etrace.t, etrace.zbar), metadata)
