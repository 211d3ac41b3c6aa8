"""Extinct/global classification and threshold bisection in β = Δu(0).

Global means the run survived to the finite horizon ``controls.r_target``.
For β below the threshold the solution reaches zero at a finite radius that
grows with β; above it the solution exists for all r. A finite horizon turns
this into a computable two-sided test whose switch point approaches the true
threshold from below as the horizon grows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWindow, InvalidBracket, NonMonotoneWitness, NotGlobal, PreconditionError
from .radial_ode import EXTINCTION, REACHED_TARGET, STEP_UNDERFLOW, IntegratorControls, SolutionTrace, integrate

EXTINCT = "Extinct"
GLOBAL = "Global"

AGREEMENT_TOL = 0.01
SEED_LIMIT = 2.0**40
# relative slack when comparing extinction radii of two extinct runs
RADIUS_SLACK = 1e-6


@dataclass(frozen=True)
class ShootingOutcome:
    kind: str
    radius: float
    beta: float
    q: float
    r_target: float
    underflow: bool = False
    trace: SolutionTrace | None = field(default=None, repr=False, compare=False)

    @property
    def is_global(self) -> bool:
        return self.kind == GLOBAL

    def to_dict(self):
        return {
            "kind": self.kind,
            "radius": self.radius,
            "beta": self.beta,
            "q": self.q,
            "r_target": self.r_target,
            "underflow": self.underflow,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], float(d["radius"]), float(d["beta"]), float(d["q"]), float(d["r_target"]), bool(d.get("underflow", False)))


def classify(beta: float, q: float, controls: IntegratorControls | None = None) -> ShootingOutcome:
    """Integrate once and label the run. Step underflow counts as extinction."""
    controls = controls or IntegratorControls()
    trace = integrate(beta, q, controls)
    kind = trace.termination.kind
    if kind == REACHED_TARGET:
        return ShootingOutcome(GLOBAL, controls.r_target, float(beta), float(q), controls.r_target, trace=trace)
    return ShootingOutcome(
        EXTINCT,
        trace.termination.radius,
        float(beta),
        float(q),
        controls.r_target,
        underflow=kind == STEP_UNDERFLOW,
        trace=trace,
    )


@dataclass(frozen=True)
class ThresholdCertificate:
    """Bracket ``[beta_lo, beta_hi]`` with beta_lo extinct and beta_hi global."""

    q: float
    lo: ShootingOutcome
    hi: ShootingOutcome
    r_target: float
    iterations: int = 0
    history: tuple = ()
    controls: IntegratorControls | None = field(default=None, compare=False)

    @property
    def beta_lo(self) -> float:
        return self.lo.beta

    @property
    def beta_hi(self) -> float:
        return self.hi.beta

    @property
    def width(self) -> float:
        return self.hi.beta - self.lo.beta

    @property
    def beta_star(self) -> float:
        return 0.5 * (self.lo.beta + self.hi.beta)

    def verify(self, controls: IntegratorControls | None = None) -> bool:
        """Re-run both endpoints (default: at the certified horizon)."""
        controls = controls or self.controls or IntegratorControls(r_target=self.r_target)
        return (not classify(self.beta_lo, self.q, controls).is_global) and classify(self.beta_hi, self.q, controls).is_global

    def to_dict(self):
        d = {
            "q": self.q,
            "beta_lo": self.beta_lo,
            "beta_hi": self.beta_hi,
            "width": self.width,
            "r_target": self.r_target,
            "outcomes": [self.lo.to_dict(), self.hi.to_dict()],
            "iterations": self.iterations,
            "history": [list(h) for h in self.history],
        }
        if self.controls is not None:
            d["controls"] = self.controls.to_dict()
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        controls = IntegratorControls(**d["controls"]) if "controls" in d else None
        lo, hi = (ShootingOutcome.from_dict(o) for o in d["outcomes"])
        return cls(
            float(d["q"]),
            lo,
            hi,
            float(d["r_target"]),
            int(d.get("iterations", 0)),
            tuple(tuple(h) for h in d.get("history", ())),
            controls,
        )


class _Monitor:
    """Records every evaluated β and raises on outcomes contradicting monotonicity.

    Two witnesses are checked: a global run below an extinct one, and an
    extinct run whose extinction radius is smaller than that of an extinct
    run at lower β (radii must grow with β by the comparison principle).
    Underflow-flagged radii are excluded from the radius check.
    """

    def __init__(self):
        self.history = []
        self.max_extinct = -math.inf
        self.min_global = math.inf
        self.radii = []

    def add(self, out: ShootingOutcome):
        self.history.append((out.beta, out.kind, out.radius))
        if out.is_global:
            if out.beta <= self.max_extinct:
                raise NonMonotoneWitness(f"global at beta={out.beta!r} below extinct beta={self.max_extinct!r}")
            self.min_global = min(self.min_global, out.beta)
            return
        if out.beta >= self.min_global:
            raise NonMonotoneWitness(f"extinct at beta={out.beta!r} above global beta={self.min_global!r}")
        self.max_extinct = max(self.max_extinct, out.beta)
        if out.underflow:
            return
        for b, r in self.radii:
            if b < out.beta and out.radius < r * (1 - RADIUS_SLACK):
                raise NonMonotoneWitness(
                    f"extinction radius {out.radius:.9g} at beta={out.beta!r} is below {r:.9g} at smaller beta={b!r}"
                )
        self.radii.append((out.beta, out.radius))


def seed_bracket(q: float, controls: IntegratorControls | None = None, start: float = 1.0, _monitor=None):
    """Geometric search for a bracket: beta = 0 extinct, then 1, 2, 4, ... until global."""
    controls = controls or IntegratorControls()
    mon = _monitor or _Monitor()
    lo = classify(0.0, q, controls)
    mon.add(lo)
    if lo.is_global:
        raise InvalidBracket("beta = 0 is global; no threshold above zero")
    beta = start
    while beta <= SEED_LIMIT:
        out = classify(beta, q, controls)
        mon.add(out)
        if out.is_global:
            return lo, out
        lo = out
        beta *= 2.0
    raise InvalidBracket(f"no global run found up to beta={SEED_LIMIT:g}")


def find_beta_star(
    q: float,
    bracket=None,
    tol: float = 1e-6,
    controls: IntegratorControls | None = None,
    max_iter: int = 200,
) -> ThresholdCertificate:
    """Bisect until the bracket width is at most ``tol``.

    ``bracket=None`` seeds by geometric search. Bisection also stops when the
    midpoint is no longer representable between the endpoints.
    """
    if not (tol > 0 and math.isfinite(tol)):
        raise PreconditionError(f"tol must be positive, got {tol!r}")
    controls = controls or IntegratorControls()
    mon = _Monitor()
    if bracket is None:
        lo, hi = seed_bracket(q, controls, _monitor=mon)
    else:
        b_lo, b_hi = (float(b) for b in bracket)
        if not b_lo < b_hi:
            raise InvalidBracket(f"bracket must satisfy lo < hi, got ({b_lo!r}, {b_hi!r})")
        lo = classify(b_lo, q, controls)
        if lo.is_global:
            raise InvalidBracket(f"lower endpoint beta={b_lo!r} is global")
        hi = classify(b_hi, q, controls)
        if not hi.is_global:
            raise InvalidBracket(f"upper endpoint beta={b_hi!r} is extinct")
        mon.add(lo)
        mon.add(hi)

    n = 0
    while hi.beta - lo.beta > tol and n < max_iter:
        mid = 0.5 * (lo.beta + hi.beta)
        if not lo.beta < mid < hi.beta:
            break
        out = classify(mid, q, controls)
        mon.add(out)
        n += 1
        if out.is_global:
            hi = out
        else:
            lo = out
    return ThresholdCertificate(float(q), lo, hi, controls.r_target, n, tuple(mon.history), controls)


@dataclass(frozen=True)
class OrderingReport:
    beta1: float
    beta2: float
    q: float
    grid: np.ndarray
    difference: np.ndarray

    @property
    def min_difference(self) -> float:
        return float(np.min(self.difference))

    @property
    def ordered(self) -> bool:
        return self.min_difference > 0


def compare_solutions(
    beta1: float,
    beta2: float,
    q: float,
    controls: IntegratorControls | None = None,
    n_grid: int = 400,
    r_min: float = 1e-2,
) -> OrderingReport:
    """u_{beta2} - u_{beta1} on a shared log-spaced grid in ``[r_min, r_target]``."""
    if beta2 < beta1:
        raise PreconditionError(f"need beta2 >= beta1, got {beta1!r} > {beta2!r}")
    controls = controls or IntegratorControls()
    t1 = classify(beta1, q, controls)
    t2 = t1 if beta2 == beta1 else classify(beta2, q, controls)
    for out in (t1, t2):
        if not out.is_global:
            raise NotGlobal(f"beta={out.beta!r} is extinct at r={out.radius:.6g}")
    lo = max(r_min, float(t1.trace.r[0]), float(t2.trace.r[0]))
    grid = np.geomspace(lo, controls.r_target, n_grid)
    diff = t2.trace.interpolant()(grid) - t1.trace.interpolant()(grid)
    return OrderingReport(float(beta1), float(beta2), float(q), grid, diff)


def minimal_window(certificate: ThresholdCertificate, controls: IntegratorControls | None = None, rel_tol: float = AGREEMENT_TOL):
    """Interval ``(r0, r_hi)`` on which the bracket-endpoint traces agree in u.

    Agreement is checked at the samples of the lower (extinct) trace,
    starting from the series radius; the window ends before the first
    sample where the relative gap exceeds ``rel_tol``.
    """
    controls = controls or certificate.controls or IntegratorControls(r_target=certificate.r_target)
    t_lo = integrate(certificate.beta_lo, certificate.q, controls)
    if certificate.width == 0:
        return float(t_lo.r[0]), t_lo.r_end
    t_hi = integrate(certificate.beta_hi, certificate.q, controls)
    r = t_lo.r[t_lo.r <= t_hi.r_end]
    gap = np.abs(t_hi.interpolant()(r) - t_lo.u[: len(r)]) / t_hi.interpolant()(r)
    bad = np.flatnonzero(gap > rel_tol)
    if len(bad) == 0:
        return float(r[0]), float(r[-1])
    if bad[0] < 2:
        raise EmptyWindow("bracket traces disagree from the start")
    return float(r[0]), float(r[bad[0] - 1])


__all__ = [
    "EXTINCT",
    "GLOBAL",
    "EXTINCTION",
    "ShootingOutcome",
    "ThresholdCertificate",
    "OrderingReport",
    "classify",
    "seed_bracket",
    "find_beta_star",
    "compare_solutions",
    "minimal_window",
]
