"""Growth-rate fits, the linear coefficient L and remainder decay rates.

Growth of radial entire solutions at large r:

    minimal, 1 < q < 3   u ~ r^{4/(1+q)}
    minimal, q = 3       u ~ r log r (more precisely r (2 ln r)^{1/4})
    minimal, q > 3       u/r -> L with u/r - L = O(r^{-1}), O(r^{-1} log r)
                         or O(r^{3-q}) for q > 4, q = 4, 3 < q < 4
    non-minimal          u ~ r^2

All fits are ordinary least squares over an explicit window of a trace,
sampled on a log-uniform grid through the trace interpolant.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import shooting, transforms
from .errors import NotGlobal, PreconditionError, TooFewSamples, WindowTooSmall, WrongRegime
from .radial_ode import IntegratorControls, SolutionTrace, integrate

MINIMAL_SUB3 = "MinimalSub3"
MINIMAL_Q3 = "MinimalQ3"
MINIMAL_SUPER3 = "MinimalSuper3"
NON_MINIMAL = "NonMinimal"

REGIME_HORIZON = 1e10
REGIME_TOL = 1e-14
FIT_POINTS = 300
MIN_WINDOW_RATIO = 10.0
Q3_GOOD_FIT = 0.05
DEFAULT_THETA = 0.5
SLOPE_MARGIN = 0.1


def _grid(trace: SolutionTrace, window, n=FIT_POINTS):
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise PreconditionError(f"window must satisfy 0 < lo < hi, got {window!r}")
    if lo < trace.r[0] * (1 - 1e-12) or hi > trace.r_end * (1 + 1e-12):
        raise PreconditionError(f"window {window!r} outside trace [{trace.r[0]:.6g}, {trace.r_end:.6g}]")
    x = np.geomspace(lo, hi, n)
    return x, trace.interpolant()(x)


def _lstsq(columns, y):
    X = np.column_stack(columns)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef, y - X @ coef


def _rms(a):
    return float(np.sqrt(np.mean(np.square(a))))


def tail_window(r_hi: float, r_lo: float = 0.0):
    """Fit window ``[R^{1/5}, R^{1/2}]`` for a trace that is valid up to R.

    The lower edge stays away from the core; the upper edge keeps the
    finite-horizon contamination (relative size ~ r/R for q > 3) small.
    """
    lo = max(r_hi**0.2, r_lo)
    hi = r_hi**0.5
    if not hi >= MIN_WINDOW_RATIO * lo:
        raise WindowTooSmall(f"tail window [{lo:.3g}, {hi:.3g}] spans less than a decade")
    return float(lo), float(hi)


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    residual: float


def fit_growth_exponent(trace: SolutionTrace, window) -> PowerFit:
    """Slope p of ln u against ln r; residual is the RMS log misfit."""
    x, u = _grid(trace, window)
    if np.any(u <= 0):
        raise PreconditionError("u must be positive on the window")
    coef, res = _lstsq([np.log(x), np.ones_like(x)], np.log(u))
    return PowerFit(float(coef[0]), _rms(res))


@dataclass(frozen=True)
class LogLinearFit:
    c: float
    d: float
    residual: float
    power_residual: float

    @property
    def good(self) -> bool:
        return self.residual < Q3_GOOD_FIT

    @property
    def beats_power(self) -> bool:
        return self.residual < self.power_residual


def fit_q3_loglinear(trace: SolutionTrace, window) -> LogLinearFit:
    """Fit u/r = c ln r + d; compare with the pure power law u = A r^p.

    Both residuals are RMS misfits of u/r divided by the RMS of u/r.
    """
    if window[1] < MIN_WINDOW_RATIO * window[0]:
        raise WindowTooSmall("log-linear fit needs a window spanning a decade")
    x, u = _grid(trace, window)
    g = u / x
    lx = np.log(x)
    coef, res = _lstsq([lx, np.ones_like(x)], g)
    pc, _ = _lstsq([lx, np.ones_like(x)], np.log(u))
    g_pow = np.exp(pc[0] * lx + pc[1]) / x
    scale = _rms(g)
    return LogLinearFit(float(coef[0]), float(coef[1]), _rms(res) / scale, _rms(g - g_pow) / scale)


def remainder_basis(q: float, x):
    """Correction terms after the constant: {r^{-1}, r^{3-q}} or {ln r/r, 1/r} at q = 4."""
    if q == 4:
        return [np.log(x) / x, 1.0 / x]
    return [1.0 / x, x ** (3.0 - q)]


@dataclass(frozen=True)
class LFit:
    L: float
    coefficients: tuple
    residual: float
    window: tuple


def estimate_L(trace: SolutionTrace, window, q: float | None = None) -> LFit:
    """Extrapolated limit of u/r from a least-squares fit of u/r = L + corrections."""
    q = trace.q if q is None else float(q)
    if q <= 3:
        raise WrongRegime(f"u/r has a finite limit only for q > 3, got q={q}")
    x, u = _grid(trace, window)
    g = u / x
    coef, res = _lstsq([np.ones_like(x)] + remainder_basis(q, x), g)
    return LFit(float(coef[0]), tuple(float(c) for c in coef[1:]), _rms(res), (float(window[0]), float(window[1])))


@dataclass(frozen=True)
class RateFit:
    sigma: float
    residual: float
    log_sigma: float | None = None
    log_residual: float | None = None

    @property
    def preferred(self) -> str:
        if self.log_residual is not None and self.log_residual < self.residual:
            return "log"
        return "power"


def fit_remainder_rate(trace: SolutionTrace, L_hat: float, window, q: float | None = None) -> RateFit:
    """σ from ln|u/r - L| ≈ c - σ ln r; at q = 4 also fits ln|u/r - L| ≈ c + ln ln r - σ ln r."""
    q = trace.q if q is None else float(q)
    if q <= 3:
        raise WrongRegime(f"remainder rate needs q > 3, got q={q}")
    x, u = _grid(trace, window)
    e = np.abs(u / x - L_hat)
    keep = e > 0
    if keep.sum() < 3:
        raise TooFewSamples("remainder vanishes on the window")
    lx, le = np.log(x[keep]), np.log(e[keep])
    coef, res = _lstsq([lx, np.ones_like(lx)], le)
    fit = RateFit(float(-coef[0]), _rms(res))
    if q == 4:
        lc, lres = _lstsq([lx, np.ones_like(lx)], le - np.log(lx))
        fit = RateFit(fit.sigma, fit.residual, float(-lc[0]), _rms(lres))
    return fit


@dataclass(frozen=True)
class MainConditionVerdict:
    passed: bool
    slope: float
    theta: float
    margin: float

    @property
    def label(self) -> str:
        return "Pass" if self.passed else "Fail"


def check_main_condition(
    trace: SolutionTrace,
    L_hat: float,
    theta: float = DEFAULT_THETA,
    window=None,
    margin: float = SLOPE_MARGIN,
) -> MainConditionVerdict:
    """Pass if m(r) = r^θ |u/r - L| has log-log slope below ``-margin`` on the window.

    The slope is the fitted slope of ln|u/r - L| plus θ, so the verdict is
    monotone in θ by construction.
    """
    if not 0 < theta < 1:
        raise PreconditionError(f"theta must lie in (0, 1), got {theta!r}")
    if trace.q <= 3:
        raise WrongRegime(f"main condition concerns q > 3, got q={trace.q}")
    window = window or tail_window(trace.r_end)
    x, u = _grid(trace, window)
    e = np.abs(u / x - L_hat)
    keep = e > 0
    base = float(np.polyfit(np.log(x[keep]), np.log(e[keep]), 1)[0])
    slope = base + theta
    return MainConditionVerdict(slope < -margin, slope, float(theta), float(margin))


@dataclass
class RegimeReport:
    q: float
    beta: float
    label: str
    p: float
    p_residual: float
    window: tuple
    minimal_window: tuple | None = None
    L_hat: float | None = None
    L_residual: float | None = None
    sigma: float | None = None
    sigma_residual: float | None = None
    spread: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("window", "minimal_window"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def csv_row(self):
        """Values for the columns ``q,beta,label,p,L_hat,sigma,window_lo,window_hi``."""
        return [self.q, self.beta, self.label, self.p, self.L_hat, self.sigma, self.window[0], self.window[1]]


SWEEP_COLUMNS = ("q", "beta", "label", "p", "L_hat", "sigma", "window_lo", "window_hi")


def minimal_label(q: float) -> str:
    if q < 3:
        return MINIMAL_SUB3
    if q == 3:
        return MINIMAL_Q3
    return MINIMAL_SUPER3


def _fit_trace(trace: SolutionTrace, window, q: float, minimal: bool, theta: float):
    pf = fit_growth_exponent(trace, window)
    out = {"p": pf.exponent, "p_residual": pf.residual, "extras": {}}
    if minimal and q == 3:
        lf = fit_q3_loglinear(trace, window)
        out["extras"].update(
            q3_c=lf.c, q3_residual=lf.residual, q3_power_residual=lf.power_residual, q3_beats_power=lf.beats_power
        )
    if q > 3:
        lfit = estimate_L(trace, window, q)
        out["L_hat"] = lfit.L
        out["L_residual"] = lfit.residual
        if minimal:
            rate = fit_remainder_rate(trace, lfit.L, window, q)
            out["sigma"] = rate.sigma
            out["sigma_residual"] = rate.residual
            if rate.log_sigma is not None:
                out["extras"].update(log_sigma=rate.log_sigma, log_residual=rate.log_residual, preferred=rate.preferred)
        verdict = check_main_condition(trace, lfit.L, theta, window)
        out["extras"].update(main_condition=verdict.label, main_condition_slope=verdict.slope)
    return out


def regime_report(
    q: float,
    beta: float | None = None,
    controls: IntegratorControls | None = None,
    tol: float = REGIME_TOL,
    theta: float = DEFAULT_THETA,
    window=None,
    certificate: shooting.ThresholdCertificate | None = None,
) -> RegimeReport:
    """Classify the growth regime of the minimal solution (``beta=None``) or of ``beta``.

    The threshold is bracketed at the regime horizon. For the minimal
    solution both bracket traces are fitted; the reported values come from
    the global endpoint and ``spread`` holds the absolute differences.
    """
    controls = controls or IntegratorControls(r_target=REGIME_HORIZON)
    cert = certificate or shooting.find_beta_star(q, None, tol, controls)
    if beta is None:
        mw = shooting.minimal_window(cert, controls)
        win = tuple(window) if window else tail_window(mw[1], mw[0])
        fits = [_fit_trace(out.trace or integrate(out.beta, q, controls), win, q, True, theta) for out in (cert.hi, cert.lo)]
        main, other = fits
        spread = {k: abs(main[k] - other[k]) for k in ("p", "L_hat", "sigma") if k in main}
        extras = dict(main["extras"], beta_lo=cert.beta_lo, beta_hi=cert.beta_hi)
        if q > 3:
            kt = transforms.kelvin(cert.hi.trace, main["L_hat"])
            prof = transforms.residual_avg_ode(kt, window=(1.0 / win[1], 1.0 / win[0]))
            extras["transform_residual"] = prof.max_relative
        return RegimeReport(
            q=float(q),
            beta=cert.beta_hi,
            label=minimal_label(q),
            p=main["p"],
            p_residual=main["p_residual"],
            window=win,
            minimal_window=mw,
            L_hat=main.get("L_hat"),
            L_residual=main.get("L_residual"),
            sigma=main.get("sigma"),
            sigma_residual=main.get("sigma_residual"),
            spread=spread,
            extras=extras,
        )

    trace = integrate(beta, q, controls)
    if not trace.is_global:
        raise NotGlobal(f"beta={beta!r} is extinct at r={trace.termination.radius:.6g}")
    win = tuple(window) if window else tail_window(trace.r_end)
    minimal = cert.beta_lo < beta <= cert.beta_hi
    fit = _fit_trace(trace, win, q, minimal, theta)
    return RegimeReport(
        q=float(q),
        beta=float(beta),
        label=minimal_label(q) if minimal else NON_MINIMAL,
        p=fit["p"],
        p_residual=fit["p_residual"],
        window=win,
        L_hat=fit.get("L_hat"),
        L_residual=fit.get("L_residual"),
        sigma=fit.get("sigma"),
        sigma_residual=fit.get("sigma_residual"),
        extras=dict(fit["extras"], beta_lo=cert.beta_lo, beta_hi=cert.beta_hi),
    )


def window_shift_stability(trace: SolutionTrace, window, factors=(0.5, 2.0), q: float | None = None) -> float:
    """Largest relative change of L_hat when the window is scaled by each factor."""
    base = estimate_L(trace, window, q).L
    worst = 0.0
    for f in factors:
        shifted = estimate_L(trace, (window[0] * f, window[1] * f), q).L
        worst = max(worst, abs(shifted - base) / abs(base))
    return worst

