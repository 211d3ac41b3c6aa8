"""Spherical-harmonic mode data and the constant-coefficient mode equations.

On S^2 the Laplace-Beltrami eigenvalues are λ_k = k(k+1) with multiplicity
2k+1. In t = -ln s the k-th angular mode z of the transformed equation obeys

    z'''' + 2z''' - (1+2λ_k) z'' - 2(1+λ_k) z' + λ_k(λ_k-2) z = f(t),

whose characteristic polynomial P_k has roots -k-2, -k, k-1, k+1. The
companion polynomial P_k(-μ) has roots -k-1, -k+1, k, k+2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContainsK0,
    EmptyCoefficients,
    NonIntegrableForcing,
    NumericalFailure,
    PreconditionError,
    Resonance,
)

ROOT_TOL = 1e-12
RESONANCE_TOL = 1e-8
DEFAULT_T = 30.0
DEFAULT_POINTS = 601


def _check_k(k, minimum=0):
    if isinstance(k, bool) or int(k) != k or k < minimum:
        raise PreconditionError(f"k must be an integer >= {minimum}, got {k!r}")
    return int(k)


def eigen_data(k: int) -> tuple[int, int]:
    """(λ_k, m_k) = (k(k+1), 2k+1)."""
    k = _check_k(k)
    return k * (k + 1), 2 * k + 1


def char_coefficients(k: int, tilde: bool = False) -> tuple:
    """Coefficients of P_k (or of its reflection P_k(-μ)), highest degree first."""
    lam = k * (k + 1)
    s = -1 if tilde else 1
    return (1, 2 * s, -(1 + 2 * lam), -2 * (1 + lam) * s, lam * (lam - 2))


def char_poly(k: int, mu, tilde: bool = False):
    return np.polyval(np.array(char_coefficients(k, tilde), dtype=float), mu)


def _checked_roots(k, roots, tilde):
    coef = char_coefficients(k, tilde)
    scale = max(abs(c) for c in coef)
    for mu in roots:
        # exact integer evaluation, then relative to the largest coefficient
        val = sum(c * mu ** (4 - i) for i, c in enumerate(coef))
        if abs(val) / scale >= ROOT_TOL:
            raise NumericalFailure(f"root {mu} of the k={k} quartic leaves residual {val}")
    return np.array(sorted(roots), dtype=float)


def char_roots(k: int) -> np.ndarray:
    """Roots of P_k in ascending order: -k-2, -k, k-1, k+1."""
    k = _check_k(k, 1)
    return _checked_roots(k, [-k - 2, -k, k - 1, k + 1], False)


def char_roots_tilde(k: int) -> np.ndarray:
    """Roots of P_k(-μ) in ascending order: -k-1, -k+1, k, k+2."""
    k = _check_k(k, 1)
    return _checked_roots(k, [-k - 1, -k + 1, k, k + 2], True)


@dataclass(frozen=True)
class ModeSpectrum:
    k: int
    lambda_k: int
    m_k: int
    roots_mu: tuple
    roots_mu_tilde: tuple

    @classmethod
    def of(cls, k: int) -> ModeSpectrum:
        lam, m = eigen_data(k)
        return cls(int(k), lam, m, tuple(char_roots(k).tolist()), tuple(char_roots_tilde(k).tolist()))

    def to_dict(self):
        return {
            "k": self.k,
            "lambda_k": self.lambda_k,
            "m_k": self.m_k,
            "roots_mu": list(self.roots_mu),
            "roots_mu_tilde": list(self.roots_mu_tilde),
        }


def spectrum_table(ks) -> list[ModeSpectrum]:
    return [ModeSpectrum.of(k) for k in ks]


def spectrum_json(table, **kw) -> str:
    return json.dumps([row.to_dict() for row in table], **kw)


@dataclass(frozen=True, eq=False)
class ModeSolution:
    k: int
    A: float
    a: float
    t: np.ndarray
    z: np.ndarray
    rate: float
    fit_window: tuple

    def to_dict(self):
        return {"k": self.k, "A": self.A, "a": self.a, "rate": self.rate, "fit_window": list(self.fit_window)}


def fit_decay_rate(t, z, window=None) -> float:
    """Minus the least-squares slope of ln|z| on ``window`` (default: last half of t)."""
    t = np.asarray(t, dtype=float)
    z = np.abs(np.asarray(z, dtype=float))
    if window is None:
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    keep = (t >= window[0]) & (t <= window[1]) & (z > 0)
    if keep.sum() < 2:
        raise NumericalFailure("no nonzero samples in the fit window")
    return float(-np.polyfit(t[keep], np.log(z[keep]), 1)[0])


def _mode_solution(k, A, a, t0, T, n, decaying_roots):
    if not a > 0:
        raise PreconditionError(f"forcing rate must be positive, got {a!r}")
    if not T > t0:
        raise PreconditionError("need T > t0")
    t = np.linspace(t0, T, n)
    z = np.zeros_like(t)
    for mu in decaying_roots:
        z += np.exp(mu * t)
    if A != 0:
        p = float(char_poly(k, -a))
        if abs(p) < RESONANCE_TOL:
            raise Resonance(f"forcing rate a={a} matches a characteristic root of the k={k} mode")
        z += A * np.exp(-a * t) / p
    window = (t0 + 0.5 * (T - t0), T)
    return ModeSolution(k, float(A), float(a), t, z, fit_decay_rate(t, z, window), window)


def solve_mode_ode(k: int, A: float, a: float, t0: float = 0.0, T: float = DEFAULT_T, n: int = DEFAULT_POINTS) -> ModeSolution:
    """Bounded solution for forcing A e^{-at}, k >= 2.

    z = e^{-(k+2)t} + e^{-kt} + A e^{-at} / P_k(-a): both decaying homogeneous
    modes with unit coefficients plus the particular solution.
    """
    k = _check_k(k, 2)
    return _mode_solution(k, A, a, t0, T, n, (-k - 2, -k))


def solve_mode_ode_k1(A: float, a: float, t0: float = 0.0, T: float = DEFAULT_T, n: int = DEFAULT_POINTS) -> ModeSolution:
    """k = 1 mode, roots {-3, -1, 0, 2}; the constant and growing modes are excluded.

    Needs a > 1 so the forcing is integrable against the zero root.
    """
    if not a > 1:
        raise NonIntegrableForcing(f"k = 1 forcing needs a > 1, got {a!r}")
    return _mode_solution(1, A, a, t0, T, n, (-3, -1))


@dataclass(frozen=True)
class TailSum:
    delta: float
    k_max: int
    partial: float
    ratio: float


def tail_sum(delta: float, k_max: int) -> TailSum:
    """Σ_{k=2}^{k_max} k (2k+1) e^{-kΔ} and its ratio to e^{-2Δ}."""
    if not delta > 0:
        raise PreconditionError(f"delta must be positive, got {delta!r}")
    k_max = _check_k(k_max, 2)
    ratio = math.fsum(k * (2 * k + 1) * math.exp(-(k - 2) * delta) for k in range(2, k_max + 1))
    return TailSum(float(delta), k_max, ratio * math.exp(-2.0 * delta), ratio)


def tail_ratio_limit(delta: float) -> float:
    """Closed form of Σ_{k>=2} k(2k+1) x^{k-2} with x = e^{-Δ}."""
    x = math.exp(-delta)
    # Σ_{k>=0} (2k^2 + k) x^k = x(3 + x) / (1 - x)^3; dropping the k = 1 term 3x
    # and dividing by x^2 leaves a form without cancellation as x -> 0
    return (10.0 - 9.0 * x + 3.0 * x * x) / (1.0 - x) ** 3


def poincare_check(coefficients) -> tuple[float, float]:
    """Spectral Rayleigh quotients of Σ c_{k,j} Q_j^k on S^2.

    ``coefficients`` maps (k, j) with k >= 1 and 1 <= j <= 2k+1 to reals.
    Returns (Σλ c² / Σc², Σλ² c² / Σc²), which are >= 2 and >= 4.
    """
    if not coefficients:
        raise EmptyCoefficients("no coefficients given")
    num1 = num2 = den = 0.0
    for (k, j), c in coefficients.items():
        k = _check_k(k)
        if k == 0:
            raise ContainsK0("k = 0 mode is the spherical average; remove it")
        if not 1 <= j <= 2 * k + 1:
            raise PreconditionError(f"j must lie in 1..{2 * k + 1} for k={k}, got {j!r}")
        lam = k * (k + 1)
        c2 = float(c) * float(c)
        num1 += lam * c2
        num2 += lam * lam * c2
        den += c2
    if den == 0:
        raise EmptyCoefficients("all coefficients are zero")
    grad, bilap = num1 / den, num2 / den
    if grad < 2 * (1 - ROOT_TOL) or bilap < 4 * (1 - ROOT_TOL):
        raise NumericalFailure(f"Rayleigh quotients ({grad}, {bilap}) below the spectral bounds")
    return grad, bilap


def write_mode_csv(sol: ModeSolution, path, metadata=None):
    with open(path, "w") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}: {val}\n")
        fh.write("t,z\n")
        for t, z in zip(sol.t, sol.z):
            fh.write(f"{t:.17g},{z:.17g}\n")
