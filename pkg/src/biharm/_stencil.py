"""Seven-point central differences on locally uniform stencils.

Around each evaluation point x the stencil nodes are x + j * eta * x,
j = -3..3, so the spacing scales with the radius while remaining uniform
locally. Stencils of this width are exact for polynomials up to degree 6,
which keeps the biharmonic kernel (1, r, r^2) from polluting high derivatives.
"""

from fractions import Fraction
from math import factorial

import numpy as np

OFFSETS = np.arange(-3, 4)
DEFAULT_ETA = 0.1


def _weights(order):
    # Solve sum_j w_j j^m / m! = delta(m, order), m = 0..6, exactly.
    n = len(OFFSETS)
    rows = [[Fraction(int(j) ** m, factorial(m)) for j in OFFSETS] for m in range(n)]
    rhs = [Fraction(int(m == order)) for m in range(n)]
    for col in range(n):
        piv = next(i for i in range(col, n) if rows[i][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for i in range(n):
            if i != col and rows[i][col] != 0:
                f = rows[i][col] / rows[col][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[col])]
                rhs[i] -= f * rhs[col]
    return np.array([float(rhs[i] / rows[i][i]) for i in range(n)])


WEIGHTS = {d: _weights(d) for d in (1, 2, 3, 4)}


def stencil_points(x_lo, x_hi, n, eta=DEFAULT_ETA):
    """Log-spaced evaluation points whose full stencils stay inside [x_lo, x_hi]."""
    if not 0 < eta < 1 / 3:
        raise ValueError("eta must lie in (0, 1/3)")
    a = x_lo / (1 - 3 * eta)
    b = x_hi / (1 + 3 * eta)
    if not a < b:
        return np.empty(0)
    return np.geomspace(a, b, n)


def local_derivatives(f, x, eta=DEFAULT_ETA, orders=(3, 4)):
    """Derivatives of the callable ``f`` at points ``x`` from resampled stencils.

    ``f`` must accept an array of any shape. Returns a dict order -> array.
    """
    x = np.asarray(x, dtype=float)
    h = eta * x
    values = f(x[:, None] + h[:, None] * OFFSETS[None, :])
    return {d: values @ WEIGHTS[d] / h**d for d in orders}


def nonuniform_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative at 0.

    ``offsets`` has shape (n, m): m node positions relative to each of n
    evaluation points. Solved as batched Vandermonde systems in scaled
    coordinates.
    """
    d = np.asarray(offsets, dtype=float)
    scale = np.max(np.abs(d), axis=1, keepdims=True)
    x = d / scale
    m = d.shape[1]
    powers = np.arange(m)
    fact = np.array([factorial(k) for k in powers], dtype=float)
    V = x[:, None, :] ** powers[None, :, None] / fact[None, :, None]
    rhs = np.zeros((d.shape[0], m, 1))
    rhs[:, order, 0] = 1.0
    w = np.linalg.solve(V, rhs)[..., 0]
    return w / scale**order
