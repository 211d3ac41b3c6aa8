"""Pure-Python Dormand-Prince 5(4) stepper for the radial system.

Mirrors ``_kernel.pyx`` operation for operation so both backends produce the
same trajectories. Scalars only: numpy in the inner loop is slower than plain
floats for a 4-component system.
"""

import numpy as np

STATUS_TARGET = 0
STATUS_EXTINCTION = 1
STATUS_UNDERFLOW = 2
STATUS_BUDGET = 3

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
REJECT_FACTOR = 0.25
EPS = 2.220446049250313e-16


def _f(r, u, du, v, dv, q):
    return du, v - 2.0 * du / r, dv, -(u ** -q) - 2.0 * dv / r


def _step(r, y, k1, h, q):
    """One DP step. Returns (ynew, k7, err_vec) or None if a stage has u <= 0."""
    u, du, v, dv = y
    a1, b1, c1, d1 = k1

    s = (u + h * A21 * a1, du + h * A21 * b1, v + h * A21 * c1, dv + h * A21 * d1)
    if s[0] <= 0.0:
        return None
    k2 = _f(r + C2 * h, s[0], s[1], s[2], s[3], q)

    s = tuple(y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(4))
    if s[0] <= 0.0:
        return None
    k3 = _f(r + C3 * h, s[0], s[1], s[2], s[3], q)

    s = tuple(y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(4))
    if s[0] <= 0.0:
        return None
    k4 = _f(r + C4 * h, s[0], s[1], s[2], s[3], q)

    s = tuple(
        y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        for i in range(4)
    )
    if s[0] <= 0.0:
        return None
    k5 = _f(r + C5 * h, s[0], s[1], s[2], s[3], q)

    s = tuple(
        y[i]
        + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        for i in range(4)
    )
    if s[0] <= 0.0:
        return None
    k6 = _f(r + h, s[0], s[1], s[2], s[3], q)

    ynew = tuple(
        y[i]
        + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        for i in range(4)
    )
    if ynew[0] <= 0.0:
        return None
    k7 = _f(r + h, ynew[0], ynew[1], ynew[2], ynew[3], q)
    err = tuple(
        h
        * (
            E1 * k1[i]
            + E3 * k3[i]
            + E4 * k4[i]
            + E5 * k5[i]
            + E6 * k6[i]
            + E7 * k7[i]
        )
        for i in range(4)
    )
    return ynew, k7, err


def integrate_core(y0, r0, q, r_target, rel_tol, abs_tol, u_floor, max_steps, max_ratio=0.0):
    """Adaptive integration from ``r0`` to ``r_target``.

    Returns ``(r, Y, status, r_event, err_sum, n_rejected)`` where ``Y`` has
    shape ``(n, 4)``. ``status`` is one of the ``STATUS_*`` codes; ``r_event``
    is the localized extinction radius (or the radius where stepping stopped).
    A positive ``max_ratio`` caps every step at ``max_ratio * r``.
    """
    r = float(r0)
    y = tuple(float(c) for c in y0)
    q = float(q)
    rs = [r]
    ys = [y]
    k1 = _f(r, y[0], y[1], y[2], y[3], q)
    h = 0.1 * r
    err_sum = 0.0
    n_acc = 0
    n_rej = 0
    status = STATUS_TARGET
    r_event = r_target

    while r < r_target:
        if n_acc >= max_steps:
            status = STATUS_BUDGET
            r_event = r
            break
        if max_ratio > 0.0 and h > max_ratio * r:
            h = max_ratio * r
        last = False
        if r + h >= r_target:
            h = r_target - r
            last = True
        if h < 8.0 * EPS * r:
            status = STATUS_UNDERFLOW
            r_event = r
            break

        res = _step(r, y, k1, h, q)
        if res is None:
            h *= REJECT_FACTOR
            n_rej += 1
            continue
        ynew, k7, e = res
        err = 0.0
        for i in range(4):
            sc = abs_tol + rel_tol * max(abs(y[i]), abs(ynew[i]))
            ei = abs(e[i]) / sc
            if ei > err:
                err = ei
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            n_rej += 1
            continue

        if ynew[0] <= u_floor:
            # bisect the step length for the floor crossing
            lo, hi = 0.0, h
            ylo = y
            tol = max(abs_tol, 4.0 * EPS * r)
            for _ in range(200):
                if hi - lo <= tol:
                    break
                mid = 0.5 * (lo + hi)
                trial = _step(r, y, k1, mid, q)
                if trial is None or trial[0][0] <= u_floor:
                    hi = mid
                else:
                    lo = mid
                    ylo = trial[0]
            if lo > 0.0:
                rs.append(r + lo)
                ys.append(ylo)
            status = STATUS_EXTINCTION
            r_event = r + 0.5 * (lo + hi)
            break

        err_sum += abs(e[0]) / abs(ynew[0])
        r = r_target if last else r + h
        y = ynew
        k1 = k7
        rs.append(r)
        ys.append(y)
        n_acc += 1
        fac = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        h *= fac

    return np.array(rs), np.array(ys, dtype=float).reshape(-1, 4), status, r_event, err_sum, n_rej

