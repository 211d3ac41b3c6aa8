# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) stepper for the radial system.

Same algorithm and operation order as ``_pykernel``; see there for the
contract of ``integrate_core``.
"""

import numpy as np
from libc.math cimport pow, fabs
from libc.stdlib cimport malloc, realloc, free

cdef double EPS = 2.220446049250313e-16

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9, MIN_FACTOR = 0.2, MAX_FACTOR = 5.0, REJECT_FACTOR = 0.25


cdef inline void _f(double r, double* y, double q, double* out) noexcept nogil:
    out[0] = y[1]
    out[1] = y[2] - 2.0 * y[1] / r
    out[2] = y[3]
    out[3] = -pow(y[0], -q) - 2.0 * y[3] / r


cdef bint _step(double r, double* y, double* k1, double h, double q,
                double* ynew, double* k7, double* err) noexcept nogil:
    """One DP step; returns False if any stage (or the result) has u <= 0."""
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double s[4]
    cdef int i

    for i in range(4):
        s[i] = y[i] + h * A21 * k1[i]
    if s[0] <= 0.0:
        return False
    _f(r + C2 * h, s, q, k2)

    for i in range(4):
        s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    if s[0] <= 0.0:
        return False
    _f(r + C3 * h, s, q, k3)

    for i in range(4):
        s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    if s[0] <= 0.0:
        return False
    _f(r + C4 * h, s, q, k4)

    for i in range(4):
        s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    if s[0] <= 0.0:
        return False
    _f(r + C5 * h, s, q, k5)

    for i in range(4):
        s[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    if s[0] <= 0.0:
        return False
    _f(r + h, s, q, k6)

    for i in range(4):
        ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    if ynew[0] <= 0.0:
        return False
    _f(r + h, ynew, q, k7)
    for i in range(4):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    return True


cdef class _Buffer:
    cdef double* data
    cdef Py_ssize_t n, cap

    def __cinit__(self, Py_ssize_t cap):
        self.cap = cap
        self.n = 0
        self.data = <double*> malloc(5 * cap * sizeof(double))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef int push(self, double r, double* y) except -1:
        cdef double* grown
        if self.n == self.cap:
            grown = <double*> realloc(self.data, 10 * self.cap * sizeof(double))
            if grown == NULL:
                raise MemoryError()
            self.data = grown
            self.cap *= 2
        self.data[5 * self.n] = r
        self.data[5 * self.n + 1] = y[0]
        self.data[5 * self.n + 2] = y[1]
        self.data[5 * self.n + 3] = y[2]
        self.data[5 * self.n + 4] = y[3]
        self.n += 1
        return 0

    cdef object to_arrays(self):
        arr = np.empty((self.n, 5))
        cdef double[:, ::1] out = arr
        cdef Py_ssize_t i, j
        for i in range(self.n):
            for j in range(5):
                out[i, j] = self.data[5 * i + j]
        return arr[:, 0].copy(), arr[:, 1:].copy()


def integrate_core(y0, double r0, double q, double r_target, double rel_tol,
                   double abs_tol, double u_floor, long max_steps, double max_ratio=0.0):
    cdef double y[4]
    cdef double ynew[4]
    cdef double k1[4]
    cdef double k7[4]
    cdef double e[4]
    cdef double ylo[4]
    cdef double ytr[4]
    cdef double k7tr[4]
    cdef double etr[4]
    cdef double r = r0, h, err, ei, sc, lo, hi, mid, tol, fac
    cdef double err_sum = 0.0, r_event = r_target
    cdef long n_acc = 0, n_rej = 0
    cdef int status = 0, i, it
    cdef bint last, ok
    cdef _Buffer buf = _Buffer(1024)

    for i in range(4):
        y[i] = float(y0[i])
    buf.push(r, y)
    _f(r, y, q, k1)
    h = 0.1 * r

    while r < r_target:
        if n_acc >= max_steps:
            status = 3
            r_event = r
            break
        if max_ratio > 0.0 and h > max_ratio * r:
            h = max_ratio * r
        last = False
        if r + h >= r_target:
            h = r_target - r
            last = True
        if h < 8.0 * EPS * r:
            status = 2
            r_event = r
            break

        ok = _step(r, y, k1, h, q, ynew, k7, e)
        if not ok:
            h *= REJECT_FACTOR
            n_rej += 1
            continue
        err = 0.0
        for i in range(4):
            sc = abs_tol + rel_tol * max(fabs(y[i]), fabs(ynew[i]))
            ei = fabs(e[i]) / sc
            if ei > err:
                err = ei
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * pow(err, -0.2))
            n_rej += 1
            continue

        if ynew[0] <= u_floor:
            lo = 0.0
            hi = h
            for i in range(4):
                ylo[i] = y[i]
            tol = max(abs_tol, 4.0 * EPS * r)
            for it in range(200):
                if hi - lo <= tol:
                    break
                mid = 0.5 * (lo + hi)
                ok = _step(r, y, k1, mid, q, ytr, k7tr, etr)
                if not ok or ytr[0] <= u_floor:
                    hi = mid
                else:
                    lo = mid
                    for i in range(4):
                        ylo[i] = ytr[i]
            if lo > 0.0:
                buf.push(r + lo, ylo)
            status = 1
            r_event = r + 0.5 * (lo + hi)
            break

        err_sum += fabs(e[0]) / fabs(ynew[0])
        if last:
            r = r_target
        else:
            r = r + h
        for i in range(4):
            y[i] = ynew[i]
            k1[i] = k7[i]
        buf.push(r, y)
        n_acc += 1
        if err == 0.0:
            fac = MAX_FACTOR
        else:
            fac = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * pow(err, -0.2)))
        h *= fac

    rs, ys = buf.to_arrays()
    return rs, ys, status, r_event, err_sum, n_rej
