# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) loop; see _kernels_py for the reference version."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite, INFINITY

cnp.import_array()

DEF C_DONE = 0
DEF C_EVENT = 1
DEF C_HANDOFF = 2
DEF C_UNDERFLOW = 3
DEF C_SINGULAR = 4
DEF C_MAXSTEPS = 5

DONE, EVENT, HANDOFF, UNDERFLOW, SINGULAR, MAXSTEPS = 0, 1, 2, 3, 4, 5

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423


cdef inline int c_rhs(double* y, double* out, double n, double m, double lam, double k) nogil:
    cdef double u = y[0], v = y[1], f = y[2], w = y[3], ddu, ddf
    if u == 0.0 or f == 0.0:
        return 0
    ddu = -m * w * v / f - lam * u + (n - 2) * (k - v * v) / u
    ddf = -((n - 1) / m * ddu / u + lam / m) * f
    if not (isfinite(ddu) and isfinite(ddf)):
        return 0
    out[0] = v
    out[1] = ddu
    out[2] = w
    out[3] = ddf
    return 1


cdef inline double c_dist(double y, double dy, double direction) nogil:
    if y * dy * direction < 0.0:
        return fabs(y / dy)
    return INFINITY


def rhs(y, double n, double m, double lam, double k):
    cdef double yy[4]
    cdef double out[4]
    cdef int i
    for i in range(4):
        yy[i] = y[i]
    if not c_rhs(yy, out, n, m, lam, k):
        return None
    return [out[0], out[1], out[2], out[3]]


def dopri5(y0, double t0, double t_end, double h0, double rtol, double atol, double n, double m,
           double lam, double k, long max_steps=100000, double handoff=0.0, double h_fixed=0.0,
           terminal=(1, 0, 1, 1)):
    cdef double y[4]
    cdef double ynew[4]
    cdef double ys[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double k7[4]
    cdef int term[4]
    cdef int i, ok, crossed, last
    cdef double direction = 1.0 if t_end >= t0 else -1.0
    cdef double t = t0, h, hd, err, e, sc, remaining, d, fac, facmax = 10.0, ydiff, bspl
    cdef long steps = 0, nfev = 1, cap = 256
    cdef int status = C_MAXSTEPS
    for i in range(4):
        y[i] = y0[i]
        term[i] = 1 if terminal[i] else 0

    starts_arr = np.empty(cap)
    hs_arr = np.empty(cap)
    rc_arr = np.empty((cap, 5, 4))
    cdef double[::1] starts = starts_arr
    cdef double[::1] hs = hs_arr
    cdef double[:, :, ::1] rc = rc_arr

    if not c_rhs(y, k1, n, m, lam, k):
        return SINGULAR, t, np.array([y[0], y[1], y[2], y[3]]), starts_arr[:0], hs_arr[:0], rc_arr[:0], nfev
    h = fabs(h0) if h0 > 0 else 1e-3 * max(1.0, fabs(t_end - t0))
    if h_fixed > 0:
        h = h_fixed

    while steps < max_steps:
        remaining = (t_end - t) * direction
        if remaining <= 1e-15 * max(1.0, fabs(t)):
            status = C_DONE
            break
        if handoff > 0 and h_fixed <= 0:
            d = INFINITY
            if term[0]:
                d = min(d, c_dist(y[0], k1[0], direction))
            if term[2]:
                d = min(d, c_dist(y[2], k1[2], direction))
            if d <= handoff:
                status = C_HANDOFF
                break
            if d < INFINITY:
                h = min(h, max(0.5 * d, 0.5 * handoff))
        last = h >= remaining * (1.0 - 1e-9)
        if last:
            h = remaining
        if h < 1e-14 * max(1.0, fabs(t)):
            status = C_UNDERFLOW
            break
        hd = h * direction

        for i in range(4):
            ys[i] = y[i] + hd * A21 * k1[i]
        ok = c_rhs(ys, k2, n, m, lam, k)
        if ok:
            for i in range(4):
                ys[i] = y[i] + hd * (A31 * k1[i] + A32 * k2[i])
            ok = c_rhs(ys, k3, n, m, lam, k)
        if ok:
            for i in range(4):
                ys[i] = y[i] + hd * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            ok = c_rhs(ys, k4, n, m, lam, k)
        if ok:
            for i in range(4):
                ys[i] = y[i] + hd * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            ok = c_rhs(ys, k5, n, m, lam, k)
        if ok:
            for i in range(4):
                ys[i] = y[i] + hd * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            ok = c_rhs(ys, k6, n, m, lam, k)
        if ok:
            for i in range(4):
                ynew[i] = y[i] + hd * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
            ok = c_rhs(ynew, k7, n, m, lam, k)
            nfev += 6
        if not ok:
            h *= 0.25
            facmax = 1.0
            continue

        err = 0.0
        for i in range(4):
            e = hd * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(fabs(y[i]), fabs(ynew[i]))
            err += (e / sc) * (e / sc)
        err = sqrt(err / 4)

        if h_fixed > 0 or err <= 1.0:
            if steps == cap:
                cap *= 2
                starts_arr = np.resize(starts_arr, cap)
                hs_arr = np.resize(hs_arr, cap)
                rc_new = np.empty((cap, 5, 4))
                rc_new[:steps] = rc_arr[:steps]
                rc_arr = rc_new
                starts = starts_arr
                hs = hs_arr
                rc = rc_arr
            for i in range(4):
                ydiff = ynew[i] - y[i]
                bspl = hd * k1[i] - ydiff
                rc[steps, 0, i] = y[i]
                rc[steps, 1, i] = ydiff
                rc[steps, 2, i] = bspl
                rc[steps, 3, i] = ydiff - hd * k7[i] - bspl
                rc[steps, 4, i] = hd * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            starts[steps] = t
            hs[steps] = hd
            steps += 1
            crossed = 0
            for i in range(4):
                if term[i] and ((y[i] > 0) != (ynew[i] > 0) or ynew[i] == 0.0):
                    crossed = 1
            t = t_end if last else t + hd
            for i in range(4):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if crossed:
                status = C_EVENT
                break
            if h_fixed <= 0:
                fac = 0.9 * pow(err, -0.2) if err > 0 else facmax
                h *= min(facmax, max(0.2, fac))
            facmax = 10.0
        else:
            h *= max(0.2, 0.9 * pow(err, -0.2))
            facmax = 1.0

    return (status, t, np.array([y[0], y[1], y[2], y[3]]), starts_arr[:steps].copy(), hs_arr[:steps].copy(),
            rc_arr[:steps].copy(), nfev)


def dense_eval(rcont_step, double theta):
    r = rcont_step
    cdef double t1 = 1.0 - theta
    return r[0] + theta * (r[1] + t1 * (r[2] + theta * (r[3] + t1 * r[4])))
