"""Pure-Python Dormand-Prince 5(4) loop for the (u, u', f, f') system.

Same interface and results as the compiled ``_kernels`` module; used when
the extension is not built or WARPEIN_PURE_PYTHON=1.
"""

from __future__ import annotations

import math

import numpy as np

DONE, EVENT, HANDOFF, UNDERFLOW, SINGULAR, MAXSTEPS = 0, 1, 2, 3, 4, 5

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423


def rhs(y, n, m, lam, k):
    """Derivative of (u, u', f, f'); None if u or f vanishes or the result is not finite."""
    u, v, f, w = y
    if u == 0.0 or f == 0.0:
        return None
    ddu = -m * w * v / f - lam * u + (n - 2) * (k - v * v) / u
    ddf = -((n - 1) / m * ddu / u + lam / m) * f
    if not (math.isfinite(ddu) and math.isfinite(ddf)):
        return None
    return [v, ddu, w, ddf]


def _dist(y, dy, direction):
    """Linear estimate of the time until y reaches zero (inf if moving away)."""
    if y * dy * direction < 0.0:
        return abs(y / dy)
    return math.inf


def dopri5(y0, t0, t_end, h0, rtol, atol, n, m, lam, k, max_steps=100000, handoff=0.0,
           h_fixed=0.0, terminal=(1, 0, 1, 1)):
    """Integrate from t0 towards t_end.

    Returns ``(status, t, y, t_starts, hs, rcont, nfev)``.  ``rcont`` has
    shape (steps, 5, 4): the dense-output coefficients of every accepted
    step.  ``terminal[i]`` stops the loop after a sign change of y[i].
    With ``handoff > 0`` the loop also stops as soon as the linear estimate
    of the distance to u = 0 or f = 0 drops below ``handoff``; steps are
    capped at half that distance so the approach is gradual.
    """
    direction = 1.0 if t_end >= t0 else -1.0
    y = [float(v) for v in y0]
    t = float(t0)
    k1 = rhs(y, n, m, lam, k)
    nfev = 1
    starts, hs, rc = [], [], []
    if k1 is None:
        return SINGULAR, t, np.array(y), np.array(starts), np.array(hs), np.zeros((0, 5, 4)), nfev
    h = abs(h0) if h0 > 0 else 1e-3 * max(1.0, abs(t_end - t0))
    if h_fixed > 0:
        h = h_fixed
    facmax = 10.0
    status = MAXSTEPS
    steps = 0
    while steps < max_steps:
        remaining = (t_end - t) * direction
        if remaining <= 1e-15 * max(1.0, abs(t)):
            status = DONE
            break
        if handoff > 0 and h_fixed <= 0:
            d = math.inf
            if terminal[0]:
                d = min(d, _dist(y[0], k1[0], direction))
            if terminal[2]:
                d = min(d, _dist(y[2], k1[2], direction))
            if d <= handoff:
                status = HANDOFF
                break
            if d < math.inf:
                h = min(h, max(0.5 * d, 0.5 * handoff))
        last = h >= remaining * (1.0 - 1e-9)
        if last:
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        hd = h * direction
        y2 = [y[i] + hd * A21 * k1[i] for i in range(4)]
        k2 = rhs(y2, n, m, lam, k)
        if k2 is None:
            h *= 0.25
            facmax = 1.0
            continue
        y3 = [y[i] + hd * (A31 * k1[i] + A32 * k2[i]) for i in range(4)]
        k3 = rhs(y3, n, m, lam, k)
        if k3 is None:
            h *= 0.25
            facmax = 1.0
            continue
        y4 = [y[i] + hd * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(4)]
        k4 = rhs(y4, n, m, lam, k)
        if k4 is None:
            h *= 0.25
            facmax = 1.0
            continue
        y5 = [y[i] + hd * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in range(4)]
        k5 = rhs(y5, n, m, lam, k)
        if k5 is None:
            h *= 0.25
            facmax = 1.0
            continue
        y6 = [y[i] + hd * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in range(4)]
        k6 = rhs(y6, n, m, lam, k)
        if k6 is None:
            h *= 0.25
            facmax = 1.0
            continue
        ynew = [y[i] + hd * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]) for i in range(4)]
        k7 = rhs(ynew, n, m, lam, k)
        nfev += 6
        if k7 is None:
            h *= 0.25
            facmax = 1.0
            continue
        err = 0.0
        for i in range(4):
            e = hd * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
        err = math.sqrt(err / 4)
        if h_fixed > 0 or err <= 1.0:
            coeffs = np.empty((5, 4))
            for i in range(4):
                ydiff = ynew[i] - y[i]
                bspl = hd * k1[i] - ydiff
                coeffs[0, i] = y[i]
                coeffs[1, i] = ydiff
                coeffs[2, i] = bspl
                coeffs[3, i] = ydiff - hd * k7[i] - bspl
                coeffs[4, i] = hd * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            starts.append(t)
            hs.append(hd)
            rc.append(coeffs)
            steps += 1
            crossed = any(terminal[i] and (y[i] > 0) != (ynew[i] > 0) for i in range(4)) or \
                any(terminal[i] and ynew[i] == 0.0 for i in range(4))
            t = t_end if last else t + hd
            y = ynew
            k1 = k7
            if crossed:
                status = EVENT
                break
            if h_fixed <= 0:
                fac = 0.9 * err ** -0.2 if err > 0 else facmax
                h *= min(facmax, max(0.2, fac))
            facmax = 10.0
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            facmax = 1.0
    rcont = np.array(rc) if rc else np.zeros((0, 5, 4))
    return status, t, np.array(y), np.array(starts), np.array(hs), rcont, nfev


def dense_eval(rcont_step, theta):
    """Dense output of one step at fraction theta in [0, 1] (array of 4)."""
    r = rcont_step
    t1 = 1.0 - theta
    return r[0] + theta * (r[1] + t1 * (r[2] + theta * (r[3] + t1 * r[4])))
