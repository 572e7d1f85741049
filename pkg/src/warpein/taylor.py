"""Arbitrary-precision Taylor-series integration of the (u, f) system.

The system is used in polynomial form

    A:  f u u'' + m f' u' u + lambda f u^2 - (n-2) f (k - u'^2) = 0
    B:  m u f'' + (n-1) u'' f + lambda u f = 0

so Taylor coefficients follow from an explicit recursion at regular points
(u f != 0) and from small linear solves at the two kinds of singular point:

* boundary (f = 0): u' = 0 there, the free data are u and f',
* critical (u = 0): f' = 0 and u'^2 = k there, the free data are f and f''.

Each step expands the solution around the current point, picks the step
length from the decay of the last coefficients, and scans the step for
zeros of u, u', f and f'.  Zeros are located on the series polynomials, so
endpoints where the first-order form of the system is singular are landed
on exactly instead of approached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import BoundaryConditionError
from .geometry import SpaceParams

__all__ = ["TaylorSolver", "FloatSeries", "Segment", "TaylorEvent", "TaylorRun"]

COMPONENTS = ("u", "du", "f", "df")


@dataclass
class Segment:
    """One Taylor step: polynomials in tau = t - t0, valid for tau between 0 and ``tau_end``."""

    t0: float
    tau_end: float
    U: np.ndarray
    F: np.ndarray

    def contains(self, t: float) -> bool:
        lo, hi = sorted((self.t0, self.t0 + self.tau_end))
        return lo - 1e-15 * max(1.0, abs(lo)) <= t <= hi + 1e-15 * max(1.0, abs(hi))

    def eval(self, t, derivs: int = 3):
        """Values and derivatives 0..derivs of u and f at t (float64)."""
        tau = np.asarray(t, dtype=float) - self.t0
        out_u, out_f = [], []
        cu, cf = self.U, self.F
        for _ in range(derivs + 1):
            out_u.append(np.polynomial.polynomial.polyval(tau, cu))
            out_f.append(np.polynomial.polynomial.polyval(tau, cf))
            cu = np.polynomial.polynomial.polyder(cu) if cu.size > 1 else np.zeros(1)
            cf = np.polynomial.polynomial.polyder(cf) if cf.size > 1 else np.zeros(1)
        return out_u, out_f


@dataclass
class TaylorEvent:
    kind: str
    t: float
    state: dict
    terminal: bool


@dataclass
class TaylorRun:
    status: str
    t_end: float
    end_state: dict
    segments: list = field(default_factory=list)
    events: list = field(default_factory=list)
    steps: int = 0
    start_kind: str = "regular"


class TaylorSolver:
    """Taylor integrator with a private mpmath context.

    Parameters
    ----------
    params : SpaceParams
    dps : int
        Working precision in decimal digits.
    order : int
        Number of Taylor coefficients per step.
    tol : float
        Local truncation tolerance used to choose step lengths.
    """

    def __init__(self, params: SpaceParams, dps: int = 45, order: int = 36, tol: float = 1e-32):
        self.params = params
        self.ctx = mpmath.MPContext()
        self.ctx.dps = dps
        c = self.ctx
        self.n = c.mpf(params.n)
        self.m = c.mpf(params.m)
        self.lam = c.mpf(params.lam)
        self.k = c.mpf(params.k)
        self.order = int(order)
        self.tol = c.mpf(tol)

    def mpf(self, x):
        return self.ctx.mpf(x)

    # series construction

    def _conv(self, a, b, j):
        return self.ctx.fdot(a[: j + 1], b[j::-1])

    def regular_series(self, u, du, f, df, order=None):
        """Taylor coefficients of u and f around a point with u f != 0."""
        c = self.ctx
        p = self.order if order is None else order
        n, m, lam, k = self.n, self.m, self.lam, self.k
        U = [c.mpf(u), c.mpf(du)] + [c.zero] * (p - 1)
        F = [c.mpf(f), c.mpf(df)] + [c.zero] * (p - 1)
        FU, D2U, D2F, P1, P2, U2, P3, V2, P4, dU, dF = ([] for _ in range(11))
        fu0 = U[0] * F[0]
        if fu0 == 0:
            raise ZeroDivisionError("regular series needs u f != 0")
        for j in range(p - 1):
            dU.append((j + 1) * U[j + 1])
            dF.append((j + 1) * F[j + 1])
            FU.append(self._conv(F, U, j))
            P1.append(self._conv(dU, U, j))
            P2.append(self._conv(dF, P1, j))
            U2.append(self._conv(U, U, j))
            P3.append(self._conv(F, U2, j))
            V2.append(self._conv(dU, dU, j))
            P4.append(self._conv(F, V2, j))
            rhs = -m * P2[j] - lam * P3[j] + (n - 2) * (k * F[j] - P4[j])
            if j:
                rhs -= c.fdot(FU[1: j + 1], D2U[j - 1:: -1])
            D2U.append(rhs / FU[0])
            U[j + 2] = D2U[j] / ((j + 1) * (j + 2))
            d2uf = self._conv(D2U, F, j)
            acc = -(n - 1) * d2uf - lam * FU[j]
            if j:
                acc -= m * c.fdot(U[1: j + 1], D2F[j - 1:: -1])
            D2F.append(acc / (m * U[0]))
            F[j + 2] = D2F[j] / ((j + 1) * (j + 2))
        return U, F

    def _eq_coefs(self, U, F, j):
        """Coefficient j of the polynomial equations A and B for truncated series U, F."""
        c = self.ctx
        n, m, lam, k = self.n, self.m, self.lam, self.k
        L = j + 1
        U = list(U) + [c.zero] * (L + 3 - len(U))
        F = list(F) + [c.zero] * (L + 3 - len(F))
        dU = [(i + 1) * U[i + 1] for i in range(L)]
        dF = [(i + 1) * F[i + 1] for i in range(L)]
        ddU = [(i + 1) * (i + 2) * U[i + 2] for i in range(L)]
        ddF = [(i + 1) * (i + 2) * F[i + 2] for i in range(L)]
        fu = [self._conv(F, U, i) for i in range(L)]
        duu = [self._conv(dU, U, i) for i in range(L)]
        uu = [self._conv(U, U, i) for i in range(L)]
        dudu = [self._conv(dU, dU, i) for i in range(L)]
        A = (self._conv(fu, ddU, j) + m * self._conv(dF, duu, j) + lam * self._conv(F, uu, j)
             - (n - 2) * (k * F[j] - self._conv(F, dudu, j)))
        B = m * self._conv(U, ddF, j) + (n - 1) * self._conv(ddU, F, j) + lam * self._conv(U, F, j)
        return A, B

    def critical_series(self, du, f, ddf, order=None):
        """Series at a zero of u: u odd with u'^2 = k, f even with free f''."""
        c = self.ctx
        p = self.order if order is None else order
        n, m = self.n, self.m
        U1, F0, F2 = c.mpf(du), c.mpf(f), c.mpf(ddf) / 2
        U = [c.zero] * (p + 3)
        F = [c.zero] * (p + 3)
        U[1], F[0], F[2] = U1, F0, F2
        # order 1 is homogeneous (F1 = U2 = 0); order 2 leaves F2 free and fixes U3 through B_1
        _, b1 = self._eq_coefs(U, F, 1)
        U[3] = -b1 / (6 * (n - 1) * F0)
        for q in range(3, p + 1):
            a_q, _ = self._eq_coefs(U, F, q)
            _, b_q = self._eq_coefs(U, F, q - 1)
            m11 = m * q * U1 * U1
            m12 = F0 * U1 * (q + 1) * (q + 2 * n - 4)
            m21 = m * U1 * q * (q - 1)
            m22 = (n - 1) * (q + 1) * q * F0
            det = m11 * m22 - m12 * m21
            F[q] = (-a_q * m22 + b_q * m12) / det
            U[q + 1] = (-b_q * m11 + a_q * m21) / det
        return U[: p + 1], F[: p + 1]

    def boundary_series(self, u, df, order=None):
        """Series at a zero of f: f odd-led with free f', u with u' = 0."""
        c = self.ctx
        p = self.order if order is None else order
        m = self.m
        U0, F1 = c.mpf(u), c.mpf(df)
        U = [c.zero] * (p + 3)
        F = [c.zero] * (p + 3)
        U[0], F[1] = U0, F1
        for j in range(1, p):
            a_j, _ = self._eq_coefs(U, F, j)
            U[j + 1] = -a_j / (F1 * U0 * (j + 1) * (j + m))
            _, b_j = self._eq_coefs(U, F, j - 1)
            F[j + 1] = -b_j / (m * U0 * (j + 1) * j)
        return U[: p + 1], F[: p + 1]

    # evaluation helpers

    def _poly(self, coefs, tau, deriv=0):
        c = self.ctx
        acc = c.zero
        p = len(coefs) - 1
        for j in range(p, deriv - 1, -1):
            w = coefs[j]
            for i in range(deriv):
                w *= j - i
            acc = acc * tau + w
        return acc

    def state_at(self, U, F, tau):
        return {
            "u": self._poly(U, tau), "du": self._poly(U, tau, 1), "ddu": self._poly(U, tau, 2),
            "dddu": self._poly(U, tau, 3),
            "f": self._poly(F, tau), "df": self._poly(F, tau, 1), "ddf": self._poly(F, tau, 2),
        }

    def step_length(self, U, F, scale=1):
        """Step from the size of the last two coefficients of each series."""
        c = self.ctx
        p = len(U) - 1
        tol = self.tol * max(1, abs(scale))
        h = c.inf
        for coefs in (U, F):
            for j in (p - 1, p):
                a = abs(coefs[j])
                if a > 0:
                    h = min(h, (tol / a) ** (c.one / j))
        return h * c.mpf("0.7")

    def _root(self, coefs, deriv, a, b, fa):
        """Zero of the series (derivative ``deriv``) between tau = a and b, by Illinois iteration."""
        c = self.ctx
        fb = self._poly(coefs, b, deriv)
        if fa == 0:
            return a
        if fb == 0:
            return b
        side = 0
        eps = c.mpf(10) ** (-(c.dps - 5))
        for _ in range(400):
            x = (a * fb - b * fa) / (fb - fa)
            fx = self._poly(coefs, x, deriv)
            if fx == 0:
                return x
            if (fx > 0) == (fb > 0):
                b, fb = x, fx
                if side == -1:
                    fa /= 2
                side = -1
            else:
                a, fa = x, fx
                if side == 1:
                    fb /= 2
                side = 1
            if abs(b - a) <= eps * (1 + abs(a)):
                break
        return (a + b) / 2

    def _scan(self, U, F, tau_end, npts=48):
        """Sign-change zeros of u, u', f, f' on (0, tau_end], as {name: tau}.

        Signs are scanned in float64 and each bracket is refined in full
        precision.
        """
        P = np.polynomial.polynomial
        Uf = np.array([float(x) for x in U])
        Ff = np.array([float(x) for x in F])
        with np.errstate(all="ignore"):
            specs = {"u": (U, Uf, 0), "du": (U, P.polyder(Uf), 1), "f": (F, Ff, 0), "df": (F, P.polyder(Ff), 1)}
        fe = float(tau_end)
        grid = np.linspace(0.0, fe, npts + 1)
        roots = {}
        for name, (coefs, fcoefs, d) in specs.items():
            with np.errstate(all="ignore"):
                vals = P.polyval(grid, fcoefs)
            if not np.all(np.isfinite(vals)):
                vals = np.array([float(self._poly(coefs, tau_end * i / npts, d)) for i in range(npts + 1)])
            sg = np.sign(vals)
            for i in range(npts):
                if i == 0 and sg[0] == 0:
                    continue
                if sg[i + 1] == 0 or sg[i] * sg[i + 1] < 0:
                    a = tau_end * i / npts
                    b = tau_end if i + 1 == npts else tau_end * (i + 1) / npts
                    fa = self._poly(coefs, a, d)
                    fb = self._poly(coefs, b, d)
                    if fa == 0 and i > 0:
                        roots[name] = a
                    elif (fa > 0) != (fb > 0) or fb == 0:
                        roots[name] = self._root(coefs, d, a, b, fa)
                    else:
                        continue
                    break
        return roots

    # driver

    def start_series(self, u, du, f, df, ddf=None, tol=1e-10):
        """Series at the start point plus the kind of point it is."""
        c = self.ctx
        k = self.k
        if abs(u) <= tol and abs(f) <= tol:
            raise BoundaryConditionError("u and f both vanish at the start point")
        if abs(u) <= tol:
            if abs(df) > tol:
                raise BoundaryConditionError(
                    f"where u = 0 the potential must be critical (f' = 0); got f' = {float(df):.3e}")
            if self.params.n > 2 and abs(du * du - k) > max(tol, 1e-8):
                raise BoundaryConditionError(
                    f"where u = 0 smoothness needs (u')^2 = k = {float(k)}; got (u')^2 = {float(du * du):.6g}")
            if du == 0:
                raise BoundaryConditionError("where u = 0 the derivative u' must not vanish")
            if ddf is None:
                raise BoundaryConditionError("a start at u = 0 needs f'' (the free datum of the series)")
            u1 = c.sqrt(k) * (1 if du > 0 else -1) if (k > 0 and self.params.n > 2) else c.mpf(du)
            U, F = self.critical_series(u1, f, ddf)
            return U, F, "critical"
        if abs(f) <= tol:
            if abs(du) > tol:
                raise BoundaryConditionError(
                    f"where f = 0 the conditions f'' = u' = 0 must hold; got u' = {float(du):.3e}")
            if abs(df) <= tol:
                raise BoundaryConditionError("f and f' both vanish: not an admissible boundary point")
            U, F = self.boundary_series(u, df)
            return U, F, "boundary"
        U, F = self.regular_series(u, du, f, df)
        return U, F, "regular"

    def run(self, t0, state, t_end, through_boundary=False, terminal=("u", "f", "df"), max_steps=5000,
            min_step=1e-13, singular_tol=1e-10, reach=4.0, crit_tol=1e-6, gap_tol=1e-3):
        """Integrate from ``t0`` towards ``t_end`` (finite).

        ``state`` holds u, du, f, df and optionally ddf.  ``terminal`` lists
        the zero crossings that end the run.  Zeros of u and f are singular
        points of the system; the step scans up to ``reach`` times its
        nominal length for them and lands on them directly.  Zeros of u and
        f' that coincide form one "critical" event.  With
        ``through_boundary`` a zero of f is landed on, recorded, and the
        integration restarts from the boundary series there.
        """
        c = self.ctx
        t = c.mpf(t0)
        t_end = c.mpf(t_end)
        direction = 1 if t_end >= t else -1
        terminal = set(terminal) | {"u"}
        if through_boundary:
            terminal.discard("f")
        else:
            terminal.add("f")
        vals = {key: c.mpf(state[key]) for key in ("u", "du", "f", "df")}
        ddf0 = state.get("ddf")
        U, F, start_kind = self.start_series(vals["u"], vals["du"], vals["f"], vals["df"],
                                             None if ddf0 is None else c.mpf(ddf0), singular_tol)
        coincide = c.mpf(10) ** (-(c.dps // 3))
        crit_tol = c.mpf(crit_tol)
        segments, events = [], []
        steps = 0
        status = "max_steps"
        end = None
        fresh = True
        while steps < max_steps:
            if not fresh:
                U, F = self.regular_series(vals["u"], vals["du"], vals["f"], vals["df"])
            fresh = False
            steps += 1
            scale = max(abs(vals["u"]), abs(vals["f"]), 1)
            h = self.step_length(U, F, scale)
            remaining = abs(t_end - t)
            if h < min_step * max(1, abs(t)):
                status = "underflow"
                end = (t, vals)
                break
            last = h >= remaining
            if last:
                h = remaining
            scan = min(reach * h, remaining)
            roots = self._scan(U, F, direction * scan)
            dist = {name: abs(tau) for name, tau in roots.items()}
            stop = self._choose_stop(U, F, dist, h, direction, terminal, crit_tol, gap_tol)
            seg_end = direction * (stop[0] if stop is not None else h)
            for name, tau in sorted(roots.items(), key=lambda kv: abs(kv[1])):
                if abs(tau) >= abs(seg_end) - coincide or name in ("u", "f"):
                    continue
                if name == "du" and "f" in dist and abs(dist["f"] - abs(tau)) <= gap_tol:
                    continue
                st = self.state_at(U, F, tau)
                events.append(TaylorEvent(name + "_zero", float(t + tau), _floats(st), False))
            segments.append(Segment(float(t), float(seg_end), np.array([float(x) for x in U]),
                                    np.array([float(x) for x in F])))
            st = self.state_at(U, F, seg_end)
            t = t + seg_end
            if stop is not None:
                kind = stop[1]
                if kind == "critical":
                    info = stop[2]
                    st = _floats(st)
                    st.update(raw_u=st["u"], raw_df=st["df"], t_u=float(t - seg_end) + info["t_u"],
                              t_df=float(t - seg_end) + info["t_df"], gap=info["gap"])
                    st["u"] = 0.0
                    st["df"] = 0.0
                    events.append(TaylorEvent("critical", float(t), st, True))
                    status = "event"
                    end = (t, st)
                    break
                if kind == "f_zero" and through_boundary:
                    events.append(TaylorEvent("boundary_crossing", float(t), _floats(st), False))
                    if abs(st["df"]) <= coincide or st["u"] <= 0:
                        status = "event"
                        end = (t, st)
                        break
                    U, F = self.boundary_series(st["u"], st["df"])
                    vals = {"u": U[0], "du": c.zero, "f": c.zero, "df": F[1]}
                    fresh = True
                    if abs(t - t_end) <= min_step:
                        status = "done"
                        end = (t_end, self.state_at(U, F, c.zero))
                        break
                    continue
                if kind == "f_zero":
                    st["f"] = c.zero
                events.append(TaylorEvent(kind, float(t), _floats(st), True))
                status = "event"
                end = (t, st)
                break
            vals = {key: st[key] for key in ("u", "du", "f", "df")}
            if last:
                status = "done"
                end = (t_end, st)
                t = t_end
                break
        if end is None:
            end = (t, vals)
        t_fin, st = end
        full = st
        if "ddu" not in st:
            U, F = self.regular_series(st["u"], st["du"], st["f"], st["df"], order=6)
            full = self.state_at(U, F, c.zero)
        return TaylorRun(status, float(t_fin), _floats(full), segments, events, steps, start_kind)

    def _choose_stop(self, U, F, dist, h, direction, terminal, crit_tol, gap_tol):
        """First stopping zero in the step as (distance, kind, info), or None.

        Zeros of u and f are always taken (they are singular points), other
        terminal zeros only within the nominal step.  A zero of u and a zero
        of f' closer than ``gap_tol`` form one critical event; ``info``
        carries both locations (relative to the step start) and their gap.
        """
        c = self.ctx
        cand = sorted((r, name) for name, r in dist.items()
                      if name in ("u", "f") or (name in terminal and r <= h))
        if not cand:
            return None
        r0, name = cand[0]
        r_u = dist.get("u")
        r_df = dist.get("df")
        if name in ("u", "df"):
            if r_u is None and name == "df":
                # u may vanish just past the scanned range: linear estimate
                tau = direction * r_df
                u, du = self._poly(U, tau), self._poly(U, tau, 1)
                if du != 0 and u * du * direction < 0 and abs(u / du) <= gap_tol:
                    r_u = r_df + abs(u / du)
            if r_u is not None:
                tau_u = direction * r_u
                fprime = abs(self._poly(F, tau_u, 1))
                near = r_df is not None and abs(r_u - r_df) <= gap_tol
                if near or fprime <= crit_tol * max(abs(self._poly(F, tau_u)), 1):
                    if r_df is None:
                        r_df = r_u
                    land = min(r_u, scan_limit(dist, r_u))
                    info = {"t_u": float(direction * r_u), "t_df": float(direction * r_df),
                            "gap": float(abs(r_u - r_df))}
                    return land, "critical", info
            if name == "u":
                return r0, "u_zero", None
        if name == "f":
            return r0, "f_zero", None
        return r0, name + "_zero", None


class FloatSeries:
    """Float64 singular series, used to match integrator states near u = 0 or f = 0."""

    def __init__(self, params: SpaceParams):
        self.params = params
        self.n, self.m, self.lam, self.k = float(params.n), float(params.m), params.lam, params.k

    def eq_coefs(self, U, F, j):
        """Coefficient j of the polynomial equations A and B."""
        n, m, lam, k = self.n, self.m, self.lam, self.k
        L = j + 1
        U = np.concatenate([U, np.zeros(max(0, L + 3 - len(U)))])
        F = np.concatenate([F, np.zeros(max(0, L + 3 - len(F)))])
        i = np.arange(L, dtype=float)
        dU, dF = (i + 1) * U[1:L + 1], (i + 1) * F[1:L + 1]
        ddU, ddF = (i + 1) * (i + 2) * U[2:L + 2], (i + 1) * (i + 2) * F[2:L + 2]
        Uc, Fc = U[:L], F[:L]

        def conv(a, b):
            return np.convolve(a, b)[:L]

        def at(a, b):
            return float(np.dot(a[:L], b[:L][::-1]))

        A = (at(conv(Fc, Uc), ddU) + m * at(dF, conv(dU, Uc)) + lam * at(Fc, conv(Uc, Uc))
             - (n - 2) * (k * F[j] - at(Fc, conv(dU, dU))))
        B = m * at(Uc, ddF) + (n - 1) * at(ddU, Fc) + lam * at(Uc, Fc)
        return A, B

    def critical(self, U1, F0, ddf, order=20):
        n, m = self.n, self.m
        U = np.zeros(order + 3)
        F = np.zeros(order + 3)
        U[1], F[0], F[2] = U1, F0, ddf / 2
        _, b1 = self.eq_coefs(U, F, 1)
        U[3] = -b1 / (6 * (n - 1) * F0)
        for q in range(3, order + 1):
            a_q, _ = self.eq_coefs(U, F, q)
            _, b_q = self.eq_coefs(U, F, q - 1)
            m11 = m * q * U1 * U1
            m12 = F0 * U1 * (q + 1) * (q + 2 * n - 4)
            m21 = m * U1 * q * (q - 1)
            m22 = (n - 1) * (q + 1) * q * F0
            det = m11 * m22 - m12 * m21
            F[q] = (-a_q * m22 + b_q * m12) / det
            U[q + 1] = (-b_q * m11 + a_q * m21) / det
        return U[:order + 1], F[:order + 1]

    def boundary(self, U0, F1, order=20):
        m = self.m
        U = np.zeros(order + 3)
        F = np.zeros(order + 3)
        U[0], F[1] = U0, F1
        for j in range(1, order):
            a_j, _ = self.eq_coefs(U, F, j)
            U[j + 1] = -a_j / (F1 * U0 * (j + 1) * (j + m))
            _, b_j = self.eq_coefs(U, F, j - 1)
            F[j + 1] = -b_j / (m * U0 * (j + 1) * j)
        return U[:order + 1], F[:order + 1]

    @staticmethod
    def _ev(c, tau, d=0):
        P = np.polynomial.polynomial
        return float(P.polyval(tau, P.polyder(c, d) if d else c))

    @staticmethod
    def _newton2(resid, x, max_iter=30):
        """2-d Newton with a forward-difference column for the second unknown."""
        for _ in range(max_iter):
            r, ds = resid(x, True)
            h2 = 1e-7 * max(1.0, abs(x[1]))
            r2, _ = resid((x[0], x[1] + h2), False)
            j11, j21 = ds
            j12, j22 = (r2[0] - r[0]) / h2, (r2[1] - r[1]) / h2
            det = j11 * j22 - j12 * j21
            if det == 0 or not math.isfinite(det):
                return None
            dx0 = (r[0] * j22 - r[1] * j12) / det
            dx1 = (j11 * r[1] - j21 * r[0]) / det
            x = (x[0] - dx0, x[1] - dx1)
            if not (math.isfinite(x[0]) and math.isfinite(x[1])):
                return None
            if abs(dx0) + abs(dx1) <= 1e-15 * (1 + abs(x[0]) + abs(x[1])):
                return x
        r, _ = resid(x, False)
        return x if abs(r[0]) + abs(r[1]) <= 1e-13 else None

    def fit_boundary(self, state, s_guess, order=20):
        """Boundary-series solution matching u, f and f' of ``state`` (a dict).

        The zero of f lies at offset s from the state's time.  u' is left out
        of the match, since it carries the mode that is singular at f = 0;
        its disagreement is returned as ``mismatch``.  Returns None when the
        iteration fails.
        """
        u_c, du_c, f_c, df_c = (float(state[k]) for k in ("u", "du", "f", "df"))
        ev = self._ev

        def resid(x, with_ds):
            s, U0 = x
            U, F = self.boundary(U0, 1.0, order)
            tau = -s
            r = (ev(U, tau) - u_c, ev(F, tau) * df_c - ev(F, tau, 1) * f_c)
            ds = (-ev(U, tau, 1), -(ev(F, tau, 1) * df_c - ev(F, tau, 2) * f_c)) if with_ds else None
            return r, ds

        s0 = float(s_guess)
        U0 = u_c + du_c * s0 + float(state.get("ddu", 0.0)) * s0 * s0 / 2
        with np.errstate(all="ignore"):
            x = self._newton2(resid, (s0, U0))
        if x is None or x[1] <= 0:
            return None
        s, U0 = x
        U, F = self.boundary(U0, 1.0, order)
        fhat = ev(F, -s)
        if fhat == 0:
            return None
        F = F * (f_c / fhat)
        return {"s": s, "U": U, "F": F, "mismatch": ev(U, -s, 1) - du_c, "u": U0, "df": F[1]}

    def fit_critical(self, state, s_guess, order=20):
        """Critical-series solution matching u, f and f' of ``state``.

        u' at the zero is fixed to +-sqrt(k); the free ratio f''/f and the
        offset s are solved for, f itself scales out.  The disagreement in u'
        is returned as ``mismatch``.  Requires n > 2 and k > 0.
        """
        if self.params.n <= 2 or not self.k > 0:
            return None
        u_c, du_c, f_c, df_c = (float(state[k]) for k in ("u", "du", "f", "df"))
        s0 = float(s_guess)
        # u ~ U1 (t - t*) near the zero, so U1 has the sign of -u/s
        U1 = math.sqrt(self.k) * (1.0 if -u_c / s0 > 0 else -1.0)
        ev = self._ev

        def resid(x, with_ds):
            s, beta = x
            U, F = self.critical(U1, 1.0, 2 * beta, order)
            tau = -s
            r = (ev(U, tau) - u_c, ev(F, tau, 1) * f_c - ev(F, tau) * df_c)
            ds = (-ev(U, tau, 1), -(ev(F, tau, 2) * f_c - ev(F, tau, 1) * df_c)) if with_ds else None
            return r, ds

        beta0 = float(state.get("ddf", 0.0)) / (2 * f_c)
        with np.errstate(all="ignore"):
            x = self._newton2(resid, (s0, beta0))
        if x is None:
            return None
        s, beta = x
        U, F = self.critical(U1, 1.0, 2 * beta, order)
        fhat = ev(F, -s)
        if fhat == 0:
            return None
        F = F * (f_c / fhat)
        return {"s": s, "U": U, "F": F, "mismatch": ev(U, -s, 1) - du_c, "f": F[0], "ddf": 2 * F[2]}


def scan_limit(dist, r_u):
    """Landing distance for a critical pair: the zero of u when it was scanned, else the f' zero."""
    return r_u if "u" in dist else dist.get("df", r_u)


def _floats(st: dict) -> dict:
    return {key: float(val) for key, val in st.items()}
