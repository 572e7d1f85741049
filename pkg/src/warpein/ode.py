"""Initial-value integration of the coupled (u, f) system.

The closed first-order system is

    u'' = -m f' u' / f - lambda u + (n-2)(k - u'^2)/u
    f'' = -a f,    a = (n-1)/m u''/u + lambda/m

which is singular where u = 0 (critical points of f) and where f = 0
(boundary).  Two integrators are available:

``method="rk"``
    Dormand-Prince 5(4) in float64 (compiled kernel when built).  Close to
    a zero of u or f the loop hands off to a cubic Taylor polynomial built
    from the analytic u'', u''', f'', f''' and lands on the zero.  Starts
    at, and crossings of, singular points use the singular series.

``method="taylor"``
    High-order Taylor series in extended precision (see
    :mod:`warpein.taylor`); initial data may be mpmath numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._backend import kernels
from .errors import BoundaryConditionError, IntegrationError, SingularPointError, WarpError
from .geometry import PointState, SpaceParams
from .profile import COLUMNS, EndpointClass, Profile
from .taylor import FloatSeries, TaylorSolver

__all__ = [
    "IVPState",
    "ivp_rhs",
    "compat_rhs_third_order",
    "derived_quantities",
    "integrate",
    "extend_maximal",
]

EVENT_NAMES = ("u", "du", "f", "df")


@dataclass(frozen=True)
class IVPState:
    """Initial data (t, u, u', f, f').

    ``ddf`` is only used when the start is a zero of u, where it is the free
    datum of the local solution.  Values may be mpmath numbers; the Taylor
    integrator then keeps their full precision.
    """

    t: float
    u: float
    du: float
    f: float
    df: float
    ddf: Optional[float] = None

    @property
    def interior(self) -> bool:
        return self.u > 0 and self.f > 0

    def as_dict(self) -> dict:
        out = {"t": float(self.t), "u": float(self.u), "du": float(self.du), "f": float(self.f),
               "df": float(self.df)}
        if self.ddf is not None:
            out["ddf"] = float(self.ddf)
        return out

    def replace(self, **changes) -> "IVPState":
        d = {"t": self.t, "u": self.u, "du": self.du, "f": self.f, "df": self.df, "ddf": self.ddf}
        d.update(changes)
        return IVPState(**d)


def ivp_rhs(state: IVPState, params: SpaceParams, eps: float = 0.0):
    """(u', u'', f', f'') at an interior state.

    Raises SingularPointError when u <= eps or |f| <= eps.
    """
    u, du, f, df = (float(state.u), float(state.du), float(state.f), float(state.df))
    if not (u > eps and abs(f) > eps):
        raise SingularPointError(f"u f vanishes (u = {u:.3e}, f = {f:.3e}): endpoint reached")
    n, m, lam, k = params.n, params.m, params.lam, params.k
    ddu = (-m * df * du * u - lam * f * u * u + f * (n - 2) * (k - du * du)) / (f * u)
    ddf = -((n - 1) / m * ddu / u + lam / m) * f
    return du, ddu, df, ddf


def compat_rhs_third_order(u: float, du: float, ddu: float, params: SpaceParams):
    """(u', u'', u''') from the compatibility polynomial solved for u'''.

    The polynomial is linear in u''' with coefficient -m u^2 u', so this
    form breaks down where u' = 0 (for example at the minimum of a cosh
    warping).  It involves u alone and serves as a cross-check.
    """
    if u == 0 or du == 0:
        raise SingularPointError(f"third-order form needs u u' != 0 (u = {u:.3e}, u' = {du:.3e})")
    n, m, lam, k = params.n, params.m, params.lam, params.k
    q = n - 2
    u_sq, u1_sq = u * u, du * du
    rest = (
        lam * lam * u_sq * u_sq
        - 2 * q * k * lam * u_sq
        + 2 * q * lam * u_sq * u1_sq
        + (2 + m) * lam * u_sq * u * ddu
        + q * q * k * k
        - (2 * q + m) * q * k * u1_sq
        - (2 + m) * q * k * u * ddu
        + q * (m + q) * u1_sq * u1_sq
        + (2 * q + m) * u * u1_sq * ddu
        + (1 + m) * u_sq * ddu * ddu
    )
    return du, ddu, rest / (m * u_sq * du)


def derived_quantities(params: SpaceParams, u, du, f, df):
    """u'', u''', f'', f''' from (u, u', f, f') via the system and its t-derivative."""
    n, m, lam, k = params.n, params.m, params.lam, params.k
    with np.errstate(divide="ignore", invalid="ignore"):
        ddu = -m * df * du / f - lam * u + (n - 2) * (k - du * du) / u
        a = (n - 1) / m * ddu / u + lam / m
        ddf = -a * f
        dddu = (-m * ((ddf * du + df * ddu) / f - df * df * du / (f * f)) - lam * du
                + (n - 2) * (-2 * du * ddu / u - (k - du * du) * du / (u * u)))
        da = (n - 1) / m * (dddu / u - ddu * du / (u * u))
        dddf = -(da * f + a * df)
    return ddu, dddu, ddf, dddf


# pieces of dense output

class _PolyPiece:
    """Polynomials in tau = t - t0 for u and f (float coefficients)."""

    def __init__(self, t0, a, b, U, F):
        self.t0 = float(t0)
        self.a, self.b = sorted((float(a), float(b)))
        self.U = np.asarray(U, dtype=float)
        self.F = np.asarray(F, dtype=float)

    def __call__(self, ts):
        P = np.polynomial.polynomial
        tau = np.asarray(ts, dtype=float) - self.t0
        out = {}
        cu, cf = self.U, self.F
        for i, name in enumerate(("u", "du", "ddu", "dddu")):
            out[name] = P.polyval(tau, cu)
            cu = P.polyder(cu) if cu.size > 1 else np.zeros(1)
        for name in ("f", "df", "ddf"):
            out[name] = P.polyval(tau, cf)
            cf = P.polyder(cf) if cf.size > 1 else np.zeros(1)
        return out


class _RKPiece:
    """One accepted Dormand-Prince step with its continuous extension."""

    def __init__(self, t_start, h, rc, params):
        self.t_start = float(t_start)
        self.h = float(h)
        self.a, self.b = sorted((self.t_start, self.t_start + self.h))
        self.rc = np.asarray(rc, dtype=float)
        self.params = params

    def raw(self, ts):
        theta = (np.asarray(ts, dtype=float) - self.t_start) / self.h
        th = theta[..., None]
        r = self.rc
        return r[0] + th * (r[1] + (1 - th) * (r[2] + th * (r[3] + (1 - th) * r[4])))

    def __call__(self, ts):
        y = self.raw(ts)
        u, du, f, df = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        ddu, dddu, ddf, _ = derived_quantities(self.params, u, du, f, df)
        return {"u": u, "du": du, "ddu": ddu, "dddu": dddu, "f": f, "df": df, "ddf": ddf}


@dataclass
class _Leg:
    """Integration in one direction from the initial point."""

    direction: int
    t_start: float
    t_stop: float
    status: str
    reason: str
    pieces: list
    end_state: dict
    events: list = field(default_factory=list)
    start_kind: str = "regular"
    stats: dict = field(default_factory=dict)


def _full_state(params, u, du, f, df):
    ddu, dddu, ddf, dddf = derived_quantities(params, np.float64(u), np.float64(du), np.float64(f),
                                              np.float64(df))
    return {"u": float(u), "du": float(du), "ddu": float(ddu), "dddu": float(dddu), "f": float(f),
            "df": float(df), "ddf": float(ddf), "dddf": float(dddf)}


def _cubic_polys(st):
    U = np.array([st["u"], st["du"], st["ddu"] / 2, st["dddu"] / 6])
    F = np.array([st["f"], st["df"], st["ddf"] / 2, st["dddf"] / 6])
    return U, F


def _first_root(coefs, direction, window):
    """Smallest tau with direction*tau in (0, window] where the polynomial vanishes, or None."""
    c = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    if c.size < 2:
        return None
    roots = np.roots(c[::-1])
    best = None
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
            continue
        s = r.real * direction
        if 0.0 < s <= window and (best is None or s < best):
            best = s
    return None if best is None else direction * best


def _poly_state(U, F, tau):
    P = np.polynomial.polynomial
    vals = {}
    cu, cf = U, F
    for name in ("u", "du", "ddu", "dddu"):
        vals[name] = float(P.polyval(tau, cu)) if cu.size else 0.0
        cu = P.polyder(cu) if cu.size > 1 else np.zeros(1)
    for name in ("f", "df", "ddf", "dddf"):
        vals[name] = float(P.polyval(tau, cf)) if cf.size else 0.0
        cf = P.polyder(cf) if cf.size > 1 else np.zeros(1)
    return vals


class _RKDriver:
    def __init__(self, params, tol, handoff, event_tol, terminal, through_boundary, max_steps, h_fixed,
                 gap_tol, landing="fit", fit_tol=1e-6, series_order=14):
        self.p = params
        self.tol = tol
        self.handoff = handoff
        self.event_tol = event_tol
        self.terminal = set(terminal)
        self.through_boundary = through_boundary
        self.max_steps = max_steps
        self.h_fixed = h_fixed
        self.gap_tol = gap_tol
        self.landing = landing
        self.fit_tol = fit_tol
        self.cubic_reach = 2e-3
        self.series = TaylorSolver(params, dps=30, order=series_order, tol=1e-20)
        self.fits = FloatSeries(params)

    def _series_start(self, t0, U, F, direction, kind):
        """Piece for the first stretch from a singular start, and the state where rk takes over."""
        Uf = np.array([float(x) for x in U])
        Ff = np.array([float(x) for x in F])
        step = self.handoff
        ratio = max(abs(x) for x in Uf[-3:]) + max(abs(x) for x in Ff[-3:])
        if ratio > 0:
            # keep the truncated tail far below the rk tolerance
            step = min(step, 0.5 * (1e-3 * self.tol / ratio) ** (1.0 / (len(Uf) - 1)))
        piece = _PolyPiece(t0, t0, t0 + direction * step, Uf, Ff)
        st = _poly_state(Uf, Ff, direction * step)
        return piece, t0 + direction * step, st

    def run(self, initial: IVPState, t_target: float, direction: int) -> _Leg:
        p = self.p
        t = float(initial.t)
        u, du, f, df = float(initial.u), float(initial.du), float(initial.f), float(initial.df)
        pieces, events = [], []
        start_kind = "regular"
        stats = {"nfev": 0, "steps": 0, "handoffs": 0}
        sing = 1e-12
        if abs(u) <= sing or abs(f) <= sing:
            ddf = None if initial.ddf is None else float(initial.ddf)
            U, F, start_kind = self.series.start_series(u, du, f, df, ddf, tol=1e-10)
            piece, t, st = self._series_start(t, U, F, direction, start_kind)
            pieces.append(piece)
            u, du, f, df = st["u"], st["du"], st["f"], st["df"]
        elif u < 0:
            raise BoundaryConditionError(f"initial warping value must be positive, got u = {u}")
        term = (1, 0, 1, 1 if "df" in self.terminal else 0)
        handoff = self.handoff
        h0 = 0.0
        status, reason, end = "max_steps", "max_steps", None
        while True:
            if (t_target - t) * direction <= 1e-15 * max(1.0, abs(t)):
                status, reason = "done", "span"
                end = _full_state(p, u, du, f, df)
                t = t_target
                break
            budget = self.max_steps - stats["steps"]
            if budget <= 0:
                break
            res = kernels.dopri5([u, du, f, df], t, t_target, h0, self.tol, self.tol * 1e-3, float(p.n),
                                 float(p.m), p.lam, p.k, budget, handoff, self.h_fixed or 0.0, term)
            code, t_new, y, starts, hs, rcont, nfev = res
            stats["nfev"] += int(nfev)
            stats["steps"] += len(hs)
            for ts_, h_, rc_ in zip(starts, hs, rcont):
                pieces.append(_RKPiece(ts_, h_, rc_, p))
            if len(hs):
                h0 = abs(hs[-1])
            if code == kernels.DONE:
                t, (u, du, f, df) = t_target, y
                status, reason = "done", "span"
                end = _full_state(p, u, du, f, df)
                break
            if code == kernels.MAXSTEPS:
                t, (u, du, f, df) = t_new, y
                end = _full_state(p, u, du, f, df)
                break
            if code in (kernels.UNDERFLOW, kernels.SINGULAR):
                t, (u, du, f, df) = t_new, y
                end = _full_state(p, u, du, f, df)
                status, reason = "underflow", "underflow"
                break
            if code == kernels.EVENT:
                last = pieces.pop()
                y_a = last.raw(last.t_start)
                changed = [i for i in (0, 2, 3) if term[i] and (y_a[i] > 0) != (y[i] > 0)]
                if changed == [3] and not self._near_singular(y_a, direction):
                    # interior zero of f': locate it on the dense output
                    tr = brentq(lambda x: float(last.raw(x)[3]), last.a, last.b, xtol=self.event_tol)
                    trimmed = _RKPiece(last.t_start, last.h, last.rc, p)
                    trimmed.a, trimmed.b = sorted((last.t_start, tr))
                    pieces.append(trimmed)
                    st_ev = _full_state(p, *last.raw(tr))
                    t = tr
                    events.append({"kind": "df_zero", "t": tr, "state": st_ev, "terminal": True})
                    status, reason, end = "event", "df_zero", st_ev
                    break
                # a sign change of u or f inside the last step: land from the start of that step
                st0 = _full_state(p, *y_a)
                t_land0 = last.t_start
                window = abs(last.h)
            else:
                st0 = _full_state(p, *y)
                t_land0 = t_new
                window = None
                stats["handoffs"] += 1
            outcome = self._land(t_land0, st0, direction, window, pieces)
            if outcome is None:
                # the approach turned away before reaching zero: keep integrating, handing off later
                handoff *= 0.1
                if handoff < 1e-12:
                    handoff = 0.0
                t, (u, du, f, df) = t_new, y
                if code == kernels.EVENT:
                    pieces.append(last)
                continue
            handoff = self.handoff
            kind, t_ev, st_ev, info = outcome
            t = t_ev
            if kind == "f_zero" and self.through_boundary and abs(st_ev["df"]) > sing and st_ev["u"] > 0:
                events.append({"kind": "boundary_crossing", "t": t_ev, "state": st_ev, "terminal": False})
                U, F = self.series.boundary_series(st_ev["u"], st_ev["df"])
                piece, t, st = self._series_start(t_ev, U, F, direction, "boundary")
                pieces.append(piece)
                u, du, f, df = st["u"], st["du"], st["f"], st["df"]
                h0 = 0.0
                continue
            events.append({"kind": kind, "t": t_ev, "state": st_ev, "terminal": True, **info})
            status, reason = "event", kind
            end = st_ev
            break
        if end is None:
            end = _full_state(p, u, du, f, df)
        return _Leg(direction, float(initial.t), float(t), status, reason, pieces, end, events, start_kind, stats)

    def _land(self, t0, st, direction, window, pieces):
        """Land on the first zero of u, f or f' ahead of (t0, st) using the cubic Taylor polynomials.

        Returns (kind, t, state, info) or None when no zero lies within reach.
        """
        U, F = _cubic_polys(st)
        dists = []
        for y, dy in ((st["u"], st["du"]), (st["f"], st["df"])):
            if y * dy * direction < 0:
                dists.append(abs(y / dy))
        if window is None:
            if not dists:
                return None
            window = 3.0 * min(dists)
        else:
            window = 1.5 * window
        roots = {
            "u": _first_root(U, direction, window),
            "f": _first_root(F, direction, window),
            "df": _first_root(np.polynomial.polynomial.polyder(F), direction, window) if "df" in self.terminal else None,
        }
        found = {k: v for k, v in roots.items() if v is not None}
        if not found:
            return None
        name = min(found, key=lambda k: abs(found[k]))
        tau = found[name]
        info = {}
        if name in ("u", "df"):
            tau_u, tau_df = roots["u"], roots["df"]
            if tau_df is None:
                tau_df = _first_root(np.polynomial.polynomial.polyder(F), direction, 2 * window)
            if tau_u is not None and tau_df is not None and abs(tau_u - tau_df) <= self.gap_tol:
                info = {"t_u": t0 + tau_u, "t_df": t0 + tau_df, "gap": abs(tau_u - tau_df)}
                name, tau = "critical", tau_u
            elif name == "u":
                name = "u_zero"
                if tau_df is not None:
                    info = {"t_df": t0 + tau_df, "gap": abs(tau - tau_df)}
            else:
                name = "df_zero"
        else:
            name = "f_zero"
        if self.landing == "fit" and name in ("f_zero", "critical", "u_zero"):
            fitted = self._fit(name, st, tau)
            if fitted is not None:
                kind, s, Us, Fs, mismatch = fitted
                state = _poly_state(Us, Fs, 0.0)
                if kind == "critical":
                    state["u"], state["df"], state["ddu"] = 0.0, 0.0, 0.0
                    info = {"t_u": t0 + s, "t_df": t0 + s, "gap": 0.0}
                else:
                    state["f"], state["du"], state["ddf"] = 0.0, 0.0, 0.0
                info.update(landing="fit", fit_mismatch=mismatch, handoff_distance=abs(s))
                pieces.append(_PolyPiece(t0 + s, t0, t0 + s, Us, Fs))
                return kind, t0 + s, state, info
            if abs(tau) > self.cubic_reach:
                # too far for the cubic: integrate closer first
                return None
        state = _poly_state(U, F, tau)
        if name == "f_zero":
            state["f"] = 0.0
        if name == "critical":
            state["u"] = 0.0
            info["raw_df"] = state["df"]
        elif name == "u_zero":
            state["u"] = 0.0
        info.update(landing="cubic", handoff_distance=abs(tau))
        if tau != 0:
            pieces.append(_PolyPiece(t0, t0, t0 + tau, U, F))
        return name, t0 + tau, state, info

    def _near_singular(self, y, direction):
        for i in (0, 2):
            dy = y[i + 1]
            if y[i] * dy * direction < 0 and abs(y[i] / dy) <= max(self.handoff, self.gap_tol):
                return True
        return False

    def _fit(self, name, st, tau):
        """Match the state to the boundary or critical series; None unless the match is close."""
        try:
            if name == "f_zero":
                res = self.fits.fit_boundary(st, tau)
                kind = "f_zero"
            else:
                res = self.fits.fit_critical(st, tau)
                kind = "critical"
        except (ZeroDivisionError, ValueError, OverflowError):
            return None
        if res is None:
            return None
        s = float(res["s"])
        mismatch = float(res["mismatch"])
        if not (math.isfinite(s) and s * tau > 0 and abs(s) <= 3 * abs(tau) + 1e-12):
            return None
        if abs(mismatch) > self.fit_tol * max(1.0, abs(st["du"])):
            return None
        return kind, s, res["U"], res["F"], mismatch


def _taylor_leg(initial, params, t_target, direction, through_boundary, terminal, options) -> _Leg:
    opts = {"dps": 45, "order": 36, "tol": 1e-32}
    opts.update({k: v for k, v in options.items() if k in opts})
    solver = TaylorSolver(params, **opts)
    state = {"u": initial.u, "du": initial.du, "f": initial.f, "df": initial.df}
    if initial.ddf is not None:
        state["ddf"] = initial.ddf
    run_opts = {k: v for k, v in options.items() if k in ("max_steps", "reach", "crit_tol", "gap_tol", "min_step")}
    run = solver.run(initial.t, state, t_target, through_boundary=through_boundary,
                     terminal=tuple(x for x in terminal if x in ("u", "f", "df", "du")), **run_opts)
    pieces = [_PolyPiece(s.t0, s.t0, s.t0 + s.tau_end, s.U, s.F) for s in run.segments]
    events = [{"kind": e.kind, "t": e.t, "state": e.state, "terminal": e.terminal,
               **{k: e.state[k] for k in ("t_u", "t_df", "gap", "raw_df") if k in e.state}}
              for e in run.events]
    reason = "span"
    if run.status == "event":
        reason = next((e["kind"] for e in reversed(events) if e["terminal"]), "event")
    elif run.status != "done":
        reason = run.status
    return _Leg(direction, float(initial.t), run.t_end, run.status, reason, pieces, dict(run.end_state), events,
                run.start_kind, {"steps": run.steps})


def _leg_du_events(leg, tol):
    """Zeros of u' inside the rk pieces of a leg (recorded, not terminal)."""
    out = []
    boundary_ts = [e["t"] for e in leg.events if e["kind"] in ("f_zero", "boundary_crossing")]
    for pc in leg.pieces:
        if not isinstance(pc, _RKPiece):
            continue
        d0 = float(pc.raw(pc.t_start)[1])
        d1 = float(pc.raw(pc.t_start + pc.h)[1])
        if d0 == 0.0 or d0 * d1 >= 0:
            continue
        tr = brentq(lambda x: float(pc.raw(x)[1]), pc.a, pc.b, xtol=tol)
        if any(abs(tr - tb) <= 1e-6 for tb in boundary_ts):
            continue
        st = {k: float(v) for k, v in pc(tr).items()}
        out.append({"kind": "du_zero", "t": tr, "state": st, "terminal": False})
    return out


def _finite_target(t0, end, direction, horizon):
    if math.isfinite(end):
        return float(end), False
    return float(t0) + direction * horizon, True


def integrate(initial: IVPState, params: SpaceParams, span, tol: float = 1e-10, grid=None, *,
              method: str = "rk", through_boundary: bool = False, event_tol: float = 1e-12,
              handoff: Optional[float] = None, terminal=("u", "f", "df"), horizon: float = 40.0,
              nodes: int = 201, max_steps: int = 200000, fixed_step: Optional[float] = None,
              gap_tol: Optional[float] = None, landing: str = "fit", fit_tol: float = 1e-6,
              on_failure: str = "raise", taylor_options: Optional[dict] = None,
              classify: bool = True) -> Profile:
    """Integrate the system from ``initial`` across ``span`` and sample a Profile.

    ``span`` is ``(t_a, t_b)`` containing ``initial.t``; integration runs
    towards each end that differs from the initial time and stops early at
    the first terminal event.  Infinite ends are integrated for ``horizon``
    units of t; reaching that horizon without an event marks the end as
    ``infinite``.  ``grid`` (any iterable of times) is sampled where the
    solution was reached; by default ``nodes`` evenly spaced points cover
    the reached interval including its ends.

    Columns u'' and u''' come from the right-hand side and its analytic
    t-derivative.  ``on_failure="raise"`` turns step-size underflow or an
    exhausted step budget into :class:`IntegrationError` carrying the last
    state; ``"stop"`` returns the partial profile instead.
    """
    if not tol > 0:
        raise WarpError(f"tolerance must be positive, got {tol}")
    if method not in ("rk", "taylor"):
        raise WarpError(f"unknown method {method!r} (use 'rk' or 'taylor')")
    t0 = float(initial.t)
    lo, hi = (float(span[0]), float(span[1]))
    if lo > hi:
        lo, hi = hi, lo
    if not (lo <= t0 <= hi):
        raise WarpError(f"initial time {t0} lies outside the span [{lo}, {hi}]")
    if float(initial.u) < 0:
        raise BoundaryConditionError(f"initial warping value must be positive, got u = {float(initial.u)}")
    if abs(float(initial.f)) <= 1e-12 and abs(float(initial.du)) > 1e-10:
        raise BoundaryConditionError(
            f"where f = 0 the boundary conditions f'' = u' = 0 must hold; got u' = {float(initial.du):.6g}")
    if gap_tol is None:
        gap_tol = 1e-2 if method == "rk" else 1e-3
    if landing not in ("fit", "cubic"):
        raise WarpError(f"landing must be 'fit' or 'cubic', got {landing!r}")
    if handoff is None:
        handoff = 0.1 if landing == "fit" else 1e-3
    terminal = tuple(terminal)
    legs = []
    for direction, end in ((-1, lo), (1, hi)):
        if end == t0:
            continue
        t_target, unbounded = _finite_target(t0, end, direction, horizon)
        if method == "rk":
            driver = _RKDriver(params, tol, handoff, event_tol, terminal, through_boundary, max_steps,
                               fixed_step, gap_tol, landing, fit_tol)
            leg = driver.run(initial, t_target, direction)
            leg.events.extend(_leg_du_events(leg, event_tol))
        else:
            opts = dict(taylor_options or {})
            opts.setdefault("gap_tol", gap_tol)
            leg = _taylor_leg(initial, params, t_target, direction, through_boundary, terminal, opts)
        if leg.status == "done" and unbounded:
            leg.reason = "horizon"
        leg.stats["unbounded"] = unbounded
        if leg.status in ("underflow", "max_steps") and on_failure == "raise":
            raise IntegrationError(
                f"{method} integration stopped by {leg.status} at t = {leg.t_stop:.12g}", last_state=leg.end_state)
        legs.append(leg)
    return _assemble(initial, params, legs, grid, nodes, method, tol, classify)


def _initial_full(initial, params, legs):
    u, du, f, df = (float(initial.u), float(initial.du), float(initial.f), float(initial.df))
    if u > 0 and abs(f) > 0:
        return _full_state(params, u, du, f, df)
    for leg in legs:
        if leg.pieces:
            pc = min(leg.pieces, key=lambda q: min(abs(q.a - initial.t), abs(q.b - initial.t)))
            st = {k: float(v) for k, v in pc(float(initial.t)).items()}
            return st
    return {"u": u, "du": du, "ddu": float("nan"), "dddu": float("nan"), "f": f, "df": df, "ddf": float("nan")}


def _assemble(initial, params, legs, grid, nodes, method, tol, classify):
    t0 = float(initial.t)
    pieces = []
    for leg in legs:
        pieces.extend(leg.pieces)
    pieces.sort(key=lambda q: q.a)
    left = next((lg for lg in legs if lg.direction < 0), None)
    right = next((lg for lg in legs if lg.direction > 0), None)
    t_lo = left.t_stop if left else t0
    t_hi = right.t_stop if right else t0
    end_states = {
        "left": dict(left.end_state) if left else _initial_full(initial, params, legs),
        "right": dict(right.end_state) if right else _initial_full(initial, params, legs),
    }
    end_ts = {"left": t_lo, "right": t_hi}
    starts = [q.a for q in pieces]

    starts_arr = np.array(starts)
    ends_arr = np.array([q.b for q in pieces])

    def dense(t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = {name: np.full(ts.shape, np.nan) for name in COLUMNS[1:]}
        flat = ts.ravel()
        owner = np.full(flat.shape, -1)
        if pieces:
            # last piece starting at or before x, stepping back one if x is past its end
            j = np.clip(np.searchsorted(starts_arr, flat, side="right") - 1, 0, len(pieces) - 1)
            inside = (starts_arr[j] - 1e-14 <= flat) & (flat <= ends_arr[j] + 1e-14)
            jb = np.maximum(j - 1, 0)
            back = ~inside & (starts_arr[jb] - 1e-14 <= flat) & (flat <= ends_arr[jb] + 1e-14)
            owner = np.where(inside, j, np.where(back, jb, -1))
        for idx in np.unique(owner[owner >= 0]):
            sel = np.flatnonzero(owner == idx)
            vals = pieces[idx](flat[sel])
            for name in COLUMNS[1:]:
                out[name].ravel()[sel] = np.asarray(vals[name], dtype=float).ravel()
        for side in ("left", "right"):
            hit = np.flatnonzero(flat == end_ts[side])
            for name in COLUMNS[1:]:
                out[name].ravel()[hit] = end_states[side].get(name, np.nan)
        st = PointState(t=ts, **out)
        return st if np.ndim(t) else st[0]

    if grid is None:
        if t_hi > t_lo:
            ts = np.linspace(t_lo, t_hi, max(2, int(nodes)))
        else:
            ts = np.array([t0])
        dropped = 0
    else:
        g = np.unique(np.asarray(grid, dtype=float).ravel())
        keep = (g >= t_lo - 1e-14) & (g <= t_hi + 1e-14)
        dropped = int(np.sum(~keep))
        ts = np.clip(g[keep], t_lo, t_hi)
        if ts.size == 0:
            raise WarpError(f"no grid node lies in the integrated interval [{t_lo}, {t_hi}]")
    states = dense(ts)
    if ts.size == 1:
        states = PointState(**{name: np.atleast_1d(getattr(states, name)) for name in COLUMNS})
    events = []
    for leg in legs:
        events.extend(leg.events)
    events.sort(key=lambda e: e["t"])
    initial_kind = "regular"
    for leg in legs:
        initial_kind = leg.start_kind
    meta = {
        "method": method,
        "tol": tol,
        "t_initial": t0,
        "initial": initial.as_dict(),
        "initial_kind": initial_kind,
        "dropped_nodes": dropped,
        "end_states": end_states,
        "end_reasons": {
            "left": left.reason if left else ("start" if initial_kind == "regular" else initial_kind),
            "right": right.reason if right else ("start" if initial_kind == "regular" else initial_kind),
        },
        "unbounded": {"left": bool(left and left.stats.get("unbounded")),
                      "right": bool(right and right.stats.get("unbounded"))},
        "status": {"left": left.status if left else None, "right": right.status if right else None},
        "stats": {("left" if lg.direction < 0 else "right"): lg.stats for lg in legs},
    }
    prof = Profile(ts, states, params, events=events, dense=dense, meta=meta)
    prof.left_end = EndpointClass("stopped", t_lo, {"reason": meta["end_reasons"]["left"]})
    prof.right_end = EndpointClass("stopped", t_hi, {"reason": meta["end_reasons"]["right"]})
    if classify:
        from .endpoints import classify_endpoint

        for which in ("left", "right"):
            try:
                ec = classify_endpoint(prof, which)
            except WarpError as exc:
                ec = EndpointClass("stopped", end_ts[which], {"reason": meta["end_reasons"][which],
                                                               "classification_error": str(exc)})
            setattr(prof, which + "_end", ec)
    return prof


def extend_maximal(initial: IVPState, params: SpaceParams, tol: float = 1e-10, **kwargs) -> Profile:
    """Two-sided integration from an interior state across boundary crossings.

    The result covers the maximal interval on which u > 0 (up to the
    horizon on unbounded sides), so both ends are classified.
    """
    kwargs.setdefault("through_boundary", True)
    return integrate(initial, params, (-math.inf, math.inf), tol, **kwargs)
