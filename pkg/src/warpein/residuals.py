"""Residuals of the reduced Einstein equations, f reconstruction, reports.

For a warped product g = dt^2 + u^2 g_N the equation
Hess f = (f/m)(Ric - lambda g) splits into

* the radial condition      f'' + a f = 0,
* the tangential condition  f' b + c f = 0,

with a, b, c the functions returned by :func:`coeff_abc`.  Eliminating f
between the two gives a third order polynomial ODE in u alone, evaluated by
:func:`residual_compat`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import BoundaryConditionError, MalformedProfileError, SingularPointError, SingularQuadratureError
from .geometry import PointState, SpaceParams, _out, _require_u
from .profile import Profile

__all__ = [
    "ABCCoefficients",
    "ResidualReport",
    "coeff_abc",
    "residual_second",
    "residual_compat",
    "residual_first",
    "residual_boundary",
    "node_scale",
    "fill_derivatives",
    "fd_weights",
    "f_from_u",
    "verify",
]


@dataclass
class ABCCoefficients:
    a: float
    b: float
    c: float


def _arr(x):
    return np.asarray(x, dtype=float)


def coeff_abc(state: PointState, params: SpaceParams) -> ABCCoefficients:
    n, m, lam, k = params.n, params.m, params.lam, params.k
    u = _require_u(state.u)
    du, ddu = _arr(state.du), _arr(state.ddu)
    a = (n - 1) / m * ddu / u + lam / m
    b = m * du / u
    c = lam - ((n - 2) * k - (n - 2) * du * du - u * ddu) / (u * u)
    return ABCCoefficients(_out(a), _out(b), _out(c))


def residual_second(state: PointState, params: SpaceParams):
    """Tangential condition f' b + c f."""
    abc = coeff_abc(state, params)
    return _out(_arr(state.df) * abc.b + abc.c * _arr(state.f))


def residual_first(state: PointState, params: SpaceParams):
    """Radial condition f'' + a f."""
    abc = coeff_abc(state, params)
    return _out(_arr(state.ddf) + abc.a * _arr(state.f))


def residual_compat(state: PointState, params: SpaceParams):
    """Polynomial compatibility condition on u.

    This is m^2 u^2 u'^2 times [a - (c/b)' + (c/b)^2], expanded.  It is a
    polynomial, so it can be evaluated at u' = 0 and at u = 0 as well.
    """
    n, m, lam, k = params.n, params.m, params.lam, params.k
    u, u1, u2, u3 = _arr(state.u), _arr(state.du), _arr(state.ddu), _arr(state.dddu)
    if np.any(np.isnan(u3)):
        raise ValueError("residual_compat needs u''' (dddu) to be populated")
    q = n - 2
    u_sq, u1_sq = u * u, u1 * u1
    val = (
        lam * lam * u_sq * u_sq
        - 2 * q * k * lam * u_sq
        + 2 * q * lam * u_sq * u1_sq
        + (2 + m) * lam * u_sq * u * u2
        + q * q * k * k
        - (2 * q + m) * q * k * u1_sq
        - (2 + m) * q * k * u * u2
        + q * (m + q) * u1_sq * u1_sq
        + (2 * q + m) * u * u1_sq * u2
        + (1 + m) * u_sq * u2 * u2
        - m * u_sq * u1 * u3
    )
    return _out(val)


def residual_boundary(state: PointState, tol: float = 1e-12):
    """|f''| + |u'| at a point where f vanishes."""
    f = _arr(state.f)
    if np.any(np.abs(f) > tol):
        raise BoundaryConditionError(f"not a boundary point: |f| = {float(np.max(np.abs(f))):.3e} > {tol:g}")
    return _out(np.abs(_arr(state.ddf)) + np.abs(_arr(state.du)))


def node_scale(state: PointState, params: SpaceParams):
    """Per-node normaliser max(1, |lambda| u^2, |f''|)."""
    u, ddf = _arr(state.u), _arr(state.ddf)
    return np.maximum(1.0, np.maximum(abs(params.lam) * u * u, np.abs(ddf)))


# finite differences

def fd_weights(x0: float, xs, order: int) -> np.ndarray:
    """Fornberg weights for the ``order``-th derivative at x0 from nodes xs."""
    xs = np.asarray(xs, dtype=float)
    npts = xs.size
    c = np.zeros((npts, order + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[i, kk] = c1 * (kk * c[i - 1, kk - 1] - c5 * c[i - 1, kk]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for kk in range(mn, 0, -1):
                c[j, kk] = (c4 * c[j, kk] - kk * c[j, kk - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def fill_derivatives(ts, values, max_order: int) -> list:
    """Derivatives 1..max_order of sampled values, fourth order accurate.

    Derivative d uses d + 4 nodes, centred where possible and shifted to one
    side near the ends of the grid.
    """
    ts, values = np.asarray(ts, dtype=float), np.asarray(values, dtype=float)
    npts = ts.size
    out = []
    for d in range(1, max_order + 1):
        width = d + 4
        if npts < width:
            raise MalformedProfileError(f"need at least {width} nodes to fill derivative order {d}")
        res = np.empty(npts)
        half = width // 2
        for i in range(npts):
            lo = min(max(i - half, 0), npts - width)
            idx = slice(lo, lo + width)
            res[i] = fd_weights(ts[i], ts[idx], d) @ values[idx]
        out.append(res)
    return out


# f from u

def _c_over_b(u, du, ddu, params: SpaceParams):
    n, m, lam, k = params.n, params.m, params.lam, params.k
    num = (n - 2) * k - (n - 2) * du * du - u * ddu
    c = lam - num / (u * u)
    return c * u / (m * du)


def _c_over_b_prime(u, du, ddu, dddu, params: SpaceParams):
    n, m, lam, k = params.n, params.m, params.lam, params.k
    num = (n - 2) * k - (n - 2) * du * du - u * ddu
    dnum = -(2 * n - 3) * du * ddu - u * dddu
    c = lam - num / (u * u)
    dc = -dnum / (u * u) + 2 * num * du / u ** 3
    return (dc * u + c * du) / (m * du) - c * u * ddu / (m * du * du)


def f_from_u(profile: Profile, f0: float, epsabs: float = 1e-12) -> Profile:
    """Fill f, f', f'' from the warping function alone.

    Solves f' b + c f = 0 by quadrature, f(t) = f0 exp(-int c/b), anchored at
    the first grid node, then f' = -(c/b) f and f'' = -a f.  The quadrature
    is adaptive on every grid interval when ``profile.dense`` is available,
    a corrected (Hermite) trapezoid rule when u''' is known at the nodes, and
    plain trapezoid otherwise (recorded in ``meta['quadrature']``).
    """
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    params = profile.params
    st = profile.states
    ts = profile.ts
    if np.any(st.du == 0.0):
        raise SingularQuadratureError("u' vanishes on the grid; c/b is singular there")
    if np.any(st.u <= 0):
        raise MalformedProfileError("u must be positive on the grid")
    g = _c_over_b(st.u, st.du, st.ddu, params)
    steps = np.diff(ts)
    if profile.dense is not None:
        method = "adaptive"

        def integrand(t):
            s = profile.dense(t)
            return float(_c_over_b(s.u, s.du, s.ddu, params))

        pieces = np.empty(steps.size)
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            for i in range(steps.size):
                try:
                    pieces[i] = integrate.quad(integrand, ts[i], ts[i + 1], epsabs=epsabs, epsrel=0.0, limit=200)[0]
                except (integrate.IntegrationWarning, ZeroDivisionError) as exc:
                    raise SingularQuadratureError(f"quadrature failed on [{ts[i]:g}, {ts[i + 1]:g}]: {exc}") from None
    elif np.all(np.isfinite(st.dddu)):
        method = "hermite"
        dg = _c_over_b_prime(st.u, st.du, st.ddu, st.dddu, params)
        pieces = steps / 2 * (g[:-1] + g[1:]) + steps ** 2 / 12 * (dg[:-1] - dg[1:])
    else:
        method = "trapezoid"
        pieces = steps / 2 * (g[:-1] + g[1:])
    integral = np.concatenate([[0.0], np.cumsum(pieces)])
    f = f0 * np.exp(-integral)
    df = -g * f
    a = (params.n - 1) / params.m * st.ddu / st.u + params.lam / params.m
    ddf = -a * f
    states = st.replace(f=f, df=df, ddf=ddf)
    meta = dict(profile.meta)
    meta["quadrature"] = method
    return Profile(ts, states, params, profile.left_end, profile.right_end, list(profile.events),
                   None, profile.missing, meta)


# reports

@dataclass
class ResidualReport:
    r_second: float
    r_compat: float
    r_first: float
    r_boundary: float | None
    r_second_raw: float
    r_compat_raw: float
    r_first_raw: float
    grid_size: int
    nodes_evaluated: int
    tol: float
    verdict: bool
    boundary_nodes: list = field(default_factory=list)
    grad_at_boundary: list = field(default_factory=list)
    filled_columns: tuple = ()
    warnings: list = field(default_factory=list)

    @property
    def verdict_text(self) -> str:
        return "pass" if self.verdict else "fail"

    def as_dict(self) -> dict:
        return {
            "r_second": self.r_second,
            "r_compat": self.r_compat,
            "r_first": self.r_first,
            "r_boundary": self.r_boundary,
            "r_second_raw": self.r_second_raw,
            "r_compat_raw": self.r_compat_raw,
            "r_first_raw": self.r_first_raw,
            "grid_size": self.grid_size,
            "nodes_evaluated": self.nodes_evaluated,
            "tol": self.tol,
            "verdict": self.verdict_text,
            "boundary_nodes": list(self.boundary_nodes),
            "grad_at_boundary": list(self.grad_at_boundary),
            "filled_columns": list(self.filled_columns),
            "warnings": list(self.warnings),
        }

    def to_text(self) -> str:
        lines = []
        for key, val in self.as_dict().items():
            if isinstance(val, list):
                val = ";".join(str(v) for v in val)
            elif isinstance(val, float):
                val = "%.17g" % val
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"


def _sup(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x))) if x.size else 0.0


def verify(profile: Profile, tol: float, boundary_tol: float | None = None) -> ResidualReport:
    """Evaluate all residuals of a profile and compare against ``tol``.

    Residuals are evaluated at every node with u > 0.  A grid end with
    u = 0 (a critical point) is skipped; u <= 0 anywhere else makes the
    profile malformed.  The boundary residual is evaluated at each grid end
    where |f| <= boundary_tol (default ``tol``).  The verdict uses the
    normalised sup-norms.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    btol = tol if boundary_tol is None else boundary_tol
    st = profile.states
    npts = len(profile)
    u = st.u
    keep = u > 0
    bad = ~keep
    if npts > 1:
        bad[0] = bad[0] and u[0] < 0
        bad[-1] = bad[-1] and u[-1] < 0
    else:
        bad[0] = u[0] < 0
    if np.any(bad):
        where = profile.ts[np.argmax(bad)]
        raise MalformedProfileError(f"u <= 0 at interior node t = {where:g}")
    if not np.any(keep):
        raise MalformedProfileError("no node with u > 0")
    sub = st[keep]
    try:
        r2 = _arr(residual_second(sub, profile.params))
        r1 = _arr(residual_first(sub, profile.params))
        rc = _arr(residual_compat(sub, profile.params))
    except SingularPointError as exc:
        raise MalformedProfileError(str(exc)) from None
    scale = node_scale(sub, profile.params)

    notes = []
    boundary_nodes, grads = [], []
    r_b = None
    for i in sorted({0, npts - 1}):
        if abs(st.f[i]) <= btol:
            val = float(residual_boundary(st[i], btol))
            r_b = val if r_b is None else max(r_b, val)
            boundary_nodes.append(float(profile.ts[i]))
            grads.append(float(abs(st.df[i])))
            if abs(st.df[i]) <= btol:
                notes.append(f"grad f vanishes at boundary node t={profile.ts[i]:g}")
    f_in = st.f[keep]
    if np.any(f_in < 0):
        notes.append("f changes sign on the grid; the Einstein structure lives on the part where f > 0")
    if profile.missing:
        notes.append("derivative columns filled by finite differences: " + ",".join(profile.missing))

    n2, n1, nc = _sup(r2 / scale), _sup(r1 / scale), _sup(rc / scale)
    present = [n2, nc, n1] + ([r_b] if r_b is not None else [])
    verdict = all(math.isfinite(v) and v <= tol for v in present)
    return ResidualReport(
        r_second=n2, r_compat=nc, r_first=n1, r_boundary=r_b,
        r_second_raw=_sup(r2), r_compat_raw=_sup(rc), r_first_raw=_sup(r1),
        grid_size=npts, nodes_evaluated=int(np.count_nonzero(keep)), tol=float(tol), verdict=verdict,
        boundary_nodes=boundary_nodes, grad_at_boundary=grads,
        filled_columns=tuple(profile.missing), warnings=notes,
    )
