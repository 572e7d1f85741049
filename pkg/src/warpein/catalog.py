"""Closed-form solutions, used as fixtures and ground truth.

Each family is a warped product with Einstein base (so both Schouten
eigenvalues agree) parametrised by a scale C > 0 and a curvature constant
kbar.  With s = sqrt(|kbar|):

================  ===========  ===============  ====  ==============  =========================
name              cell         u                k     f               lambda
================  ===========  ===============  ====  ==============  =========================
sphere-disk       lam>0, mu>0  sin(s t)/s       1     C cos(s t)      (n+m-1) s^2
flat-ray          lam=0, mu>0  1                0     C t             0
cosh-sinh         lam<0, mu>0  cosh(s t)/s      -1    C sinh(s t)     (n+m-1) kbar
exp-flat          lam<0, mu=0  exp(s t)         0     C exp(s t)      (n+m-1) kbar
hyperbolic-space  lam<0, mu<0  sinh(s t)/s      1     C cosh(s t)     (n+m-1) kbar
================  ===========  ===============  ====  ==============  =========================

``hyperbolic-boundary`` is cosh-sinh with kbar = -1 and ``exp-einstein`` is
exp-flat with s = 1 and C = a.

The tabulated metrics are often quoted with warping u^2 = s sin^2(s t)
(and the cosh / sinh analogues).  That amplitude is also a solution, but
only for the rescaled fiber normalisation k = +-s^3.  ``form="table"``
selects it; the default ``form="resolved"`` uses amplitude 1/s so that
k = +-1 and (u')^2 = k at the critical points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import mpmath
import numpy as np

from .errors import ConstraintViolation, DomainError, UnknownFamilyError
from .geometry import PointState, SpaceParams, eigen_data, mu_invariant
from .profile import EndpointClass, Profile

__all__ = ["ClosedFormFamily", "FAMILIES", "ALIASES", "instantiate", "sample", "requested_mu", "lookup_cell",
           "list_table", "family_names", "initial_state", "interior_grid"]

NUMPY = SimpleNamespace(sin=np.sin, cos=np.cos, sinh=np.sinh, cosh=np.cosh, exp=np.exp)
INF = math.inf


def _sphere(t, s, amp, C, xp):
    x = s * t
    sn, cs = xp.sin(x), xp.cos(x)
    return (amp * sn, amp * s * cs, -amp * s * s * sn, -amp * s ** 3 * cs,
            C * cs, -C * s * sn, -C * s * s * cs)


def _flat(t, s, amp, C, xp):
    one = t * 0 + 1
    zero = t * 0
    return (one, zero, zero, zero, C * t, C * one, zero)


def _cosh_sinh(t, s, amp, C, xp):
    x = s * t
    sh, ch = xp.sinh(x), xp.cosh(x)
    return (amp * ch, amp * s * sh, amp * s * s * ch, amp * s ** 3 * sh,
            C * sh, C * s * ch, C * s * s * sh)


def _exp(t, s, amp, C, xp):
    e = xp.exp(s * t)
    return (e, s * e, s * s * e, s ** 3 * e, C * e, C * s * e, C * s * s * e)


def _sinh_cosh(t, s, amp, C, xp):
    x = s * t
    sh, ch = xp.sinh(x), xp.cosh(x)
    return (amp * sh, amp * s * ch, amp * s * s * sh, amp * s ** 3 * ch,
            C * ch, C * s * sh, C * s * s * ch)


@dataclass(frozen=True)
class _FamilyRow:
    name: str
    lam_sign: int
    mu_sign: int
    kbar_sign: int
    fiber: str
    u_form: str
    f_form: str
    resolved: str
    table: str
    k_sign: int
    evaluator: object
    endpoints: tuple
    domain: str
    disk: tuple = ()


FAMILIES = {
    "sphere-disk": _FamilyRow(
        "sphere-disk", 1, 1, 1, "round sphere S^(n-1)", "sin", "cos",
        "u = sin(s t)/s", "u^2 = s sin^2(s t)", 1, _sphere,
        ("critical_max", "critical_max"), "(0, pi/s)",
        disk=("critical_max", "boundary"),
    ),
    "flat-ray": _FamilyRow(
        "flat-ray", 0, 1, 0, "Ricci-flat F", "constant", "linear",
        "u = 1", "u^2 = 1", 0, _flat, ("boundary", "infinite"), "[0, inf)",
    ),
    "cosh-sinh": _FamilyRow(
        "cosh-sinh", -1, 1, -1, "negative Einstein N", "cosh", "sinh",
        "u = cosh(s t)/s", "u^2 = s cosh^2(s t)", -1, _cosh_sinh,
        ("boundary", "infinite"), "[0, inf)",
    ),
    "exp-flat": _FamilyRow(
        "exp-flat", -1, 0, -1, "Ricci-flat F", "exp", "exp",
        "u = exp(s t)", "u^2 = exp(2 s t)", 0, _exp, ("infinite", "infinite"), "(-inf, inf)",
    ),
    "hyperbolic-space": _FamilyRow(
        "hyperbolic-space", -1, -1, -1, "round sphere S^(n-1)", "sinh", "cosh",
        "u = sinh(s t)/s", "u^2 = s sinh^2(s t)", 1, _sinh_cosh,
        ("critical_min", "infinite"), "(0, inf)",
    ),
}

ALIASES = {
    "hyperbolic-boundary": ("cosh-sinh", {"kbar": -1.0}),
    "exp-einstein": ("exp-flat", {"kbar": -1.0}),
}


def family_names() -> list:
    return list(FAMILIES) + list(ALIASES)


@dataclass
class ClosedFormFamily:
    """A fully resolved family: parameters, constants and closed forms."""

    name: str
    base: str
    params: SpaceParams
    constants: dict
    kbar: float
    form: str
    u_form: str
    f_form: str
    fiber: str
    warping_resolved: str
    warping_table: str
    domain: tuple
    domain_open: tuple
    expected_mu: float
    expected_mu_sign: int
    expected_endpoints: tuple
    cell: tuple
    extras: dict = field(default_factory=dict)

    @property
    def s(self) -> float:
        return math.sqrt(abs(self.kbar))

    def _amplitude(self, s, xp):
        if FAMILIES[self.base].k_sign == 0:
            return 1
        return xp.sqrt(s) if self.form == "table" else 1 / s

    def values(self, t, xp=NUMPY):
        """(u, u', u'', u''', f, f', f'') at t using the function namespace ``xp``.

        ``xp`` may be any object exposing sin, cos, sinh, cosh, exp (for
        instance an mpmath context) so the forms can be evaluated in higher
        precision.
        """
        row = FAMILIES[self.base]
        if xp is NUMPY:
            s, C = self.s, self.constants["C"]
        else:
            s, C = xp.sqrt(abs(xp.mpf(self.kbar))), xp.mpf(self.constants["C"])
        amp = self._amplitude(s, xp if xp is not NUMPY else math)
        return row.evaluator(t, s, amp, C, xp)

    def state(self, t) -> PointState:
        t = np.asarray(t, dtype=float)
        u, du, ddu, dddu, f, df, ddf = self.values(t)
        return PointState(t=t, u=u, du=du, ddu=ddu, dddu=dddu, f=f, df=df, ddf=ddf).asarrays()

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        lo_open, hi_open = self.domain_open
        ok_lo = t > lo if lo_open else t >= lo
        ok_hi = t < hi if hi_open else t <= hi
        return ok_lo & ok_hi

    def as_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "name": self.name,
            "family": self.base,
            "params": self.params.as_dict(),
            "constants": dict(self.constants),
            "kbar": self.kbar,
            "form": self.form,
            "u_form": self.u_form,
            "f_form": self.f_form,
            "fiber": self.fiber,
            "warping_resolved": self.warping_resolved,
            "warping_table": self.warping_table,
            "domain": [num(self.domain[0]), num(self.domain[1])],
            "domain_open": list(self.domain_open),
            "expected_mu": self.expected_mu,
            "expected_mu_sign": self.expected_mu_sign,
            "expected_endpoints": list(self.expected_endpoints),
            "cell": {"lambda": _sign_name(self.cell[0]), "mu": _sign_name(self.cell[1])},
            **self.extras,
        }


def _sign_name(s: int) -> str:
    return {1: "+", 0: "0", -1: "-"}[s]


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def instantiate(name: str, n: int, m: int, C: float | None = None, kbar: float | None = None,
                a: float | None = None, lam: float | None = None, form: str = "resolved") -> ClosedFormFamily:
    """Resolve a family for dimensions (n, m).

    ``kbar`` sets the curvature scale (sign fixed by the family).  Instead
    of kbar one may request ``lam``; its sign must match the family's cell.
    ``a`` is accepted as a synonym for C (exp families).
    """
    if name in ALIASES:
        base, fixed = ALIASES[name]
        if kbar is not None and kbar != fixed["kbar"]:
            raise ConstraintViolation(f"{name} fixes kbar = {fixed['kbar']}")
        if lam is not None:
            raise ConstraintViolation(f"{name} fixes lambda = 1-n-m")
        kbar = fixed["kbar"]
    elif name in FAMILIES:
        base = name
    else:
        raise UnknownFamilyError(f"unknown family {name!r}; known: {', '.join(family_names())}")
    if form not in ("resolved", "table"):
        raise ConstraintViolation("form must be 'resolved' or 'table'")
    row = FAMILIES[base]
    if a is not None:
        if C is not None and C != a:
            raise ConstraintViolation("give either C or a, not both")
        C = a
    C = 1.0 if C is None else float(C)
    if not C > 0:
        raise ConstraintViolation(f"C must be positive, got {C}")
    params_probe = SpaceParams(n, m, 0.0)
    n, m = params_probe.n, params_probe.m

    if lam is not None:
        if _sign(lam) != row.lam_sign:
            raise ConstraintViolation(
                f"{name} lives in the lambda {_sign_name(row.lam_sign)} cell, requested lambda = {lam}")
        if row.kbar_sign == 0:
            kbar = 0.0
        else:
            derived = lam / (n + m - 1)
            if kbar is not None and not math.isclose(kbar, derived, rel_tol=1e-12):
                raise ConstraintViolation(f"lambda = {lam} needs kbar = {derived}, got kbar = {kbar}")
            kbar = derived
    if row.kbar_sign == 0:
        if kbar not in (None, 0, 0.0):
            raise ConstraintViolation(f"{name} has kbar = 0")
        kbar = 0.0
    else:
        kbar = float(row.kbar_sign) if kbar is None else float(kbar)
        if _sign(kbar) != row.kbar_sign:
            raise ConstraintViolation(f"{name} needs kbar with sign {_sign_name(row.kbar_sign)}, got {kbar}")

    s = math.sqrt(abs(kbar))
    lam_val = (n + m - 1) * kbar
    if row.k_sign == 0:
        k = 0.0
    elif form == "table":
        k = row.k_sign * s ** 3
    else:
        k = float(row.k_sign)
    params = SpaceParams(n, m, lam_val, k)
    mu = row.mu_sign * (m - 1) * C * C * (s * s if row.kbar_sign else 1.0)
    if row.mu_sign == 0:
        mu = 0.0
    if base == "sphere-disk":
        domain, domain_open = (0.0, math.pi / s), (True, True)
    elif base == "hyperbolic-space":
        domain, domain_open = (0.0, INF), (True, True)
    elif base == "exp-flat":
        domain, domain_open = (-INF, INF), (True, True)
    else:
        domain, domain_open = (0.0, INF), (False, True)
    extras = {}
    if row.disk:
        extras = {"disk_domain": [0.0, math.pi / (2 * s)], "disk_endpoints": list(row.disk)}
    return ClosedFormFamily(
        name=name, base=base, params=params, constants={"C": C}, kbar=kbar, form=form,
        u_form=row.u_form, f_form=row.f_form, fiber=row.fiber,
        warping_resolved=row.resolved, warping_table=row.table,
        domain=domain, domain_open=domain_open, expected_mu=mu, expected_mu_sign=row.mu_sign,
        expected_endpoints=row.endpoints, cell=(row.lam_sign, row.mu_sign), extras=extras,
    )


def interior_grid(family: ClosedFormFamily, nodes: int = 501, extent: float = 3.0) -> np.ndarray:
    """``nodes`` evenly spaced points strictly inside the family's domain.

    Infinite ends are cut ``extent`` away from the other end (or at
    +-extent/2 when both ends are infinite).
    """
    lo, hi = family.domain
    if not math.isfinite(lo) and not math.isfinite(hi):
        lo, hi = -extent / 2, extent / 2
    elif not math.isfinite(hi):
        hi = lo + extent
    elif not math.isfinite(lo):
        lo = hi - extent
    return np.linspace(lo, hi, int(nodes) + 2)[1:-1]


def sample(family: ClosedFormFamily, grid) -> Profile:
    """Evaluate the closed forms on ``grid`` (all derivatives analytic).

    The profile's ends carry the family's known endpoint classes, placed at
    the ends of the family's domain.
    """
    ts = np.asarray(grid, dtype=float).ravel()
    if ts.size == 0:
        raise DomainError("empty grid")
    if not np.all(np.isfinite(ts)):
        raise DomainError("grid contains non-finite values")
    if not np.all(family.contains(ts)):
        bad = ts[~family.contains(ts)][0]
        raise DomainError(f"t = {bad:g} lies outside the domain {family.domain} of {family.name}")
    st = family.state(ts)
    ends = []
    for kind, t_end, node in zip(family.expected_endpoints, family.domain, (ts[0], ts[-1])):
        ends.append(EndpointClass(kind, float(t_end), {"source": "closed form", "grid_gap": abs(float(t_end - node))
                                                       if math.isfinite(t_end) else INF}))
    return Profile(ts, st, family.params, ends[0], ends[1], dense=family.state,
                   meta={"family": family.name, "constants": dict(family.constants), "kbar": family.kbar})


def initial_state(family: ClosedFormFamily, t, dps: int | None = None):
    """IVP data (u, u', f, f') of the closed form at t.

    With ``dps`` the values are computed in an mpmath context of that
    precision and returned as mpf, so high-precision integrators start from
    data that carry no rounding error at double precision.
    """
    from .ode import IVPState

    if not bool(family.contains(float(t))):
        raise DomainError(f"t = {t} outside the domain of {family.name}")
    if dps is None:
        u, du, _, _, f, df, ddf = (float(v) for v in family.values(np.float64(t)))
        return IVPState(float(t), u, du, f, df, ddf)
    ctx = mpmath.MPContext()
    ctx.dps = int(dps)
    tt = ctx.mpf(t)
    u, du, _, _, f, df, ddf = family.values(tt, ctx)
    return IVPState(tt, u, du, f, df, ddf)


def requested_mu(family: ClosedFormFamily, t: float) -> float:
    """Fiber Einstein constant evaluated from the closed forms at t."""
    if not bool(family.contains(t)):
        raise DomainError(f"t = {t} outside the domain of {family.name}")
    return float(mu_invariant(family.state(t), family.params))


def rho_check(family: ClosedFormFamily, t) -> dict:
    """Compare rho from the curvature with lambda - m kbar."""
    ed = eigen_data(family.state(t), family.params)
    expected = family.params.lam - family.params.m * family.kbar
    diff = float(np.max(np.abs(np.asarray(ed.rho) - expected)))
    return {"rho": ed.rho, "expected": expected, "max_abs_diff": diff}


_CELLS = [(lam, mu) for mu in (1, 0, -1) for lam in (1, 0, -1)]


def lookup_cell(lam_sign: int, mu_sign: int) -> str:
    """Family name for a (sign lambda, sign mu) cell; ConstraintViolation if the cell is empty."""
    for name, row in FAMILIES.items():
        if row.lam_sign == lam_sign and row.mu_sign == mu_sign:
            return name
    raise ConstraintViolation(
        f"no solution with lambda {_sign_name(lam_sign)} and mu {_sign_name(mu_sign)} (empty cell)")


def list_table() -> list:
    """The nine (lambda, mu) sign cells with the family realising each (or None)."""
    rows = []
    for lam, mu in _CELLS:
        try:
            name = lookup_cell(lam, mu)
        except ConstraintViolation:
            name = None
        entry = {"lambda": _sign_name(lam), "mu": _sign_name(mu), "family": name}
        if name is not None:
            row = FAMILIES[name]
            entry.update({"u": row.resolved, "u_table": row.table, "f": row.f_form, "fiber": row.fiber,
                          "domain": row.domain, "endpoints": list(row.endpoints)})
            entry["aliases"] = [a for a, (b, _) in ALIASES.items() if b == name]
        rows.append(entry)
    return rows
