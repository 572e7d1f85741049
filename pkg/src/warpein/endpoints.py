"""Classification of interval ends and the parity test at critical points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousEndpointError, InsufficientResolutionError, WarpError
from .profile import EndpointClass, Profile
from .residuals import fd_weights

__all__ = ["classify_endpoint", "oddness_check", "OddnessResult", "radial_geodesic_case"]


def _end_state(profile: Profile, which: str) -> tuple:
    if which not in ("left", "right"):
        raise WarpError(f"which must be 'left' or 'right', got {which!r}")
    states = profile.meta.get("end_states") or {}
    i = 0 if which == "left" else len(profile) - 1
    t_end = float(profile.ts[i])
    if which in states:
        st = dict(states[which])
    else:
        node = profile.node(i)
        st = {name: float(getattr(node, name)) for name in ("u", "du", "ddu", "dddu", "f", "df", "ddf")}
    return t_end, st


def _kind(st: dict, reason: str, unbounded: bool, tol: float) -> str:
    f, df, u, du = (abs(st.get(k, math.nan)) for k in ("f", "df", "u", "du"))
    if f <= tol and df <= tol:
        raise AmbiguousEndpointError(
            f"f and f' both vanish at the endpoint (|f| = {f:.3e}, |f'| = {df:.3e}); "
            "the gradient of f cannot vanish on the boundary")
    if f <= tol:
        return "boundary"
    if u <= tol and df <= tol and du > tol:
        ddf = st.get("ddf", math.nan)
        return "critical_max" if st["f"] * ddf < 0 else "critical_min"
    if unbounded and reason == "horizon":
        return "infinite"
    return "stopped"


def radial_geodesic_case(left: str, right: str):
    """Which completeness case the radial geodesics realise, or None if undecided.

    A critical end is the origin of polar coordinates: the radial geodesic
    passes through it and continues as the ray on the opposite side, so it
    inherits the type of the other end.  Cases: 1 = [a, inf) with a on the
    boundary, 2 = (-inf, b], 3 = [a, b], 4 = the whole line without boundary.
    """
    crit = ("critical_min", "critical_max")
    if left in crit and right in crit:
        return 4
    if left in crit:
        left = right
    elif right in crit:
        right = left
    table = {("boundary", "boundary"): 3, ("boundary", "infinite"): 1, ("infinite", "boundary"): 2,
             ("infinite", "infinite"): 4}
    return table.get((left, right))


def classify_endpoint(profile: Profile, which: str, tol: float = 1e-6, oddness: bool = True) -> EndpointClass:
    """Classify the left or right end of an integrated (or sampled) profile.

    boundary:      f -> 0 with f' != 0
    critical_*:    u -> 0, f' -> 0, u' != 0; max/min from the sign of f f''
    infinite:      an unbounded side integrated to its horizon without event
    stopped:       anything else (span end, underflow, unpaired zero)
    """
    t_end, st = _end_state(profile, which)
    reasons = profile.meta.get("end_reasons") or {}
    unbounded = (profile.meta.get("unbounded") or {}).get(which, False)
    reason = reasons.get(which, "grid")
    kind = _kind(st, reason, unbounded, tol)
    diag = {
        "reason": reason,
        "abs_f": abs(st["f"]),
        "abs_df": abs(st["df"]),
        "abs_u": abs(st["u"]),
        "abs_du": abs(st["du"]),
        "ddf": st.get("ddf"),
        "tol": tol,
    }
    for ev in profile.events:
        if ev.get("terminal") and abs(ev["t"] - t_end) <= 1e-9 * max(1.0, abs(t_end)):
            for key in ("t_u", "t_df", "gap"):
                if key in ev:
                    diag[key] = ev[key]
    if kind == "boundary":
        diag["boundary_residual"] = abs(st.get("ddf", math.nan)) + abs(st["du"])
    if kind in ("critical_min", "critical_max"):
        diag["du_sq_minus_k"] = st["du"] ** 2 - profile.params.k
        diag["fiber_assumption"] = "fiber treated as a round sphere whenever k > 0 (only k is known)"
        if oddness and profile.dense is not None:
            try:
                res = oddness_check(profile, t_end, tol=tol)
                diag["u_even_derivative_estimates"] = {str(k): v for k, v in res.estimates.items()}
                diag["u_even_derivative_errors"] = {str(k): v for k, v in res.errors.items()}
                diag["du_estimate"] = res.du
                diag["odd"] = res.passed
            except WarpError as exc:
                diag["u_even_derivative_estimates"] = None
                diag["oddness_error"] = str(exc)
        else:
            diag["u_even_derivative_estimates"] = None
    other = "right" if which == "left" else "left"
    try:
        t_o, st_o = _end_state(profile, other)
        kind_o = _kind(st_o, reasons.get(other, "grid"), (profile.meta.get("unbounded") or {}).get(other, False), tol)
        pair = (kind, kind_o) if which == "left" else (kind_o, kind)
        diag["radial_geodesic_case"] = radial_geodesic_case(*pair)
    except WarpError:
        diag["radial_geodesic_case"] = None
    return EndpointClass(kind, t_end, diag)


@dataclass
class OddnessResult:
    """Even-derivative estimates of u at a critical point."""

    t0: float
    estimates: dict
    errors: dict
    du: float
    du_error: float
    du_sq_minus_k: float
    passed: bool
    tol: float
    step: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "t0": self.t0,
            "estimates": {str(k): v for k, v in self.estimates.items()},
            "errors": {str(k): v for k, v in self.errors.items()},
            "du": self.du,
            "du_error": self.du_error,
            "du_sq_minus_k": self.du_sq_minus_k,
            "passed": self.passed,
            "tol": self.tol,
        }


def _one_sided(values_at, t0, side, order, h, extra):
    npts = order + extra
    xs = np.arange(npts) * h
    w = fd_weights(0.0, side * xs, order)
    return float(np.dot(w, values_at(t0 + side * xs)))


def _estimate(values_at, t0, side, order, h0, extra=5, levels=12):
    """Richardson-extrapolated one-sided derivative with Ridders-style step choice.

    Returns (estimate, error estimate, step used).
    """
    p = extra
    best = (math.nan, math.inf, h0)
    prev = None
    h = h0
    for _ in range(levels):
        coarse = _one_sided(values_at, t0, side, order, h, extra)
        fine = _one_sided(values_at, t0, side, order, h / 2, extra)
        rich = fine + (fine - coarse) / (2 ** p - 1)
        if not math.isfinite(rich):
            h /= 2
            continue
        err = abs(fine - coarse) / (2 ** p - 1)
        if prev is not None:
            err = max(err, abs(rich - prev))
        if err < best[1]:
            best = (rich, err, h)
        prev = rich
        h /= 2
    return best


def oddness_check(profile: Profile, t0: float, orders=(0, 2, 4), tol: float = 1e-6, h=None) -> OddnessResult:
    """Estimate u, u'', u'''' (configurable even orders) and u' at the endpoint t0.

    One-sided stencils on the profile's dense output are extrapolated in the
    step and the step is chosen where successive extrapolations agree best.
    Passes when every even-order estimate is within ``tol`` of zero, u' is
    not, and (for k > 0, where the fiber is taken to be a round sphere)
    (u')^2 = k within ``tol``.  Raises InsufficientResolutionError when an
    estimate cannot be resolved to ``tol``.
    """
    ts = profile.ts
    if profile.dense is None:
        raise InsufficientResolutionError("oddness_check needs dense output (closed forms or an integrator)")
    lo, hi = float(ts[0]), float(ts[-1])
    if abs(t0 - lo) <= abs(t0 - hi):
        side, room = 1.0, hi - t0
    else:
        side, room = -1.0, t0 - lo
    if room <= 0:
        raise InsufficientResolutionError("the profile has no extent on either side of t0")

    def values_at(x):
        return np.asarray(profile.dense(np.asarray(x, dtype=float)).u, dtype=float)

    extra = 5
    want = sorted(set(int(o) for o in orders) | {1})
    estimates, errors, steps = {}, {}, {}
    for order in want:
        npts = order + extra
        h0 = h if h is not None else min(0.05, room / (npts - 1))
        h0 = min(h0, room / (npts - 1))
        est, err, used = _estimate(values_at, float(t0), side, order, h0, extra)
        estimates[order], errors[order], steps[order] = est, err, used
    du = estimates.pop(1)
    du_err = errors.pop(1)
    steps.pop(1, None)
    for order, err in errors.items():
        if not err <= tol:
            raise InsufficientResolutionError(
                f"order-{order} derivative at t0 = {t0} only resolved to {err:.2e} > {tol:g}")
    k = profile.params.k
    dsk = du * du - k
    ok = all(abs(v) <= tol for v in estimates.values()) and abs(du) > tol
    if k > 0 and profile.params.n > 2:
        ok = ok and abs(dsk) <= tol
    return OddnessResult(float(t0), estimates, errors, du, du_err, dsk, bool(ok), tol, steps)
