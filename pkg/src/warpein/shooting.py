"""Scalar shooting for boundary and critical-point targets.

One component of the initial data is varied inside a bracket while the
rest stay fixed.  Each trial integrates the system and reduces the outcome
to a signed mismatch that changes sign across the wanted solution:

* boundary target at ``t_end``: the value of f extrapolated to ``t_end``
  (negative when f reached zero before ``t_end``),
* critical target: which of the zeros of u and f' comes first along the
  integration direction, positive when f' vanishes first.

The boundary mismatch is continuous and is solved with Brent's method.
The critical mismatch is essentially a sign (trials on either side end in
different kinds of event), so it is solved by bisection, whose iteration
count is fixed by the bracket width and ``xtol``.  A final integration with
series landing checks that the endpoint really has the requested kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.optimize import bisect, brentq

from .errors import BracketError, IntegrationError, ShootingError, SingularPointError, WarpError
from .geometry import SpaceParams
from .ode import IVPState, integrate
from .profile import EndpointClass, Profile

__all__ = ["ShootingProblem", "ShootingResult", "shoot", "solve_shooting", "TARGETS", "FREE_NAMES"]

TARGETS = ("boundary", "critical_min", "critical_max")
FREE_NAMES = ("u", "du", "f", "df", "ddf")


@dataclass
class ShootingProblem:
    """A scalar shooting problem.

    ``fixed`` holds the remaining initial data including the start time
    ``t``.  ``t_end`` is where a boundary target must be reached; for
    critical targets it is optional and only bounds the search (the
    integration otherwise runs ``horizon`` units in ``direction``).
    """

    params: SpaceParams
    target: str
    free: str
    fixed: dict
    bracket: tuple
    tol: float = 1e-6
    t_end: Optional[float] = None
    direction: Optional[int] = None
    xtol: float = 1e-11
    ode_tol: float = 1e-10
    method: str = "rk"
    horizon: float = 40.0
    through_boundary: Optional[bool] = None
    max_iter: int = 60
    root_method: Optional[str] = None

    def __post_init__(self):
        self.target = self.target.replace("-", "_")
        if self.target not in TARGETS:
            raise WarpError(f"unknown target {self.target!r}; expected one of {', '.join(TARGETS)}")
        if self.free not in FREE_NAMES:
            raise WarpError(f"free parameter must be one of {', '.join(FREE_NAMES)}, got {self.free!r}")
        if self.free in self.fixed:
            raise WarpError(f"{self.free} is both free and fixed")
        missing = [k for k in ("t", "u", "du", "f", "df") if k != self.free and k not in self.fixed]
        if missing:
            raise WarpError(f"fixed initial data lack {', '.join(missing)}")
        a, b = (float(x) for x in self.bracket)
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise BracketError(f"empty bracket [{a}, {b}]")
        self.bracket = (a, b)
        if not self.tol > 0:
            raise WarpError("tol must be positive")
        t0 = float(self.fixed["t"])
        if self.target == "boundary" and self.t_end is None:
            raise WarpError("a boundary target needs t_end, the place where f must vanish")
        if self.direction is None:
            if self.t_end is not None and self.t_end != t0:
                self.direction = 1 if self.t_end > t0 else -1
            else:
                self.direction = 1
        if self.direction not in (1, -1):
            raise WarpError("direction must be +1 or -1")
        if self.t_end is not None and (self.t_end - t0) * self.direction <= 0:
            raise WarpError("t_end must lie in the integration direction from the start")
        if self.root_method is None:
            self.root_method = "brent" if self.target == "boundary" else "bisect"
        if self.root_method not in ("brent", "bisect"):
            raise WarpError("root_method must be 'brent' or 'bisect'")
        if self.through_boundary is None:
            self.through_boundary = self.target != "boundary"

    def initial(self, value: float) -> IVPState:
        data = {k: v for k, v in self.fixed.items() if k in ("t", "u", "du", "f", "df", "ddf")}
        data[self.free] = value
        data.setdefault("ddf", None)
        return IVPState(**data)

    def span(self):
        t0 = float(self.fixed["t"])
        end = self.t_end if self.t_end is not None else t0 + self.direction * self.horizon
        return (min(t0, end), max(t0, end))


@dataclass
class ShootingResult:
    initial: IVPState
    value: float
    iterations: int
    evaluations: int
    mismatch: float
    endpoint: EndpointClass
    profile: Profile
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "free_value": self.value,
            "initial": self.initial.as_dict(),
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "mismatch": self.mismatch,
            "endpoint": self.endpoint.as_dict(),
        }


def _far_end(problem: ShootingProblem, prof: Profile) -> tuple:
    which = "right" if problem.direction > 0 else "left"
    reason = prof.meta["end_reasons"][which]
    state = prof.meta["end_states"][which]
    t_stop = float(prof.ts[-1] if which == "right" else prof.ts[0])
    return which, reason, state, t_stop


def _trial(problem: ShootingProblem, value: float, landing: str = "cubic", classify: bool = False) -> Profile:
    return integrate(problem.initial(value), problem.params, problem.span(), problem.ode_tol,
                     method=problem.method, through_boundary=problem.through_boundary, horizon=problem.horizon,
                     landing=landing, on_failure="stop", classify=classify, nodes=401)


def mismatch(problem: ShootingProblem, value: float) -> float:
    """Signed mismatch of one trial integration (zero at the target)."""
    try:
        prof = _trial(problem, value)
    except (SingularPointError, IntegrationError) as exc:
        raise ShootingError(f"trial integration failed at {problem.free} = {value}: {exc}") from exc
    _, reason, st, t_stop = _far_end(problem, prof)
    d = problem.direction
    if problem.target == "boundary":
        if reason in ("f_zero", "boundary"):
            return st["df"] * (problem.t_end - t_stop)
        return st["f"]
    # critical targets
    if reason == "critical":
        for ev in prof.events:
            if ev.get("terminal") and ev["kind"] == "critical" and "t_u" in ev:
                return d * (ev["t_u"] - ev["t_df"])
        return 0.0
    if reason == "u_zero":
        return -1.0
    if reason == "df_zero":
        return abs(st["u"])
    # no zero of f' or u before the horizon: f' has not vanished, u stays positive
    return abs(st["u"])


def solve_shooting(problem: ShootingProblem) -> ShootingResult:
    """Find the free value hitting the target and return the verified result."""
    history = []

    def g(x):
        r = mismatch(problem, x)
        history.append((x, r))
        return r

    a, b = problem.bracket
    ga, gb = g(a), g(b)
    if ga == 0:
        root, iters = a, 0
    elif gb == 0:
        root, iters = b, 0
    else:
        if (ga > 0) == (gb > 0):
            raise BracketError(
                f"the mismatch does not change sign on [{a}, {b}] (values {ga:.3e}, {gb:.3e})")
        finder = brentq if problem.root_method == "brent" else bisect
        root, info = finder(g, a, b, xtol=problem.xtol, maxiter=problem.max_iter, full_output=True, disp=False)
        iters = info.iterations
        if not info.converged:
            best = min(history, key=lambda p: abs(p[1]))
            raise ShootingError(f"no convergence in {problem.max_iter} iterations",
                                best=problem.initial(best[0]), iterations=iters)
    final = _trial(problem, root, landing="fit", classify=True)
    which, reason, st, t_stop = _far_end(problem, final)
    ec = getattr(final, which + "_end")
    res = ShootingResult(problem.initial(root), float(root), int(iters), len(history), float(g(root)), ec,
                         final, history)
    ok = ec.kind == problem.target
    if ok and problem.target == "boundary":
        ok = abs(t_stop - problem.t_end) <= problem.tol and abs(st["f"]) <= problem.tol
    if ok and problem.target != "boundary":
        gap = ec.diagnostics.get("gap", 0.0)
        ok = abs(st["u"]) <= problem.tol and abs(st["df"]) <= problem.tol and abs(gap) <= problem.tol
        if problem.t_end is not None:
            ok = ok and (t_stop - problem.t_end) * problem.direction <= problem.tol
    if not ok:
        raise ShootingError(
            f"converged {problem.free} = {root!r} but the endpoint is {ec.kind} at t = {t_stop:.12g}",
            best=res.initial, iterations=iters)
    return res


def shoot(problem: ShootingProblem) -> IVPState:
    """Initial data reaching the problem's target endpoint."""
    return solve_shooting(problem).initial
