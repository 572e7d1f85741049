import math

import pytest

from warpein.errors import BracketError, ShootingError, WarpError
from warpein.geometry import SpaceParams
from warpein.shooting import ShootingProblem, mismatch, shoot, solve_shooting

COSH = SpaceParams(4, 2, -5.0, -1.0)
C1, S1 = math.cosh(1.0), math.sinh(1.0)


def boundary_problem(**kw):
    args = dict(params=COSH, target="boundary", free="df", fixed={"t": 1.0, "u": C1, "du": S1, "f": S1},
                bracket=(1.0, 2.0), t_end=0.0)
    args.update(kw)
    return ShootingProblem(**args)


def test_boundary_shoot_recovers_cosh_sinh():
    res = solve_shooting(boundary_problem())
    assert res.value == pytest.approx(C1, abs=1e-9)
    assert res.endpoint.kind == "boundary" and abs(res.endpoint.t_end) <= 1e-6
    assert res.profile.meta["end_states"]["left"]["df"] == pytest.approx(1.0, abs=1e-6)
    assert res.iterations <= 60
    d = res.as_dict()
    assert d["initial"]["df"] == res.value and d["endpoint"]["kind"] == "boundary"
    assert shoot(boundary_problem()).df == pytest.approx(C1, abs=1e-9)


def test_boundary_mismatch_changes_sign():
    prob = boundary_problem()
    assert mismatch(prob, 1.2) < 0 < mismatch(prob, 1.8)


def test_critical_shoot_recovers_sphere():
    prob = ShootingProblem(SpaceParams(4, 2, 5.0, 1.0), "critical-max", "ddf",
                           {"t": 0.0, "u": 0.0, "du": 1.0, "f": 1.0, "df": 0.0}, (-1.5, -0.5))
    assert prob.target == "critical_max" and prob.root_method == "bisect"
    res = solve_shooting(prob)
    assert res.value == pytest.approx(-1.0, abs=1e-6)
    assert res.endpoint.t_end == pytest.approx(math.pi, abs=1e-6)


def test_empty_and_non_straddling_brackets():
    with pytest.raises(BracketError):
        boundary_problem(bracket=(2.0, 1.0))
    with pytest.raises(BracketError):
        boundary_problem(bracket=(1.0, 1.0))
    with pytest.raises(BracketError):
        solve_shooting(boundary_problem(bracket=(1.7, 2.0)))


def test_problem_validation():
    with pytest.raises(WarpError):
        boundary_problem(target="saddle")
    with pytest.raises(WarpError):
        boundary_problem(free="t")
    with pytest.raises(WarpError):
        boundary_problem(t_end=None)
    with pytest.raises(WarpError):
        boundary_problem(t_end=2.0, direction=-1)
    with pytest.raises(WarpError):
        boundary_problem(fixed={"t": 1.0, "u": C1, "f": S1})
    with pytest.raises(WarpError):
        boundary_problem(fixed={"t": 1.0, "u": C1, "du": S1, "f": S1, "df": 1.0})


def test_iteration_budget():
    with pytest.raises(ShootingError) as exc:
        solve_shooting(boundary_problem(max_iter=2))
    assert exc.value.best is not None
