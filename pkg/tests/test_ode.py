import math

import numpy as np
import pytest

from warpein.catalog import initial_state, instantiate
from warpein.errors import BoundaryConditionError, IntegrationError, SingularPointError, WarpError
from warpein.geometry import SpaceParams, mu_invariant
from warpein.ode import IVPState, compat_rhs_third_order, derived_quantities, extend_maximal, integrate, ivp_rhs
from warpein.residuals import verify

COSH = SpaceParams(4, 2, -5.0, -1.0)


def cosh_start(t):
    return IVPState(t, math.cosh(t), math.sinh(t), math.sinh(t), math.cosh(t))


def test_ivp_rhs_examples():
    assert ivp_rhs(IVPState(0.0, 1.0, 0.0, 2.0, 2.0), SpaceParams(3, 2, 0.0, 0.0)) == (0.0, 0.0, 2.0, 0.0)
    du, ddu, df, ddf = ivp_rhs(cosh_start(1.0), COSH)
    assert (du, df) == (math.sinh(1.0), math.cosh(1.0))
    assert ddu == pytest.approx(math.cosh(1.0), rel=1e-14) and ddf == pytest.approx(math.sinh(1.0), rel=1e-14)
    with pytest.raises(SingularPointError):
        ivp_rhs(IVPState(0.0, 1.0, 0.0, 0.0, 1.0), COSH)
    with pytest.raises(SingularPointError):
        ivp_rhs(IVPState(0.0, 1e-3, 0.0, 1.0, 1.0), COSH, eps=1e-2)


def test_derived_quantities_and_third_order_form():
    u, du, f, df = math.cosh(0.7), math.sinh(0.7), math.sinh(0.7), math.cosh(0.7)
    ddu, dddu, ddf, dddf = derived_quantities(COSH, u, du, f, df)
    assert (ddu, dddu, ddf, dddf) == pytest.approx((u, du, f, df), rel=1e-13)
    assert compat_rhs_third_order(u, du, ddu, COSH)[2] == pytest.approx(du, rel=1e-12)
    with pytest.raises(SingularPointError):
        compat_rhs_third_order(1.0, 0.0, 1.0, COSH)


def test_integrate_cosh_sinh():
    prof = integrate(cosh_start(0.1), COSH, (0.1, 3.0), 1e-10, nodes=300)
    assert np.max(np.abs(prof.column("u") - np.cosh(prof.ts))) <= 1e-8
    assert np.max(np.abs(prof.column("dddu") - np.sinh(prof.ts))) <= 1e-7
    assert prof.right_end.kind == "stopped" and prof.meta["end_reasons"]["right"] == "span"
    assert prof.left_end.t_end == 0.1


def test_integrate_two_sided_and_grid():
    grid = np.linspace(-1, 4, 11)
    prof = integrate(cosh_start(1.0), COSH, (0.5, 2.0), 1e-10, grid=grid)
    np.testing.assert_allclose(prof.ts, [0.5, 1.0, 1.5, 2.0])
    assert prof.meta["dropped_nodes"] == 7
    np.testing.assert_allclose(prof.column("f"), np.sinh(prof.ts), rtol=1e-9)


def test_integrate_argument_errors():
    with pytest.raises(WarpError):
        integrate(cosh_start(1.0), COSH, (0, 2), 0.0)
    with pytest.raises(WarpError):
        integrate(cosh_start(1.0), COSH, (0, 2), method="euler")
    with pytest.raises(WarpError):
        integrate(cosh_start(3.0), COSH, (0, 2))
    with pytest.raises(WarpError):
        integrate(cosh_start(1.0), COSH, (0, 2), landing="linear")


def test_boundary_start_conditions():
    with pytest.raises(BoundaryConditionError):
        integrate(IVPState(0.0, 1.0, 0.5, 0.0, 1.0), COSH, (0.0, 1.0))
    with pytest.raises(BoundaryConditionError):
        integrate(IVPState(0.0, -1.0, 0.0, 1.0, 1.0), COSH, (0.0, 1.0))
    # a consistent boundary start integrates into the interior
    prof = integrate(IVPState(0.0, 1.0, 0.0, 0.0, 1.0), COSH, (0.0, 2.0), 1e-10)
    np.testing.assert_allclose(prof.column("f"), np.sinh(prof.ts), atol=1e-8)


@pytest.mark.parametrize("method", ["rk", "taylor"])
def test_mu_is_conserved(method):
    params = SpaceParams(5, 3, 1.3, 0.4)
    start = IVPState(0.0, 1.2, 0.3, 0.8, -0.2)
    prof = integrate(start, params, (0.0, 0.8), 1e-10, method=method, nodes=80)
    mu = mu_invariant(prof.states, params)
    assert np.ptp(mu) <= 1e-8


def test_integrated_profile_verifies_at_100x_tolerance():
    params = SpaceParams(4, 3, -2.0, 1.0)
    prof = integrate(IVPState(0.0, 1.0, 0.5, 1.0, 0.3), params, (0.0, 1.0), 1e-10, nodes=200)
    rep = verify(prof, 100 * 1e-10)
    assert rep.verdict, rep.as_dict()


def test_boundary_event_and_crossing():
    prof = integrate(cosh_start(1.0), COSH, (-2.0, 1.0), 1e-10)
    assert prof.left_end.kind == "boundary" and abs(prof.left_end.t_end) <= 1e-8
    crossed = integrate(cosh_start(1.0), COSH, (-2.0, 1.0), 1e-10, through_boundary=True)
    assert crossed.ts[0] == -2.0
    assert any(e["kind"] == "boundary_crossing" for e in crossed.events)
    np.testing.assert_allclose(crossed.column("f"), np.sinh(crossed.ts), atol=1e-7)


def test_extend_maximal_sphere_rk():
    fam = instantiate("sphere-disk", 4, 2)
    prof = extend_maximal(initial_state(fam, 1.0), fam.params, 1e-10)
    assert (prof.left_end.kind, prof.right_end.kind) == ("critical_max", "critical_max")
    assert prof.left_end.t_end == pytest.approx(0.0, abs=1e-7)
    assert prof.right_end.t_end == pytest.approx(math.pi, abs=1e-7)
    assert any(e["kind"] == "boundary_crossing" for e in prof.events)


def test_horizon_marks_infinite_end():
    fam = instantiate("exp-einstein", 3, 2)
    prof = extend_maximal(initial_state(fam, 0.0), fam.params, 1e-10, horizon=3.0)
    assert prof.right_end.kind == "infinite" and prof.right_end.t_end == pytest.approx(3.0)
    assert prof.left_end.kind == "infinite"


def test_step_budget():
    with pytest.raises(IntegrationError) as exc:
        integrate(cosh_start(0.1), COSH, (0.1, 3.0), 1e-10, max_steps=5)
    assert exc.value.last_state is not None
    prof = integrate(cosh_start(0.1), COSH, (0.1, 3.0), 1e-10, max_steps=5, on_failure="stop")
    assert prof.meta["status"]["right"] == "max_steps" and prof.ts[-1] < 3.0


def test_fixed_step_reaches_span_end():
    for h in (0.04, 0.02, 0.01):
        prof = integrate(cosh_start(0.1), COSH, (0.1, 3.0), 1e-10, fixed_step=h)
        assert prof.ts[-1] == 3.0
        assert prof.meta["stats"]["right"]["steps"] == math.ceil(round(2.9 / h, 9))
