import math

import numpy as np
import pytest

from warpein.catalog import instantiate, interior_grid
from warpein.errors import InconsistentStateError, SingularPointError, WarpError
from warpein.geometry import (
    PointState,
    SpaceParams,
    bakry_emery_residuals,
    eigen_data,
    hess_components,
    mu_invariant,
    ricci_radial,
    ricci_tangential,
    scalar_curvature,
)
from warpein.residuals import residual_first, residual_second


def cosh_sinh(t):
    return PointState(t=t, u=math.cosh(t), du=math.sinh(t), ddu=math.cosh(t), dddu=math.sinh(t),
                      f=math.sinh(t), df=math.cosh(t), ddf=math.sinh(t))


def exp_state(t, a=1.0):
    e = math.exp(t)
    return PointState(t=t, u=e, du=e, ddu=e, dddu=e, f=a * e, df=a * e, ddf=a * e)


def test_params_validation():
    with pytest.raises(WarpError):
        SpaceParams(1, 2, 0.0)
    with pytest.raises(WarpError):
        SpaceParams(3, 1, 0.0)
    with pytest.raises(WarpError):
        SpaceParams(2.5, 2, 0.0)
    p = SpaceParams(4, 2, -5, -1)
    assert p.as_dict() == {"n": 4, "m": 2, "lambda": -5.0, "k": -1.0}


def test_ricci_radial_examples():
    assert ricci_radial(PointState(u=1.0, ddu=0.0), SpaceParams(3, 2, 0.0)) == 0.0
    assert ricci_radial(cosh_sinh(0.0), SpaceParams(4, 2, -5, -1)) == pytest.approx(-3.0, abs=1e-15)
    for t in (-1.0, 0.0, 0.7):
        assert ricci_radial(exp_state(t), SpaceParams(5, 2, -6)) == pytest.approx(-4.0, rel=1e-14)


def test_ricci_tangential_examples():
    assert ricci_tangential(PointState(u=1.0), SpaceParams(4, 2, 0.0, 0.0)) == 0.0
    assert ricci_tangential(cosh_sinh(1.0), SpaceParams(4, 2, -5, -1)) == pytest.approx(-3.0, rel=1e-13)
    assert ricci_tangential(exp_state(0.0), SpaceParams(5, 2, -6, 0.0)) == pytest.approx(-4.0, rel=1e-14)


def test_singular_at_u_zero():
    st = PointState(u=0.0, du=1.0)
    p = SpaceParams(3, 2, 1.0, 1.0)
    for fn in (ricci_radial, ricci_tangential, mu_invariant):
        with pytest.raises(SingularPointError):
            fn(st, p)
    with pytest.raises(SingularPointError):
        hess_components(st)
    with pytest.raises(ZeroDivisionError):
        ricci_radial(st, p)


def test_hess_components_examples():
    assert hess_components(PointState(u=1.0, f=2.0, df=2.0, ddf=0.0)) == (0.0, 0.0)
    assert hess_components(cosh_sinh(0.0)) == (0.0, 0.0)
    assert hess_components(exp_state(0.0, a=2.0)) == pytest.approx((2.0, 2.0))


def test_mu_invariant_examples():
    p = SpaceParams(4, 3, 2.0)
    assert mu_invariant(PointState(u=1.3, du=0.4, f=1.5, df=0.0, ddf=0.0), p) == pytest.approx(2.0 * 1.5 ** 2)
    for n, m in ((3, 2), (4, 3), (5, 2)):
        p = SpaceParams(n, m, 1 - n - m, -1)
        for t in (0.3, 0.7, 1.5):
            assert mu_invariant(cosh_sinh(t), p) == pytest.approx(m - 1, rel=1e-12)
        p = SpaceParams(n, m, 1 - n - m, 0)
        for t in (-0.5, 0.0, 1.1):
            assert mu_invariant(exp_state(t, a=1.7), p) == pytest.approx(0.0, abs=1e-11)


def test_vectorised_shapes():
    ts = np.linspace(0.1, 2, 7)
    st = PointState(t=ts, u=np.cosh(ts), du=np.sinh(ts), ddu=np.cosh(ts), f=np.sinh(ts), df=np.cosh(ts),
                    ddf=np.sinh(ts))
    out = ricci_tangential(st, SpaceParams(4, 2, -5, -1))
    assert out.shape == ts.shape
    np.testing.assert_allclose(out, -3.0, rtol=1e-13)


def test_scalar_curvature_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = SpaceParams(int(rng.integers(2, 7)), int(rng.integers(2, 5)), rng.normal(), rng.normal())
        st = PointState(u=rng.uniform(0.1, 3), du=rng.normal(), ddu=rng.normal(), f=1.0, df=rng.normal(),
                        ddf=rng.normal())
        ed = eigen_data(st, p, consistency_tol=None)
        assert ed.scal == pytest.approx(ed.gamma1 + (p.n - 1) * ed.gamma2, rel=1e-14, abs=1e-14)
        assert ed.scal == pytest.approx(scalar_curvature(st, p), rel=1e-14, abs=1e-14)
        shift = ed.scal / (2 * (p.n - 1))
        assert ed.sigma1 == pytest.approx(ed.gamma1 - shift, abs=1e-13)
        assert ed.sigma2 == pytest.approx(ed.gamma2 - shift, abs=1e-13)
        assert ed.p1 == pytest.approx(ed.gamma1 - ed.rho, abs=1e-13)
        assert ed.p2 == pytest.approx(ed.gamma2 - ed.rho, abs=1e-13)


def test_eigen_data_examples():
    ed = eigen_data(cosh_sinh(1.0), SpaceParams(4, 2, -5, -1))
    assert ed.sigma1 == pytest.approx(ed.sigma2, abs=1e-12)
    assert ed.in_O is False
    ed = eigen_data(PointState(t=1.0, u=1.0, f=1.0, df=1.0, ddf=0.0), SpaceParams(4, 2, 0.0, 0.0))
    assert ed.gamma1 == 0 and ed.gamma2 == 0 and ed.in_O is False
    # critical point of f with distinct Schouten eigenvalues: still not in O
    st = PointState(u=1.0, du=0.3, ddu=0.5, f=1.0, df=0.0, ddf=0.2)
    ed = eigen_data(st, SpaceParams(4, 2, 0.0, 1.0), consistency_tol=None)
    assert abs(ed.sigma1 - ed.sigma2) > 1e-3 and ed.in_O is False


def test_eigen_data_in_O_and_gap_tol():
    # u = t^2 base with generic f: distinct eigenvalues and df != 0
    st = PointState(u=1.0, du=0.3, ddu=0.5, f=1.0, df=0.4, ddf=0.2)
    ed = eigen_data(st, SpaceParams(4, 2, 0.0, 1.0), consistency_tol=None)
    assert ed.in_O is True
    with pytest.raises(WarpError):
        eigen_data(st, SpaceParams(4, 2, 0.0, 1.0), gap_tol=0.0)


def test_eigen_data_consistency_error():
    st = cosh_sinh(1.0).replace(ddf=2.0)
    with pytest.raises(InconsistentStateError):
        eigen_data(st, SpaceParams(4, 2, -5, -1))


def test_hessian_two_routes_agree_on_integrated_states():
    from warpein.ode import IVPState, integrate

    p = SpaceParams(4, 2, -5, -1)
    prof = integrate(IVPState(0.2, math.cosh(0.2), math.sinh(0.2), math.sinh(0.2), math.cosh(0.2)), p, (0.2, 2.0),
                     1e-10, nodes=60)
    ed = eigen_data(prof.states, p, consistency_tol=1e-8)
    assert np.max(np.abs(ed.mu1 - ed.mu1_schouten)) <= 1e-8
    assert np.max(np.abs(ed.mu2 - ed.mu2_schouten)) <= 1e-8


@pytest.mark.parametrize("name", ["sphere-disk", "flat-ray", "cosh-sinh", "exp-flat", "hyperbolic-space",
                                  "hyperbolic-boundary", "exp-einstein"])
def test_bakry_emery_matches_residuals(name):
    fam = instantiate(name, 4, 3)
    st = fam.state(interior_grid(fam, 60)[:45])
    keep = st.f > 0
    st = st[keep]
    radial, tangential = bakry_emery_residuals(st, fam.params)
    np.testing.assert_allclose(radial, -(fam.params.m / st.f) * residual_first(st, fam.params), atol=1e-10)
    np.testing.assert_allclose(tangential, -residual_second(st, fam.params) / st.f, atol=1e-10)
    assert np.max(np.abs(radial)) <= 1e-10
    # and the equivalence fails together when the state is perturbed
    bad = st.replace(ddf=st.ddf + 1e-3)
    r_bad, _ = bakry_emery_residuals(bad, fam.params)
    np.testing.assert_allclose(r_bad, -(fam.params.m / st.f) * residual_first(bad, fam.params), rtol=1e-9)
    assert np.min(np.abs(r_bad)) > 1e-4


def test_bakry_emery_needs_positive_f():
    with pytest.raises(WarpError):
        bakry_emery_residuals(PointState(u=1.0, f=0.0, df=1.0), SpaceParams(3, 2, 0.0))
