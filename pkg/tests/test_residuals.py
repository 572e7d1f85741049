import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as hs

from warpein.catalog import instantiate, sample
from warpein.errors import BoundaryConditionError, MalformedProfileError, SingularQuadratureError
from warpein.geometry import PointState, SpaceParams
from warpein.profile import Profile, profile_from_csv, profile_to_csv
from warpein.residuals import (
    coeff_abc,
    f_from_u,
    fd_weights,
    fill_derivatives,
    node_scale,
    residual_boundary,
    residual_compat,
    residual_first,
    residual_second,
    verify,
)


def cosh_sinh(t):
    return PointState(t=t, u=math.cosh(t), du=math.sinh(t), ddu=math.cosh(t), dddu=math.sinh(t),
                      f=math.sinh(t), df=math.cosh(t), ddf=math.sinh(t))


def test_coeff_abc_examples():
    abc = coeff_abc(PointState(u=1.0), SpaceParams(3, 2, 0.0, 0.0))
    assert (abc.a, abc.b, abc.c) == (0.0, 0.0, 0.0)
    abc = coeff_abc(cosh_sinh(0.0), SpaceParams(4, 2, -5, -1))
    assert abc.a == pytest.approx(-1.0) and abc.b == 0.0 and abc.c == pytest.approx(-2.0)
    e = math.exp(0.4)
    abc = coeff_abc(PointState(u=e, du=e, ddu=e), SpaceParams(3, 2, -4, 0))
    assert abc.a == pytest.approx(-1.0) and abc.b == pytest.approx(2.0) and abc.c == pytest.approx(-2.0)
    # f = e^t solves f' b + c f = 0
    assert 2 * e - 2 * e == pytest.approx(abc.b * e + abc.c * e)


def test_residual_second_examples():
    assert residual_second(PointState(u=1.0, f=2.0, df=2.0), SpaceParams(3, 2, 0.0, 0.0)) == 0.0
    p = SpaceParams(4, 3, -6, -1)
    assert abs(residual_second(cosh_sinh(0.5), p)) <= 1e-12
    wrong = residual_second(cosh_sinh(0.5), SpaceParams(4, 3, -6, 0.0))
    assert wrong == pytest.approx(-2 * math.sinh(0.5) / math.cosh(0.5) ** 2, rel=1e-12)


def test_residual_second_is_linear_in_f():
    rng = np.random.default_rng(0)
    p = SpaceParams(5, 3, 1.3, 0.7)
    for _ in range(20):
        st = PointState(u=rng.uniform(0.2, 2), du=rng.normal(), ddu=rng.normal(), f=rng.normal(), df=rng.normal())
        s = rng.uniform(-3, 3)
        scaled = st.replace(f=s * st.f, df=s * st.df)
        assert residual_second(scaled, p) == pytest.approx(s * residual_second(st, p), rel=1e-12, abs=1e-14)


def test_residual_first_examples():
    assert residual_first(PointState(u=1.0, f=2.0, df=2.0, ddf=0.0), SpaceParams(3, 2, 0.0)) == 0.0
    assert abs(residual_first(cosh_sinh(1.0), SpaceParams(4, 2, -5, -1))) <= 1e-13
    st = cosh_sinh(1.0).replace(f=1.0, df=1.0, ddf=0.0)
    assert residual_first(st, SpaceParams(4, 2, -5, -1)) == pytest.approx(-1.0, rel=1e-12)


def test_residual_compat_examples():
    assert residual_compat(PointState(u=1.0, dddu=0.0), SpaceParams(3, 2, 0.0, 0.0)) == 0.0
    p = SpaceParams(4, 2, -5, -1)
    for t in (0.0, 0.5, 1.0):
        assert abs(residual_compat(cosh_sinh(t), p)) <= 1e-10
    # u = u' = u'' = u''' = 1 on the exp family
    st = PointState(u=1.0, du=1.0, ddu=1.0, dddu=1.0)
    assert residual_compat(st, SpaceParams(3, 2, -4, 0.0)) == 0.0


def test_compat_hand_sum_on_exp_family():
    # term by term at u = u' = u'' = u''' = 1, lambda = -4, n = 3, m = 2
    lam, n, m = -4, 3, 2
    q = n - 2
    terms = [lam ** 2, 2 * q * lam, (2 + m) * lam, q * (m + q), 2 * q + m, 1 + m, -m]
    assert terms == [16, -8, -16, 3, 4, 3, -2]
    assert sum(terms) == 0
    # a lambda u^2 u'^2 coefficient of m + 2(n-2) would leave m * lambda = -8 behind
    assert sum(terms) + m * lam == -8


def test_compat_needs_third_derivative():
    with pytest.raises(ValueError):
        residual_compat(PointState(u=1.0, du=0.2), SpaceParams(3, 2, 1.0))


def _symbolic_compat():
    t = sp.symbols("t")
    n, m, lam, k = sp.symbols("n m lam k")
    u = sp.Function("u")(t)
    a = (n - 1) / m * u.diff(t, 2) / u + lam / m
    b = m * u.diff(t) / u
    c = lam - ((n - 2) * k - (n - 2) * u.diff(t) ** 2 - u * u.diff(t, 2)) / u ** 2
    g = c / b
    expr = (a - g.diff(t) + g ** 2) * m ** 2 * u ** 2 * u.diff(t) ** 2
    U = sp.symbols("U0:4")
    for order in (3, 2, 1):
        expr = expr.subs(u.diff(t, order), U[order])
    expr = sp.expand(sp.cancel(expr.subs(u, U[0])))
    return sp.lambdify((n, m, lam, k) + U, expr, "math"), expr


def test_compat_matches_symbolic_elimination():
    fn, expr = _symbolic_compat()
    # polynomial in the derivatives, linear in u'''
    assert sp.degree(expr, sp.Symbol("U3")) == 1
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = SpaceParams(int(rng.integers(2, 8)), int(rng.integers(2, 6)), rng.uniform(-5, 5), rng.uniform(-2, 2))
        u = rng.uniform(0.1, 2)
        d = rng.uniform(-2, 2, 3)
        st = PointState(u=u, du=d[0], ddu=d[1], dddu=d[2])
        ref = fn(p.n, p.m, p.lam, p.k, u, *d)
        assert residual_compat(st, p) == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_residual_boundary_examples():
    assert residual_boundary(cosh_sinh(0.0)) == 0.0
    assert residual_boundary(PointState(u=1.0, f=0.0, df=2.0, ddf=0.0)) == 0.0
    st = PointState(u=1.0, du=0.0, f=math.sin(0.0), df=math.cos(0.0), ddf=-math.sin(0.0))
    assert residual_boundary(st) == 0.0
    assert st.df != 0
    assert residual_boundary(PointState(u=1.0, du=0.25, f=0.0, df=1.0, ddf=-0.5)) == 0.75
    with pytest.raises(BoundaryConditionError):
        residual_boundary(cosh_sinh(0.3))


def test_node_scale():
    st = PointState(u=np.array([1.0, 2.0, 0.1]), ddf=np.array([0.0, 0.0, 7.0]))
    np.testing.assert_allclose(node_scale(st, SpaceParams(3, 2, -2.0)), [2.0, 8.0, 7.0])


def test_fd_weights_reproduce_polynomials():
    xs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(fd_weights(0.0, xs, 1), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12], atol=1e-15)
    np.testing.assert_allclose(fd_weights(0.0, xs, 2), [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], atol=1e-14)
    one_sided = np.arange(6) * 0.1
    w = fd_weights(0.0, one_sided, 3)
    assert w @ (one_sided ** 3) == pytest.approx(6.0, rel=1e-10)
    assert w @ (one_sided ** 2) == pytest.approx(0.0, abs=1e-9)


def test_fill_derivatives_fourth_order():
    errs = []
    for npts in (41, 81):
        ts = np.linspace(0.0, 1.0, npts)
        d1, d2 = fill_derivatives(ts, np.sin(ts), 2)
        errs.append(np.max(np.abs(d1 - np.cos(ts))))
    assert errs[0] / errs[1] > 2 ** 3.5
    with pytest.raises(MalformedProfileError):
        fill_derivatives(np.linspace(0, 1, 5), np.zeros(5), 2)


def test_f_from_u_exp_family():
    fam = instantiate("exp-einstein", 3, 2)
    ts = np.linspace(-1, 1.5, 60)
    prof = sample(fam, ts)
    bare = Profile(ts, prof.states.replace(f=np.ones_like(ts), df=np.zeros_like(ts), ddf=np.zeros_like(ts)),
                   prof.params, dense=fam.state)
    filled = f_from_u(bare, math.exp(-1))
    assert filled.meta["quadrature"] == "adaptive"
    np.testing.assert_allclose(filled.column("f"), np.exp(ts), rtol=1e-11)
    assert verify(filled, 1e-9).verdict


def test_f_from_u_cosh_away_from_equator():
    fam = instantiate("hyperbolic-boundary", 4, 2)
    ts = np.linspace(0.5, 2.0, 200)
    prof = sample(fam, ts)
    for dense, expected, tol in ((fam.state, "adaptive", 1e-10), (None, "hermite", 1e-8)):
        bare = Profile(ts, prof.states.replace(f=np.ones_like(ts)), prof.params, dense=dense)
        filled = f_from_u(bare, math.sinh(0.5))
        assert filled.meta["quadrature"] == expected
        np.testing.assert_allclose(filled.column("f"), np.sinh(ts), rtol=tol)
        np.testing.assert_allclose(filled.column("ddf"), np.sinh(ts), rtol=tol)
    no_third = Profile(ts, prof.states.replace(dddu=np.full_like(ts, np.nan)), prof.params)
    filled = f_from_u(no_third, math.sinh(0.5))
    assert filled.meta["quadrature"] == "trapezoid"
    np.testing.assert_allclose(filled.column("f"), np.sinh(ts), rtol=1e-4)


def test_f_from_u_rejects_flat_warping():
    fam = instantiate("flat-ray", 4, 2)
    prof = sample(fam, np.linspace(0.5, 2, 10))
    with pytest.raises(SingularQuadratureError):
        f_from_u(prof, 1.0)
    with pytest.raises(ValueError):
        f_from_u(prof, 0.0)


def test_verify_examples():
    fam = instantiate("hyperbolic-boundary", 4, 2)
    rep = verify(sample(fam, np.linspace(0, 3, 1001)), 1e-9)
    assert rep.verdict and rep.verdict_text == "pass"
    assert rep.r_boundary == 0.0 and rep.boundary_nodes == [0.0] and rep.grad_at_boundary == [1.0]
    assert rep.grid_size == 1001
    rep = verify(sample(instantiate("flat-ray", 4, 2), np.linspace(0, 5, 200)), 1e-9)
    assert rep.verdict
    prof = sample(fam, np.linspace(0, 3, 1001))
    perturbed = Profile(prof.ts, prof.states, SpaceParams(4, 2, prof.params.lam + 1e-3, -1))
    rep = verify(perturbed, 1e-9)
    assert not rep.verdict
    assert rep.r_second_raw == pytest.approx(1e-3 * np.max(np.abs(prof.column("f"))), rel=1e-6)


def test_verify_fields_nonnegative_and_serialise():
    rep = verify(sample(instantiate("sphere-disk", 3, 2), np.linspace(0.1, 3.0, 50)), 1e-9)
    d = rep.as_dict()
    for key in ("r_second", "r_compat", "r_first", "r_second_raw", "r_compat_raw", "r_first_raw"):
        assert d[key] >= 0
    assert d["r_boundary"] is None
    text = rep.to_text()
    assert "verdict=pass" in text and text.count("\n") == len(d)


def test_verify_is_grid_monotone():
    fam = instantiate("cosh-sinh", 4, 3)
    coarse = np.linspace(0.2, 2.0, 31)
    fine = np.union1d(coarse, np.linspace(0.2, 2.0, 97))
    noisy = []
    for ts in (coarse, fine):
        prof = sample(fam, ts)
        st = prof.states.replace(f=prof.states.f * (1 + 1e-7 * np.sin(37 * ts)))
        noisy.append(verify(Profile(ts, st, prof.params), 1e-9))
    for key in ("r_second", "r_compat", "r_first"):
        assert getattr(noisy[1], key) >= getattr(noisy[0], key)


def test_verify_malformed_profiles():
    fam = instantiate("hyperbolic-boundary", 4, 2)
    prof = sample(fam, np.linspace(0.1, 1, 20))
    st = prof.states.replace(u=np.where(np.arange(20) == 5, -1.0, prof.states.u))
    with pytest.raises(MalformedProfileError):
        verify(Profile(prof.ts, st, prof.params), 1e-9)
    with pytest.raises(ValueError):
        verify(prof, 0.0)


def test_verify_skips_critical_grid_ends():
    fam = instantiate("sphere-disk", 4, 2)
    ts = np.linspace(0.0, math.pi, 301)
    st = fam.state(ts)
    st = st.replace(u=np.where(np.abs(st.u) < 1e-15, 0.0, st.u))
    rep = verify(Profile(ts, st, fam.params), 1e-9)
    assert rep.nodes_evaluated == 299 and rep.verdict
    assert any("f changes sign" in w for w in rep.warnings)


def test_csv_round_trip_and_missing_columns():
    fam = instantiate("hyperbolic-boundary", 4, 2)
    prof = sample(fam, np.linspace(0.1, 2, 80))
    text = profile_to_csv(prof)
    back = profile_from_csv(text, prof.params)
    for name in ("t", "u", "du", "ddu", "dddu", "f", "df", "ddf"):
        np.testing.assert_array_equal(back.column(name), prof.column(name))
    lines = text.splitlines()
    assert lines[0] == "t,u,du,ddu,dddu,f,df,ddf"
    reduced = "\n".join(",".join(row.split(",")[i] for i in (0, 1, 5)) for row in lines)
    partial = profile_from_csv(reduced, prof.params)
    assert set(partial.missing) == {"du", "ddu", "dddu", "df", "ddf"}
    rep = verify(partial, 1e-5)
    assert rep.filled_columns == partial.missing
    assert any("finite differences" in w for w in rep.warnings)
    for bad in ("", "t,u,f\n", "t,x\n1,2\n", "t,u,f\n1,a,2\n", "t,u,f\n2,1,1\n1,1,1\n"):
        with pytest.raises(MalformedProfileError):
            profile_from_csv(bad, prof.params)

dims = hs.tuples(hs.integers(2, 9), hs.integers(2, 6))
finite = hs.floats(-3, 3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(dims, hs.floats(0.2, 3.0), hs.floats(-1.5, 1.5))
def test_closed_forms_have_zero_residuals(nm, kbar_abs, t):
    n, m = nm
    fam = instantiate("exp-flat", n, m, kbar=-kbar_abs)
    state = fam.state(t)
    assert abs(residual_second(state, fam.params)) <= 1e-9 * max(1.0, abs(float(state.f)) * kbar_abs)
    assert abs(residual_first(state, fam.params)) <= 1e-9 * max(1.0, abs(float(state.f)) * kbar_abs ** 2)
    scale = float(fam.params.lam ** 2 * state.u ** 4) + 1.0
    assert abs(residual_compat(state, fam.params)) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(dims, finite, finite, hs.floats(0.1, 3.0), finite, finite, finite, finite, finite)
def test_residual_second_is_linear_property(nm, lam, k, u, du, ddu, f, df, s):
    p = SpaceParams(nm[0], nm[1], lam, k)
    state = PointState(u=u, du=du, ddu=ddu, f=f, df=df)
    scaled = state.replace(f=s * f, df=s * df)
    base = residual_second(state, p)
    assert residual_second(scaled, p) == pytest.approx(s * base, rel=1e-9, abs=1e-9)
