import math

import numpy as np
import pytest

from warpein.catalog import (
    ALIASES,
    FAMILIES,
    family_names,
    initial_state,
    instantiate,
    interior_grid,
    list_table,
    lookup_cell,
    requested_mu,
    rho_check,
    sample,
)
from warpein.errors import ConstraintViolation, DomainError, UnknownFamilyError, WarpError
from warpein.residuals import verify


def test_family_names_and_aliases():
    assert family_names() == list(FAMILIES) + list(ALIASES)
    fam = instantiate("hyperbolic-boundary", 4, 2)
    assert fam.base == "cosh-sinh" and fam.kbar == -1.0
    assert fam.params.as_dict() == {"n": 4, "m": 2, "lambda": -5.0, "k": -1.0}
    fam = instantiate("exp-einstein", 3, 2, a=2.5)
    assert fam.params.lam == -4.0 and fam.params.k == 0.0 and fam.constants["C"] == 2.5


def test_instantiate_examples():
    fam = instantiate("sphere-disk", 4, 2, kbar=4.0)
    assert fam.params.lam == pytest.approx(20.0) and fam.domain == (0.0, math.pi / 2)
    assert fam.extras["disk_domain"] == [0.0, math.pi / 4]
    fam = instantiate("cosh-sinh", 3, 3, lam=-10.0)
    assert fam.kbar == pytest.approx(-2.0)
    fam = instantiate("flat-ray", 5, 2, C=3.0)
    assert fam.params.lam == 0.0 and fam.expected_mu == pytest.approx(9.0)


def test_instantiate_errors():
    with pytest.raises(UnknownFamilyError) as exc:
        instantiate("torus", 3, 2)
    assert str(exc.value).startswith("unknown family 'torus'")
    for kwargs in ({"kbar": 1.0}, {"lam": 2.0}, {"C": -1.0}, {"C": 1.0, "a": 2.0}, {"form": "other"}):
        with pytest.raises(ConstraintViolation):
            instantiate("cosh-sinh", 4, 2, **kwargs)
    with pytest.raises(ConstraintViolation):
        instantiate("flat-ray", 4, 2, kbar=1.0)
    with pytest.raises(ConstraintViolation):
        instantiate("hyperbolic-boundary", 4, 2, kbar=-2.0)
    with pytest.raises(WarpError):
        instantiate("sphere-disk", 1, 2)


def test_requested_mu_values():
    assert requested_mu(instantiate("hyperbolic-boundary", 4, 3), 0.7) == pytest.approx(2.0, rel=1e-12)
    assert requested_mu(instantiate("exp-einstein", 4, 3, a=1.3), 0.2) == pytest.approx(0.0, abs=1e-12)
    assert requested_mu(instantiate("flat-ray", 4, 3, C=2.0), 1.1) == pytest.approx(8.0, rel=1e-12)
    with pytest.raises(DomainError):
        requested_mu(instantiate("sphere-disk", 4, 3), 4.0)


@pytest.mark.parametrize("name", family_names())
def test_expected_mu_matches_closed_form(name):
    fam = instantiate(name, 4, 3, C=1.5) if name not in ALIASES else instantiate(name, 4, 3)
    t = interior_grid(fam, 5)[2]
    assert requested_mu(fam, t) == pytest.approx(fam.expected_mu, abs=1e-11)
    assert np.sign(fam.expected_mu) == fam.expected_mu_sign


def test_table_form_uses_rescaled_fiber():
    fam = instantiate("sphere-disk", 4, 2, kbar=4.0, form="table")
    assert fam.params.k == pytest.approx(8.0)
    st = fam.state(0.3)
    assert st.u ** 2 == pytest.approx(2 * math.sin(0.6) ** 2)
    assert verify(sample(fam, interior_grid(fam, 101)), 1e-9).verdict


def test_sample_errors_and_ends():
    fam = instantiate("sphere-disk", 3, 2)
    with pytest.raises(DomainError):
        sample(fam, [0.0, 1.0])
    with pytest.raises(DomainError):
        sample(fam, [])
    with pytest.raises(DomainError):
        sample(fam, [1.0, math.nan])
    prof = sample(fam, [0.5, 1.0, 2.0])
    assert prof.left_end.kind == "critical_max" and prof.right_end.t_end == pytest.approx(math.pi)
    assert prof.left_end.diagnostics["grid_gap"] == 0.5
    prof = sample(instantiate("flat-ray", 3, 2), [0.0, 1.0])
    assert prof.left_end.kind == "boundary" and prof.right_end.kind == "infinite"


def test_list_table_has_nine_cells():
    rows = list_table()
    assert len(rows) == 9
    filled = [r for r in rows if r["family"]]
    assert sorted(r["family"] for r in filled) == sorted(FAMILIES)
    assert lookup_cell(-1, 1) == "cosh-sinh"
    with pytest.raises(ConstraintViolation):
        lookup_cell(1, -1)
    cosh = next(r for r in rows if r["family"] == "cosh-sinh")
    assert cosh["aliases"] == ["hyperbolic-boundary"]


@pytest.mark.parametrize("name", list(FAMILIES))
def test_rho_check(name):
    fam = instantiate(name, 5, 2)
    out = rho_check(fam, interior_grid(fam, 20))
    assert out["max_abs_diff"] <= 1e-10


def test_initial_state_float_and_mp():
    fam = instantiate("hyperbolic-boundary", 4, 2)
    st = initial_state(fam, 0.5)
    assert st.u == pytest.approx(math.cosh(0.5)) and st.df == pytest.approx(math.cosh(0.5))
    hp = initial_state(fam, 0.5, dps=40)
    assert not isinstance(hp.u, float) and hp.u.context.dps == 40
    ctx = hp.u.context
    assert abs(hp.f - ctx.sinh(ctx.mpf("0.5"))) < ctx.mpf(10) ** -38
    with pytest.raises(DomainError):
        initial_state(instantiate("hyperbolic-space", 4, 2), 0.0)


def test_interior_grid():
    g = interior_grid(instantiate("sphere-disk", 3, 2), 9)
    assert g.size == 9 and g[0] > 0 and g[-1] < math.pi
    np.testing.assert_allclose(np.diff(g), math.pi / 10)
    g = interior_grid(instantiate("flat-ray", 3, 2), 5, extent=6.0)
    assert g[0] == pytest.approx(1.0) and g[-1] == pytest.approx(5.0)
    g = interior_grid(instantiate("exp-flat", 3, 2), 3, extent=2.0)
    np.testing.assert_allclose(g, [-0.5, 0.0, 0.5])
