"""Pointwise curvature and Hessian formulas for g = dt^2 + u(t)^2 g_N.

The fiber N has dimension n - 1 and is Einstein with the normalisation
``Ric_N = k (n - 2) g_N``: k = 1 for the unit sphere, k = -1 for unit
hyperbolic space and k = 0 for a Ricci-flat fiber.  The potential f depends
on t only.

Every function accepts scalars or equally shaped numpy arrays in the
:class:`PointState` fields and returns the same shape.

Note on names: ``k`` is the fiber's normalised scalar curvature, while
``rho`` (see :class:`EigenData`) is the pointwise quantity
((n-1) lambda - Scal) / (m-1).  They are unrelated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InconsistentStateError, SingularPointError, WarpError

__all__ = [
    "SpaceParams",
    "PointState",
    "EigenData",
    "ricci_radial",
    "ricci_tangential",
    "scalar_curvature",
    "hess_components",
    "laplacian_f",
    "mu_invariant",
    "eigen_data",
    "bakry_emery_residuals",
]


@dataclass(frozen=True)
class SpaceParams:
    """Scalar problem data.

    Parameters
    ----------
    n : int
        Dimension of the base M (n >= 2).
    m : int
        Dimension of the Einstein fiber F of the total space (m >= 2).
    lam : float
        Einstein constant lambda.
    k : float
        Normalised scalar curvature of N, ``Ric_N = k (n - 2) g_N``.
    """

    n: int
    m: int
    lam: float
    k: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise WarpError(f"base dimension n must be an integer >= 2, got {self.n!r}")
        if int(self.m) != self.m or self.m < 2:
            raise WarpError(f"fiber dimension m must be an integer >= 2, got {self.m!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "k", float(self.k))

    def as_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "lambda": self.lam, "k": self.k}


@dataclass
class PointState:
    """Values of u, f and their t-derivatives at one point (or a grid).

    ``dddu`` is only needed by the compatibility residual; it may be left
    as NaN otherwise.
    """

    t: float = 0.0
    u: float = 1.0
    du: float = 0.0
    ddu: float = 0.0
    dddu: float = float("nan")
    f: float = 1.0
    df: float = 0.0
    ddf: float = 0.0

    def __getitem__(self, idx) -> "PointState":
        return PointState(**{fl.name: np.asarray(getattr(self, fl.name))[idx] for fl in fields(self)})

    def __len__(self) -> int:
        return int(np.size(self.t))

    def replace(self, **changes) -> "PointState":
        return replace(self, **changes)

    def asarrays(self) -> "PointState":
        return PointState(**{fl.name: np.asarray(getattr(self, fl.name), dtype=float) for fl in fields(self)})


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _require_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u == 0.0):
        raise SingularPointError("warping function vanishes; this point is an endpoint")
    return u


def ricci_radial(state: PointState, params: SpaceParams):
    """Ricci eigenvalue in the d/dt direction, -(n-1) u''/u."""
    u = _require_u(state.u)
    return _out(-(params.n - 1) * np.asarray(state.ddu) / u)


def ricci_tangential(state: PointState, params: SpaceParams):
    """Ricci eigenvalue on unit vectors tangent to the fiber N."""
    u = _require_u(state.u)
    du = np.asarray(state.du)
    return _out(((params.n - 2) * (params.k - du * du) - u * np.asarray(state.ddu)) / (u * u))


def scalar_curvature(state: PointState, params: SpaceParams):
    return _out(np.asarray(ricci_radial(state, params)) + (params.n - 1) * np.asarray(ricci_tangential(state, params)))


def hess_components(state: PointState):
    """Hessian eigenvalues of f: (f'', f' u'/u) in radial and tangential directions."""
    u = _require_u(state.u)
    return _out(state.ddf), _out(np.asarray(state.df) * np.asarray(state.du) / u)


def laplacian_f(state: PointState, params: SpaceParams):
    u = _require_u(state.u)
    return _out(np.asarray(state.ddf) + (params.n - 1) * np.asarray(state.du) / u * np.asarray(state.df))


def mu_invariant(state: PointState, params: SpaceParams):
    """Einstein constant the fiber F must have: f Lap f + (m-1)|df|^2 + lambda f^2."""
    f = np.asarray(state.f, dtype=float)
    df = np.asarray(state.df, dtype=float)
    lap = np.asarray(laplacian_f(state, params))
    return _out(f * lap + (params.m - 1) * df * df + params.lam * f * f)


@dataclass
class EigenData:
    gamma1: float
    gamma2: float
    scal: float
    sigma1: float
    sigma2: float
    rho: float
    p1: float
    p2: float
    mu1: float
    mu2: float
    mu1_schouten: float
    mu2_schouten: float
    in_O: bool = field(default=False)

    def as_dict(self) -> dict:
        return {fl.name: (v.tolist() if isinstance(v := getattr(self, fl.name), np.ndarray) else v)
                for fl in fields(self)}


def eigen_data(
    state: PointState,
    params: SpaceParams,
    gap_tol: float = 1e-9,
    consistency_tol: float | None = 1e-8,
) -> EigenData:
    """Ricci, Schouten, P and Hessian eigenvalues at a point.

    The Schouten tensor is taken as ``S = Ric - Scal/(2(n-1)) g`` so that the
    defining equation reads ``Hess f = (f/m)(S + (Scal/(2(n-1)) - lambda) g)``.
    The Hessian eigenvalues are computed both from f directly and from the
    Schouten eigenvalues; if they differ by more than ``consistency_tol``
    (relative to max(1, |mu|)) the state does not solve the equation and
    :class:`InconsistentStateError` is raised.  Pass ``consistency_tol=None``
    to skip the check.

    ``in_O`` marks points with df != 0 and two distinct Schouten eigenvalues,
    both decided with ``gap_tol`` (the eigenvalue gap relative to
    max(1, |gamma1|, |gamma2|)).
    """
    if gap_tol <= 0:
        raise WarpError("gap_tol must be positive")
    n, m, lam = params.n, params.m, params.lam
    g1 = np.asarray(ricci_radial(state, params))
    g2 = np.asarray(ricci_tangential(state, params))
    scal = g1 + (n - 1) * g2
    shift = scal / (2.0 * (n - 1))
    s1, s2 = g1 - shift, g2 - shift
    rho = ((n - 1) * lam - scal) / (m - 1)
    mu1, mu2 = (np.asarray(x) for x in hess_components(state))
    f = np.asarray(state.f, dtype=float)
    mu1_s = f / m * (s1 + shift - lam)
    mu2_s = f / m * (s2 + shift - lam)

    if consistency_tol is not None:
        for direct, via in ((mu1, mu1_s), (mu2, mu2_s)):
            scale = np.maximum(1.0, np.maximum(np.abs(direct), np.abs(via)))
            bad = np.abs(direct - via) > consistency_tol * scale
            if np.any(bad):
                worst = float(np.max(np.abs(direct - via) / scale))
                raise InconsistentStateError(
                    f"Hessian eigenvalues disagree with the Schouten route by {worst:.3e}; "
                    "the state does not satisfy Hess f = (f/m)(Ric - lambda g)"
                )

    gap_scale = np.maximum(1.0, np.maximum(np.abs(g1), np.abs(g2)))
    in_O = (np.abs(np.asarray(state.df)) > gap_tol) & (np.abs(s1 - s2) > gap_tol * gap_scale)
    in_O = bool(in_O) if np.ndim(in_O) == 0 else in_O

    return EigenData(
        gamma1=_out(g1), gamma2=_out(g2), scal=_out(scal),
        sigma1=_out(s1), sigma2=_out(s2), rho=_out(rho),
        p1=_out(g1 - rho), p2=_out(g2 - rho),
        mu1=_out(mu1), mu2=_out(mu2),
        mu1_schouten=_out(mu1_s), mu2_schouten=_out(mu2_s),
        in_O=in_O,
    )


def bakry_emery_residuals(state: PointState, params: SpaceParams):
    """Radial and tangential components of Ric + Hess w - dw(x)dw/m - lambda g.

    Here ``w = -m log f`` (only meaningful where f > 0).  The radial part
    equals ``-(m/f)`` times the first-condition residual and the tangential
    part ``-1/f`` times the second-condition residual.
    """
    m, lam = params.m, params.lam
    f = np.asarray(state.f, dtype=float)
    if np.any(f <= 0):
        raise WarpError("the Bakry-Emery potential needs f > 0")
    u = _require_u(state.u)
    df, ddf, du = (np.asarray(x, dtype=float) for x in (state.df, state.ddf, state.du))
    dw = -m * df / f
    ddw = -m * (ddf / f - (df / f) ** 2)
    g1 = np.asarray(ricci_radial(state, params))
    g2 = np.asarray(ricci_tangential(state, params))
    radial = g1 + ddw - dw * dw / m - lam
    tangential = g2 + dw * du / u - lam
    return _out(radial), _out(tangential)
