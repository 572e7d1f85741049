"""Warped-product Einstein structures over a one-dimensional base.

Metrics dt^2 + u(t)^2 g_N with a potential f(t): pointwise curvature,
residuals of the reduced ODE system, an integrator that lands on boundary
and critical endpoints, scalar shooting and a catalog of closed forms.
"""

from ._backend import COMPILED
from .catalog import ClosedFormFamily, initial_state, instantiate, interior_grid, sample
from .endpoints import classify_endpoint, oddness_check, radial_geodesic_case
from .errors import WarpError
from .geometry import PointState, SpaceParams, bakry_emery_residuals, eigen_data, mu_invariant
from .ode import IVPState, extend_maximal, integrate, ivp_rhs
from .profile import EndpointClass, Profile, read_profile_csv, write_profile_csv
from .residuals import ResidualReport, verify
from .shooting import ShootingProblem, ShootingResult, shoot, solve_shooting

__version__ = "0.1.0"

__all__ = [
    "COMPILED",
    "ClosedFormFamily",
    "EndpointClass",
    "IVPState",
    "PointState",
    "Profile",
    "ResidualReport",
    "ShootingProblem",
    "ShootingResult",
    "SpaceParams",
    "WarpError",
    "bakry_emery_residuals",
    "classify_endpoint",
    "eigen_data",
    "extend_maximal",
    "initial_state",
    "instantiate",
    "integrate",
    "interior_grid",
    "ivp_rhs",
    "mu_invariant",
    "oddness_check",
    "radial_geodesic_case",
    "read_profile_csv",
    "sample",
    "shoot",
    "solve_shooting",
    "verify",
    "write_profile_csv",
]
