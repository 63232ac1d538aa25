"""Nonequilibrium signatures of Ornstein-Uhlenbeck processes.

Closed-form steady-state quantities (covariance, area production matrix,
entropy production), planar geometry, exact simulation, trajectory
estimators and bootstrap tests for broken detailed balance.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: F401
    OUModel,
    SteadyState,
    alpha_star,
    build_model,
    decompose,
    entropy_production,
    solve_lyapunov,
    steady_state,
    steady_velocity,
)
from .twodim import StandardParams2D, canonical_model, covariance_explicit  # noqa: F401
from .simulate import SimConfig, Trajectory, ensemble, simulate  # noqa: F401
from .estimate import (  # noqa: F401
    LinearObservable,
    RateEstimate,
    area_rate,
    expected_rate,
    observable_rate,
    optimal_observable,
    two_stage_entropy,
)
from .hypotest import TestReport, convergence_bands, detailed_balance_test, hdi  # noqa: F401
