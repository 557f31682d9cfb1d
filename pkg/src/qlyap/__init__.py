"""Conditioned Lyapunov exponents of SDEs killed at the boundary of a bounded domain.

Submodules
----------
models
    SDE models, domains, the model zoo and symmetrised-Jacobian bounds.
spectral
    One-dimensional spectral pipeline (principal eigenpair, QSD, QED, lambda).
paths
    Killed Euler-Maruyama paths with a polar tangent flow.
conditioned
    Rejection and Fleming-Viot estimators and the statistical probes.
cli
    The ``qlyap`` command.
"""

__version__ = "0.1.0"

from .models import (  # noqa: E402
    Ball,
    Box,
    Interval,
    ModelError,
    SdeModel,
    check_jacobian,
    lambda_plus_minus,
    make_model,
    zoo_names,
)
from .spectral import SolverError, SpectralSolution, identity_check, solve  # noqa: E402
from .paths import run_pair, run_path  # noqa: E402
from .conditioned import (  # noqa: E402
    ConditionedEstimate,
    Ensemble,
    StarvationError,
    bounds_check,
    conditioned_expectation,
    estimate_lambda_mc,
)

__all__ = [
    "__version__",
    "Ball",
    "Box",
    "Interval",
    "ModelError",
    "SdeModel",
    "check_jacobian",
    "lambda_plus_minus",
    "make_model",
    "zoo_names",
    "SolverError",
    "SpectralSolution",
    "identity_check",
    "solve",
    "run_pair",
    "run_path",
    "ConditionedEstimate",
    "Ensemble",
    "StarvationError",
    "bounds_check",
    "conditioned_expectation",
    "estimate_lambda_mc",
]
