"""Numerical laboratory for sample-wise double descent in ridgeless regression.

Seeded data generation, min-norm and gradient-descent fits, Monte Carlo
bias/variance decomposition with closed-form theory, and an experiment
harness with a CLI.  See the README for the command surface.
"""

__version__ = "0.1.0"

from .estimator import Estimate, GdConfig, GdConvergenceError, Regime, gd_fit, min_norm_fit
from .linalg import (
    SingularityError,
    SvdConvergenceError,
    SvdFactors,
    min_singular_value,
    pinv_apply,
    project_rowspace,
    svd,
    trace_increment,
    trace_inv_gram,
)
from .randgen import (
    BetaMode,
    DataSet,
    ModelSpec,
    RngState,
    make_beta,
    mix_seed,
    sample_gaussian_matrix,
    sample_response,
)
from .risk import (
    RiskSummary,
    TheoryPoint,
    excess_risk,
    monte_carlo_risk,
    theory_overparam,
    theory_point,
    theory_underparam,
    trace_asymptotic,
    trace_recursion,
)

__all__ = [
    "BetaMode",
    "DataSet",
    "Estimate",
    "GdConfig",
    "GdConvergenceError",
    "ModelSpec",
    "Regime",
    "RiskSummary",
    "RngState",
    "SingularityError",
    "SvdConvergenceError",
    "SvdFactors",
    "TheoryPoint",
    "excess_risk",
    "gd_fit",
    "make_beta",
    "min_norm_fit",
    "min_singular_value",
    "mix_seed",
    "monte_carlo_risk",
    "pinv_apply",
    "project_rowspace",
    "sample_gaussian_matrix",
    "sample_response",
    "svd",
    "theory_overparam",
    "theory_point",
    "theory_underparam",
    "trace_asymptotic",
    "trace_increment",
    "trace_inv_gram",
    "trace_recursion",
    "__version__",
]
