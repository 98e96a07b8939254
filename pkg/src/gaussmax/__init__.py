"""Dominating points and decay rates for scaled Gaussian maxima on convex sets.

The package answers three related questions about a centered Gaussian
(or Gaussian-mixture) sample of growing size n, rescaled by
``A_n = sqrt(2 log n) A``:

* where does the componentwise maximum most likely enter a closed
  convex target set (the dominating point),
* at what exponential rate in ``2 log n`` does that probability decay,
* and do simulations reproduce the predicted rate.

``model`` holds distributions and reproducible sampling, ``sets`` the
target shapes, ``dominate`` the solver and rate functions, ``estimate``
the Monte Carlo and exact estimators, and ``cli`` a config-driven
command line wrapper around all of it.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceFailure,
    DimensionMismatch,
    EmptyInterior,
    GaussMaxError,
    MeanInsideSet,
    NotAtypical,
    NotPositiveDefinite,
    NotSymmetric,
    RankDeficient,
    SingularPair,
    SolverDivergence,
)
from .model import (
    CovarianceModel,
    GaussianMixture,
    GaussianModel,
    RandomStream,
    build_covariance,
    gaussian_log_density,
    mills_bounds,
    sample_gaussian,
    sample_mixture,
)
from .sets import Block, ConvexSet, Ellipsoid, Halfspace, Membership, Polyhedron
from .dominate import (
    ComponentSolution,
    DominatingPoint,
    LadderEntry,
    MixtureRate,
    ScalingLadder,
    ScalingLimit,
    check_margin,
    closest_point_equivalence,
    corner_full_rank,
    corner_pairwise,
    dominating_point,
    rate_componentwise,
    rate_mixture,
    rate_single,
    verify_optimality,
)
from .estimate import (
    EstimateReport,
    Method,
    SlopeFit,
    conspiracy_rate,
    exact_block_diagonal,
    exact_block_diagonal_log,
    exact_block_reports,
    is_single,
    mc_at_least_one,
    mc_componentwise,
    slope_fit,
    union_combine,
    union_combined_report,
)
from .config import ExperimentConfig, load_config, parse_config, serialize_config

__all__ = [
    "__version__",
    "GaussMaxError",
    "NotSymmetric",
    "NotPositiveDefinite",
    "DimensionMismatch",
    "ConvergenceFailure",
    "EmptyInterior",
    "NotAtypical",
    "SolverDivergence",
    "RankDeficient",
    "SingularPair",
    "MeanInsideSet",
    "ConfigError",
    "RandomStream",
    "CovarianceModel",
    "GaussianModel",
    "GaussianMixture",
    "build_covariance",
    "sample_gaussian",
    "sample_mixture",
    "gaussian_log_density",
    "mills_bounds",
    "Membership",
    "ConvexSet",
    "Block",
    "Halfspace",
    "Polyhedron",
    "Ellipsoid",
    "ScalingLimit",
    "ScalingLadder",
    "LadderEntry",
    "DominatingPoint",
    "MixtureRate",
    "ComponentSolution",
    "dominating_point",
    "corner_full_rank",
    "corner_pairwise",
    "rate_single",
    "rate_componentwise",
    "rate_mixture",
    "check_margin",
    "verify_optimality",
    "closest_point_equivalence",
    "Method",
    "EstimateReport",
    "SlopeFit",
    "mc_componentwise",
    "mc_at_least_one",
    "is_single",
    "union_combine",
    "union_combined_report",
    "exact_block_diagonal",
    "exact_block_diagonal_log",
    "exact_block_reports",
    "slope_fit",
    "conspiracy_rate",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "load_config",
]
