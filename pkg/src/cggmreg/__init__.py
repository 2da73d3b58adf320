"""Sparse, structured multivariate regression via conditional Gaussian
graphical models: alternating convex solver, regularization paths,
model selection and structure-matrix builders."""

from .model import (
    CggmFit,
    DataSet,
    NumericalError,
    PenaltyPair,
    SuffStats,
    apply_standardization,
    compute_suff_stats,
    neg_log_likelihood,
    objective,
    predict,
    rescale_coefficients,
    standardize,
    to_regression,
    unstandardize,
)
from .selection import (
    CvReport,
    active_set,
    cross_validate,
    degrees_of_freedom,
    information_criterion,
    log_likelihood,
    make_folds,
)
from .simulate import (
    GroundTruth,
    SimSpec,
    bump_coefficients,
    coefficient_mse,
    gen_dataset,
    prediction_error,
    swap_coefficients,
    toeplitz_cov,
)
from .solver import (
    EigenUpdate,
    PathCell,
    PathResult,
    PenaltyGrid,
    SolverOptions,
    covariance_eigen,
    default_grid,
    fit,
    fit_from_stats,
    fit_path,
    fit_path_from_stats,
    kkt_residual,
    lambda1_max,
    update_covariance,
    update_direct_effects,
)
from .structure import (
    GeneticMap,
    StructureMatrix,
    chain_laplacian,
    genetic_precision,
    hamming_adjacency,
    hamming_adjacency_by_ell,
    hamming_laplacian,
    identity_structure,
    read_genetic_map,
    restrict,
    screen_predictors,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
