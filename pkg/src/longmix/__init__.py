"""Clustering longitudinal data with a latent Gaussian mixture.

Mixtures of common factor analyzers whose latent covariances carry a
modified Cholesky decomposition, fitted by EM and selected by BIC.
"""

from .core import (
    CholeskyPair,
    Dataset,
    LatentMoments,
    ModelConstraint,
    ModelParams,
    cholesky_from_omega,
    component_covariance,
    count_free_parameters,
    count_gmm_parameters,
    log_component_density,
    omega_from_cholesky,
)
from .em import (
    FitConfig,
    FitResult,
    Responsibilities,
    apply_constraint,
    beta,
    e_step,
    fit,
    latent_moments,
    scatter,
    update_d,
    update_lambda,
    update_pi,
    update_psi,
    update_t,
    update_xi,
)
from .exceptions import (
    AllStartsFailedError,
    CollapsedComponentError,
    DataError,
    DegenerateComponentError,
    EmptyReportError,
    FitFailedError,
    InvalidRequestError,
    LongmixError,
)
from .initialization import InitSpec, kmeans_init, multi_start_fit, random_init
from .metrics import CrossTab, adjusted_rand_index, bic, cross_tab, rand_index
from .selection import SelectionEntry, SelectionReport, grid_search
from .simulation import (
    SimSpec,
    sample_dataset,
    sample_latent_ar,
    simulate,
    simulation1_spec,
    simulation2_spec,
)

__all__ = [
    "AllStartsFailedError",
    "CholeskyPair",
    "CollapsedComponentError",
    "CrossTab",
    "DataError",
    "Dataset",
    "DegenerateComponentError",
    "EmptyReportError",
    "FitConfig",
    "FitFailedError",
    "FitResult",
    "InitSpec",
    "InvalidRequestError",
    "LatentMoments",
    "LongmixError",
    "ModelConstraint",
    "ModelParams",
    "Responsibilities",
    "SelectionEntry",
    "SelectionReport",
    "SimSpec",
    "adjusted_rand_index",
    "apply_constraint",
    "beta",
    "bic",
    "cholesky_from_omega",
    "component_covariance",
    "count_free_parameters",
    "count_gmm_parameters",
    "cross_tab",
    "e_step",
    "fit",
    "grid_search",
    "kmeans_init",
    "latent_moments",
    "log_component_density",
    "multi_start_fit",
    "omega_from_cholesky",
    "rand_index",
    "random_init",
    "sample_dataset",
    "sample_latent_ar",
    "scatter",
    "simulate",
    "simulation1_spec",
    "simulation2_spec",
    "update_d",
    "update_lambda",
    "update_pi",
    "update_psi",
    "update_t",
    "update_xi",
]

__version__ = "0.1.0"
