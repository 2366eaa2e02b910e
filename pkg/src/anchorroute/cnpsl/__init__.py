"""Cross-nested path-size logit estimation core."""

from .kernel import IMPLEMENTATION, available_kernels, cnl_kernel
from .model import (
    FitOptions,
    FitResult,
    ModelSpec,
    Params,
    adjusted_rho_squared,
    choice_probabilities,
    cnl_log_probs,
    compare_variants,
    comparison_table,
    fit,
    log_likelihood,
    log_softmax,
    logsumexp_1d,
    loglik_and_grad,
    route_value,
    significance_stars,
    spec_for,
)
from .pack import PackedDataset, pack_dataset

__all__ = [
    "IMPLEMENTATION",
    "available_kernels",
    "cnl_kernel",
    "FitOptions",
    "FitResult",
    "ModelSpec",
    "Params",
    "adjusted_rho_squared",
    "choice_probabilities",
    "cnl_log_probs",
    "compare_variants",
    "comparison_table",
    "fit",
    "log_likelihood",
    "log_softmax",
    "logsumexp_1d",
    "loglik_and_grad",
    "route_value",
    "significance_stars",
    "spec_for",
    "PackedDataset",
    "pack_dataset",
]
