from .gmm import DiagonalGmm, em_fit, fit_tag_models, gmm_tag_score
from .svm import (
    LinearSvmModel,
    MilBag,
    chunk_svm_features,
    hinge_objective,
    linear_svm_fit,
    misvm_train,
)

__all__ = [
    "DiagonalGmm",
    "em_fit",
    "fit_tag_models",
    "gmm_tag_score",
    "LinearSvmModel",
    "MilBag",
    "chunk_svm_features",
    "hinge_objective",
    "linear_svm_fit",
    "misvm_train",
]
