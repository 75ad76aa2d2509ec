"""Fuzzy-logic VAE primitives exposed from the C++ core."""

from ._ltnvae import (
    DomainError,
    GmmComponent,
    KmeansResult,
    LatentCode,
    NumericError,
    ReasonerModel,
    ShapeError,
    auroc,
    batch_normalize,
    exists,
    fit_gmm,
    forall,
    implies,
    klt,
    klu,
    kmeans,
    mutual_information,
    negate,
    project,
    render_sample,
    tconorm,
    tnorm,
)

__all__ = [
    "DomainError",
    "GmmComponent",
    "KmeansResult",
    "LatentCode",
    "NumericError",
    "ReasonerModel",
    "ShapeError",
    "auroc",
    "batch_normalize",
    "exists",
    "fit_gmm",
    "forall",
    "implies",
    "klt",
    "klu",
    "kmeans",
    "mutual_information",
    "negate",
    "project",
    "render_sample",
    "tconorm",
    "tnorm",
]

__version__ = "0.1.0"
