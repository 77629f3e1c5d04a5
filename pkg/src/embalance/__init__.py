"""Embedding-space oversampling toolkit for imbalanced classification."""

from embalance.errors import ConfigError, DataError, EmbalanceError, NumericalError
from embalance.store import (
    ImbalanceProfile,
    LabeledEmbeddingSet,
    exponential_profile,
    gaussian_mixture,
    load,
    partition_by_class,
    save,
    subsample_to_profile,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EmbalanceError",
    "ImbalanceProfile",
    "LabeledEmbeddingSet",
    "NumericalError",
    "exponential_profile",
    "gaussian_mixture",
    "load",
    "partition_by_class",
    "save",
    "subsample_to_profile",
]

__version__ = "0.1.0"
