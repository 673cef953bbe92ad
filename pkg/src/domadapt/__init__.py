"""Feature- and image-level domain adaptation with evaluation and plotting."""
from ._accel import backend_name
from .core import (
    METHODS,
    AdaptationConfig,
    AdaptationOutput,
    FeatureDataset,
    KernelSpec,
    RandomStream,
    pooled_standardize,
    validate_dataset,
)
from .adapt import adapt, default_config

__version__ = "0.1.0"
