"""Point-cloud shape completion with a latent-space GAN steered by a
continuous-control agent, plus a discriminator-switched autoencoder fallback.
"""

__version__ = "0.1.0"

from .geometry import (
    chamfer_distance,
    chamfer_normalized,
    corrupt_cloud,
    jitter_cloud,
    load_xyz,
    normalize_cloud,
    save_xyz,
)
from .shapes import CATEGORIES, make_dataset, sample_shape

__all__ = [
    "CATEGORIES",
    "chamfer_distance",
    "chamfer_normalized",
    "corrupt_cloud",
    "jitter_cloud",
    "load_xyz",
    "make_dataset",
    "normalize_cloud",
    "sample_shape",
    "save_xyz",
    "__version__",
]
