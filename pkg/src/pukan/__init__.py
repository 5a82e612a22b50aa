"""Gaussian and Matern Kolmogorov-Arnold networks with partition-of-unity edge bases."""

__version__ = "0.1.0"

from .basis import BasisSpec, features, pu_features, raw_features
from .model import Model, feature_matrix, first_layer_kernel_matrix, model_forward
from .training import TrainConfig, TrainTrace, train

__all__ = [
    "BasisSpec", "Model", "TrainConfig", "TrainTrace",
    "features", "pu_features", "raw_features",
    "feature_matrix", "first_layer_kernel_matrix", "model_forward", "train",
]
