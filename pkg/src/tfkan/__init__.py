"""Dual-branch time/frequency KAN forecaster for multivariate time series.

The library couples a small reverse-mode autodiff engine with KAN layers
built on uniform B-spline grids, applies them both directly to lookback
windows and to their one-sided spectra, and ships the training loop,
dataset tooling, and CLI needed to run forecasting, toy, ablation, and
sensitivity studies end to end.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .autodiff import Node, ShapeError, backward
from .kan import KanLayer, KanStack, KnotGrid, TwoLayerMlp, param_count
from .model import ModelConfig, TfkanModel, VariantFlags
from .training import Adam, MinMaxScaler, TrainSettings, train

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "Node",
    "ShapeError",
    "backward",
    "KnotGrid",
    "KanLayer",
    "KanStack",
    "TwoLayerMlp",
    "param_count",
    "ModelConfig",
    "VariantFlags",
    "TfkanModel",
    "MinMaxScaler",
    "Adam",
    "TrainSettings",
    "train",
    "__version__",
]
