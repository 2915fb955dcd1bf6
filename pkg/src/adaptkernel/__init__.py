"""adaptkernel - Attention-weighted graph kernels for graph classification."""

try:
    from ._version import __version__
except ImportError:  # source tree without a build
    __version__ = "0.0.0+unknown"

from .config import ExperimentConfig, resolve_config
from .exceptions import (
    AdaptKernelError,
    CheckpointError,
    ConfigError,
    ContractViolation,
    DatasetFormatError,
    DatasetLoadError,
    TrainingError,
)
from .experiment import ExperimentReport, run_experiment, stratified_kfold, sweep_wl_iterations
from .features import FeatureMatrix, KernelKind, build_feature_matrix
from .graphs import Graph, GraphDataset, dataset_summary, load_tudataset, write_tudataset
from .kernels import KernelMatrix, embedding_row, gram, kernel_value_by_counting
from .model import composite_gradient_check, train_model
from .reports import export_attention_heatmap

__all__ = [
    "__version__",
    "AdaptKernelError",
    "CheckpointError",
    "ConfigError",
    "ContractViolation",
    "DatasetFormatError",
    "DatasetLoadError",
    "ExperimentConfig",
    "ExperimentReport",
    "FeatureMatrix",
    "Graph",
    "GraphDataset",
    "KernelKind",
    "KernelMatrix",
    "TrainingError",
    "build_feature_matrix",
    "composite_gradient_check",
    "dataset_summary",
    "embedding_row",
    "export_attention_heatmap",
    "gram",
    "kernel_value_by_counting",
    "load_tudataset",
    "resolve_config",
    "run_experiment",
    "stratified_kfold",
    "sweep_wl_iterations",
    "train_model",
    "write_tudataset",
]
