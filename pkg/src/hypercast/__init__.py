"""Multivariate time-series forecasting with learned graph pyramids and
sparse hypergraph propagation.

The model learns its own structure from data at several resolutions: a
spatial pyramid groups correlated variables into progressively coarser
node sets, a temporal pyramid re-encodes each group at halved sampling
rates, and a sparse learned hypergraph exchanges information across all
(spatial, temporal) scales before fusion back to per-variable forecasts.
"""

from .checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint
from .config import ModelConfig, preset
from .data import (NormStats, Split, TimeSeriesDataset, chronological_split,
                   generate_synthetic, load_dataset, make_windows,
                   stack_windows, zscore_normalize)
from .dtw import compute_dtw_adjacency, dtw_distance, dtw_distance_matrix
from .errors import (ConfigError, ContractError, DivergenceError, LoadError,
                     NormalizationError)
from .export import export_structures, read_matrix, write_matrix
from .metrics import MetricsReport, compute_metrics, persistence_forecast
from .model import Forecaster
from .training import (EarlyStopper, TrainingResult, evaluate, predict,
                       train)

__version__ = "0.1.0"

__all__ = [
    "CheckpointBundle", "ConfigError", "ContractError", "DivergenceError",
    "EarlyStopper", "Forecaster", "LoadError", "MetricsReport", "ModelConfig",
    "NormStats", "NormalizationError", "Split", "TimeSeriesDataset",
    "TrainingResult", "chronological_split", "compute_dtw_adjacency",
    "compute_metrics", "dtw_distance", "dtw_distance_matrix",
    "evaluate", "export_structures", "generate_synthetic", "load_checkpoint",
    "load_dataset", "make_windows", "persistence_forecast", "predict",
    "preset", "read_matrix", "save_checkpoint", "stack_windows", "train",
    "write_matrix", "zscore_normalize",
]
