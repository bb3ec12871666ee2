"""Training, evaluation and prediction.

The trainer is deliberately plain: Adam, global-norm gradient clipping,
strict-improvement early stopping on the validation absolute-error
loss, best-weights restore.  With ``serial`` execution (the default)
a fixed seed reproduces loss curves exactly on the same machine.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .config import ModelConfig
from .data import (NormStats, Split, TimeSeriesDataset, chronological_split,
                   make_windows, stack_windows, zscore_normalize)
from .dtw import compute_dtw_adjacency
from .errors import ContractError, DivergenceError
from .metrics import MetricsReport, compute_metrics
from .model import Forecaster

logger = logging.getLogger(__name__)


def set_global_seed(seed: int) -> None:
    np.random.seed(seed)
    torch.manual_seed(seed)


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = float("inf")
        self.bad_epochs = 0

    def update(self, value: float) -> bool:
        """Record one epoch's validation loss; True if it improved the best."""
        if value < self.best:
            self.best = value
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_mae: float          # normalized scale
    pool_loss: float
    val_loss: float
    improved: bool


@dataclass
class TrainingResult:
    model: Forecaster
    config: ModelConfig
    stats: NormStats
    split: Split
    history: dict[str, list[float]] = field(default_factory=dict)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    epochs_run: int = 0
    stopped_early: bool = False
    variable_names: list[str] = field(default_factory=list)


def _first_nonfinite(model: Forecaster, extras: list[tuple[str, torch.Tensor]]) -> str:
    for name, tensor in extras:
        if tensor is not None and not torch.isfinite(tensor).all():
            return name
    for name, p in model.named_parameters():
        if not torch.isfinite(p).all():
            return f"parameter {name}"
        if p.grad is not None and not torch.isfinite(p.grad).all():
            return f"gradient of {name}"
    return "training loss"


def train(cfg: ModelConfig, dataset: TimeSeriesDataset,
          cache_dir: str | Path | None = None,
          epoch_callback: Callable[[EpochStats], bool | None] | None = None,
          split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> TrainingResult:
    """Full training run on one dataset; returns the best-weights model.

    ``epoch_callback`` receives per-epoch stats and may return a truthy
    value to stop training early (e.g. a target-loss hook).
    """
    cfg.validate_for(dataset.n_vars)
    if cfg.serial:
        torch.set_num_threads(1)
    set_global_seed(cfg.seed)
    shuffle_rng = np.random.default_rng(cfg.seed)

    split = chronological_split(dataset.length, split_ratios)
    normalized, stats = zscore_normalize(dataset, split.train)
    train_slice = normalized.values[:, split.train[0]:split.train[1]]
    affinity = compute_dtw_adjacency(train_slice, cache_dir)

    model = Forecaster(dataset.n_vars, cfg)
    model.set_dtw_affinity(affinity)
    dtype = model.torch_dtype

    train_windows = make_windows(normalized.values, cfg.input_len, cfg.horizon,
                                 span=split.train, strict=cfg.strict_windows)
    val_windows = make_windows(normalized.values, cfg.input_len, cfg.horizon,
                               span=split.val, strict=False)
    x_train, y_train = (torch.as_tensor(a, dtype=dtype)
                        for a in stack_windows(train_windows))
    if val_windows:
        x_val, y_val = (torch.as_tensor(a, dtype=dtype)
                        for a in stack_windows(val_windows))
    else:
        logger.warning("validation span yields no windows; "
                       "early stopping will track the training loss")
        x_val = y_val = None

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    stopper = EarlyStopper(cfg.patience)
    history: dict[str, list[float]] = {
        "train_loss": [], "train_mae": [], "pool_loss": [], "val_loss": []}
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0
    n_train = x_train.shape[0]
    entries_per_window = dataset.n_vars * cfg.horizon

    result = TrainingResult(model=model, config=cfg, stats=stats, split=split,
                            history=history,
                            variable_names=list(dataset.variable_names))

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        perm = shuffle_rng.permutation(n_train)
        loss_sum = abs_err_sum = pool_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            x, y = x_train[idx], y_train[idx]
            optimizer.zero_grad()
            try:
                parts = model.loss(x, y)
            except DivergenceError as exc:
                raise DivergenceError(f"{exc} at epoch {epoch}") from None
            if not torch.isfinite(parts.total):
                where = _first_nonfinite(model, [
                    ("predictions", parts.predictions),
                    ("absolute-error loss", parts.base),
                    ("pooling loss", parts.pool)])
                raise DivergenceError(
                    f"non-finite values in {where} at epoch {epoch}")
            parts.total.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            with torch.no_grad():
                loss_sum += parts.total.item() * len(idx)
                pool_sum += parts.pool.item() * len(idx)
                abs_err_sum += (parts.predictions - y).abs().sum().item()
        train_loss = loss_sum / n_train
        train_mae = abs_err_sum / (n_train * entries_per_window)
        pool_loss = pool_sum / n_train

        val_loss = (_validation_loss(model, x_val, y_val, cfg)
                    if x_val is not None else train_loss)
        improved = stopper.update(val_loss)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch

        history["train_loss"].append(train_loss)
        history["train_mae"].append(train_mae)
        history["pool_loss"].append(pool_loss)
        history["val_loss"].append(val_loss)
        result.epochs_run = epoch

        stats_row = EpochStats(epoch=epoch, train_loss=train_loss,
                               train_mae=train_mae, pool_loss=pool_loss,
                               val_loss=val_loss, improved=improved)
        logger.info("epoch %d: train %.6f mae %.6f val %.6f%s", epoch,
                    train_loss, train_mae, val_loss, "" if improved else " (no improvement)")
        if epoch_callback is not None and epoch_callback(stats_row):
            break
        if stopper.should_stop:
            result.stopped_early = True
            break

    model.load_state_dict(best_state)
    result.best_epoch = best_epoch
    result.best_val_loss = stopper.best
    return result


def _validation_loss(model: Forecaster, x_val: torch.Tensor,
                     y_val: torch.Tensor, cfg: ModelConfig) -> float:
    """Absolute-error loss only (no pooling term), averaged over windows."""
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, x_val.shape[0], cfg.batch_size):
            x = x_val[start:start + cfg.batch_size]
            y = y_val[start:start + cfg.batch_size]
            pred = model(x)
            if cfg.loss_reduction == "sum":
                total += float((pred - y).abs().sum(dim=(-2, -1)).sum())
            else:
                total += float((pred - y).abs().mean(dim=(-2, -1)).sum())
    return total / x_val.shape[0]


def forecast_windows(model: Forecaster, inputs: np.ndarray,
                     batch_size: int = 32) -> np.ndarray:
    """Batched forward over stacked windows (W, N, T) -> (W, N, horizon)."""
    model.eval()
    dtype = model.torch_dtype
    outputs = []
    with torch.no_grad():
        for start in range(0, inputs.shape[0], batch_size):
            x = torch.as_tensor(inputs[start:start + batch_size], dtype=dtype)
            outputs.append(model(x).numpy())
    return np.concatenate(outputs, axis=0)


def evaluate(model: Forecaster, dataset: TimeSeriesDataset, stats: NormStats,
             span: tuple[int, int], batch_size: int = 32) -> MetricsReport:
    """Metrics over all windows inside ``span``, in original units.

    ``dataset`` holds raw (unnormalized) values; inputs are normalized
    with the training stats and predictions are mapped back.
    """
    norm_values = stats.apply(dataset.values)
    norm_windows = make_windows(norm_values, model.cfg.input_len,
                                model.cfg.horizon, span=span)
    raw_windows = make_windows(dataset.values, model.cfg.input_len,
                               model.cfg.horizon, span=span)
    inputs, _ = stack_windows(norm_windows)
    _, true = stack_windows(raw_windows)
    preds_norm = forecast_windows(model, inputs, batch_size)
    preds = stats.invert(preds_norm, axis=-2)
    return compute_metrics(preds, true)


def predict(model: Forecaster, stats: NormStats, window: np.ndarray) -> np.ndarray:
    """One lookback window (N, T) in original units -> (N, horizon) forecast."""
    window = np.asarray(window, dtype=np.float64)
    expected = (model.n_vars, model.cfg.input_len)
    if window.shape != expected:
        raise ContractError(f"expected window shape {expected}, got {window.shape}")
    if not np.isfinite(window).all():
        raise ContractError("input window holds non-finite values")
    x = torch.as_tensor(stats.apply(window)[None], dtype=model.torch_dtype)
    model.eval()
    with torch.no_grad():
        pred_norm = model(x).numpy()[0]
    return stats.invert(pred_norm, axis=0)
