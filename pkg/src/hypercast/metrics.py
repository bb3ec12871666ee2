"""Forecast error metrics and the evaluation report.

All metrics are computed on denormalized (original-unit) values.  MAPE
floors the denominator at 1e-5 so near-zero truths do not blow up, and
is reported in percent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAPE_FLOOR = 1e-5


def mae(pred: np.ndarray, true: np.ndarray) -> float:
    return float(np.mean(np.abs(pred - true)))


def mse(pred: np.ndarray, true: np.ndarray) -> float:
    return float(np.mean((pred - true) ** 2))


def rmse(pred: np.ndarray, true: np.ndarray) -> float:
    return float(np.sqrt(mse(pred, true)))


def mape(pred: np.ndarray, true: np.ndarray) -> float:
    denom = np.maximum(np.abs(true), MAPE_FLOOR)
    return float(np.mean(np.abs(pred - true) / denom) * 100.0)


_METRICS = {"mae": mae, "mse": mse, "rmse": rmse, "mape": mape}


@dataclass
class MetricsReport:
    """Aggregate metrics plus a per-horizon-step breakdown.

    ``per_horizon[s]`` holds the metrics of forecast step s+1 only.
    """

    aggregate: dict[str, float]
    per_horizon: list[dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "per_horizon": {str(s + 1): m for s, m in enumerate(self.per_horizon)},
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def compute_metrics(pred: np.ndarray, true: np.ndarray) -> MetricsReport:
    """pred/true: (..., N, horizon) in original units."""
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs true {true.shape}")
    aggregate = {name: fn(pred, true) for name, fn in _METRICS.items()}
    per_horizon = []
    for s in range(pred.shape[-1]):
        p, t = pred[..., s], true[..., s]
        per_horizon.append({name: fn(p, t) for name, fn in _METRICS.items()})
    return MetricsReport(aggregate=aggregate, per_horizon=per_horizon)


def persistence_forecast(inputs: np.ndarray, horizon: int) -> np.ndarray:
    """Repeat the last observed value; the no-model baseline."""
    inputs = np.asarray(inputs)
    return np.repeat(inputs[..., -1:], horizon, axis=-1)
