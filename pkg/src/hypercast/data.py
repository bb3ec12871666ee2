"""Dataset ingestion, splitting, normalisation and windowing.

The on-disk formats are deliberately plain:

* delimited text — header row holds variable names, each subsequent row
  is one timestep (optionally with an integer timestamp column);
* binary tensor — raw little-endian array of shape ``(n_vars, length)``
  next to a JSON sidecar ``{n_vars, length, dtype, variable_names}``.

All arrays are float64 internally; variables sit on the first axis.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, LoadError, NormalizationError

_TEXT_SUFFIXES = (".csv", ".tsv", ".txt")
_STD_FLOOR = 1e-12


@dataclass
class NormStats:
    """Per-variable z-score statistics (population std, train range only)."""

    mean: np.ndarray  # (N,)
    std: np.ndarray   # (N,)

    def _aligned(self, ndim: int, axis: int) -> tuple[np.ndarray, np.ndarray]:
        shape = [1] * ndim
        shape[axis] = self.mean.shape[0]
        return self.mean.reshape(shape), self.std.reshape(shape)

    def apply(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        mean, std = self._aligned(values.ndim, axis)
        return (values - mean) / std

    def invert(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        mean, std = self._aligned(values.ndim, axis)
        return values * std + mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(mean=np.asarray(data["mean"], dtype=np.float64),
                   std=np.asarray(data["std"], dtype=np.float64))


@dataclass
class TimeSeriesDataset:
    values: np.ndarray                 # (N, L)
    timestamps: np.ndarray             # (L,) strictly increasing integers
    variable_names: list[str]
    norm_stats: NormStats | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.values.ndim != 2:
            raise LoadError(f"values must be 2-D (n_vars, length), got {self.values.shape}")
        n, length = self.values.shape
        if n < 1 or length < 1:
            raise LoadError(f"empty dataset: shape {self.values.shape}")
        if len(self.variable_names) != n:
            raise LoadError(
                f"{len(self.variable_names)} variable names for {n} variables")
        if self.timestamps.shape != (length,):
            raise LoadError(
                f"timestamps shape {self.timestamps.shape} does not match length {length}")
        steps = np.diff(self.timestamps)
        if (steps <= 0).any():
            bad = int(np.argmax(steps <= 0)) + 1
            raise LoadError(f"timestamps not strictly increasing at row {bad}")
        if not np.isfinite(self.values).all():
            n_bad = int((~np.isfinite(self.values)).sum())
            raise LoadError(f"dataset holds {n_bad} non-finite values after ingestion")

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class Split:
    """Contiguous chronological index ranges, covering [0, length) exactly."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    def as_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


def chronological_split(length: int,
                        ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> Split:
    """Train/val/test ranges in time order; sizes floor(r*L) with the
    remainder absorbed by the test block."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios} (sum {sum(ratios)})")
    n_train = int(length * ratios[0])
    n_val = int(length * ratios[1])
    return Split(train=(0, n_train),
                 val=(n_train, n_train + n_val),
                 test=(n_train + n_val, length))


def zscore_normalize(dataset: TimeSeriesDataset,
                     train_span: tuple[int, int]) -> tuple[TimeSeriesDataset, NormStats]:
    """Z-score the whole series using mean/std from the train range only.

    Uses the population standard deviation.  A variable that is constant
    on the train range cannot be scaled and raises ``NormalizationError``.
    """
    start, stop = train_span
    train = dataset.values[:, start:stop]
    if train.shape[1] < 2:
        raise NormalizationError(f"train span {train_span} is too short to normalise on")
    mean = train.mean(axis=1)
    std = train.std(axis=1)  # ddof=0
    flat = std < _STD_FLOOR
    if flat.any():
        idx = int(np.argmax(flat))
        raise NormalizationError(
            f"variable {dataset.variable_names[idx]!r} (index {idx}) is constant "
            f"on the train range; z-score is undefined")
    stats = NormStats(mean=mean, std=std)
    normalized = TimeSeriesDataset(
        values=stats.apply(dataset.values),
        timestamps=dataset.timestamps,
        variable_names=list(dataset.variable_names),
        norm_stats=stats,
        meta=dict(dataset.meta),
    )
    return normalized, stats


@dataclass
class WindowSample:
    input: np.ndarray    # (N, T)
    target: np.ndarray   # (N, horizon)
    origin: int          # global index of the window's first input step


def count_windows(span_length: int, input_len: int, horizon: int) -> int:
    return max(span_length - input_len - horizon + 1, 0)


def make_windows(values: np.ndarray, input_len: int, horizon: int,
                 span: tuple[int, int] | None = None,
                 strict: bool = True) -> list[WindowSample]:
    """Sliding windows fully contained in ``span`` (stride 1).

    Input and target are contiguous, non-overlapping slices; each window
    is ``input_len + horizon`` steps wide.
    """
    values = np.asarray(values)
    start, stop = span if span is not None else (0, values.shape[1])
    n = count_windows(stop - start, input_len, horizon)
    if n == 0:
        msg = (f"span of length {stop - start} is too short for one window of "
               f"input_len={input_len} + horizon={horizon}")
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=2)
        return []
    windows = []
    for origin in range(start, start + n):
        windows.append(WindowSample(
            input=values[:, origin:origin + input_len],
            target=values[:, origin + input_len:origin + input_len + horizon],
            origin=origin,
        ))
    return windows


def stack_windows(windows: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """(W, N, T) inputs and (W, N, horizon) targets for batching."""
    inputs = np.stack([w.input for w in windows])
    targets = np.stack([w.target for w in windows])
    return inputs, targets


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def load_dataset(path: str | Path, timestamp_column: str | None = None) -> TimeSeriesDataset:
    """Read a series from delimited text or a binary container."""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"data file not found: {path}")
    if path.suffix in _TEXT_SUFFIXES:
        return _load_text(path, timestamp_column)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        return _load_binary(path, sidecar)
    raise LoadError(
        f"cannot ingest {path}: not delimited text ({'/'.join(_TEXT_SUFFIXES)}) "
        f"and no JSON sidecar {sidecar.name} found")


def _load_text(path: Path, timestamp_column: str | None) -> TimeSeriesDataset:
    sep = "\t" if path.suffix == ".tsv" else ","
    df = pd.read_csv(path, sep=sep, float_precision="round_trip")
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise LoadError(f"{path} holds no data rows")

    if timestamp_column is not None:
        if timestamp_column not in df.columns:
            raise LoadError(f"timestamp column {timestamp_column!r} not in {path}")
        ts_raw = df[timestamp_column]
        if ts_raw.isna().any():
            row = int(ts_raw.isna().to_numpy().argmax())
            raise LoadError(f"missing timestamp at row {row}")
        timestamps = ts_raw.to_numpy(dtype=np.int64)
        df = df.drop(columns=[timestamp_column])
    else:
        timestamps = np.arange(df.shape[0], dtype=np.int64)

    names = [str(c) for c in df.columns]
    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise LoadError(
            f"missing or non-numeric value at row {int(row)}, column {names[int(col)]!r}")
    values = numeric.to_numpy(dtype=np.float64).T  # (N, L)
    return TimeSeriesDataset(values=values, timestamps=timestamps, variable_names=names)


def _load_binary(path: Path, sidecar: Path) -> TimeSeriesDataset:
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(f"bad JSON sidecar {sidecar}: {exc}") from exc
    missing = [k for k in ("n_vars", "length", "dtype", "variable_names") if k not in meta]
    if missing:
        raise LoadError(f"sidecar {sidecar} missing keys: {', '.join(missing)}")
    n, length = int(meta["n_vars"]), int(meta["length"])
    raw = np.fromfile(path, dtype=np.dtype(meta["dtype"]))
    if raw.size != n * length:
        raise LoadError(
            f"{path} holds {raw.size} values, sidecar promises {n}x{length}")
    values = raw.reshape(n, length).astype(np.float64)
    timestamps = np.asarray(meta.get("timestamps", np.arange(length)), dtype=np.int64)
    return TimeSeriesDataset(values=values, timestamps=timestamps,
                             variable_names=[str(v) for v in meta["variable_names"]],
                             meta={k: v for k, v in meta.items()
                                   if k not in ("n_vars", "length", "dtype",
                                                "variable_names", "timestamps")})


def save_csv(dataset: TimeSeriesDataset, path: str | Path,
             include_timestamps: bool = False) -> None:
    path = Path(path)
    data = {}
    if include_timestamps:
        data["timestamp"] = dataset.timestamps
    for i, name in enumerate(dataset.variable_names):
        data[name] = dataset.values[i]
    pd.DataFrame(data).to_csv(path, index=False)


def save_binary(dataset: TimeSeriesDataset, path: str | Path) -> None:
    path = Path(path)
    arr = np.ascontiguousarray(dataset.values, dtype="<f8")
    path.write_bytes(arr.tobytes())
    sidecar = {
        "n_vars": dataset.n_vars,
        "length": dataset.length,
        "dtype": "<f8",
        "variable_names": dataset.variable_names,
        "timestamps": dataset.timestamps.tolist(),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


# ---------------------------------------------------------------------------
# synthetic benchmark data
# ---------------------------------------------------------------------------

def generate_synthetic(n_groups: int = 3, vars_per_group: int = 4, length: int = 512,
                       seed: int = 0, noise_amp: float = 0.1) -> TimeSeriesDataset:
    """Grouped sinusoid mixtures with i.i.d. Gaussian noise.

    Each group shares one latent signal (a slow sinusoid with period
    ``length/4`` plus a fast one with period ``length/32``); every
    variable is that latent scaled by a per-variable factor in
    [0.5, 1.5] plus noise.  Slow phases are spaced across groups (with
    seeded jitter) so different groups stay decorrelated.  Fully
    deterministic for a given seed.
    """
    if n_groups < 1 or vars_per_group < 1 or length < 2:
        raise ConfigError(
            f"bad synthetic shape: n_groups={n_groups}, "
            f"vars_per_group={vars_per_group}, length={length}")
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    values = np.empty((n_groups * vars_per_group, length), dtype=np.float64)
    names, labels = [], []
    for g in range(n_groups):
        phase_slow = 2 * np.pi * g / n_groups + rng.uniform(0, np.pi / n_groups)
        phase_fast = rng.uniform(0, 2 * np.pi)
        amp_slow = rng.uniform(0.8, 1.2)
        amp_fast = rng.uniform(0.4, 0.6)
        latent = (amp_slow * np.sin(2 * np.pi * 4 * t / length + phase_slow)
                  + amp_fast * np.sin(2 * np.pi * 32 * t / length + phase_fast))
        for v in range(vars_per_group):
            idx = g * vars_per_group + v
            scale = rng.uniform(0.5, 1.5)
            noise = noise_amp * rng.standard_normal(length)
            values[idx] = scale * latent + noise
            names.append(f"g{g}_v{v}")
            labels.append(g)
    return TimeSeriesDataset(
        values=values,
        timestamps=t.astype(np.int64),
        variable_names=names,
        meta={"group_labels": labels, "n_groups": n_groups,
              "noise_amp": noise_amp, "seed": seed},
    )
