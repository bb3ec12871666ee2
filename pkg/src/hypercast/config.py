"""Model and training configuration.

``ModelConfig`` is the single source of truth for every knob in the
package: window geometry, pyramid shapes, hypergraph sizes, loss weights
and trainer settings.  Config files (JSON or YAML) mirror the dataclass
field names one-to-one, so a file like

.. code-block:: json

    {"input_len": 96, "horizon": 24, "pool_ratio": 20, "hidden_dim": 64}

overrides exactly those fields and nothing else.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

_HEADS = ("auto", "short", "long")
_REDUCTIONS = ("sum", "mean")
_DTYPES = ("float64", "float32")


@dataclass
class ModelConfig:
    # -- task geometry -------------------------------------------------
    input_len: int = 96          # lookback window length T
    horizon: int = 24            # forecast length

    # -- spatial pyramid -----------------------------------------------
    pool_ratio: int = 20         # node-count shrink factor between spatial scales
    spatial_scales: int = 2      # number of spatial scales (1 = no pooling)

    # -- temporal pyramid ----------------------------------------------
    temporal_scales: int = 3     # number of temporal resolutions (halved each step)
    patch_len: int = 16          # non-overlapping patch width fed to the recurrent encoder

    # -- widths ----------------------------------------------------------
    hidden_dim: int = 64         # recurrent/patch feature width D
    mem_items: int = 20          # rows in each learnable memory bank
    mem_dim: int = 32            # memory item width d

    # -- hypergraph ------------------------------------------------------
    n_hyperedges: int = 40       # hyperedge count
    nodes_per_edge: int = 20     # retained entries per hyperedge column after sparsification
    hyper_layers: int = 1        # propagation rounds (node->edge->edge->node)
    topk_neighbors: int = 0      # >0: keep only k strongest hyperedge-graph neighbours

    # -- loss / optimisation ----------------------------------------------
    pool_loss_weight: float = 1e-2   # weight on the graph-pooling regulariser, in [0, 1]
    loss_reduction: str = "sum"      # "sum": entry-sum per sample; "mean": entry-mean
    lr: float = 1e-3
    max_epochs: int = 150
    patience: int = 15
    batch_size: int = 32
    grad_clip: float = 5.0           # global-norm clip, 0 disables
    seed: int = 0

    # -- heads -----------------------------------------------------------
    head: str = "auto"           # "short" (recurrent decoder), "long" (MLP), or "auto"
    graph_order: int = 1         # diffusion steps inside graph-gated recurrent cells

    # -- ablation switches -------------------------------------------------
    no_hypergraph: bool = False  # bypass hypergraph propagation entirely
    no_pool_loss: bool = False   # drop the graph-pooling regulariser from training
    plain_graph: bool = False    # learn adjacency from free embeddings, not memory banks

    # -- execution ---------------------------------------------------------
    serial: bool = True          # single-threaded math for reproducible loss curves
    dtype: str = "float64"
    strict_windows: bool = True  # error (vs. warn) when a split yields no windows

    def __post_init__(self) -> None:
        self.validate()

    # -- derived geometry -----------------------------------------------

    def node_counts(self, n_vars: int) -> list[int]:
        """Node count per spatial scale: N, N//q, N//q**2, ..."""
        counts = [n_vars]
        for _ in range(self.spatial_scales - 1):
            counts.append(counts[-1] // self.pool_ratio)
        return counts

    def scale_lengths(self) -> list[int]:
        """Sequence length per temporal scale: T, T/2, T/4, ..."""
        return [self.input_len // 2**k for k in range(self.temporal_scales)]

    def patch_counts(self) -> list[int]:
        """Patches per temporal scale after dropping remainders."""
        return [t // self.patch_len for t in self.scale_lengths()]

    def n_flat_positions(self, n_vars: int) -> int:
        """Rows of the flattened (scale, node) feature stack."""
        return self.temporal_scales * sum(self.node_counts(n_vars))

    def feature_dim(self) -> int:
        """Width of encoder output features (hidden + memory readout)."""
        return self.hidden_dim + self.mem_dim

    def resolve_head(self) -> str:
        if self.head != "auto":
            return self.head
        return "short" if self.horizon <= self.input_len else "long"

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        for name in ("input_len", "horizon", "pool_ratio", "spatial_scales",
                     "temporal_scales", "patch_len", "hidden_dim", "mem_items",
                     "mem_dim", "n_hyperedges", "nodes_per_edge", "hyper_layers",
                     "max_epochs", "patience", "batch_size", "graph_order"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.topk_neighbors < 0:
            raise ConfigError(f"topk_neighbors must be >= 0, got {self.topk_neighbors}")
        if not 0.0 <= self.pool_loss_weight <= 1.0:
            raise ConfigError(
                f"pool_loss_weight must lie in [0, 1], got {self.pool_loss_weight}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.grad_clip < 0:
            raise ConfigError(f"grad_clip must be >= 0, got {self.grad_clip}")
        if self.head not in _HEADS:
            raise ConfigError(f"head must be one of {_HEADS}, got {self.head!r}")
        if self.loss_reduction not in _REDUCTIONS:
            raise ConfigError(
                f"loss_reduction must be one of {_REDUCTIONS}, got {self.loss_reduction!r}")
        if self.dtype not in _DTYPES:
            raise ConfigError(f"dtype must be one of {_DTYPES}, got {self.dtype!r}")

        halvings = 2 ** (self.temporal_scales - 1)
        if self.input_len % halvings:
            raise ConfigError(
                f"input_len={self.input_len} is not divisible by "
                f"2**(temporal_scales-1)={halvings}; the coarsest scale would be ragged")
        shortest = self.input_len // halvings
        if shortest // self.patch_len < 1:
            raise ConfigError(
                f"patch_len={self.patch_len} exceeds the coarsest scale length "
                f"{shortest} (input_len={self.input_len}, "
                f"temporal_scales={self.temporal_scales}): zero patches")
        for k, t in enumerate(self.scale_lengths(), start=1):
            dropped = t % self.patch_len
            if dropped > self.patch_len / 2:
                warnings.warn(
                    f"temporal scale {k}: patchifying length {t} with "
                    f"patch_len={self.patch_len} drops {dropped} steps "
                    f"(more than half a patch)", stacklevel=2)

    def validate_for(self, n_vars: int) -> None:
        """Checks that need the dataset's variable count."""
        self.validate()
        counts = self.node_counts(n_vars)
        if counts[-1] < 1:
            raise ConfigError(
                f"spatial pyramid collapses to zero nodes: n_vars={n_vars}, "
                f"pool_ratio={self.pool_ratio}, spatial_scales={self.spatial_scales} "
                f"gives node counts {counts}")

    # -- (de)serialisation --------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text)
        elif path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            raise ConfigError(
                f"unrecognised config extension {path.suffix!r} (use .json/.yaml/.yml)")
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} does not hold a mapping")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        elif path.suffix in (".yaml", ".yml"):
            path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))
        else:
            raise ConfigError(f"unrecognised config extension {path.suffix!r}")

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# Published benchmark settings, named by dataset.  Values outside the
# config (variable counts, series lengths) live in the accompanying
# ``shape`` entries for reference.
_PRESET_TABLE = {
    #            T, tau, q, J, r, K, K', lambda, batch
    "metr-la":     (12, 12, 10, 2, 2, 3, 20, 1e-1, 32),
    "pems-bay":    (12, 12, 20, 2, 2, 3, 20, 1e-1, 32),
    "china-aqi":   (96, 24, 20, 2, 16, 3, 20, 1e-2, 32),
    "electricity": (96, 96, 20, 2, 8, 3, 10, 1e-2, 32),
    "solar":       (96, 96, 20, 2, 16, 3, 10, 1e-2, 32),
    "temperature": (96, 192, 30, 3, 16, 3, 20, 1e-2, 8),
}

PRESET_SHAPES = {
    "metr-la": (207, 34272),
    "pems-bay": (325, 52116),
    "china-aqi": (209, 20400),
    "electricity": (321, 26304),
    "solar": (137, 52560),
    "temperature": (3850, 17544),
}


def preset(name: str, horizon: int | None = None, **overrides) -> ModelConfig:
    """Benchmark configuration for a named dataset.

    ``horizon`` overrides the default forecast length (the long-range
    datasets are evaluated at several horizons).
    """
    key = name.lower()
    if key not in _PRESET_TABLE:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESET_TABLE))}")
    t, tau, q, j, r, k, k_prime, lam, batch = _PRESET_TABLE[key]
    cfg = dict(
        input_len=t,
        horizon=tau if horizon is None else horizon,
        pool_ratio=q,
        spatial_scales=j,
        patch_len=r,
        temporal_scales=k,
        nodes_per_edge=k_prime,
        pool_loss_weight=lam,
        batch_size=batch,
    )
    cfg.update(overrides)
    return ModelConfig(**cfg)
