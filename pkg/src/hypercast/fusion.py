"""Scale fusion and the two forecast heads.

Fusion first mixes the temporal scales inside each spatial scale with a
learned simplex of weights, then maps every coarse scale's contribution
down to the base variables through the chained soft assignments.  The
fused vector per variable feeds either a recurrent decoder (short
horizons) or a feed-forward head (long horizons).
"""

from __future__ import annotations

import torch
from torch import nn

from .encoder import GraphGRUCell, ScaleFeatureSet
from .errors import ConfigError, ContractError
from .graphs import validate_stochastic


def fuse_scales(blocks: list[list[torch.Tensor]], omega: torch.Tensor,
                assignments: list[torch.Tensor]) -> torch.Tensor:
    """Weighted temporal mix per spatial scale, then pyramid descent.

    ``blocks[j][k]``: (..., N_j, F); ``omega``: (J, K) rows on the
    simplex; ``assignments``: S^1..S^{J-1}.  Scale j's mix is carried to
    the base rows by S^1 @ ... @ S^{j-1}.
    """
    n_spatial = omega.shape[0]
    if len(blocks) != n_spatial or any(len(row) != omega.shape[1] for row in blocks):
        raise ContractError(
            f"expected a complete {omega.shape[0]}x{omega.shape[1]} feature grid, "
            f"got rows of lengths {[len(row) for row in blocks]}")
    mixes = []
    for j in range(n_spatial):
        mix = sum(omega[j, k] * blocks[j][k] for k in range(omega.shape[1]))
        mixes.append(mix)
    fused = mixes[0]
    descent = None
    for j in range(1, n_spatial):
        descent = assignments[j - 1] if descent is None else descent @ assignments[j - 1]
        fused = fused + descent @ mixes[j]
    return fused


class ScaleFusion(nn.Module):
    """Owns the per-(spatial, temporal) mixing logits."""

    def __init__(self, n_spatial: int, n_temporal: int):
        super().__init__()
        self.mix_logits = nn.Parameter(torch.zeros(n_spatial, n_temporal))

    def weights(self) -> torch.Tensor:
        """(J, K) matrix with each row a simplex."""
        return torch.softmax(self.mix_logits, dim=-1)

    def forward(self, features: ScaleFeatureSet,
                assignments: list[torch.Tensor]) -> torch.Tensor:
        return fuse_scales(features.blocks, self.weights(), assignments)


class ShortTermDecoder(nn.Module):
    """Autoregressive graph-GRU decoder for horizons within the lookback.

    The fused features are projected to the hidden width and become the
    initial state; each step feeds the previous prediction (initially
    zero) back in, and the hidden state is projected to one value per
    node.
    """

    def __init__(self, in_dim: int, hidden_dim: int, graph_order: int = 1):
        super().__init__()
        self.init_proj = nn.Linear(in_dim, hidden_dim)
        self.cell = GraphGRUCell(1, hidden_dim, graph_order)
        self.out_proj = nn.Linear(hidden_dim, 1)

    def forward(self, fused: torch.Tensor, adj: torch.Tensor,
                horizon: int) -> torch.Tensor:
        if horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon}")
        validate_stochastic(adj, "decoder adjacency")
        h = self.init_proj(fused)                        # (..., N, hidden)
        step_in = fused.new_zeros(*fused.shape[:-1], 1)  # (..., N, 1)
        outputs = []
        for _ in range(horizon):
            h = self.cell(step_in, h, adj)
            step_in = self.out_proj(h)
            outputs.append(step_in)
        return torch.cat(outputs, dim=-1)                # (..., N, horizon)


class LongTermHead(nn.Module):
    """Two-layer feed-forward head emitting the whole horizon at once."""

    def __init__(self, in_dim: int, hidden_dim: int, horizon: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(in_dim, hidden_dim), nn.ReLU(),
                                 nn.Linear(hidden_dim, horizon))

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return self.net(fused)


def training_loss(pred: torch.Tensor, target: torch.Tensor,
                  pool_loss: torch.Tensor | float, weight: float,
                  reduction: str = "sum") -> torch.Tensor:
    """Absolute-error term plus the weighted pooling regulariser.

    ``sum`` reduction totals |error| over a sample's N x horizon entries
    (averaged over any leading batch axes); ``mean`` averages instead,
    which rescales the effective pooling weight.
    """
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"pooling-loss weight must lie in [0, 1], got {weight}")
    err = (pred - target).abs()
    if reduction == "sum":
        base = err.sum(dim=(-2, -1)).mean()
    elif reduction == "mean":
        base = err.mean()
    else:
        raise ConfigError(f"unknown loss reduction {reduction!r}")
    return base + weight * pool_loss
