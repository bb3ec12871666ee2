"""End-to-end forecaster assembling the pieces.

Dataflow per batch of lookback windows (B, N, T):

1. spatial pyramid supplies adjacencies, soft assignments and memory
   banks for every spatial scale;
2. the pyramid encoder produces one feature block per (spatial,
   temporal) scale;
3. the hypergraph stack refines the flattened blocks (optional);
4. fusion mixes temporal scales and descends the pyramid back to the
   N base variables;
5. the short-horizon recurrent decoder or the long-horizon MLP emits
   (B, N, horizon) predictions on the normalized scale.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .encoder import PyramidEncoder, ScaleFeatureSet
from .errors import ContractError
from .fusion import LongTermHead, ScaleFusion, ShortTermDecoder, training_loss
from .graphs import SpatialPyramid
from .hypergraph import AdaptiveHypergraph


class LossParts(NamedTuple):
    total: torch.Tensor
    base: torch.Tensor        # absolute-error term
    pool: torch.Tensor        # graph-pooling regulariser (0 when disabled)
    predictions: torch.Tensor


class Forecaster(nn.Module):
    def __init__(self, n_vars: int, cfg: ModelConfig):
        super().__init__()
        cfg.validate_for(n_vars)
        self.cfg = cfg
        self.n_vars = n_vars

        # Build every submodule under the configured dtype: initialisers
        # draw random values in each parameter's dtype, so building under
        # an ambient float32 default and casting afterwards would give
        # (slightly) different weights for the same seed than a native
        # float64 build — making runs depend on unrelated global state.
        wanted = torch.float64 if cfg.dtype == "float64" else torch.float32
        previous = torch.get_default_dtype()
        torch.set_default_dtype(wanted)
        try:
            self.pyramid = SpatialPyramid(
                n_vars, cfg.mem_items, cfg.mem_dim, cfg.pool_ratio,
                cfg.spatial_scales, plain=cfg.plain_graph)
            self.encoder = PyramidEncoder(
                self.pyramid.node_counts, cfg.input_len, cfg.temporal_scales,
                cfg.patch_len, cfg.hidden_dim, cfg.mem_dim, cfg.graph_order)

            feat_dim = cfg.feature_dim()
            if cfg.no_hypergraph:
                self.hypergraph = None
            else:
                self.hypergraph = AdaptiveHypergraph(
                    cfg.n_flat_positions(n_vars), cfg.n_hyperedges, feat_dim,
                    cfg.mem_items, cfg.mem_dim, cfg.nodes_per_edge,
                    n_layers=cfg.hyper_layers, plain_graph=cfg.plain_graph,
                    topk_neighbors=cfg.topk_neighbors)

            self.fusion = ScaleFusion(cfg.spatial_scales, cfg.temporal_scales)
            self.head_kind = cfg.resolve_head()
            if self.head_kind == "short":
                self.decoder = ShortTermDecoder(
                    feat_dim, cfg.hidden_dim, cfg.graph_order)
                self.long_head = None
            else:
                self.decoder = None
                self.long_head = LongTermHead(feat_dim, cfg.hidden_dim,
                                              cfg.horizon)

            # warping-affinity target for the pooling loss; filled in by the
            # trainer (or checkpoint restore) before loss computation
            self.register_buffer("dtw_affinity", torch.zeros(0))
        finally:
            torch.set_default_dtype(previous)
        self.to(wanted)

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.cfg.dtype == "float64" else torch.float32

    def set_dtw_affinity(self, affinity) -> None:
        affinity = torch.as_tensor(np.asarray(affinity), dtype=self.torch_dtype)
        if affinity.shape != (self.n_vars, self.n_vars):
            raise ContractError(
                f"affinity shape {tuple(affinity.shape)} does not match "
                f"n_vars={self.n_vars}")
        self.dtw_affinity = affinity

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim < 2 or x.shape[-2] != self.n_vars or x.shape[-1] != self.cfg.input_len:
            raise ContractError(
                f"expected input (..., {self.n_vars}, {self.cfg.input_len}), "
                f"got {tuple(x.shape)}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self._check_input(x)
        adjacencies = self.pyramid.adjacencies()
        assignments = self.pyramid.assignments()
        memories = list(self.pyramid.memories)
        features = self.encoder(x, adjacencies, assignments, memories)
        if self.hypergraph is not None:
            flat = self.hypergraph(features.flatten())
            features = ScaleFeatureSet.from_flat(
                flat, features.node_counts, features.n_temporal)
        fused = self.fusion(features, assignments)
        if self.head_kind == "short":
            return self.decoder(fused, adjacencies[0], self.cfg.horizon)
        return self.long_head(fused)

    def pool_regulariser(self) -> torch.Tensor:
        if self.pyramid.n_scales == 1:
            return self.dtw_affinity.new_zeros(())
        if self.dtw_affinity.numel() == 0:
            raise ContractError(
                "pooling loss requested but no warping affinity was set; "
                "call set_dtw_affinity first")
        return self.pyramid.graph_pooling_loss(self.dtw_affinity)

    def loss(self, x: torch.Tensor, target: torch.Tensor) -> LossParts:
        pred = self(x)
        base = training_loss(pred, target, 0.0, 0.0, self.cfg.loss_reduction)
        if self.cfg.no_pool_loss or self.cfg.pool_loss_weight == 0.0:
            pool = pred.new_zeros(())
            total = base
        else:
            pool = self.pool_regulariser()
            total = base + self.cfg.pool_loss_weight * pool
        return LossParts(total=total, base=base, pool=pool, predictions=pred)
