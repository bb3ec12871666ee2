"""Sparse learned hypergraph over the flattened multi-scale features.

Every (spatial scale, temporal scale, node) feature row is a hypergraph
node; hyperedges group nodes across scales.  The incidence matrix is
learned end-to-end: sigmoid weights, sparsified per hyperedge to the
top ``nodes_per_edge`` entries (straight-through: gradients flow into
the retained weights).  Propagation then runs in three phases —
nodes aggregate into hyperedges, hyperedges exchange information over a
learned hyperedge graph (attention weighted by that graph), and nodes
read back from their hyperedges through masked attention.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import DivergenceError
from .graphs import MemoryGraphLearner, PlainGraphLearner

MASK_OFF = -1e9  # large-negative stand-in for -inf in attention masks


def sparsify_incidence(incidence: torch.Tensor, keep: int) -> torch.Tensor:
    """Keep the ``keep`` largest entries of each column, zeroing the rest.

    Ties break towards the lowest node index (stable ordering).  The
    selection itself is not differentiated through; retained entries
    keep their gradient.  ``keep`` >= column height is a no-op.
    """
    n_nodes = incidence.shape[0]
    if keep >= n_nodes:
        return incidence
    order = torch.sort(incidence.detach(), dim=0, descending=True, stable=True).indices
    mask = torch.zeros_like(incidence)
    mask.scatter_(0, order[:keep], 1.0)
    return incidence * mask


def incidence_mask(sparse_incidence: torch.Tensor) -> torch.Tensor:
    """Attention mask: 0 where a node sits on a hyperedge, -1e9 elsewhere."""
    return torch.where(sparse_incidence != 0,
                       torch.zeros_like(sparse_incidence),
                       torch.full_like(sparse_incidence, MASK_OFF))


def nodes_to_hyperedges(sparse_incidence: torch.Tensor, features: torch.Tensor,
                        edge_weights: torch.Tensor) -> torch.Tensor:
    """Phase 1: hyperedges aggregate their member nodes.

    ``relu(U @ agg) + agg`` with ``agg = incidence^T @ features``;
    ``edge_weights`` (U) mixes hyperedges and is expected row-normalized.
    """
    agg = sparse_incidence.mT @ features
    return torch.relu(edge_weights @ agg) + agg


class HyperedgeAttention(nn.Module):
    """Single-head graph attention between hyperedges.

    Standard additive attention logits; the softmax is multiplied
    elementwise by the learned hyperedge-graph prior and renormalized,
    so the prior gates which neighbours an edge can attend to.
    """

    def __init__(self, dim: int, negative_slope: float = 0.2):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(dim, dim))
        self.attn_src = nn.Parameter(torch.empty(dim))
        self.attn_dst = nn.Parameter(torch.empty(dim))
        nn.init.xavier_uniform_(self.weight)
        bound = 1.0 / dim ** 0.5
        nn.init.uniform_(self.attn_src, -bound, bound)
        nn.init.uniform_(self.attn_dst, -bound, bound)
        self.negative_slope = negative_slope

    def forward(self, features: torch.Tensor, prior: torch.Tensor,
                topk: int = 0, return_attention: bool = False):
        h = features @ self.weight
        scores_src = h @ self.attn_src   # (..., beta)
        scores_dst = h @ self.attn_dst
        logits = torch.nn.functional.leaky_relu(
            scores_src.unsqueeze(-1) + scores_dst.unsqueeze(-2), self.negative_slope)
        attn = torch.softmax(logits, dim=-1)
        if topk > 0 and topk < prior.shape[-1]:
            # hard neighbourhood sparsification of the prior, per row
            order = torch.sort(prior, dim=-1, descending=True, stable=True).indices
            keep = torch.zeros_like(prior)
            keep.scatter_(-1, order[..., :topk], 1.0)
            prior = prior * keep
        attn = attn * prior
        denom = attn.sum(dim=-1, keepdim=True)
        if not torch.all(denom > 0):
            # softmax rows and the prior are strictly positive under healthy
            # numerics, so a dead row means saturated or non-finite scores
            raise DivergenceError(
                "hyperedge attention: a row lost all neighbours "
                "(saturated or non-finite attention scores)")
        attn = attn / denom
        out = attn @ h
        if return_attention:
            return out, attn
        return out


class HyperedgeUpdate(nn.Module):
    """Phase 2: hyperedges exchange information.

    Attention over the learned hyperedge graph, augmented by a readout
    from the hyperedge memory bank, folded back into the phase-1
    features through a two-layer MLP with a residual-style sum.
    """

    def __init__(self, dim: int, mem_dim: int):
        super().__init__()
        self.attention = HyperedgeAttention(dim)
        self.query_weight = nn.Parameter(torch.empty(dim, mem_dim))
        self.query_bias = nn.Parameter(torch.zeros(mem_dim))
        self.merge_weight = nn.Parameter(torch.empty(dim + mem_dim, dim))
        self.merge_bias = nn.Parameter(torch.zeros(dim))
        nn.init.xavier_uniform_(self.query_weight)
        nn.init.xavier_uniform_(self.merge_weight)
        self.mlp = nn.Sequential(nn.Linear(dim, dim), nn.ReLU(), nn.Linear(dim, dim))

    def forward(self, edges: torch.Tensor, prior: torch.Tensor,
                memory: torch.Tensor, topk: int = 0) -> torch.Tensor:
        mixed = self.attention(edges, prior, topk=topk)
        query = mixed @ self.query_weight + self.query_bias
        readout = torch.softmax(query @ memory.mT, dim=-1) @ memory
        merged = torch.cat([mixed, readout], dim=-1) @ self.merge_weight + self.merge_bias
        return self.mlp(edges + merged)


class NodeUpdate(nn.Module):
    """Phase 3: nodes read back from their hyperedges via masked attention.

    A node attends only over hyperedges it sits on (mask from the sparse
    incidence).  Nodes on no hyperedge skip the read and keep the
    normalised residual path.
    """

    def __init__(self, dim: int):
        super().__init__()
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.mlp = nn.Sequential(nn.Linear(dim, dim), nn.ReLU(), nn.Linear(dim, dim))
        self.norm = nn.LayerNorm(dim)

    def forward(self, features: torch.Tensor, edges: torch.Tensor,
                mask: torch.Tensor, return_attention: bool = False):
        logits = self.query(features) @ self.key(edges).mT + mask
        attn = torch.softmax(logits, dim=-1)
        read = attn @ self.value(edges)
        candidate = self.norm(self.mlp(read) + features)
        fallback = self.norm(features)
        connected = (mask > MASK_OFF / 2).any(dim=-1, keepdim=True)
        out = torch.where(connected, candidate, fallback)
        if return_attention:
            return out, attn
        return out


class HypergraphLayer(nn.Module):
    """One full propagation round: nodes -> edges -> edges -> nodes."""

    def __init__(self, dim: int, n_hyperedges: int, mem_dim: int):
        super().__init__()
        self.edge_weights = nn.Parameter(torch.empty(n_hyperedges, n_hyperedges))
        nn.init.xavier_uniform_(self.edge_weights)
        self.edge_update = HyperedgeUpdate(dim, mem_dim)
        self.node_update = NodeUpdate(dim)

    def forward(self, features: torch.Tensor, sparse_incidence: torch.Tensor,
                mask: torch.Tensor, prior: torch.Tensor,
                memory: torch.Tensor, topk: int = 0) -> torch.Tensor:
        u = torch.softmax(self.edge_weights, dim=-1)
        edges = nodes_to_hyperedges(sparse_incidence, features, u)
        edges = self.edge_update(edges, prior, memory, topk=topk)
        return self.node_update(features, edges, mask)


class AdaptiveHypergraph(nn.Module):
    """Learned sparse hypergraph plus its propagation stack.

    Owns the incidence logits, the hyperedge memory bank and graph
    learner, and ``n_layers`` propagation rounds sharing that structure.
    """

    def __init__(self, n_nodes: int, n_hyperedges: int, dim: int,
                 mem_items: int, mem_dim: int, nodes_per_edge: int,
                 n_layers: int = 1, plain_graph: bool = False,
                 topk_neighbors: int = 0):
        super().__init__()
        self.nodes_per_edge = nodes_per_edge
        self.topk_neighbors = topk_neighbors
        self.incidence_logits = nn.Parameter(
            torch.empty(n_nodes, n_hyperedges).uniform_(-1.0, 1.0))
        self.memory = nn.Parameter(torch.empty(mem_items, mem_dim))
        nn.init.xavier_uniform_(self.memory)
        if plain_graph:
            self.graph_learner = PlainGraphLearner(n_hyperedges, mem_dim)
        else:
            self.graph_learner = MemoryGraphLearner(n_hyperedges, mem_items)
        self.layers = nn.ModuleList(
            [HypergraphLayer(dim, n_hyperedges, mem_dim) for _ in range(n_layers)])

    def sparse_incidence(self) -> torch.Tensor:
        return sparsify_incidence(torch.sigmoid(self.incidence_logits),
                                  self.nodes_per_edge)

    def edge_graph(self) -> torch.Tensor:
        return self.graph_learner(self.memory)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        sparse = self.sparse_incidence()
        mask = incidence_mask(sparse)
        prior = self.edge_graph()
        out = features
        for layer in self.layers:
            out = layer(out, sparse, mask, prior, self.memory,
                        topk=self.topk_neighbors)
        return out
