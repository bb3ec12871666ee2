"""Learned graph structure: adjacency generation and the spatial pyramid.

Adjacency matrices are generated, not given: each set of nodes owns a
small memory bank ``M`` (m items of width d) and two projections that
map it to node embeddings, and the adjacency is

    A = row_softmax(relu(E1 @ E2.T)),   E1 = P1 @ M,  E2 = P2 @ M.

Rows are therefore always stochastic.  A variant with free node
embeddings (no memory bank) exists as an ablation.

The spatial pyramid stacks progressively coarser node sets (each scale
divides the node count by ``pool_ratio``) connected by learned soft
assignment matrices; the assignments are regularised towards a warping-
distance affinity via the pooling loss below.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ContractError

_STOCHASTIC_TOL = 1e-6


def validate_stochastic(matrix: torch.Tensor, what: str,
                        tol: float = _STOCHASTIC_TOL) -> None:
    """Raise ``ContractError`` unless rows are non-negative and sum to 1."""
    sums = matrix.sum(dim=-1)
    if (sums - 1.0).abs().max() > tol:
        worst = float((sums - 1.0).abs().max())
        raise ContractError(f"{what}: rows must sum to 1 (worst deviation {worst:.3g})")
    if matrix.min() < -tol:
        raise ContractError(f"{what}: negative entry {float(matrix.min()):.3g}")


def learn_adjacency(memory: torch.Tensor, proj1: torch.Tensor,
                    proj2: torch.Tensor) -> torch.Tensor:
    """Adjacency from a memory bank: row_softmax(relu((P1 M)(P2 M)^T)).

    A row whose pre-activation is entirely non-positive relus to zeros
    and softmaxes to the uniform distribution.
    """
    e1 = proj1 @ memory
    e2 = proj2 @ memory
    return torch.softmax(torch.relu(e1 @ e2.mT), dim=-1)


def plain_adjacency(emb1: torch.Tensor, emb2: torch.Tensor) -> torch.Tensor:
    """Ablation variant: adjacency from free node embeddings."""
    return torch.softmax(torch.relu(emb1 @ emb2.mT), dim=-1)


class MemoryGraphLearner(nn.Module):
    """Projections that turn a (shared) memory bank into an adjacency."""

    def __init__(self, n_nodes: int, mem_items: int):
        super().__init__()
        self.proj1 = nn.Parameter(torch.empty(n_nodes, mem_items))
        self.proj2 = nn.Parameter(torch.empty(n_nodes, mem_items))
        nn.init.xavier_uniform_(self.proj1)
        nn.init.xavier_uniform_(self.proj2)

    def forward(self, memory: torch.Tensor) -> torch.Tensor:
        return learn_adjacency(memory, self.proj1, self.proj2)


class PlainGraphLearner(nn.Module):
    """Free-embedding adjacency learner (memory bank is ignored)."""

    def __init__(self, n_nodes: int, emb_dim: int):
        super().__init__()
        self.emb1 = nn.Parameter(torch.empty(n_nodes, emb_dim))
        self.emb2 = nn.Parameter(torch.empty(n_nodes, emb_dim))
        nn.init.xavier_uniform_(self.emb1)
        nn.init.xavier_uniform_(self.emb2)

    def forward(self, memory: torch.Tensor | None = None) -> torch.Tensor:
        return plain_adjacency(self.emb1, self.emb2)


def row_entropy(assign: torch.Tensor) -> torch.Tensor:
    """Natural-log entropy of each row; exactly 0 for one-hot rows."""
    return -torch.special.xlogy(assign, assign).sum(dim=-1)


def pooling_loss(assign: torch.Tensor, affinity: torch.Tensor,
                 validate: bool = True) -> torch.Tensor:
    """One pooling boundary: ||affinity - S S^T||_F plus mean row entropy.

    The Frobenius term pulls nodes with similar warping profiles into
    the same group; the entropy term sharpens rows towards one-hot.
    """
    if validate:
        validate_stochastic(assign, "assignment matrix")
    link = torch.linalg.matrix_norm(affinity - assign @ assign.mT, ord="fro")
    return link + row_entropy(assign).mean()


def coarsen_affinity(affinity: torch.Tensor, assign: torch.Tensor) -> torch.Tensor:
    """Pool an affinity matrix one scale up: S^T A S."""
    return assign.mT @ affinity @ assign


def coarsen_series(values: torch.Tensor, assign: torch.Tensor) -> torch.Tensor:
    """Pool node series one scale up: S^T X (works on batched inputs)."""
    return assign.mT @ values


class SpatialPyramid(nn.Module):
    """Per-scale memory banks, adjacency learners and soft assignments.

    Scale indices are 1-based to match the natural reading "scale 1 is
    the raw variables"; ``adjacency(j)`` is valid for 1 <= j <= J and
    ``assignment(j)`` for 1 <= j < J.
    """

    def __init__(self, n_vars: int, mem_items: int, mem_dim: int,
                 pool_ratio: int, n_scales: int, plain: bool = False):
        super().__init__()
        counts = [n_vars]
        for _ in range(n_scales - 1):
            counts.append(counts[-1] // pool_ratio)
        if counts[-1] < 1:
            raise ContractError(
                f"pyramid collapses to zero nodes: {counts} "
                f"(n_vars={n_vars}, pool_ratio={pool_ratio}, n_scales={n_scales})")
        self.node_counts = counts

        self.memories = nn.ParameterList()
        self.learners = nn.ModuleList()
        for n in counts:
            bank = nn.Parameter(torch.empty(mem_items, mem_dim))
            nn.init.xavier_uniform_(bank)
            self.memories.append(bank)
            if plain:
                self.learners.append(PlainGraphLearner(n, mem_dim))
            else:
                self.learners.append(MemoryGraphLearner(n, mem_items))

        self.assign_logits = nn.ParameterList()
        for a, b in zip(counts[:-1], counts[1:]):
            logits = nn.Parameter(torch.empty(a, b))
            nn.init.xavier_uniform_(logits)
            self.assign_logits.append(logits)

    @property
    def n_scales(self) -> int:
        return len(self.node_counts)

    def _check_scale(self, j: int, upper: int) -> None:
        if not 1 <= j <= upper:
            raise IndexError(f"scale index {j} out of range [1, {upper}]")

    def memory_bank(self, j: int) -> torch.Tensor:
        self._check_scale(j, self.n_scales)
        return self.memories[j - 1]

    def adjacency(self, j: int) -> torch.Tensor:
        self._check_scale(j, self.n_scales)
        return self.learners[j - 1](self.memories[j - 1])

    def assignment(self, j: int) -> torch.Tensor:
        self._check_scale(j, self.n_scales - 1)
        return torch.softmax(self.assign_logits[j - 1], dim=-1)

    def adjacencies(self) -> list[torch.Tensor]:
        return [self.adjacency(j) for j in range(1, self.n_scales + 1)]

    def assignments(self) -> list[torch.Tensor]:
        return [self.assignment(j) for j in range(1, self.n_scales)]

    def graph_pooling_loss(self, affinity: torch.Tensor) -> torch.Tensor:
        """Pooling loss summed over boundaries, re-coarsening the affinity
        matrix after each one.  Zero when the pyramid has a single scale."""
        total = affinity.new_zeros(())
        current = affinity
        for j in range(1, self.n_scales):
            assign = self.assignment(j)
            total = total + pooling_loss(assign, current, validate=False)
            current = coarsen_affinity(current, assign)
        return total
