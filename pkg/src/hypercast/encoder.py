"""Multi-scale feature extraction.

For every spatial scale the input series is pooled down the pyramid,
then each spatial scale is expanded into a temporal pyramid (pointwise
conv + pair-average pooling halves the length each step).  Every
(spatial, temporal) cell patchifies its series, runs a graph-gated
recurrent encoder over the patches, and augments the final hidden state
by attending over that spatial scale's memory bank.  No parameters are
shared between cells.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ContractError
from .graphs import coarsen_series, validate_stochastic


class TemporalDownsample(nn.Module):
    """Pointwise (kernel-size-1) conv followed by pair-average pooling.

    The conv is a single scalar weight/bias shared across nodes and
    time, initialised to the identity so an untrained pyramid is plain
    averaging.  Halves the trailing (time) dimension; length must be even.
    """

    def __init__(self):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(1))
        self.bias = nn.Parameter(torch.zeros(1))

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        t = values.shape[-1]
        if t % 2:
            raise ContractError(f"cannot halve odd sequence length {t}")
        mixed = values * self.weight + self.bias
        return mixed.reshape(*values.shape[:-1], t // 2, 2).mean(dim=-1)


class PatchEmbed(nn.Module):
    """Split the time axis into non-overlapping patches and project each.

    A trailing remainder shorter than one patch is dropped.
    """

    def __init__(self, patch_len: int, out_dim: int):
        super().__init__()
        self.patch_len = patch_len
        self.weight = nn.Parameter(torch.empty(patch_len, out_dim))
        self.bias = nn.Parameter(torch.zeros(out_dim))
        nn.init.xavier_uniform_(self.weight)

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        t = values.shape[-1]
        n_patches = t // self.patch_len
        if n_patches < 1:
            raise ContractError(
                f"sequence length {t} shorter than patch_len {self.patch_len}")
        trimmed = values[..., :n_patches * self.patch_len]
        patches = trimmed.reshape(*values.shape[:-1], n_patches, self.patch_len)
        return patches @ self.weight + self.bias


class GraphGRUCell(nn.Module):
    """GRU cell whose gate transforms are graph convolutions.

    Every affine map of a plain GRU is replaced by
    ``sum_p A^p Z W_p + b`` over ``graph_order`` diffusion steps (order
    1 and A = I reduces exactly to a plain GRU).  Update convention:
    ``h' = u * h + (1 - u) * candidate`` with the candidate computed
    from ``[x, r * h]``.
    """

    def __init__(self, in_dim: int, hidden_dim: int, graph_order: int = 1):
        super().__init__()
        self.hidden_dim = hidden_dim
        total = in_dim + hidden_dim
        for gate in ("update", "reset", "cand"):
            weight = nn.Parameter(torch.empty(graph_order, total, hidden_dim))
            nn.init.xavier_uniform_(weight)
            setattr(self, f"weight_{gate}", weight)
            setattr(self, f"bias_{gate}", nn.Parameter(torch.zeros(hidden_dim)))

    def _graph_transform(self, z: torch.Tensor, adj: torch.Tensor,
                         weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
        out = bias
        diffused = z
        for p in range(weight.shape[0]):
            diffused = adj @ diffused
            out = out + diffused @ weight[p]
        return out

    def forward(self, x: torch.Tensor, h: torch.Tensor,
                adj: torch.Tensor) -> torch.Tensor:
        xh = torch.cat([x, h], dim=-1)
        u = torch.sigmoid(self._graph_transform(xh, adj, self.weight_update, self.bias_update))
        r = torch.sigmoid(self._graph_transform(xh, adj, self.weight_reset, self.bias_reset))
        xrh = torch.cat([x, r * h], dim=-1)
        cand = torch.tanh(self._graph_transform(xrh, adj, self.weight_cand, self.bias_cand))
        return u * h + (1 - u) * cand


def encode_sequence(cell: GraphGRUCell, patches: torch.Tensor,
                    adj: torch.Tensor) -> torch.Tensor:
    """Run a graph-GRU over the patch axis; returns the final hidden state.

    ``patches``: (..., N, P, F) -> (..., N, hidden).  Hidden state starts
    at zero.  The adjacency must be row-stochastic.
    """
    validate_stochastic(adj, "encoder adjacency")
    lead = patches.shape[:-2]
    h = patches.new_zeros(*lead, cell.hidden_dim)
    for t in range(patches.shape[-2]):
        h = cell(patches[..., t, :], h, adj)
    return h


def pattern_attention(query: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
    """Row-stochastic attention of queries over memory items."""
    return torch.softmax(query @ memory.mT, dim=-1)


def memory_match(features: torch.Tensor, memory: torch.Tensor,
                 weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """Augment features with a convex combination of memory items.

    Returns ``[readout, features]`` concatenated on the last axis, where
    the readout attends over memory rows; output width is d + D.
    """
    attn = pattern_attention(features @ weight + bias, memory)
    return torch.cat([attn @ memory, features], dim=-1)


class ScaleFeatureSet:
    """Per-(spatial, temporal)-scale feature blocks plus the flat view.

    Blocks are kept j-major (``blocks[j-1][k-1]`` is spatial scale j,
    temporal scale k, shaped (..., N_j, F)); the flat view stacks them
    along the node axis in that order, giving one row per hypergraph
    node.  ``index_map`` labels each flat row with its (j, k, node)
    origin; flatten/unflatten are exact inverses.
    """

    def __init__(self, blocks: list[list[torch.Tensor]]):
        self.blocks = blocks
        self.node_counts = [row[0].shape[-2] for row in blocks]
        self.n_temporal = len(blocks[0])

    def block(self, j: int, k: int) -> torch.Tensor:
        return self.blocks[j - 1][k - 1]

    def flatten(self) -> torch.Tensor:
        return torch.cat([b for row in self.blocks for b in row], dim=-2)

    @classmethod
    def from_flat(cls, flat: torch.Tensor, node_counts: list[int],
                  n_temporal: int) -> "ScaleFeatureSet":
        sizes = [n for n in node_counts for _ in range(n_temporal)]
        if sum(sizes) != flat.shape[-2]:
            raise ContractError(
                f"flat feature stack has {flat.shape[-2]} rows, "
                f"expected {sum(sizes)} from node counts {node_counts} x {n_temporal}")
        pieces = torch.split(flat, sizes, dim=-2)
        blocks = [list(pieces[j * n_temporal:(j + 1) * n_temporal])
                  for j in range(len(node_counts))]
        return cls(blocks)

    def index_map(self) -> list[tuple[int, int, int]]:
        """(spatial scale, temporal scale, node) for each flat row; scales 1-based."""
        return scale_index_entries(self.node_counts, self.n_temporal)


def scale_index_entries(node_counts: list[int],
                        n_temporal: int) -> list[tuple[int, int, int]]:
    """Row labels of the flattened feature stack, in stacking order."""
    entries = []
    for j, n in enumerate(node_counts, start=1):
        for k in range(1, n_temporal + 1):
            entries.extend((j, k, i) for i in range(n))
    return entries


class PyramidEncoder(nn.Module):
    """All (spatial x temporal)-scale encoders, with per-cell parameters.

    The caller supplies the structural pieces (adjacencies, assignments
    and memory banks come from the spatial pyramid); this module owns
    the downsamplers, patch embeddings, recurrent cells and per-scale
    memory queries.
    """

    def __init__(self, node_counts: list[int], input_len: int, n_temporal: int,
                 patch_len: int, hidden_dim: int, mem_dim: int, graph_order: int = 1):
        super().__init__()
        self.n_temporal = n_temporal
        self.downsamples = nn.ModuleList()   # [j][k-2]: scale k-1 -> k
        self.patchers = nn.ModuleList()      # [j][k-1]
        self.cells = nn.ModuleList()         # [j][k-1]
        self.query_weights = nn.ParameterList()
        self.query_biases = nn.ParameterList()
        for _ in node_counts:
            self.downsamples.append(nn.ModuleList(
                [TemporalDownsample() for _ in range(n_temporal - 1)]))
            self.patchers.append(nn.ModuleList(
                [PatchEmbed(patch_len, hidden_dim) for _ in range(n_temporal)]))
            self.cells.append(nn.ModuleList(
                [GraphGRUCell(hidden_dim, hidden_dim, graph_order)
                 for _ in range(n_temporal)]))
            qw = nn.Parameter(torch.empty(hidden_dim, mem_dim))
            nn.init.xavier_uniform_(qw)
            self.query_weights.append(qw)
            self.query_biases.append(nn.Parameter(torch.zeros(mem_dim)))
        # fail at build time, not mid-forward, if the geometry is impossible
        shortest = input_len // 2 ** (n_temporal - 1)
        if shortest // patch_len < 1:
            raise ContractError(
                f"coarsest temporal scale has length {shortest} < patch_len {patch_len}")

    def forward(self, values: torch.Tensor, adjacencies: list[torch.Tensor],
                assignments: list[torch.Tensor],
                memories: list[torch.Tensor]) -> ScaleFeatureSet:
        """values: (..., N, T) -> feature blocks of width hidden + mem dims."""
        blocks: list[list[torch.Tensor]] = []
        series = values
        for j in range(len(adjacencies)):
            if j > 0:
                series = coarsen_series(series, assignments[j - 1])
            adj = adjacencies[j]
            validate_stochastic(adj, f"spatial scale {j + 1} adjacency")
            row = []
            current = series
            for k in range(self.n_temporal):
                if k > 0:
                    current = self.downsamples[j][k - 1](current)
                patches = self.patchers[j][k](current)
                hidden = _run_cell(self.cells[j][k], patches, adj)
                row.append(memory_match(hidden, memories[j],
                                        self.query_weights[j], self.query_biases[j]))
            blocks.append(row)
        return ScaleFeatureSet(blocks)


def _run_cell(cell: GraphGRUCell, patches: torch.Tensor,
              adj: torch.Tensor) -> torch.Tensor:
    # adjacency already validated once per spatial scale by the caller
    lead = patches.shape[:-2]
    h = patches.new_zeros(*lead, cell.hidden_dim)
    for t in range(patches.shape[-2]):
        h = cell(patches[..., t, :], h, adj)
    return h
