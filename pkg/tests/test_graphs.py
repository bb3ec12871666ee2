"""Adjacency generation, pooling loss and affinity coarsening."""

import itertools
import math

import numpy as np
import pytest
import torch

from helpers import finite_diff_entry
from hypercast.errors import ContractError
from hypercast.graphs import (MemoryGraphLearner, PlainGraphLearner,
                              SpatialPyramid, coarsen_affinity,
                              coarsen_series, learn_adjacency, plain_adjacency,
                              pooling_loss, row_entropy, validate_stochastic)

torch.set_default_dtype(torch.float64)


class TestLearnAdjacency:
    def test_hand_case(self):
        """n=2, one memory item: first row softmaxes [4, 0], second row's
        pre-activation is all zeros and softmaxes to uniform."""
        memory = torch.tensor([[2.0]])
        proj1 = torch.tensor([[1.0], [0.0]])
        proj2 = torch.tensor([[1.0], [0.0]])
        adj = learn_adjacency(memory, proj1, proj2)
        e4 = math.exp(4.0)
        expected = [[e4 / (e4 + 1.0), 1.0 / (e4 + 1.0)], [0.5, 0.5]]
        np.testing.assert_allclose(adj.numpy(), expected, rtol=1e-12)

    def test_rows_stochastic(self):
        torch.manual_seed(0)
        memory = torch.randn(6, 4)
        adj = learn_adjacency(memory, torch.randn(10, 6), torch.randn(10, 6))
        validate_stochastic(adj, "test")
        assert adj.min() >= 0

    def test_fully_suppressed_row_is_uniform(self):
        """relu zeroes any non-positive row, and softmax of zeros is uniform."""
        memory = torch.tensor([[1.0]])
        adj = learn_adjacency(memory, torch.tensor([[-3.0]]), torch.tensor([[2.0]]))
        np.testing.assert_allclose(adj.numpy(), [[1.0]])
        adj2 = learn_adjacency(memory, torch.tensor([[-1.0], [-2.0]]),
                               torch.tensor([[1.0], [1.0]]))
        np.testing.assert_allclose(adj2.numpy(), [[0.5, 0.5], [0.5, 0.5]])

    def test_plain_variant_matches_formula(self):
        torch.manual_seed(1)
        e1, e2 = torch.randn(5, 3), torch.randn(5, 3)
        expected = torch.softmax(torch.relu(e1 @ e2.mT), dim=-1)
        np.testing.assert_array_equal(plain_adjacency(e1, e2).numpy(),
                                      expected.numpy())

    def test_learner_modules(self):
        torch.manual_seed(2)
        mem = torch.randn(4, 3)
        for learner in (MemoryGraphLearner(7, 4), PlainGraphLearner(7, 3)):
            adj = learner(mem)
            assert adj.shape == (7, 7)
            validate_stochastic(adj, "module output")


class TestPoolingLoss:
    def test_identity_assignment_case(self):
        """Affinity [[1,.5],[.5,1]] with S=I: frobenius sqrt(0.5), entropy 0."""
        affinity = torch.tensor([[1.0, 0.5], [0.5, 1.0]])
        loss = pooling_loss(torch.eye(2), affinity)
        assert float(loss) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_one_hot_entropy_exactly_zero(self):
        s = torch.tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        assert float(row_entropy(s).sum()) == 0.0

    def test_uniform_entropy_is_log_g(self):
        g = 5
        s = torch.full((3, g), 1.0 / g)
        np.testing.assert_allclose(row_entropy(s).numpy(), math.log(g), rtol=1e-12)

    def test_perfect_block_match_leaves_entropy_only(self):
        """Hard two-block assignment on its own block affinity: frobenius 0."""
        s = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        affinity = s @ s.mT
        assert float(pooling_loss(s, affinity)) == 0.0

    def test_non_stochastic_rows_rejected(self):
        bad = torch.tensor([[0.6, 0.6], [0.5, 0.5]])
        with pytest.raises(ContractError, match="sum to 1"):
            pooling_loss(bad, torch.eye(2))
        negative = torch.tensor([[1.5, -0.5], [0.5, 0.5]])
        with pytest.raises(ContractError, match="negative"):
            pooling_loss(negative, torch.eye(2))

    def test_gradient_matches_finite_differences(self):
        """Autograd through frobenius + entropy agrees with central FD."""
        torch.manual_seed(3)
        logits = torch.nn.Parameter(torch.randn(6, 3))
        affinity = torch.rand(6, 6)
        affinity = (affinity + affinity.mT) / 2

        def loss_fn():
            return pooling_loss(torch.softmax(logits, dim=-1), affinity)

        loss_fn().backward()
        rng = np.random.default_rng(0)
        for idx in rng.choice(logits.numel(), size=8, replace=False):
            analytic = logits.grad.view(-1)[int(idx)].item()
            numeric = finite_diff_entry(logits, int(idx), loss_fn)
            assert analytic == pytest.approx(numeric, rel=1e-4, abs=1e-8)


class TestCoarsenAffinity:
    def test_identity_is_noop(self):
        affinity = torch.rand(4, 4)
        np.testing.assert_array_equal(coarsen_affinity(affinity, torch.eye(4)).numpy(),
                                      affinity.numpy())

    def test_all_to_one_group_sums_everything(self):
        """ones(4,4) pooled by an all-to-both hard assignment gives [[4,4],[4,4]]."""
        affinity = torch.ones(4, 4)
        s = torch.tensor([[1.0, 0.0]] * 2 + [[0.0, 1.0]] * 2)
        pooled = coarsen_affinity(affinity, s)
        np.testing.assert_array_equal(pooled.numpy(), [[4.0, 4.0], [4.0, 4.0]])

    def test_symmetry_preserved(self):
        torch.manual_seed(4)
        affinity = torch.rand(6, 6)
        affinity = (affinity + affinity.mT) / 2
        s = torch.softmax(torch.randn(6, 2), dim=-1)
        pooled = coarsen_affinity(affinity, s)
        np.testing.assert_allclose(pooled.numpy(), pooled.mT.numpy(), atol=1e-6)

    def test_mass_preserved_under_hard_assignment(self):
        """Total affinity mass is conserved by any hard assignment."""
        rng = np.random.default_rng(5)
        affinity = torch.tensor(rng.random((7, 7)))
        for _ in range(10):
            labels = rng.integers(0, 3, size=7)
            s = torch.zeros(7, 3, dtype=torch.float64)
            s[torch.arange(7), torch.tensor(labels)] = 1.0
            pooled = coarsen_affinity(affinity, s)
            assert float(pooled.sum()) == pytest.approx(float(affinity.sum()), rel=1e-12)

    def test_block_respecting_assignment_minimises_frobenius(self):
        """On a planted two-block affinity, the frobenius term is strictly
        smallest for the planted partition (checked exhaustively, n=6)."""
        blocks = [0, 0, 0, 1, 1, 1]
        affinity = torch.tensor([[1.0 if blocks[i] == blocks[j] else 0.0
                                  for j in range(6)] for i in range(6)])

        def frob(labels):
            s = torch.zeros(6, 2, dtype=torch.float64)
            s[torch.arange(6), torch.tensor(labels)] = 1.0
            return float(torch.linalg.matrix_norm(affinity - s @ s.mT, ord="fro"))

        planted = frob(blocks)
        assert planted == 0.0
        for labels in itertools.product([0, 1], repeat=6):
            if len(set(labels)) < 2:
                continue
            if list(labels) in (blocks, [1 - b for b in blocks]):
                continue
            assert frob(list(labels)) > planted


class TestSpatialPyramid:
    def test_assignment_shapes_match_pool_ratio(self):
        pyramid = SpatialPyramid(209, mem_items=4, mem_dim=3, pool_ratio=20,
                                 n_scales=2)
        assert pyramid.node_counts == [209, 10]
        assert pyramid.assignment(1).shape == (209, 10)

    def test_three_scale_counts(self):
        pyramid = SpatialPyramid(3850, mem_items=2, mem_dim=2, pool_ratio=30,
                                 n_scales=3)
        assert pyramid.node_counts == [3850, 128, 4]

    def test_assignments_are_row_stochastic(self):
        torch.manual_seed(6)
        pyramid = SpatialPyramid(12, mem_items=4, mem_dim=3, pool_ratio=3,
                                 n_scales=2)
        for s in pyramid.assignments():
            validate_stochastic(s, "assignment")

    def test_uniform_logits_give_uniform_rows(self):
        pyramid = SpatialPyramid(6, mem_items=2, mem_dim=2, pool_ratio=3,
                                 n_scales=2)
        with torch.no_grad():
            pyramid.assign_logits[0].zero_()
        np.testing.assert_allclose(pyramid.assignment(1).detach().numpy(), 0.5)

    def test_scale_index_bounds(self):
        pyramid = SpatialPyramid(6, mem_items=2, mem_dim=2, pool_ratio=3,
                                 n_scales=2)
        with pytest.raises(IndexError):
            pyramid.adjacency(3)
        with pytest.raises(IndexError):
            pyramid.assignment(2)  # only one boundary exists
        with pytest.raises(IndexError):
            pyramid.assignment(0)

    def test_collapse_rejected(self):
        with pytest.raises(ContractError, match="zero nodes"):
            SpatialPyramid(5, mem_items=2, mem_dim=2, pool_ratio=10, n_scales=2)

    def test_pooling_loss_over_boundaries_recoarsens(self):
        """The second boundary's loss is computed against S1^T A S1."""
        torch.manual_seed(7)
        pyramid = SpatialPyramid(18, mem_items=3, mem_dim=2, pool_ratio=3,
                                 n_scales=3)
        affinity = torch.rand(18, 18)
        affinity = (affinity + affinity.mT) / 2
        with torch.no_grad():
            total = pyramid.graph_pooling_loss(affinity)
            s1, s2 = pyramid.assignments()
            expected = (pooling_loss(s1, affinity)
                        + pooling_loss(s2, coarsen_affinity(affinity, s1)))
        assert float(total) == pytest.approx(float(expected), rel=1e-12)

    def test_single_scale_loss_is_zero(self):
        pyramid = SpatialPyramid(5, mem_items=2, mem_dim=2, pool_ratio=2,
                                 n_scales=1)
        assert float(pyramid.graph_pooling_loss(torch.eye(5))) == 0.0


class TestCoarsenSeries:
    def test_hard_assignment_sums_members(self):
        """Rows {0,1} -> group 0 and {2} -> group 1 on a small series."""
        x = torch.tensor([[1.0, 1.0], [3.0, 3.0], [5.0, 5.0]])
        s = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(coarsen_series(x, s).numpy(),
                                      [[4.0, 4.0], [5.0, 5.0]])

    def test_matches_einsum_oracle_batched(self):
        rng = np.random.default_rng(8)
        x = torch.tensor(rng.normal(size=(2, 5, 7)))
        s = torch.softmax(torch.tensor(rng.normal(size=(5, 2))), dim=-1)
        expected = np.einsum("ng,bnt->bgt", s.numpy(), x.numpy())
        np.testing.assert_allclose(coarsen_series(x, s).numpy(), expected,
                                   atol=1e-12)
