# Copyright (c) 2025 knguyen1
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import pytest
import scipy.sparse as sp

from igccf.core.errors import DimensionMismatchError, GraphError
from igccf.core.graph import (
    build_item_graph,
    build_propagation,
    export_edge_list,
    project_cosine,
    project_cosine_topk,
    propagate,
    propagate_array,
    propagate_transpose,
    propagation_edges,
    topk_prune,
)
from igccf.core.models import (
    InteractionMatrix,
    ItemEmbeddings,
    ItemGraph,
    PropagationMatrix,
)

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

    MatrixFactory = Callable[[np.random.Generator, int, int, float], InteractionMatrix]


def _matrix(rows: list[list[int]], n_items: int) -> InteractionMatrix:
    dense = np.zeros((len(rows), n_items))
    for u, items in enumerate(rows):
        dense[u, items] = 1.0
    users = tuple(f"u{u}" for u in range(len(rows)))
    items = tuple(f"i{i}" for i in range(n_items))
    return InteractionMatrix(sp.csr_matrix(dense), users, items)


def _graph(dense: np.ndarray) -> ItemGraph:
    return ItemGraph(sp.csr_matrix(dense))


def test_cosine_weight_of_shared_user() -> None:
    # one shared user out of two each
    graph = project_cosine(_matrix([[0, 1], [0], [1]], 2))
    assert graph.weights[0, 1] == pytest.approx(0.5)
    assert graph.weights[1, 0] == pytest.approx(0.5)


def test_identical_columns_have_weight_one() -> None:
    graph = project_cosine(_matrix([[0, 1], [0, 1], [2]], 3))
    assert graph.weights[0, 1] == 1.0
    assert graph.weights[0, 2] == 0.0
    assert graph.neighbours(2)[0].size == 0


def test_projection_is_symmetric_without_diagonal(random_matrix: MatrixFactory) -> None:
    matrix = random_matrix(np.random.default_rng(4), 50, 30, 0.1)
    weights = project_cosine(matrix).weights
    assert abs(weights - weights.T).max() < 1e-12
    assert weights.diagonal().tolist() == [0.0] * 30
    assert weights.data.min() > 0.0
    assert weights.data.max() <= 1.0
    dense = matrix.csr.toarray()
    norms = np.linalg.norm(dense, axis=0)
    expected = dense.T @ dense / np.outer(norms, norms)
    np.fill_diagonal(expected, 0.0)
    np.testing.assert_allclose(weights.toarray(), expected, atol=1e-12)


def test_empty_item_column() -> None:
    matrix = _matrix([[0, 1], [1]], 3)
    with pytest.raises(GraphError, match="i2"):
        project_cosine(matrix)
    graph = project_cosine(matrix, strict=False)
    assert graph.neighbours(2)[0].size == 0
    assert graph.weights[0, 1] == pytest.approx(1 / np.sqrt(2))


def _pruned_oracle(dense: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(dense)
    for i, row in enumerate(dense):
        candidates = [j for j in range(row.size) if j != i and row[j] > 0]
        for j in sorted(candidates, key=lambda j: (-row[j], j))[:k]:
            out[i, j] = row[j]
    return out


def test_topk_prune_matches_oracle() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(2, 14))
        k = int(rng.integers(1, n + 1))
        # quantised weights so ties happen
        dense = rng.integers(0, 4, size=(n, n)) / 4.0
        np.fill_diagonal(dense, 0.5)
        pruned = topk_prune(_graph(dense), k)
        assert pruned.pruned_k == k
        expected = _pruned_oracle(dense, k)
        np.testing.assert_array_equal(pruned.weights.toarray(), expected)
        assert pruned.weights.diagonal().sum() == 0.0
        assert np.diff(pruned.weights.indptr).max() <= k


def test_blocked_projection_matches_oracle(random_matrix: MatrixFactory) -> None:
    rng = np.random.default_rng(31)
    for _ in range(1000):
        n_items = int(rng.integers(2, 12))
        matrix = random_matrix(rng, int(rng.integers(2, 16)), n_items, 0.3)
        k = int(rng.integers(1, n_items + 1))
        block_size = int(rng.integers(1, n_items + 1))
        blocked = project_cosine_topk(matrix, k, block_size=block_size)
        full = project_cosine(matrix).weights.toarray()
        expected = _pruned_oracle(full, k)
        np.testing.assert_array_equal(blocked.weights.toarray(), expected)


def test_topk_prune_keeps_lower_index_on_ties() -> None:
    dense = np.array(
        [
            [0.0, 0.3, 0.3, 0.3],
            [0.3, 0.0, 0.0, 0.0],
            [0.3, 0.0, 0.0, 0.0],
            [0.3, 0.0, 0.0, 0.0],
        ]
    )
    pruned = topk_prune(_graph(dense), 2)
    assert pruned.neighbours(0)[0].tolist() == [1, 2]
    # rows are pruned independently, so the result need not be symmetric
    assert pruned.neighbours(3)[0].tolist() == [0]
    assert pruned.weights[0, 3] == 0.0


def test_topk_prune_rejects_zero() -> None:
    with pytest.raises(ValueError):
        topk_prune(_graph(np.zeros((2, 2))), 0)


@pytest.mark.parametrize(("k", "block_size"), [(1, 1), (3, 4), (5, 7), (50, 2048)])
def test_blocked_topk_projection(
    random_matrix: MatrixFactory, k: int, block_size: int
) -> None:
    matrix = random_matrix(np.random.default_rng(11), 40, 25, 0.15)
    blocked = project_cosine_topk(matrix, k, block_size=block_size)
    reference = topk_prune(project_cosine(matrix), k)
    assert (blocked.weights != reference.weights).nnz == 0
    assert build_item_graph(matrix, k).pruned_k == k
    assert build_item_graph(matrix, None).pruned_k is None


def test_propagation_adds_self_loops() -> None:
    graph = _graph(np.array([[0.0, 0.5], [0.5, 0.0]]))
    np.testing.assert_allclose(
        build_propagation(graph).matrix.toarray(), [[1.0, 0.5], [0.5, 1.0]]
    )
    np.testing.assert_allclose(
        build_propagation(graph, row_normalize=True).matrix.toarray(),
        [[2 / 3, 1 / 3], [1 / 3, 2 / 3]],
    )
    np.testing.assert_allclose(
        build_propagation(graph, self_loop=False).matrix.toarray(),
        [[0.0, 0.5], [0.5, 0.0]],
    )


def test_isolated_item_keeps_its_own_row() -> None:
    graph = project_cosine(_matrix([[0, 1], [1]], 3), strict=False)
    propagation = build_propagation(graph)
    assert propagation.row_support().tolist() == [2, 2, 1]
    assert propagation.matrix[2, 2] == 1.0
    empty = build_propagation(graph, self_loop=False, row_normalize=True)
    assert empty.row_support()[2] == 0


def _propagation(seed: int, n: int = 15) -> tuple[np.ndarray, PropagationMatrix]:
    rng = np.random.default_rng(seed)
    dense = rng.random((n, n)) * (rng.random((n, n)) < 0.3)
    np.fill_diagonal(dense, 0.0)
    return dense + np.eye(n), build_propagation(_graph(dense))


@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_propagate_matches_dense_power(depth: int) -> None:
    dense, propagation = _propagation(depth)
    x = np.random.default_rng(99).normal(size=(15, 4))
    out = propagate(propagation, ItemEmbeddings(x), depth)
    expected = np.linalg.matrix_power(dense, depth) @ x
    np.testing.assert_allclose(out.matrix, expected, atol=1e-9)
    array = propagate_array(propagation, x, depth)
    np.testing.assert_allclose(array, out.matrix, atol=1e-12)


def test_propagate_depth_zero_is_identity() -> None:
    _, propagation = _propagation(1)
    embeddings = ItemEmbeddings(np.ones((15, 2)))
    assert propagate(propagation, embeddings, 0) is embeddings


def test_propagate_is_linear() -> None:
    _, propagation = _propagation(2)
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=(15, 3)), rng.normal(size=(15, 3))
    combined = propagate(propagation, ItemEmbeddings(2.0 * x - 0.5 * y), 2).matrix
    x_out = propagate(propagation, ItemEmbeddings(x), 2).matrix
    y_out = propagate(propagation, ItemEmbeddings(y), 2).matrix
    separate = 2.0 * x_out - 0.5 * y_out
    np.testing.assert_allclose(combined, separate, atol=1e-10)


def test_transpose_is_the_adjoint() -> None:
    _, propagation = _propagation(3)
    rng = np.random.default_rng(6)
    x, g = rng.normal(size=(15, 4)), rng.normal(size=(15, 4))
    forward = np.sum(propagate_array(propagation, x, 3) * g)
    backward = np.sum(x * propagate_transpose(propagation, g, 3))
    assert forward == pytest.approx(backward, rel=1e-10)


def test_transpose_is_built_once() -> None:
    dense, propagation = _propagation(7)
    first = propagation.transposed()
    assert propagation.transposed() is first
    np.testing.assert_array_equal(first.toarray(), dense.T)
    g = np.random.default_rng(8).normal(size=(15, 2))
    propagate_transpose(propagation, g, 2)
    assert propagation.transposed() is first


def test_propagate_checks_shapes() -> None:
    _, propagation = _propagation(4)
    with pytest.raises(DimensionMismatchError):
        propagate(propagation, ItemEmbeddings(np.ones((3, 2))), 1)
    with pytest.raises(ValueError):
        propagate(propagation, ItemEmbeddings(np.ones((15, 2))), -1)


def test_edge_export(tmp_path: Path) -> None:
    graph = project_cosine(_matrix([[0, 1], [0], [1, 2]], 3))
    path = tmp_path / "edges.tsv"
    written = export_edge_list(graph, ["a", "b", "c"], path)
    frame = pd.read_csv(path, sep="\t")
    assert written == graph.weights.nnz == len(frame)
    assert list(frame.columns) == ["source", "target", "weight"]
    assert set(zip(frame["source"], frame["target"], strict=True)) == {
        ("a", "b"),
        ("b", "a"),
        ("b", "c"),
        ("c", "b"),
    }


def test_propagation_edges_drop_self_loops() -> None:
    graph = _graph(np.array([[0.0, 0.5], [0.25, 0.0]]))
    edges = propagation_edges(build_propagation(graph))
    np.testing.assert_array_equal(edges.weights.toarray(), graph.weights.toarray())
