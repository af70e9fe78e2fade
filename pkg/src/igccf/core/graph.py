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

"""Item graph construction and linear propagation.

The bipartite user-item graph is projected onto the items with cosine
weights, optionally pruned to the strongest ``K`` neighbours per item, and
turned into the propagation matrix ``P`` used to convolve item embeddings.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import scipy.sparse as sp

from igccf.core.errors import DimensionMismatchError, GraphError
from igccf.core.models import (
    InteractionMatrix,
    ItemEmbeddings,
    ItemGraph,
    PropagationMatrix,
)

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

logger = logging.getLogger(__name__)


def _item_degrees(matrix: InteractionMatrix, *, strict: bool) -> np.ndarray:
    degrees = matrix.item_degrees().astype(np.float64)
    empty = np.flatnonzero(degrees == 0)
    if empty.size:
        if strict:
            msg = (
                f"{empty.size} item columns have no interactions "
                f"(first: {matrix.item_keys[empty[0]]!r}); cosine weights are undefined"
            )
            raise GraphError(msg)
        logger.warning("isolated_items", extra={"count": int(empty.size)})
    return degrees


def _cosine_block(
    cooccurrence: sp.csr_matrix, degrees: np.ndarray, row_offset: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Turn a block of co-occurrence rows into off-diagonal cosine weights."""
    coo = cooccurrence.tocoo()
    rows = coo.row.astype(np.int64) + row_offset
    cols = coo.col.astype(np.int64)
    off_diagonal = (rows != cols) & (coo.data > 0)
    rows, cols, counts = rows[off_diagonal], cols[off_diagonal], coo.data[off_diagonal]
    # binary columns: r_i . r_j = co-occurrences, ||r_i||^2 = degree
    weights = np.minimum(counts / np.sqrt(degrees[rows] * degrees[cols]), 1.0)
    return rows, cols, weights


def project_cosine(matrix: InteractionMatrix, *, strict: bool = True) -> ItemGraph:
    """Project ``R`` onto the items with cosine edge weights.

    Items sharing at least one user are connected with weight
    ``r_i . r_j / (||r_i|| ||r_j||)``; the result is symmetric and has no
    diagonal.

    Parameters
    ----------
    matrix:
        Binary interaction matrix.
    strict:
        Raise on empty item columns. When False they become isolated nodes.

    Raises
    ------
    GraphError
        If ``strict`` and an item column is empty.
    """
    degrees = _item_degrees(matrix, strict=strict)
    csr = matrix.csr
    cooccurrence = (csr.T @ csr).tocsr()
    rows, cols, weights = _cosine_block(cooccurrence, degrees, 0)
    n = matrix.n_items
    weights_csr = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    weights_csr.sort_indices()
    logger.debug("cosine_projected", extra={"items": n, "edges": int(weights_csr.nnz)})
    return ItemGraph(weights_csr)


def _prune_rows(
    rows: np.ndarray, cols: np.ndarray, weights: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Keep the ``k`` heaviest entries of every row, lower column on ties."""
    # sort by row, then weight descending, then column ascending
    order = np.lexsort((cols, -weights, rows))
    rows, cols, weights = rows[order], cols[order], weights[order]
    if rows.size == 0:
        return rows, cols, weights
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    run_lengths = np.diff(np.r_[starts, rows.size])
    rank = np.arange(rows.size) - np.repeat(starts, run_lengths)
    keep = rank < k
    return rows[keep], cols[keep], weights[keep]


def topk_prune(graph: ItemGraph, k: int) -> ItemGraph:
    """Keep, for every item, only its ``k`` strongest off-diagonal edges.

    Ties are broken in favour of the lower neighbour index. Pruning is done
    per row, so the result may be asymmetric; row ``i`` lists the neighbours
    item ``i`` aggregates from.

    Raises
    ------
    ValueError
        If ``k < 1``.
    """
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValueError(msg)
    coo = graph.weights.tocoo()
    rows, cols, weights = coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
    keep = rows != cols
    rows, cols, weights = _prune_rows(rows[keep], cols[keep], weights[keep], k)
    n = graph.n_items
    pruned = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    pruned.sort_indices()
    return ItemGraph(pruned, pruned_k=k)


def project_cosine_topk(
    matrix: InteractionMatrix, k: int, *, block_size: int = 2048, strict: bool = True
) -> ItemGraph:
    """Cosine projection pruned to ``k`` neighbours, one block of items at a time.

    Equivalent to ``topk_prune(project_cosine(matrix), k)`` while only one
    ``block_size x I`` slice of the similarity matrix is alive at once.
    """
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValueError(msg)
    degrees = _item_degrees(matrix, strict=strict)
    csr = matrix.csr
    item_rows = csr.T.tocsr()
    n = matrix.n_items
    kept: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for start in range(0, n, block_size):
        block = (item_rows[start : start + block_size] @ csr).tocsr()
        kept.append(_prune_rows(*_cosine_block(block, degrees, start), k))
    rows = np.concatenate([r for r, _, _ in kept])
    cols = np.concatenate([c for _, c, _ in kept])
    weights = np.concatenate([w for _, _, w in kept])
    pruned = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    pruned.sort_indices()
    logger.debug(
        "cosine_projected_topk", extra={"items": n, "k": k, "edges": int(pruned.nnz)}
    )
    return ItemGraph(pruned, pruned_k=k)


def build_item_graph(
    matrix: InteractionMatrix, top_k: int | None, *, strict: bool = True
) -> ItemGraph:
    """Project ``matrix`` and prune it when ``top_k`` is set."""
    if top_k is None:
        return project_cosine(matrix, strict=strict)
    return project_cosine_topk(matrix, top_k, strict=strict)


def build_propagation(
    graph: ItemGraph, *, self_loop: bool = True, row_normalize: bool = False
) -> PropagationMatrix:
    """Build ``P = W + I`` from the (pruned) item graph.

    Parameters
    ----------
    graph:
        Item graph.
    self_loop:
        Add a unit self-loop to every row so an item keeps its own signal.
    row_normalize:
        Divide each row by its sum (rows summing to zero are left empty).
    """
    n = graph.n_items
    matrix = graph.weights.copy()
    if self_loop:
        matrix = matrix + sp.identity(n, format="csr")
    matrix = sp.csr_matrix(matrix)
    if row_normalize:
        sums = np.asarray(matrix.sum(axis=1)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        matrix = sp.csr_matrix(sp.diags(scale) @ matrix)
    matrix.sort_indices()
    return PropagationMatrix(matrix)


def _check_rows(propagation: PropagationMatrix, n_rows: int, depth: int) -> None:
    if depth < 0:
        msg = f"depth must be >= 0, got {depth}"
        raise ValueError(msg)
    if propagation.n_items != n_rows:
        msg = (
            f"propagation matrix has {propagation.n_items} items, "
            f"embeddings have {n_rows} rows"
        )
        raise DimensionMismatchError(msg)


def propagate(
    propagation: PropagationMatrix, embeddings: ItemEmbeddings, depth: int
) -> ItemEmbeddings:
    """Return ``P^depth X`` by repeated one-hop aggregation.

    ``depth == 0`` returns ``embeddings`` itself.

    Raises
    ------
    DimensionMismatchError
        If ``P`` and ``X`` disagree on the number of items.
    """
    _check_rows(propagation, embeddings.n_items, depth)
    if depth == 0:
        return embeddings
    out = embeddings.matrix
    for _ in range(depth):
        out = propagation.matrix @ out
    return ItemEmbeddings(np.asarray(out))


def propagate_array(
    propagation: PropagationMatrix, x: np.ndarray, depth: int
) -> np.ndarray:
    """Array form of `propagate`, without the finiteness check."""
    _check_rows(propagation, x.shape[0], depth)
    for _ in range(depth):
        x = propagation.matrix @ x
    return np.asarray(x)


def propagate_transpose(
    propagation: PropagationMatrix, grad: np.ndarray, depth: int
) -> np.ndarray:
    """Return ``(P^T)^depth G``, the adjoint of `propagate`."""
    _check_rows(propagation, grad.shape[0], depth)
    transposed = propagation.transposed()
    for _ in range(depth):
        grad = transposed @ grad
    return np.asarray(grad)


def export_edge_list(
    graph: ItemGraph, item_keys: Sequence[str], path: Path, *, delimiter: str = "\t"
) -> int:
    """Write ``source, target, weight`` rows for inspection.

    Returns
    -------
    int
        Number of edges written.
    """
    coo = graph.weights.tocoo()
    keys = np.asarray(item_keys, dtype=object)
    frame = pd.DataFrame(
        {"source": keys[coo.row], "target": keys[coo.col], "weight": coo.data}
    )
    frame.to_csv(path, sep=delimiter, index=False)
    return len(frame)


def propagation_edges(propagation: PropagationMatrix) -> ItemGraph:
    """Return the off-diagonal aggregation weights of ``P`` as an item graph."""
    coo = propagation.matrix.tocoo()
    keep = coo.row != coo.col
    n = propagation.n_items
    weights = sp.csr_matrix(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=(n, n)
    )
    weights.sort_indices()
    return ItemGraph(weights)
