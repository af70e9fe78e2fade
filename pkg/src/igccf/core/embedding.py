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

"""User embeddings, scoring and ranking on top of a trained model.

A user is never a parameter: their embedding is the weighted sum of the
convolved embeddings of the items in their profile, so any profile (seen at
training time or not) can be embedded and ranked the same way.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from igccf.core.errors import DimensionMismatchError
from igccf.core.models import (
    InteractionMatrix,
    ItemEmbeddings,
    TrainedModel,
    UserEmbedding,
)
from igccf.core.utils import top_n_indices

if TYPE_CHECKING:
    from collections.abc import Sequence

    from igccf.core.config import Weighting

logger = logging.getLogger(__name__)


def convolved_items(model: TrainedModel) -> ItemEmbeddings:
    """Return ``X^(k) = P^k X^(0)`` for ``model`` (cached per model)."""
    return model.convolved_items()


def profile_weights(size: int, weighting: Weighting = "uniform") -> np.ndarray:
    """Return the ``lambda_ui`` of a profile with ``size`` entries."""
    if weighting == "mean" and size:
        return np.full(size, 1.0 / size)
    return np.ones(size)


def weighted_interactions(
    matrix: InteractionMatrix, weighting: Weighting = "uniform"
) -> sp.csr_matrix:
    """Return ``R (.) Lambda`` for the chosen weighting scheme.

    ``"uniform"`` keeps every weight at 1; ``"mean"`` divides each row by the
    user's profile size.
    """
    weighted = matrix.csr.copy()
    if weighting == "mean":
        degrees = matrix.user_degrees()
        scale = np.divide(1.0, degrees, out=np.zeros(degrees.shape), where=degrees > 0)
        weighted.data = np.repeat(scale, degrees)
    return weighted


def _profile_row(items: np.ndarray, weights: np.ndarray, n_items: int) -> sp.csr_matrix:
    row = sp.csr_matrix(
        (weights, (np.zeros(items.size, dtype=np.int64), items)), shape=(1, n_items)
    )
    row.sum_duplicates()
    row.sort_indices()
    return row


def embed_user(
    profile: Sequence[int] | np.ndarray,
    embeddings: ItemEmbeddings,
    weights: Sequence[float] | np.ndarray | None = None,
) -> UserEmbedding:
    """Embed one user as ``sum_i lambda_ui x_i`` over their profile.

    The sum runs in ascending item order, the same order `embed_all_users`
    uses, so both paths give bit-identical vectors for the same profile.

    Parameters
    ----------
    profile:
        Item indices of the profile.
    embeddings:
        Item embeddings to aggregate, normally the convolved ``X^(k)``.
    weights:
        One weight per profile entry; all ones when omitted.

    Returns
    -------
    UserEmbedding
        Zero vector (with a warning) for an empty profile.

    Raises
    ------
    IndexError
        If a profile index is outside the catalog.
    DimensionMismatchError
        If ``weights`` and ``profile`` differ in length.
    """
    items = np.asarray(profile, dtype=np.int64).ravel()
    if items.size == 0:
        logger.warning("empty_profile_embedded", extra={"dim": embeddings.dim})
        return UserEmbedding(np.zeros(embeddings.dim), 0)
    if items.min() < 0 or items.max() >= embeddings.n_items:
        msg = (
            "profile item index out of range for a catalog of "
            f"{embeddings.n_items} items"
        )
        raise IndexError(msg)
    if weights is None:
        values = np.ones(items.size)
    else:
        values = np.asarray(weights, dtype=np.float64)
    if values.shape != items.shape:
        msg = f"{values.size} weights given for a profile of {items.size} items"
        raise DimensionMismatchError(msg)
    row = _profile_row(items, values, embeddings.n_items)
    vector = np.asarray(row @ embeddings.matrix).ravel()
    return UserEmbedding(vector, int(np.unique(items).size))


def embed_all_users(
    weighted: sp.csr_matrix | InteractionMatrix, embeddings: ItemEmbeddings
) -> np.ndarray:
    """Return ``U = (R (.) Lambda) X``, one embedding row per user.

    Raises
    ------
    DimensionMismatchError
        If the matrix has a different number of item columns than ``X`` rows.
    """
    if isinstance(weighted, InteractionMatrix):
        matrix = weighted.csr
    else:
        matrix = sp.csr_matrix(weighted)
    if matrix.shape[1] != embeddings.n_items:
        msg = (
            f"interaction matrix has {matrix.shape[1]} items, "
            f"embeddings have {embeddings.n_items}"
        )
        raise DimensionMismatchError(msg)
    matrix.sort_indices()
    return np.asarray(matrix @ embeddings.matrix)


def score(user: UserEmbedding | np.ndarray, item: np.ndarray) -> float:
    """Dot-product preference ``x_u . x_i``.

    Raises
    ------
    DimensionMismatchError
        If the two vectors differ in length.
    """
    vector = user.vector if isinstance(user, UserEmbedding) else np.asarray(user)
    if vector.shape != np.shape(item):
        msg = f"cannot score a {vector.shape} user against a {np.shape(item)} item"
        raise DimensionMismatchError(msg)
    return float(np.dot(vector, item))


def score_items(users: np.ndarray, embeddings: ItemEmbeddings) -> np.ndarray:
    """Score every item for a block of user embeddings (``users @ X.T``)."""
    return np.atleast_2d(users) @ embeddings.matrix.T


def recommend(
    model: TrainedModel,
    profile: Sequence[int] | np.ndarray,
    n: int,
    *,
    exclude_profile: bool = True,
    weights: Sequence[float] | np.ndarray | None = None,
) -> list[tuple[int, float]]:
    """Rank the catalog for a profile.

    Parameters
    ----------
    model:
        Trained model; the profile need not belong to a training user.
    profile:
        Item indices the user interacted with.
    n:
        Ranking length.
    exclude_profile:
        Drop profile items from the candidates.
    weights:
        Per-entry weights; defaults to the model's weighting scheme.

    Returns
    -------
    list[tuple[int, float]]
        ``(item index, score)`` sorted by score, lower index first on ties.
    """
    if n < 1:
        msg = f"n must be >= 1, got {n}"
        raise ValueError(msg)
    items = np.asarray(profile, dtype=np.int64).ravel()
    if weights is None:
        weights = profile_weights(items.size, model.config.weighting)
    embeddings = model.convolved_items()
    user = embed_user(items, embeddings, weights)
    scores = score_items(user.vector, embeddings)[0]
    top = top_n_indices(scores, n, items if exclude_profile else None)
    return [(int(i), float(scores[i])) for i in top]


def update_user_embedding(
    user: UserEmbedding, item: int, embeddings: ItemEmbeddings, weight: float = 1.0
) -> UserEmbedding:
    """Fold one new interaction into an existing embedding (``x_u + lambda x_i``)."""
    if not 0 <= item < embeddings.n_items:
        msg = f"item index {item} out of range for {embeddings.n_items} items"
        raise IndexError(msg)
    vector = user.vector + weight * embeddings.matrix[item]
    return UserEmbedding(vector, user.source_profile_size + 1)
