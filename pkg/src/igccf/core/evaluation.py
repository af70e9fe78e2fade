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

"""Ranking metrics and the transductive / inductive evaluation protocols."""

from __future__ import annotations

import logging
import math
from functools import cache
from typing import TYPE_CHECKING

import numpy as np

from igccf.core.data import merge_matrices
from igccf.core.embedding import embed_all_users, score_items, weighted_interactions
from igccf.core.errors import DimensionMismatchError
from igccf.core.models import (
    INDUCTIVE,
    TRANSDUCTIVE,
    CutoffMetrics,
    DatasetSplit,
    InteractionMatrix,
    MetricsReport,
    TrainedModel,
    UserHoldoutSplit,
)
from igccf.core.utils import top_n_indices

if TYPE_CHECKING:
    from collections.abc import Collection, Iterable, Sequence

    from igccf.core.config import ProtocolName

    type Ranking = Sequence[int] | np.ndarray

logger = logging.getLogger(__name__)

_USER_BLOCK = 1024


@cache
def _discounts(n: int) -> tuple[float, ...]:
    """``1 / log2(r + 1)`` for ranks ``r = 1..n``."""
    return tuple(1.0 / math.log2(r + 1) for r in range(1, n + 1))


def _accumulate(values: Iterable[float]) -> float:
    # rank order, one addition at a time
    total = 0.0
    for v in values:
        total += v
    return total


def _hits(ranked: Ranking, relevant: Collection[int], n: int) -> np.ndarray:
    top = np.asarray(ranked, dtype=np.int64)[:n]
    return np.isin(top, np.fromiter(relevant, dtype=np.int64, count=len(relevant)))


def recall_at_n(ranked: Ranking, relevant: Collection[int], n: int) -> float:
    """``|top-n & relevant| / |relevant|``.

    Raises
    ------
    ValueError
        If ``n < 1`` or ``relevant`` is empty.
    """
    _check(relevant, n)
    return float(np.count_nonzero(_hits(ranked, relevant, n)) / len(relevant))


def ndcg_at_n(ranked: Ranking, relevant: Collection[int], n: int) -> float:
    """Binary-relevance NDCG with a ``log2(r + 1)`` discount.

    The ideal DCG places ``min(n, |relevant|)`` relevant items at the top.

    Raises
    ------
    ValueError
        If ``n < 1`` or ``relevant`` is empty.
    """
    _check(relevant, n)
    hits = _hits(ranked, relevant, n)
    discounts = _discounts(n)
    dcg = _accumulate(discounts[r] for r in np.flatnonzero(hits).tolist())
    idcg = _accumulate(discounts[: min(n, len(relevant))])
    return dcg / idcg


def _check(relevant: Collection[int], n: int) -> None:
    if n < 1:
        msg = f"cutoff must be >= 1, got {n}"
        raise ValueError(msg)
    if not relevant:
        msg = "relevant set is empty; such users are skipped before scoring"
        raise ValueError(msg)


def evaluate_holdout(
    model: TrainedModel,
    profiles: InteractionMatrix,
    targets: InteractionMatrix,
    cutoffs: Sequence[int],
    *,
    protocol: ProtocolName,
) -> MetricsReport:
    """Embed users from ``profiles`` and score the ranking against ``targets``.

    Profile items are never ranked. Users without targets are ignored; users
    with targets but an empty profile are counted as skipped.

    Parameters
    ----------
    model:
        Trained model sharing the item universe of both matrices.
    profiles:
        Interactions each user is embedded from (and which are excluded).
    targets:
        Held-out interactions of the same users, in the same row order.
    cutoffs:
        Ranking cutoffs ``N``.
    protocol:
        Tag stored on the report.
    """
    if profiles.csr.shape != targets.csr.shape or profiles.n_items != model.n_items:
        msg = (
            f"profiles {profiles.csr.shape}, targets {targets.csr.shape} and a model "
            f"of {model.n_items} items do not line up"
        )
        raise DimensionMismatchError(msg)
    cutoffs = tuple(sorted(set(cutoffs)))
    if not cutoffs or cutoffs[0] < 1:
        msg = f"cutoffs must be positive, got {cutoffs}"
        raise ValueError(msg)
    has_target = targets.user_degrees() > 0
    has_profile = profiles.user_degrees() > 0
    users = np.flatnonzero(has_target & has_profile)
    skipped = int(np.count_nonzero(has_target & ~has_profile))
    if skipped:
        logger.warning(
            "users_skipped_empty_profile",
            extra={"count": skipped, "protocol": protocol},
        )

    embeddings = model.convolved_items()
    weighted = weighted_interactions(profiles, model.config.weighting)
    longest = cutoffs[-1]
    recall = np.zeros((users.size, len(cutoffs)))
    ndcg = np.zeros((users.size, len(cutoffs)))
    for start in range(0, users.size, _USER_BLOCK):
        block = users[start : start + _USER_BLOCK]
        scores = score_items(embed_all_users(weighted[block], embeddings), embeddings)
        for offset, (u, row) in enumerate(zip(block, scores, strict=True)):
            ranked = top_n_indices(row, longest, profiles.profile(u))
            relevant = set(targets.profile(u).tolist())
            for c, n in enumerate(cutoffs):
                recall[start + offset, c] = recall_at_n(ranked, relevant, n)
                ndcg[start + offset, c] = ndcg_at_n(ranked, relevant, n)

    metrics = {
        n: CutoffMetrics(
            float(recall[:, c].mean()) if users.size else 0.0,
            float(ndcg[:, c].mean()) if users.size else 0.0,
        )
        for c, n in enumerate(cutoffs)
    }
    logger.debug(
        "evaluation_finished", extra={"protocol": protocol, "users": int(users.size)}
    )
    return MetricsReport(metrics, int(users.size), protocol, skipped)


def evaluate_transductive(
    model: TrainedModel, split: DatasetSplit, cutoffs: Sequence[int] = (5, 20)
) -> MetricsReport:
    """Rank for every test user with their train and validation items excluded."""
    known = merge_matrices(split.train, split.validation)
    return evaluate_holdout(model, known, split.test, cutoffs, protocol=TRANSDUCTIVE)


def evaluate_inductive(
    model: TrainedModel, holdout: UserHoldoutSplit, cutoffs: Sequence[int] = (5, 20)
) -> MetricsReport:
    """Embed each unseen user from their build profile and score the rest."""
    return evaluate_holdout(
        model, holdout.unseen_build, holdout.unseen_eval, cutoffs, protocol=INDUCTIVE
    )
