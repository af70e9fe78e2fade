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

"""Core models module."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Final

import numpy as np
import pandas as pd
import scipy.sparse as sp
from cachetools import LRUCache, cachedmethod

from igccf.core.config import parse_metric
from igccf.core.errors import DimensionMismatchError

if TYPE_CHECKING:
    from collections.abc import Iterator

    from igccf.core.config import ProtocolName, TrainConfig

TRANSDUCTIVE: Final[str] = "transductive"
INDUCTIVE: Final[str] = "inductive"


@dataclass(slots=True, frozen=True)
class InteractionRecord:
    """One raw interaction.

    Parameters
    ----------
    user_key:
        Opaque, non-empty user identifier.
    item_key:
        Opaque, non-empty item identifier.
    rating:
        Explicit rating when the source has one.
    timestamp:
        Seconds since the epoch when the source has one.
    """

    user_key: str
    item_key: str
    rating: float | None = None
    timestamp: int | None = None

    def __post_init__(self) -> None:
        """Reject empty keys."""
        if not self.user_key or not self.item_key:
            msg = "user_key and item_key must be non-empty"
            raise ValueError(msg)


@dataclass(slots=True)
class InteractionMatrix:
    """Sparse binary user x item matrix with stable key maps.

    Parameters
    ----------
    csr:
        CSR matrix of shape ``(len(user_keys), len(item_keys))``; every stored
        value is 1 and column indices are strictly increasing per row.
    user_keys:
        External user key of each row.
    item_keys:
        External item key of each column.
    """

    csr: sp.csr_matrix
    user_keys: tuple[str, ...]
    item_keys: tuple[str, ...]
    _user_lookup: dict[str, int] | None = field(default=None, init=False, repr=False)
    _item_lookup: dict[str, int] | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        """Canonicalise the matrix and check the invariants."""
        csr = sp.csr_matrix(self.csr, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        if csr.shape != (len(self.user_keys), len(self.item_keys)):
            msg = (
                f"matrix shape {csr.shape} does not match "
                f"{len(self.user_keys)} users x {len(self.item_keys)} items"
            )
            raise DimensionMismatchError(msg)
        if csr.nnz and not np.all(csr.data == 1.0):
            msg = "interaction matrix must be binary"
            raise ValueError(msg)
        self.csr = csr

    @property
    def n_users(self) -> int:
        """Number of users ``U``."""
        return self.csr.shape[0]

    @property
    def n_items(self) -> int:
        """Number of items ``I``."""
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        """Number of stored interactions."""
        return int(self.csr.nnz)

    def profile(self, user: int) -> np.ndarray:
        """Return the sorted item indices of ``user``."""
        start, end = self.csr.indptr[user], self.csr.indptr[user + 1]
        return self.csr.indices[start:end]

    def user_degrees(self) -> np.ndarray:
        """Interactions per user."""
        return np.diff(self.csr.indptr)

    def item_degrees(self) -> np.ndarray:
        """Interactions per item."""
        return np.bincount(self.csr.indices, minlength=self.n_items)

    def user_index(self, key: str) -> int:
        """Map a user key to its row index.

        Raises
        ------
        KeyError
            If the key is unknown.
        """
        if self._user_lookup is None:
            self._user_lookup = {k: i for i, k in enumerate(self.user_keys)}
        return self._user_lookup[key]

    def item_index(self, key: str) -> int:
        """Map an item key to its column index.

        Raises
        ------
        KeyError
            If the key is unknown.
        """
        if self._item_lookup is None:
            self._item_lookup = {k: i for i, k in enumerate(self.item_keys)}
        return self._item_lookup[key]

    def cells(self) -> set[tuple[int, int]]:
        """Return the set of stored ``(user, item)`` cells."""
        coo = self.csr.tocoo()
        return set(zip(coo.row.tolist(), coo.col.tolist(), strict=True))


@dataclass(slots=True)
class DatasetSplit:
    """Per-user train / validation / test partition sharing one index map."""

    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    seed: int
    train_frac: float = 0.8
    val_frac: float = 0.1


@dataclass(slots=True)
class UserHoldoutSplit:
    """Seen / unseen user partition for inductive evaluation.

    Parameters
    ----------
    train_users:
        Seen users with their full profiles.
    unseen_build:
        Unseen users, the part of each profile used to embed them.
    unseen_eval:
        Unseen users, the held-out part of each profile.
    seed:
        Seed the partition was drawn with.
    """

    train_users: InteractionMatrix
    unseen_build: InteractionMatrix
    unseen_eval: InteractionMatrix
    seed: int
    unseen_frac: float = 0.1
    profile_build_frac: float = 0.9


@dataclass(slots=True)
class ItemGraph:
    """Weighted item-item graph from the one-mode projection.

    Parameters
    ----------
    weights:
        ``I x I`` CSR matrix with weights in ``[0, 1]``, no stored zeros and an
        empty diagonal. Row ``i`` lists the neighbours item ``i`` aggregates from.
    pruned_k:
        Neighbours kept per row when pruned, otherwise ``None``.
    """

    weights: sp.csr_matrix
    pruned_k: int | None = None

    @property
    def n_items(self) -> int:
        """Number of item nodes."""
        return self.weights.shape[0]

    def neighbours(self, item: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(indices, weights)`` of the retained neighbours of ``item``."""
        start, end = self.weights.indptr[item], self.weights.indptr[item + 1]
        return self.weights.indices[start:end], self.weights.data[start:end]


@dataclass(slots=True)
class PropagationMatrix:
    """Sparse ``I x I`` aggregation matrix ``P`` used by the convolution."""

    matrix: sp.csr_matrix
    _cache: LRUCache = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Prepare the transpose cache."""
        self._cache = LRUCache(maxsize=1)

    @property
    def n_items(self) -> int:
        """Number of items."""
        return self.matrix.shape[0]

    def row_support(self) -> np.ndarray:
        """Stored entries per row."""
        return np.diff(self.matrix.indptr)

    @cachedmethod(lambda self: self._cache)
    def transposed(self) -> sp.csr_matrix:
        """Return ``P^T`` in CSR form, built once per instance."""
        return self.matrix.T.tocsr()


@dataclass(slots=True)
class ItemEmbeddings:
    """Dense ``I x d`` item embedding matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        """Check shape and finiteness."""
        if self.matrix.ndim != 2:
            msg = f"item embeddings must be 2-D, got shape {self.matrix.shape}"
            raise DimensionMismatchError(msg)
        if not np.all(np.isfinite(self.matrix)):
            msg = "item embeddings contain non-finite values"
            raise ValueError(msg)

    @property
    def n_items(self) -> int:
        """Number of rows."""
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        """Embedding dimension ``d``."""
        return self.matrix.shape[1]


@dataclass(slots=True)
class UserEmbedding:
    """Embedding of one user built from a profile.

    Parameters
    ----------
    vector:
        Length ``d`` embedding.
    source_profile_size:
        Profile entries that contributed; zero means the vector is zero.
    """

    vector: np.ndarray
    source_profile_size: int

    @property
    def is_empty(self) -> bool:
        """True when built from an empty profile."""
        return self.source_profile_size == 0


@dataclass(slots=True, eq=False)
class TrainedModel:
    """Everything needed to embed and score any user.

    Only ``item_embeddings`` (``X^(0)``) is learnt; the convolved view is
    derived on demand and cached once per instance.

    Parameters
    ----------
    item_embeddings:
        Trainable item embeddings ``X^(0)``.
    propagation:
        Propagation matrix ``P``.
    config:
        Hyperparameters the model was trained with.
    item_keys:
        External key of every item row.
    """

    item_embeddings: ItemEmbeddings
    propagation: PropagationMatrix
    config: TrainConfig
    item_keys: tuple[str, ...]
    _cache: LRUCache = field(init=False, repr=False)
    _lock: threading.Lock = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Validate dimensions and prepare the convolution cache."""
        n = self.item_embeddings.n_items
        if self.propagation.n_items != n or len(self.item_keys) != n:
            msg = (
                f"model parts disagree: {n} embeddings, "
                f"{self.propagation.n_items} propagation rows, "
                f"{len(self.item_keys)} keys"
            )
            raise DimensionMismatchError(msg)
        self._cache = LRUCache(maxsize=1)
        self._lock = threading.Lock()

    @property
    def depth(self) -> int:
        """Convolution depth ``k``."""
        return self.config.depth

    @property
    def n_items(self) -> int:
        """Catalog size."""
        return self.item_embeddings.n_items

    @cachedmethod(lambda self: self._cache, lock=lambda self: self._lock)
    def convolved_items(self) -> ItemEmbeddings:
        """Return ``X^(k) = P^k X^(0)``."""
        from igccf.core.graph import propagate

        return propagate(self.propagation, self.item_embeddings, self.depth)


@dataclass(slots=True, frozen=True)
class Triple:
    """A BPR training triple ``(u, i+, i-)``."""

    user: int
    positive: int
    negative: int


@dataclass(slots=True)
class TripleBatch:
    """Column-oriented batch of triples."""

    users: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def __len__(self) -> int:
        """Number of triples."""
        return len(self.users)

    def __iter__(self) -> Iterator[Triple]:
        """Yield the triples one by one."""
        users, positives, negatives = (
            self.users.tolist(),
            self.positives.tolist(),
            self.negatives.tolist(),
        )
        for u, i, j in zip(users, positives, negatives, strict=True):
            yield Triple(u, i, j)


@dataclass(slots=True)
class AdamState:
    """Adam moment estimates for ``X^(0)``.

    Parameters
    ----------
    first_moment, second_moment:
        Arrays shaped like the parameters.
    step:
        Updates applied so far.
    """

    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> AdamState:
        """Return a fresh state for ``params``."""
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


@dataclass(slots=True)
class EpochRecord:
    """Loss and validation metrics of one epoch."""

    epoch: int
    loss: float
    seconds: float
    validation: dict[str, float] = field(default_factory=dict)


@dataclass(slots=True)
class TrainingHistory:
    """Per-epoch training record and the selected epoch."""

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    def to_frame(self) -> pd.DataFrame:
        """Return one row per epoch (epoch, loss, seconds, metric columns)."""
        rows = [
            {"epoch": r.epoch, "loss": r.loss, "seconds": r.seconds, **r.validation}
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=_history_columns(self.records))


def _history_columns(records: list[EpochRecord]) -> list[str]:
    metric_names: list[str] = []
    for r in records:
        for name in r.validation:
            if name not in metric_names:
                metric_names.append(name)
    return ["epoch", "loss", "seconds", *metric_names]


@dataclass(slots=True, frozen=True)
class CutoffMetrics:
    """Mean metrics at one cutoff."""

    recall: float
    ndcg: float


@dataclass(slots=True)
class MetricsReport:
    """Ranking metrics averaged over evaluated users.

    Parameters
    ----------
    metrics:
        Cutoff ``N`` to mean Recall@N / NDCG@N.
    n_users_evaluated:
        Users with at least one relevant item.
    protocol:
        ``"transductive"`` or ``"inductive"``.
    n_users_skipped:
        Users that could not be evaluated (e.g. empty build profile).
    """

    metrics: dict[int, CutoffMetrics]
    n_users_evaluated: int
    protocol: ProtocolName
    n_users_skipped: int = 0

    @property
    def cutoffs(self) -> tuple[int, ...]:
        """Cutoffs in ascending order."""
        return tuple(sorted(self.metrics))

    def recall(self, n: int) -> float:
        """Mean Recall@n."""
        return self.metrics[n].recall

    def ndcg(self, n: int) -> float:
        """Mean NDCG@n."""
        return self.metrics[n].ndcg

    def metric(self, name: str) -> float:
        """Look up a metric by name, e.g. ``"ndcg@20"``."""
        kind, n = parse_metric(name)
        return self.ndcg(n) if kind == "ndcg" else self.recall(n)

    def as_dict(self) -> dict[str, float]:
        """Flatten to ``{"recall@5": ..., "ndcg@5": ...}``."""
        out: dict[str, float] = {}
        for n in self.cutoffs:
            out[f"recall@{n}"] = self.metrics[n].recall
            out[f"ndcg@{n}"] = self.metrics[n].ndcg
        return out

    def to_frame(self) -> pd.DataFrame:
        """One row per cutoff."""
        return pd.DataFrame(
            [
                {
                    "protocol": self.protocol,
                    "cutoff": n,
                    "recall": self.metrics[n].recall,
                    "ndcg": self.metrics[n].ndcg,
                    "users": self.n_users_evaluated,
                }
                for n in self.cutoffs
            ],
            columns=["protocol", "cutoff", "recall", "ndcg", "users"],
        )


@dataclass(slots=True)
class SweepPoint:
    """One trained-and-evaluated configuration of a sweep."""

    value: object
    seed: int
    report: MetricsReport
    train_seconds: float


@dataclass(slots=True)
class SweepResult:
    """Outcome of a one-parameter sweep.

    Parameters
    ----------
    parameter:
        Swept parameter name.
    grid:
        Values in sweep order.
    points:
        One entry per value, seed and evaluated user group.
    """

    parameter: str
    grid: list[object]
    points: list[SweepPoint] = field(default_factory=list)

    def reports(
        self, value: object, protocol: str | None = None
    ) -> list[MetricsReport]:
        """Reports of ``value`` (optionally one protocol) across seeds."""
        return [
            p.report
            for p in self.points
            if p.value == value and (protocol is None or p.report.protocol == protocol)
        ]

    def mean_metric(
        self, value: object, metric: str, protocol: str | None = None
    ) -> float:
        """Metric averaged over seeds for one grid value."""
        values = [r.metric(metric) for r in self.reports(value, protocol)]
        return float(np.mean(values)) if values else float("nan")

    def to_frame(self) -> pd.DataFrame:
        """Long-format table, one row per point and metric."""
        rows = [
            {
                "parameter": self.parameter,
                "value": "full" if p.value is None else p.value,
                "seed": p.seed,
                "protocol": p.report.protocol,
                "metric": name,
                "score": score,
                "train_seconds": p.train_seconds,
            }
            for p in self.points
            for name, score in p.report.as_dict().items()
        ]
        return pd.DataFrame(
            rows,
            columns=[
                "parameter",
                "value",
                "seed",
                "protocol",
                "metric",
                "score",
                "train_seconds",
            ],
        )
