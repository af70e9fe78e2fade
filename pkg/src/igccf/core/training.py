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

"""BPR training of the item embeddings ``X^(0)``.

Only ``X^(0)`` is learnt. Each mini-batch samples ``(u, i+, i-)`` triples,
drops profile entries of the batch users, embeds them from the convolved
items and back-propagates the BPR loss through the profile sum and the
``k`` propagation steps before an Adam update.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_expit
from tqdm.auto import tqdm

from igccf.core.config import parse_metric
from igccf.core.embedding import weighted_interactions
from igccf.core.errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    TrainingDivergedError,
)
from igccf.core.evaluation import evaluate_holdout
from igccf.core.graph import (
    build_item_graph,
    build_propagation,
    propagate_array,
    propagate_transpose,
)
from igccf.core.models import (
    TRANSDUCTIVE,
    AdamState,
    EpochRecord,
    InteractionMatrix,
    ItemEmbeddings,
    PropagationMatrix,
    TrainedModel,
    TrainingHistory,
    TripleBatch,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from igccf.core.config import L2Scope, TrainConfig

logger = logging.getLogger(__name__)


def init_embeddings(n_items: int, dim: int, seed: int) -> ItemEmbeddings:
    """Glorot-uniform ``n_items x dim`` embeddings.

    Entries are drawn from ``U(-b, b)`` with ``b = sqrt(6 / (n_items + dim))``.
    """
    if n_items < 1 or dim < 1:
        msg = f"need n_items >= 1 and dim >= 1, got {n_items} and {dim}"
        raise ValueError(msg)
    bound = math.sqrt(6.0 / (n_items + dim))
    rng = np.random.default_rng(seed)
    return ItemEmbeddings(rng.uniform(-bound, bound, size=(n_items, dim)))


class TripleSampler:
    """Draws BPR triples from a fixed training matrix.

    Users whose profile is empty or covers the whole catalog cannot yield a
    triple and are skipped; the skip is logged once, when the sampler is built.
    """

    def __init__(self, train: InteractionMatrix) -> None:
        self._indptr = train.csr.indptr
        self._indices = train.csr.indices
        self._n_items = train.n_items
        degrees = train.user_degrees()
        self._degrees = degrees
        full = np.flatnonzero((degrees > 0) & (degrees >= train.n_items))
        if full.size:
            logger.warning(
                "user_skipped_full_catalog",
                extra={"count": int(full.size), "first_user": train.user_keys[full[0]]},
            )
        self.eligible = np.flatnonzero((degrees > 0) & (degrees < train.n_items))
        if self.eligible.size == 0:
            msg = "no user has both a positive and a negative item to sample"
            raise EmptyDatasetError(msg)
        # row-major cell keys, already sorted because CSR rows are sorted
        rows = np.repeat(np.arange(train.n_users, dtype=np.int64), degrees)
        self._positive_keys = rows * self._n_items + self._indices

    def is_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        """Vectorised membership test ``(u, i) in R+``."""
        keys = users.astype(np.int64) * self._n_items + items
        last = self._positive_keys.size - 1
        pos = np.minimum(np.searchsorted(self._positive_keys, keys), last)
        return self._positive_keys[pos] == keys

    def sample(self, size: int, rng: np.random.Generator) -> TripleBatch:
        """Draw ``size`` triples.

        Users are uniform over eligible users, positives uniform over the
        user's profile and negatives uniform over the catalog, redrawn until
        they fall outside the profile.
        """
        users = self.eligible[rng.integers(0, self.eligible.size, size=size)]
        offsets = rng.integers(0, self._degrees[users])
        positives = self._indices[self._indptr[users] + offsets].astype(np.int64)
        negatives = rng.integers(0, self._n_items, size=size)
        clash = self.is_positive(users, negatives)
        while clash.any():
            redraw = np.flatnonzero(clash)
            negatives[redraw] = rng.integers(0, self._n_items, size=redraw.size)
            clash[redraw] = self.is_positive(users[redraw], negatives[redraw])
        return TripleBatch(users.astype(np.int64), positives, negatives)


def sample_triples(
    train: InteractionMatrix, batch: int, rng: np.random.Generator
) -> TripleBatch:
    """Draw one batch of ``(u, i+, i-)`` triples from ``train``."""
    return TripleSampler(train).sample(batch, rng)


def apply_user_profile_dropout(
    profiles: sp.csr_matrix, p: float, rng: np.random.Generator, *, rescale: bool = True
) -> sp.csr_matrix:
    """Drop every profile entry independently with probability ``p``.

    Survivors are scaled by ``1 / (1 - p)`` when ``rescale`` is set. A
    non-empty row that loses every entry keeps one entry chosen uniformly.
    ``p == 0`` returns ``profiles`` untouched without drawing from ``rng``.
    """
    if not 0 <= p < 1:
        msg = f"dropout probability must be in [0, 1), got {p}"
        raise ValueError(msg)
    if p == 0:
        return profiles
    csr = sp.csr_matrix(profiles)
    n_rows = csr.shape[0]
    degrees = np.diff(csr.indptr)
    keep = rng.random(csr.nnz) >= p
    row_of = np.repeat(np.arange(n_rows), degrees)
    kept = np.bincount(row_of[keep], minlength=n_rows)
    wiped = np.flatnonzero((kept == 0) & (degrees > 0))
    if wiped.size:
        keep[csr.indptr[wiped] + rng.integers(0, degrees[wiped])] = True
    data = csr.data[keep]
    if rescale:
        data = data / (1.0 - p)
    counts = np.bincount(row_of[keep], minlength=n_rows)
    indptr = np.concatenate(([0], np.cumsum(counts)))
    return sp.csr_matrix((data, csr.indices[keep], indptr), shape=csr.shape)


def bpr_loss(
    pos_scores: np.ndarray,
    neg_scores: np.ndarray,
    params_in_batch: np.ndarray,
    l2_reg: float,
) -> float:
    """``sum -ln sigma(y+ - y-) + l2_reg * ||params||^2``.

    ``-ln sigma(x)`` is evaluated as ``-log_expit(x)``, which stays finite for
    large ``|x|``.
    """
    if np.shape(pos_scores) != np.shape(neg_scores):
        msg = (
            "score vectors differ in shape: "
            f"{np.shape(pos_scores)} vs {np.shape(neg_scores)}"
        )
        raise DimensionMismatchError(msg)
    margin = np.asarray(pos_scores, dtype=np.float64) - np.asarray(
        neg_scores, dtype=np.float64
    )
    penalty = l2_reg * np.sum(np.square(params_in_batch))
    return float(-np.sum(log_expit(margin)) + penalty)


@dataclass(slots=True)
class MaskedBatch:
    """A triple batch with the (dropped-out) profiles of its users.

    Parameters
    ----------
    profiles:
        ``B_u x I`` weighted profiles, one row per distinct batch user.
    user_rows:
        Row of ``profiles`` for each triple.
    positives, negatives:
        Item indices of each triple.
    """

    profiles: sp.csr_matrix
    user_rows: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def touched_items(self) -> np.ndarray:
        """Items whose ``X^(0)`` rows the batch reads directly."""
        read = (self.positives, self.negatives, self.profiles.indices)
        return np.unique(np.concatenate(read))


def bpr_loss_and_gradient(
    params: np.ndarray,
    propagation: PropagationMatrix,
    depth: int,
    batch: MaskedBatch,
    l2_reg: float,
    *,
    l2_scope: L2Scope = "batch",
) -> tuple[float, np.ndarray]:
    """Loss of one batch and its gradient with respect to ``X^(0)``.

    Returns
    -------
    tuple[float, np.ndarray]
        Summed batch loss and a dense gradient shaped like ``params``.
    """
    convolved = propagate_array(propagation, params, depth)
    users = np.asarray(batch.profiles @ convolved)
    x_users = users[batch.user_rows]
    x_pos = convolved[batch.positives]
    x_neg = convolved[batch.negatives]
    item_diff = x_pos - x_neg
    margin = np.einsum("bd,bd->b", x_users, item_diff)

    touched = batch.touched_items() if l2_scope == "batch" else slice(None)
    regularised = params[touched]
    loss = bpr_loss(margin, np.zeros_like(margin), regularised, l2_reg)

    # d(-ln sigma(m)) / dm
    upstream = -expit(-margin)[:, None]
    grad_users = np.zeros_like(users)
    np.add.at(grad_users, batch.user_rows, upstream * item_diff)
    grad_convolved = np.asarray(batch.profiles.T @ grad_users)
    np.add.at(grad_convolved, batch.positives, upstream * x_users)
    np.add.at(grad_convolved, batch.negatives, -upstream * x_users)

    grad = propagate_transpose(propagation, grad_convolved, depth)
    grad[touched] += 2.0 * l2_reg * regularised
    return loss, grad


@dataclass(slots=True)
class AdamOptimizer:
    """Adam with bias-corrected moments, updating parameters in place."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def from_config(cls, config: TrainConfig) -> AdamOptimizer:
        """Build the optimizer from training hyperparameters."""
        return cls(
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_epsilon,
        )

    def step(self, params: np.ndarray, grad: np.ndarray, state: AdamState) -> None:
        """Apply one update to ``params`` and advance ``state``."""
        state.step += 1
        state.first_moment *= self.beta1
        state.first_moment += (1.0 - self.beta1) * grad
        state.second_moment *= self.beta2
        state.second_moment += (1.0 - self.beta2) * np.square(grad)
        m_hat = state.first_moment / (1.0 - self.beta1**state.step)
        v_hat = state.second_moment / (1.0 - self.beta2**state.step)
        params -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def train_epoch(
    model: TrainedModel,
    train: InteractionMatrix,
    config: TrainConfig,
    adam_state: AdamState,
    rng: np.random.Generator,
    *,
    sampler: TripleSampler | None = None,
    epoch: int = 1,
) -> tuple[TrainedModel, float]:
    """Run ``ceil(|R+| / batch_size)`` mini-batches over ``train``.

    ``adam_state`` is advanced in place; the returned model holds a fresh copy
    of ``X^(0)`` so earlier snapshots stay valid.

    Returns
    -------
    tuple[TrainedModel, float]
        Updated model and the mean batch loss.

    Raises
    ------
    TrainingDivergedError
        If a batch loss is not finite.
    """
    if train.n_items != model.n_items:
        msg = f"training matrix has {train.n_items} items, model has {model.n_items}"
        raise DimensionMismatchError(msg)
    params = model.item_embeddings.matrix.copy()
    weighted = weighted_interactions(train, config.weighting)
    sampler = sampler or TripleSampler(train)
    optimizer = AdamOptimizer.from_config(config)
    n_batches = max(math.ceil(train.nnz / config.batch_size), 1)
    losses = np.empty(n_batches)
    for b in range(n_batches):
        triples = sampler.sample(config.batch_size, rng)
        users, user_rows = np.unique(triples.users, return_inverse=True)
        profiles = apply_user_profile_dropout(
            weighted[users], config.dropout, rng, rescale=config.dropout_rescale
        )
        batch = MaskedBatch(profiles, user_rows, triples.positives, triples.negatives)
        loss, grad = bpr_loss_and_gradient(
            params,
            model.propagation,
            config.depth,
            batch,
            config.l2_reg,
            l2_scope=config.l2_scope,
        )
        if not math.isfinite(loss):
            logger.error(
                "training_diverged",
                extra={"epoch": epoch, "batch": b, "loss": loss},
            )
            raise TrainingDivergedError(epoch, b, config.learning_rate)
        optimizer.step(params, grad, adam_state)
        losses[b] = loss
    updated = dataclasses.replace(model, item_embeddings=ItemEmbeddings(params))
    return updated, float(losses.mean())


def new_model(train: InteractionMatrix, config: TrainConfig) -> TrainedModel:
    """Build the graph of ``train`` and a freshly initialised model on it."""
    graph = build_item_graph(train, config.top_k, strict=False)
    propagation = build_propagation(
        graph, self_loop=config.self_loop, row_normalize=config.row_normalize
    )
    logger.info(
        "graph_built",
        extra={
            "items": graph.n_items,
            "edges": int(graph.weights.nnz),
            "top_k": config.top_k,
        },
    )
    embeddings = init_embeddings(train.n_items, config.embedding_dim, config.seed)
    return TrainedModel(embeddings, propagation, config, train.item_keys)


def fit(
    train: InteractionMatrix,
    validation: InteractionMatrix | None,
    config: TrainConfig,
    *,
    cutoffs: Sequence[int] = (5, 20),
    show_progress: bool = False,
    resume: tuple[TrainedModel, AdamState, int] | None = None,
    on_epoch: Callable[[int, TrainedModel, AdamState], None] | None = None,
) -> tuple[TrainedModel, TrainingHistory]:
    """Train until ``config.epochs`` or until validation stops improving.

    Parameters
    ----------
    train:
        Training interactions; defines the graph and the triples.
    validation:
        Held-out interactions of the same users, ranked with the training
        items excluded. ``None`` trains for the full epoch budget.
    config:
        Hyperparameters.
    cutoffs:
        Validation cutoffs; the early-stop metric's cutoff is always added.
    show_progress:
        Show a progress bar over epochs.
    resume:
        ``(model, adam_state, epochs_done)`` to continue from a checkpoint.
    on_epoch:
        Called after every epoch with the epoch number, the current model and
        the optimizer state.

    Returns
    -------
    tuple[TrainedModel, TrainingHistory]
        The model of the best validation epoch (the last one without
        validation) and the per-epoch history.
    """
    _, stop_n = parse_metric(config.early_stop_metric)
    eval_cutoffs = tuple(sorted({*cutoffs, stop_n}))
    if resume is None:
        model = new_model(train, config)
        adam_state = AdamState.zeros_like(model.item_embeddings.matrix)
        done = 0
    else:
        model, adam_state, done = resume
        if model.item_keys != train.item_keys:
            msg = "checkpoint was trained on a different item universe"
            raise DimensionMismatchError(msg)
        logger.info("training_resumed", extra={"epochs_done": done})
    rng = np.random.default_rng((config.seed, done))
    sampler = TripleSampler(train)
    history = TrainingHistory()
    best_model, best_score, stale = model, -math.inf, 0
    progress = tqdm(
        range(done + 1, config.epochs + 1),
        disable=not show_progress,
        desc="training",
        unit="epoch",
    )
    for epoch in progress:
        started = time.perf_counter()
        model, loss = train_epoch(
            model, train, config, adam_state, rng, sampler=sampler, epoch=epoch
        )
        seconds = time.perf_counter() - started
        metrics: dict[str, float] = {}
        current = -math.inf
        if validation is not None:
            report = evaluate_holdout(
                model, train, validation, eval_cutoffs, protocol=TRANSDUCTIVE
            )
            metrics = report.as_dict()
            current = report.metric(config.early_stop_metric)
        history.records.append(EpochRecord(epoch, loss, seconds, metrics))
        logger.info(
            "epoch_finished",
            extra={"epoch": epoch, "loss": loss, "seconds": seconds, **metrics},
        )
        progress.set_postfix(loss=f"{loss:.4f}")
        if on_epoch is not None:
            on_epoch(epoch, model, adam_state)
        if validation is None:
            best_model, history.best_epoch = model, epoch
            continue
        if current > best_score:
            best_model, best_score, stale = model, current, 0
            history.best_epoch = epoch
            continue
        stale += 1
        if stale > config.patience:
            logger.info(
                "early_stopped",
                extra={"epoch": epoch, "best_epoch": history.best_epoch},
            )
            break
    progress.close()
    return best_model, history
