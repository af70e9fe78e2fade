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

"""Shared fixtures: small interaction matrices, configs and data files."""

from __future__ import annotations

import logging
import os
from typing import TYPE_CHECKING

import numpy as np
import pytest
import scipy.sparse as sp

from igccf.core.config import TrainConfig
from igccf.core.data import build_matrix
from igccf.core.models import InteractionMatrix, InteractionRecord

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator
    from pathlib import Path

BLOCKS = 3
USERS_PER_BLOCK = 10
ITEMS_PER_BLOCK = 6


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    """Hide IGCCF_* variables and restore root logging after each test."""
    for name in list(os.environ):
        if name.startswith("IGCCF_"):
            monkeypatch.delenv(name, raising=False)
    root = logging.getLogger()
    level, handlers = root.level, list(root.handlers)
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def block_records() -> list[InteractionRecord]:
    """Three disjoint user communities, each using five of its six items."""
    records = []
    for u in range(BLOCKS * USERS_PER_BLOCK):
        block = u // USERS_PER_BLOCK
        for j in range(ITEMS_PER_BLOCK):
            if j == u % ITEMS_PER_BLOCK:
                continue
            item = block * ITEMS_PER_BLOCK + j
            records.append(InteractionRecord(f"u{u}", f"i{item}", 4.0, 1_000 + item))
    return records


@pytest.fixture
def toy_matrix() -> InteractionMatrix:
    """4 users x 4 items.

    u0: 0 1, u1: 0 2, u2: 1 2 3, u3: 3
    """
    rows = [0, 0, 1, 1, 2, 2, 2, 3]
    cols = [0, 1, 0, 2, 1, 2, 3, 3]
    csr = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(4, 4))
    return InteractionMatrix(csr, ("u0", "u1", "u2", "u3"), ("a", "b", "c", "d"))


@pytest.fixture
def block_matrix() -> InteractionMatrix:
    """30 users x 18 items, five interactions per user."""
    return build_matrix(block_records())


@pytest.fixture
def block_file(tmp_path: Path) -> Path:
    """`block_records` as a tab-separated ``user item rating timestamp`` file."""
    path = tmp_path / "ratings.tsv"
    lines = ["# user\titem\trating\ttimestamp"]
    lines += [
        f"{r.user_key}\t{r.item_key}\t{r.rating:g}\t{r.timestamp}"
        for r in block_records()
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_config() -> TrainConfig:
    """Fast training settings for the block matrix."""
    return TrainConfig(
        embedding_dim=8,
        depth=1,
        top_k=None,
        learning_rate=0.05,
        batch_size=16,
        epochs=6,
        dropout=0.0,
        l2_reg=1e-4,
        seed=7,
        patience=3,
        early_stop_metric="ndcg@5",
    )


@pytest.fixture
def random_matrix() -> Callable[
    [np.random.Generator, int, int, float], InteractionMatrix
]:
    """Factory for random binary matrices where every item has an interaction."""

    def make(
        rng: np.random.Generator, n_users: int, n_items: int, density: float
    ) -> InteractionMatrix:
        dense = rng.random((n_users, n_items)) < density
        dense[rng.integers(0, n_users, size=n_items), np.arange(n_items)] = True
        users = tuple(f"u{i}" for i in range(n_users))
        items = tuple(f"i{i}" for i in range(n_items))
        return InteractionMatrix(sp.csr_matrix(dense.astype(np.float64)), users, items)

    return make
