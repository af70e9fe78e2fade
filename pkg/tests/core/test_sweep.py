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

import dataclasses
from typing import TYPE_CHECKING

import pytest

from igccf.core.config import SplitConfig
from igccf.core.errors import ConfigError
from igccf.core.models import INDUCTIVE, TRANSDUCTIVE
from igccf.core.storage import sweep_summary
from igccf.core.sweep import (
    SweepParameter,
    SweepRegistry,
    _build_registry,
    run_sweep,
    sweep_registry,
)

if TYPE_CHECKING:
    from igccf.core.config import TrainConfig
    from igccf.core.models import InteractionMatrix


@pytest.fixture
def fast_config(small_config: TrainConfig) -> TrainConfig:
    return dataclasses.replace(small_config, epochs=2, embedding_dim=4)


def test_registry_contents() -> None:
    registry = _build_registry()
    assert isinstance(registry, SweepRegistry)
    assert registry.names() == ["depth", "dropout_p", "top_k", "train_user_fraction"]
    fraction = sweep_registry.get_parameter_by_name("train_user_fraction")
    assert fraction.protocol == "user_fraction"
    assert sweep_registry.get_parameter_by_name("depth").default_grid == (0, 1, 2, 3)
    with pytest.raises(KeyError, match="unknown sweep parameter"):
        sweep_registry.get_parameter_by_name("learning_rate")


@pytest.mark.parametrize(
    ("name", "raw", "expected"),
    [
        ("depth", ["0", "2"], [0, 2]),
        ("dropout_p", ["0.1", "0.5"], [0.1, 0.5]),
        ("top_k", ["5", "full", "None"], [5, None, None]),
        ("train_user_fraction", ["0.9", "0.1"], [0.9, 0.1]),
    ],
)
def test_parse_grid(name: str, raw: list[str], expected: list[object]) -> None:
    assert sweep_registry.parse_grid(name, raw) == expected


@pytest.mark.parametrize(
    ("name", "raw"), [("train_user_fraction", "1.0"), ("depth", "two")]
)
def test_parse_grid_rejects(name: str, raw: str) -> None:
    with pytest.raises(ValueError):
        sweep_registry.parse_grid(name, [raw])


def test_apply_changes_one_field(fast_config: TrainConfig) -> None:
    top_k = sweep_registry.get_parameter_by_name("top_k")
    assert top_k.apply(fast_config, 7).top_k == 7
    full = dataclasses.replace(fast_config, top_k=None)
    assert top_k.apply(fast_config, None) == full
    dropout = sweep_registry.get_parameter_by_name("dropout_p")
    assert dropout.apply(fast_config, 0.3).dropout == 0.3


def test_register_replaces_by_name() -> None:
    registry = SweepRegistry()
    registry.register(SweepParameter("depth", int, lambda c, _v: c, (1,)))
    registry.register(SweepParameter("depth", int, lambda c, _v: c, (2,)))
    assert registry.names() == ["depth"]
    assert registry.get_parameter_by_name("depth").default_grid == (2,)


def test_ablation_sweep(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    split = SplitConfig()
    result = run_sweep(
        "depth", [0, 1], fast_config, block_matrix, [3], split=split, cutoffs=(5,)
    )
    assert result.parameter == "depth"
    assert [p.value for p in result.points] == [0, 1]
    assert {p.report.protocol for p in result.points} == {TRANSDUCTIVE}
    assert all(p.seed == 3 and p.train_seconds > 0 for p in result.points)
    evaluated = [p.report.n_users_evaluated for p in result.points]
    assert evaluated == [block_matrix.n_users] * 2
    frame = result.to_frame()
    assert len(frame) == 4
    assert set(frame["metric"]) == {"recall@5", "ndcg@5"}
    summary = sweep_summary(result)
    assert len(summary) == 2
    expected = {"value", "protocol", "recall@5", "ndcg@5", "train_seconds"}
    assert expected <= set(summary.columns)


def test_convolution_beats_flat_embeddings_on_communities(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    # a single short epoch: only the item graph can separate the communities
    config = dataclasses.replace(
        fast_config,
        epochs=1,
        learning_rate=1e-4,
        embedding_dim=16,
        top_k=None,
        dropout=0.0,
    )
    split = SplitConfig()
    result = run_sweep(
        "depth", [0, 1], config, block_matrix, [1, 2, 3], split=split, cutoffs=(5,)
    )
    flat = result.mean_metric(0, "ndcg@5")
    convolved = result.mean_metric(1, "ndcg@5")
    assert convolved > flat + 0.1


def test_seeds_are_averaged(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    split = SplitConfig()
    result = run_sweep(
        "top_k", [None], fast_config, block_matrix, [1, 2], split=split, cutoffs=(5,)
    )
    assert [p.seed for p in result.points] == [1, 2]
    scores = [p.report.recall(5) for p in result.points]
    assert result.mean_metric(None, "recall@5") == pytest.approx(sum(scores) / 2)
    assert result.to_frame()["value"].unique().tolist() == ["full"]


def test_user_fraction_sweep_reports_both_groups(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    result = run_sweep(
        "train_user_fraction",
        [0.5],
        fast_config,
        block_matrix,
        [4],
        split=SplitConfig(),
        cutoffs=(5,),
    )
    seen, unseen = result.points
    assert (seen.report.protocol, unseen.report.protocol) == (TRANSDUCTIVE, INDUCTIVE)
    assert seen.train_seconds == unseen.train_seconds
    total = seen.report.n_users_evaluated + unseen.report.n_users_evaluated
    assert total == block_matrix.n_users
    assert unseen.report.n_users_evaluated == 15
    assert result.reports(0.5, INDUCTIVE) == [unseen.report]
    assert len(sweep_summary(result)) == 2


def test_user_fraction_rounds_the_unseen_share_half_up(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    # 30 users at 0.55 seen leave 13.5 unseen, which rounds to 14
    result = run_sweep(
        "train_user_fraction",
        [0.55],
        fast_config,
        block_matrix,
        [4],
        split=SplitConfig(),
        cutoffs=(5,),
    )
    seen, unseen = result.points
    assert unseen.report.n_users_evaluated == 14
    assert seen.report.n_users_evaluated == 16


def test_sweep_argument_errors(
    block_matrix: InteractionMatrix, fast_config: TrainConfig
) -> None:
    with pytest.raises(ValueError, match="grid"):
        run_sweep("depth", [], fast_config, block_matrix, [1], split=SplitConfig())
    with pytest.raises(ValueError, match="seed"):
        run_sweep("depth", [1], fast_config, block_matrix, [], split=SplitConfig())
    with pytest.raises(ConfigError):
        run_sweep(
            "dropout_p", [1.0], fast_config, block_matrix, [1], split=SplitConfig()
        )
