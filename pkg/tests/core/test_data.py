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

from collections import Counter
from typing import TYPE_CHECKING

import numpy as np
import pytest

from igccf.core.data import (
    build_matrix,
    detect_delimiter,
    kcore_filter,
    load_interactions,
    matrix_from_keys,
    matrix_stats,
    merge_matrices,
    partition_users,
    select_users,
    split_per_user,
    split_user_holdout,
)
from igccf.core.errors import EmptyDatasetError, InteractionParseError, SplitError
from igccf.core.models import InteractionRecord

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

    from igccf.core.models import InteractionMatrix

    MatrixFactory = Callable[[np.random.Generator, int, int, float], InteractionMatrix]


def _records(pairs: list[tuple[str, str]]) -> list[InteractionRecord]:
    return [InteractionRecord(u, i) for u, i in pairs]


def _write(tmp_path: Path, text: str, name: str = "data.txt") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.parametrize(
    ("line", "expected"),
    [
        ("1::1193::5::978300760", "::"),
        ("u1\ti1\t3", "\t"),
        ("u1,i1", ","),
        ("u1 i1", ","),
    ],
)
def test_detect_delimiter(tmp_path: Path, line: str, expected: str) -> None:
    path = _write(tmp_path, f"# comment, with comma\n\n{line}\n")
    assert detect_delimiter(path) == expected


def test_load_skips_comments_and_blank_lines(tmp_path: Path) -> None:
    path = _write(tmp_path, "# header comment\nu1\ti1\n\nu1\ti2\t3.5\nu2\ti1\t4\t100\n")
    records = load_interactions(path)
    assert records == [
        InteractionRecord("u1", "i1"),
        InteractionRecord("u1", "i2", 3.5),
        InteractionRecord("u2", "i1", 4.0, 100),
    ]


def test_threshold_drops_low_ratings_and_keeps_unrated(tmp_path: Path) -> None:
    text = "1::10::5::100\n1::11::2::101\n2::10::4::102\n"
    path = _write(tmp_path, text, "ratings.dat")
    kept = load_interactions(path, 4.0)
    triples = [(r.user_key, r.item_key, r.timestamp) for r in kept]
    assert triples == [("1", "10", 100), ("2", "10", 102)]

    mixed = _write(tmp_path, "a,x\nb,y,1\n", "mixed.csv")
    assert [r.item_key for r in load_interactions(mixed, 4.0)] == ["x"]


def test_header_line_is_skipped(tmp_path: Path) -> None:
    path = _write(tmp_path, "userID\tartistID\tweight\n2\t51\t13883\n")
    records = load_interactions(path, header=True)
    assert records == [InteractionRecord("2", "51", 13883.0)]


@pytest.mark.parametrize(
    ("text", "line_number", "reason"),
    [
        ("u1\ti1\nlonely\n", 2, "fields"),
        ("u1\ti1\n\nu2\t\t3\n", 3, "empty"),
        ("u1\ti1\tgood\n", 1, "rating"),
        ("u1\ti1\t3\tyesterday\n", 1, "timestamp"),
        ("u1\ti1\t3\t1\textra\n", 1, "fields"),
        ("u1\ti1\tnan\n", 1, "rating"),
        ("u1\ti1\t5\nu2\ti2\t-inf\n", 2, "rating"),
        ("u1\ti1\tbad\nlonely\n", 1, "rating"),
        ("u1\ti1\t3\t1.5\n", 1, "timestamp"),
    ],
)
def test_parse_errors_carry_line_numbers(
    tmp_path: Path, text: str, line_number: int, reason: str
) -> None:
    path = _write(tmp_path, text)
    with pytest.raises(InteractionParseError, match=reason) as excinfo:
        load_interactions(path, delimiter="\t")
    assert excinfo.value.line_number == line_number
    assert excinfo.value.path == str(path)


def test_undecodable_bytes_are_a_parse_error(tmp_path: Path) -> None:
    path = tmp_path / "broken.csv"
    path.write_bytes(b"u1,i1\nu2,\xff\xfe\nu3,i3\n")
    with pytest.raises(InteractionParseError, match="UTF-8") as excinfo:
        load_interactions(path)
    assert excinfo.value.line_number == 2
    with pytest.raises(InteractionParseError):
        detect_delimiter(path)


def test_windows_line_endings(tmp_path: Path) -> None:
    path = tmp_path / "crlf.csv"
    path.write_bytes(b"u1,i1,4\r\nu2,i2\r\n")
    records = load_interactions(path)
    assert records == [
        InteractionRecord("u1", "i1", 4.0),
        InteractionRecord("u2", "i2"),
    ]


def test_nothing_left_raises(tmp_path: Path) -> None:
    path = _write(tmp_path, "u1,i1,1\nu2,i2,2\n")
    with pytest.raises(EmptyDatasetError):
        load_interactions(path, 3.0)
    with pytest.raises(EmptyDatasetError):
        load_interactions(_write(tmp_path, "# only a comment\n", "empty.csv"))


def test_build_matrix_collapses_duplicates() -> None:
    matrix = build_matrix(_records([("a", "x"), ("b", "y"), ("a", "x"), ("a", "z")]))
    assert matrix.user_keys == ("a", "b")
    assert matrix.item_keys == ("x", "y", "z")
    assert matrix.nnz == 3
    assert matrix.cells() == {(0, 0), (0, 2), (1, 1)}
    assert set(matrix.csr.data.tolist()) == {1.0}
    assert matrix.user_index("b") == 1
    assert matrix.item_index("z") == 2
    with pytest.raises(KeyError):
        matrix.item_index("nope")


def test_build_matrix_with_fixed_maps() -> None:
    maps = {"user_keys": ["a", "b"], "item_keys": ["x", "y"]}
    matrix = build_matrix(_records([("b", "y")]), **maps)
    assert matrix.csr.shape == (2, 2)
    assert matrix.cells() == {(1, 1)}
    with pytest.raises(KeyError):
        build_matrix(_records([("c", "y")]), **maps)
    with pytest.raises(EmptyDatasetError):
        build_matrix([])


def test_matrix_from_keys() -> None:
    matrix = matrix_from_keys(
        ["b", "a", "b"], ["x", "y", "x"], user_keys=["a", "b"], item_keys=["x", "y"]
    )
    assert matrix.cells() == {(0, 1), (1, 0)}
    with pytest.raises(KeyError, match="q"):
        matrix_from_keys(["a"], ["q"], user_keys=["a"], item_keys=["x"])


def test_kcore_removes_low_degree_users_and_items() -> None:
    pairs = [("a", "1"), ("a", "2"), ("b", "1"), ("b", "2")]
    pairs += [("c", "1"), ("c", "2"), ("c", "3")]
    filtered = kcore_filter(build_matrix(_records(pairs)), 2)
    assert filtered.user_keys == ("a", "b", "c")
    assert filtered.item_keys == ("1", "2")
    # c lost item 3 and then fell below the threshold itself
    pairs = [("a", "1"), ("a", "2"), ("b", "1"), ("b", "2")]
    pairs += [("c", "3"), ("c", "1"), ("d", "3")]
    filtered = kcore_filter(build_matrix(_records(pairs)), 2)
    assert filtered.user_keys == ("a", "b")
    assert filtered.item_keys == ("1", "2")


def test_kcore_fixed_point_property(random_matrix: MatrixFactory) -> None:
    matrix = random_matrix(np.random.default_rng(0), 60, 40, 0.15)
    filtered = kcore_filter(matrix, 3)
    assert filtered.user_degrees().min() >= 3
    assert filtered.item_degrees().min() >= 3
    # survivors keep their relative order
    positions = [matrix.user_keys.index(k) for k in filtered.user_keys]
    assert positions == sorted(positions)


def _key_cells(matrix: InteractionMatrix) -> set[tuple[str, str]]:
    return {(matrix.user_keys[u], matrix.item_keys[i]) for u, i in matrix.cells()}


def _peel_one_at_a_time(cells: set[tuple[str, str]], k: int) -> set[tuple[str, str]]:
    while True:
        user_degree = Counter(u for u, _ in cells)
        item_degree = Counter(i for _, i in cells)
        weak_users = sorted(u for u, d in user_degree.items() if d < k)
        weak_items = sorted(i for i, d in item_degree.items() if d < k)
        if weak_users:
            cells = {c for c in cells if c[0] != weak_users[0]}
        elif weak_items:
            cells = {c for c in cells if c[1] != weak_items[0]}
        else:
            return cells


def test_kcore_matches_brute_force(random_matrix: MatrixFactory) -> None:
    rng = np.random.default_rng(17)
    for _ in range(30):
        matrix = random_matrix(rng, 25, 20, float(rng.uniform(0.1, 0.35)))
        k = int(rng.integers(2, 5))
        core = _peel_one_at_a_time(_key_cells(matrix), k)
        if not core:
            with pytest.raises(EmptyDatasetError):
                kcore_filter(matrix, k)
            continue
        filtered = kcore_filter(matrix, k)
        assert _key_cells(filtered) == core
        assert _key_cells(kcore_filter(filtered, k)) == core

        # no removed user or item could rejoin on its own
        users, items = set(filtered.user_keys), set(filtered.item_keys)
        full = _key_cells(matrix)
        for user in set(matrix.user_keys) - users:
            assert sum((user, i) in full for i in items) < k
        for item in set(matrix.item_keys) - items:
            assert sum((u, item) in full for u in users) < k


def test_kcore_cascade_to_empty() -> None:
    matrix = build_matrix(_records([("a", "1"), ("a", "2"), ("b", "2")]))
    with pytest.raises(EmptyDatasetError):
        kcore_filter(matrix, 2)
    with pytest.raises(ValueError):
        kcore_filter(matrix, 0)


def _profile_matrix(size: int) -> InteractionMatrix:
    return build_matrix(_records([("u", f"i{j}") for j in range(size)]))


@pytest.mark.parametrize(
    ("size", "expected"),
    [(10, (8, 1, 1)), (3, (1, 1, 1)), (5, (3, 1, 1)), (20, (16, 2, 2))],
)
def test_split_sizes(size: int, expected: tuple[int, int, int]) -> None:
    split = split_per_user(_profile_matrix(size), 0.8, 0.1, seed=1)
    assert (split.train.nnz, split.validation.nnz, split.test.nnz) == expected


def test_split_partitions_every_profile(block_matrix: InteractionMatrix) -> None:
    split = split_per_user(block_matrix, 0.8, 0.1, seed=5)
    train, val, test = split.train.cells(), split.validation.cells(), split.test.cells()
    assert not train & val and not train & test and not val & test
    assert train | val | test == block_matrix.cells()
    for part in (split.train, split.validation, split.test):
        assert part.user_keys == block_matrix.user_keys
        assert part.item_keys == block_matrix.item_keys
    assert split.validation.user_degrees().min() >= 1
    assert split.test.user_degrees().min() >= 1


def test_split_is_seeded(block_matrix: InteractionMatrix) -> None:
    first = split_per_user(block_matrix, 0.8, 0.1, seed=5)
    again = split_per_user(block_matrix, 0.8, 0.1, seed=5)
    other = split_per_user(block_matrix, 0.8, 0.1, seed=6)
    assert first.test.cells() == again.test.cells()
    assert first.test.cells() != other.test.cells()


def test_split_rejects_small_profiles_and_bad_fractions() -> None:
    with pytest.raises(SplitError) as excinfo:
        split_per_user(_profile_matrix(2), 0.8, 0.1, seed=1)
    assert excinfo.value.size == 2
    with pytest.raises(ValueError):
        split_per_user(_profile_matrix(5), 0.9, 0.1, seed=1)


def test_partition_users() -> None:
    seen, unseen = partition_users(30, 0.1, seed=3)
    assert unseen.size == 3
    assert sorted([*seen.tolist(), *unseen.tolist()]) == list(range(30))
    again_seen, _ = partition_users(30, 0.1, seed=3)
    assert np.array_equal(seen, again_seen)
    # 15 * 0.1 is a half and rounds up even when the fraction is 1 - 0.9
    _, unseen = partition_users(15, 1.0 - 0.9, seed=3)
    assert unseen.size == 2
    with pytest.raises(ValueError):
        partition_users(30, 0.0, seed=3)


def test_user_holdout(block_matrix: InteractionMatrix) -> None:
    holdout = split_user_holdout(block_matrix, 0.2, 0.6, seed=9)
    seen = set(holdout.train_users.user_keys)
    unseen = holdout.unseen_build.user_keys
    assert len(unseen) == 6
    assert holdout.unseen_eval.user_keys == unseen
    assert seen.isdisjoint(unseen)
    assert seen | set(unseen) == set(block_matrix.user_keys)
    for part in (holdout.train_users, holdout.unseen_build, holdout.unseen_eval):
        assert part.item_keys == block_matrix.item_keys
    for row, key in enumerate(unseen):
        original = set(block_matrix.profile(block_matrix.user_index(key)).tolist())
        build = set(holdout.unseen_build.profile(row).tolist())
        held = set(holdout.unseen_eval.profile(row).tolist())
        # five items, 60% kept for building
        assert len(build) == 3
        assert build.isdisjoint(held)
        assert build | held == original
    assert holdout.train_users.nnz == sum(
        block_matrix.profile(block_matrix.user_index(k)).size for k in seen
    )


def test_holdout_profile_split_uses_its_own_stream(
    block_matrix: InteractionMatrix,
) -> None:
    holdout = split_user_holdout(block_matrix, 0.2, 0.6, seed=9)
    _, unseen = partition_users(block_matrix.n_users, 0.2, seed=9)
    assert holdout.unseen_build.user_keys == tuple(
        block_matrix.user_keys[u] for u in unseen
    )
    rng = np.random.default_rng((9, 1))
    for row, u in enumerate(unseen):
        shuffled = rng.permutation(block_matrix.profile(u))
        assert holdout.unseen_build.profile(row).tolist() == sorted(shuffled[:3])
        assert holdout.unseen_eval.profile(row).tolist() == sorted(shuffled[3:])


def test_holdout_keeps_an_item_to_evaluate() -> None:
    pairs = [(f"u{u}", f"i{i}") for u in range(4) for i in range(2)]
    matrix = build_matrix(_records(pairs))
    holdout = split_user_holdout(matrix, 0.5, 0.9, seed=1)
    assert holdout.unseen_build.user_degrees().tolist() == [1, 1]
    assert holdout.unseen_eval.user_degrees().tolist() == [1, 1]


def test_select_merge_and_stats(toy_matrix: InteractionMatrix) -> None:
    subset = select_users(toy_matrix, [2, 0])
    assert subset.user_keys == ("u2", "u0")
    assert subset.profile(0).tolist() == [1, 2, 3]

    single = build_matrix(_records([("u", f"i{j}") for j in range(6)]))
    split = split_per_user(single, 0.5, 0.2, seed=0)
    merged = merge_matrices(split.train, split.validation)
    assert merged.cells() == split.train.cells() | split.validation.cells()
    with pytest.raises(ValueError):
        merge_matrices(toy_matrix, subset)

    stats = matrix_stats(toy_matrix)
    assert stats == {"users": 4, "items": 4, "interactions": 8, "density": 0.5}
