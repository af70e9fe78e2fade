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

"""Interaction ingestion, k-core filtering and reproducible splits.

Every function here is pure: results depend only on the inputs and the seed.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import scipy.sparse as sp

from igccf.core.errors import EmptyDatasetError, InteractionParseError, SplitError
from igccf.core.models import (
    DatasetSplit,
    InteractionMatrix,
    InteractionRecord,
    UserHoldoutSplit,
)
from igccf.core.utils import round_half_up

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

# Checked in order; "::" first so MovieLens ".dat" lines are not split on ":".
_DELIMITER_CANDIDATES = ("::", "\t", ",")
_COLUMNS = ("user", "item", "rating", "timestamp")


def _data_lines(path: Path) -> pd.Series:
    """Stripped data lines indexed by one-based line number.

    Raises
    ------
    InteractionParseError
        If the file is not valid UTF-8; the line holding the first bad byte
        is reported.
    """
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line_number = raw.count(b"\n", 0, exc.start) + 1
        msg = f"invalid UTF-8 ({exc.reason})"
        raise InteractionParseError(path, line_number, msg) from None
    parts = text.split("\n")
    lines = pd.Series(parts, index=pd.RangeIndex(1, len(parts) + 1), dtype=object)
    lines = lines.str.strip()
    return lines[(lines != "") & ~lines.str.startswith("#")]


def _sniff(lines: pd.Series) -> str:
    if not lines.empty:
        first = lines.iloc[0]
        for candidate in _DELIMITER_CANDIDATES:
            if candidate in first:
                return candidate
    return ","


def detect_delimiter(path: Path | str) -> str:
    """Guess the field delimiter from the first data line.

    Returns
    -------
    str
        One of ``"::"``, tab or comma; comma when no candidate occurs.
    """
    return _sniff(_data_lines(Path(path)))


def _flag(problems: pd.Series, mask: pd.Series, reasons: pd.Series | str) -> None:
    """Record ``reasons`` for masked lines that have no earlier problem."""
    target = mask & (problems == "")
    if isinstance(reasons, str):
        problems[target] = reasons
    else:
        problems[target] = reasons[target]


def _numeric(column: pd.Series) -> tuple[pd.Series, pd.Series]:
    """Parse a text column; returns values and the mask of present cells."""
    present = column != ""
    values = pd.to_numeric(column.where(present), errors="coerce").astype(np.float64)
    return values, present


def _parse_frame(lines: pd.Series, sep: str, path: Path) -> pd.DataFrame:
    """Split data lines into typed columns.

    Raises
    ------
    InteractionParseError
        For the first malformed line in file order.
    """
    fields = lines.str.split(sep, regex=False, expand=True)
    counts = fields.notna().sum(axis=1)
    text = (
        fields.reindex(columns=range(len(_COLUMNS)))
        .set_axis(list(_COLUMNS), axis=1)
        .astype(object)
        .fillna("")
        .astype(str)
        .apply(lambda column: column.str.strip())
    )
    rating, has_rating = _numeric(text["rating"])
    timestamp, has_timestamp = _numeric(text["timestamp"])

    problems = pd.Series("", index=lines.index, dtype=object)
    _flag(
        problems,
        (counts < 2) | (counts > len(_COLUMNS)),
        "expected 2 to 4 fields (user, item[, rating[, timestamp]]), got "
        + counts.astype(str),
    )
    empty_key = (text["user"] == "") | (text["item"] == "")
    _flag(problems, empty_key, "empty user or item key")
    _flag(
        problems,
        has_rating & ~np.isfinite(rating),
        "rating " + text["rating"].map(repr) + " is not a finite number",
    )
    _flag(
        problems,
        has_timestamp & (timestamp.isna() | (timestamp % 1 != 0)),
        "timestamp " + text["timestamp"].map(repr) + " is not an integer",
    )
    bad = problems[problems != ""]
    if not bad.empty:
        raise InteractionParseError(path, int(bad.index[0]), bad.iloc[0])
    return pd.DataFrame({
        "user": text["user"],
        "item": text["item"],
        "rating": rating,
        "timestamp": timestamp,
    })


def load_interactions(
    path: Path | str,
    positive_threshold: float | None = None,
    *,
    delimiter: str | None = None,
    header: bool = False,
) -> list[InteractionRecord]:
    """Read a delimiter-separated interaction log.

    Parameters
    ----------
    path:
        File with one ``user, item[, rating[, timestamp]]`` record per line;
        blank lines and lines starting with ``#`` are ignored.
    positive_threshold:
        When given, records whose rating is below it are dropped. Records
        without a rating are always kept as implicit positives.
    delimiter:
        Field delimiter; auto-detected among ``::``, tab and comma if omitted.
    header:
        Skip the first data line (column titles).

    Returns
    -------
    list[InteractionRecord]
        Kept records in file order.

    Raises
    ------
    InteractionParseError
        On a malformed line or undecodable bytes, with its line number.
    EmptyDatasetError
        If no record survives.
    """
    p = Path(path)
    lines = _data_lines(p)
    sep = delimiter or _sniff(lines)
    if header:
        lines = lines.iloc[1:]
    records: list[InteractionRecord] = []
    dropped = 0
    if not lines.empty:
        frame = _parse_frame(lines, sep, p)
        keep = pd.Series(data=True, index=frame.index)
        if positive_threshold is not None:
            # unrated rows compare False and stay
            keep = ~(frame["rating"] < positive_threshold)
        dropped = int((~keep).sum())
        kept = frame[keep]
        records = [
            InteractionRecord(
                user,
                item,
                None if np.isnan(rating) else float(rating),
                None if np.isnan(timestamp) else int(timestamp),
            )
            for user, item, rating, timestamp in kept.itertuples(index=False)
        ]
    logger.info(
        "interactions_loaded",
        extra={
            "path": str(p),
            "kept": len(records),
            "dropped": dropped,
            "delimiter": sep,
        },
    )
    if not records:
        msg = f"no interactions left in {p} (threshold={positive_threshold})"
        raise EmptyDatasetError(msg)
    return records


def _key_index(keys: Sequence[str]) -> dict[str, int]:
    return {k: i for i, k in enumerate(keys)}


def build_matrix(
    records: Sequence[InteractionRecord],
    *,
    user_keys: Sequence[str] | None = None,
    item_keys: Sequence[str] | None = None,
) -> InteractionMatrix:
    """Build the binary interaction matrix ``R``.

    Parameters
    ----------
    records:
        Interactions; duplicates collapse to one cell.
    user_keys, item_keys:
        Fixed index maps. When omitted, indices follow first appearance.

    Returns
    -------
    InteractionMatrix
        Binary matrix with sorted rows.

    Raises
    ------
    EmptyDatasetError
        If ``records`` is empty.
    KeyError
        If a fixed map is given and a record uses a key outside it.
    """
    if not records:
        msg = "cannot build a matrix from zero interactions"
        raise EmptyDatasetError(msg)
    users: dict[str, int] = _key_index(user_keys) if user_keys is not None else {}
    items: dict[str, int] = _key_index(item_keys) if item_keys is not None else {}
    rows = np.empty(len(records), dtype=np.int64)
    cols = np.empty(len(records), dtype=np.int64)
    for n, rec in enumerate(records):
        if user_keys is None:
            rows[n] = users.setdefault(rec.user_key, len(users))
        else:
            rows[n] = users[rec.user_key]
        if item_keys is None:
            cols[n] = items.setdefault(rec.item_key, len(items))
        else:
            cols[n] = items[rec.item_key]
    return _from_cells(rows, cols, tuple(users), tuple(items))


def _from_cells(
    rows: np.ndarray,
    cols: np.ndarray,
    user_keys: tuple[str, ...],
    item_keys: tuple[str, ...],
) -> InteractionMatrix:
    shape = (len(user_keys), len(item_keys))
    if rows.size:
        flat = np.unique(rows.astype(np.int64) * shape[1] + cols.astype(np.int64))
        rows, cols = np.divmod(flat, shape[1])
    csr = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=shape)
    return InteractionMatrix(csr, user_keys, item_keys)


def matrix_from_keys(
    user_column: Sequence[str],
    item_column: Sequence[str],
    *,
    user_keys: Sequence[str],
    item_keys: Sequence[str],
) -> InteractionMatrix:
    """Build a matrix from parallel key columns against fixed index maps.

    Raises
    ------
    KeyError
        If a key is missing from its map.
    """
    rows = pd.Index(user_keys).get_indexer(pd.Index(user_column))
    cols = pd.Index(item_keys).get_indexer(pd.Index(item_column))
    for found, column in ((rows, user_column), (cols, item_column)):
        missing = np.flatnonzero(found < 0)
        if missing.size:
            raise KeyError(column[int(missing[0])])
    return _from_cells(rows, cols, tuple(user_keys), tuple(item_keys))


def kcore_filter(matrix: InteractionMatrix, k: int) -> InteractionMatrix:
    """Keep the maximal sub-matrix where every user and item has degree >= ``k``.

    Users and items below ``k`` are removed repeatedly until nothing changes;
    the survivors are re-indexed in their original relative order.

    Raises
    ------
    ValueError
        If ``k < 1``.
    EmptyDatasetError
        If the fixed point is empty.
    """
    if k < 1:
        msg = f"k must be >= 1, got {k}"
        raise ValueError(msg)
    csr = matrix.csr
    user_idx = np.arange(matrix.n_users)
    item_idx = np.arange(matrix.n_items)
    rounds = 0
    while True:
        rounds += 1
        keep_users = np.diff(csr.indptr) >= k
        keep_items = np.bincount(csr.indices, minlength=csr.shape[1]) >= k
        if keep_users.all() and keep_items.all():
            break
        csr = csr[keep_users][:, keep_items]
        user_idx = user_idx[keep_users]
        item_idx = item_idx[keep_items]
        if csr.nnz == 0:
            msg = f"no users or items left after {k}-core filtering"
            raise EmptyDatasetError(msg)
    logger.info(
        "kcore_converged",
        extra={
            "k": k,
            "rounds": rounds,
            "users": len(user_idx),
            "items": len(item_idx),
            "nnz": int(csr.nnz),
        },
    )
    return InteractionMatrix(
        csr,
        tuple(matrix.user_keys[u] for u in user_idx),
        tuple(matrix.item_keys[i] for i in item_idx),
    )


def _split_counts(n: int, train_frac: float, val_frac: float) -> tuple[int, int, int]:
    n_train = round_half_up(n * train_frac)
    n_val = max(round_half_up(n * val_frac), 1)
    while n - n_train - n_val < 1:
        if n_train > 0:
            n_train -= 1
        else:
            n_val -= 1
    return n_train, n_val, n - n_train - n_val


def split_per_user(
    matrix: InteractionMatrix, train_frac: float, val_frac: float, seed: int
) -> DatasetSplit:
    """Partition every user's interactions into train, validation and test.

    Each profile is shuffled with a generator seeded by ``seed`` and cut into
    ``round(n * train_frac)`` / ``round(n * val_frac)`` / remainder items.
    Validation and test always receive at least one item, taken from train.

    Raises
    ------
    ValueError
        On invalid fractions.
    SplitError
        If a user has fewer than three interactions.
    """
    if train_frac <= 0 or val_frac <= 0 or train_frac + val_frac >= 1:
        msg = f"invalid fractions train={train_frac} val={val_frac}"
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    parts: list[tuple[list[np.ndarray], list[np.ndarray]]] = [
        ([], []) for _ in range(3)
    ]
    for u in range(matrix.n_users):
        items = matrix.profile(u)
        n = items.size
        if n < 3:
            raise SplitError(matrix.user_keys[u], n, 3)
        shuffled = rng.permutation(items)
        n_train, n_val, _ = _split_counts(n, train_frac, val_frac)
        bounds = (0, n_train, n_train + n_val, n)
        for part, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:], strict=True)):
            chunk = shuffled[lo:hi]
            parts[part][0].append(np.full(chunk.size, u))
            parts[part][1].append(chunk)
    train, validation, test = (
        _from_cells(
            np.concatenate(r), np.concatenate(c), matrix.user_keys, matrix.item_keys
        )
        for r, c in parts
    )
    return DatasetSplit(train, validation, test, seed, train_frac, val_frac)


def partition_users(
    n_users: int, unseen_frac: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``round(U * unseen_frac)`` unseen users.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Sorted seen and unseen user indices.
    """
    if not 0 < unseen_frac < 1:
        msg = f"unseen_frac must be in (0, 1), got {unseen_frac}"
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_users)
    n_unseen = round_half_up(n_users * unseen_frac)
    return np.sort(order[n_unseen:]), np.sort(order[:n_unseen])


def split_user_holdout(
    matrix: InteractionMatrix, unseen_frac: float, profile_build_frac: float, seed: int
) -> UserHoldoutSplit:
    """Hold out whole users and split each unseen profile into build / eval.

    The item universe of every part is the full matrix's item set.

    Raises
    ------
    ValueError
        On fractions outside ``(0, 1)``.
    SplitError
        If an unseen user has fewer than two interactions.
    """
    if not 0 < profile_build_frac < 1:
        msg = f"profile_build_frac must be in (0, 1), got {profile_build_frac}"
        raise ValueError(msg)
    seen, unseen = partition_users(matrix.n_users, unseen_frac, seed)
    # the profile split draws from its own stream, not the partition's
    rng = np.random.default_rng((seed, 1))
    build_rows: list[np.ndarray] = []
    build_cols: list[np.ndarray] = []
    eval_rows: list[np.ndarray] = []
    eval_cols: list[np.ndarray] = []
    for row, u in enumerate(unseen):
        items = matrix.profile(u)
        n = items.size
        if n < 2:
            raise SplitError(matrix.user_keys[u], n, 2)
        shuffled = rng.permutation(items)
        n_build = min(max(round_half_up(n * profile_build_frac), 1), n - 1)
        build_rows.append(np.full(n_build, row))
        build_cols.append(shuffled[:n_build])
        eval_rows.append(np.full(n - n_build, row))
        eval_cols.append(shuffled[n_build:])
    unseen_keys = tuple(matrix.user_keys[u] for u in unseen)
    empty = np.empty(0, dtype=np.int64)
    unseen_build = _from_cells(
        np.concatenate(build_rows) if build_rows else empty,
        np.concatenate(build_cols) if build_cols else empty,
        unseen_keys,
        matrix.item_keys,
    )
    unseen_eval = _from_cells(
        np.concatenate(eval_rows) if eval_rows else empty,
        np.concatenate(eval_cols) if eval_cols else empty,
        unseen_keys,
        matrix.item_keys,
    )
    return UserHoldoutSplit(
        select_users(matrix, seen),
        unseen_build,
        unseen_eval,
        seed,
        unseen_frac,
        profile_build_frac,
    )


def select_users(
    matrix: InteractionMatrix, users: np.ndarray | Sequence[int]
) -> InteractionMatrix:
    """Return the rows ``users`` as a new matrix with the same item map."""
    idx = np.asarray(users, dtype=np.int64)
    return InteractionMatrix(
        matrix.csr[idx],
        tuple(matrix.user_keys[u] for u in idx),
        matrix.item_keys,
    )


def merge_matrices(
    first: InteractionMatrix, second: InteractionMatrix
) -> InteractionMatrix:
    """Cell-wise union of two matrices sharing both index maps.

    Raises
    ------
    ValueError
        If the index maps differ.
    """
    if first.user_keys != second.user_keys or first.item_keys != second.item_keys:
        msg = "matrices must share user and item maps to be merged"
        raise ValueError(msg)
    merged = (first.csr + second.csr).tocsr()
    merged.data[:] = 1.0
    return InteractionMatrix(merged, first.user_keys, first.item_keys)


def matrix_stats(matrix: InteractionMatrix) -> dict[str, float | int]:
    """Return users, items, interactions and density of ``matrix``."""
    cells = matrix.n_users * matrix.n_items
    return {
        "users": matrix.n_users,
        "items": matrix.n_items,
        "interactions": matrix.nnz,
        "density": matrix.nnz / cells if cells else 0.0,
    }
