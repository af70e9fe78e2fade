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

"""Shared numeric and filesystem helpers."""

from __future__ import annotations

import hashlib
import logging
import os
from contextlib import contextmanager
from typing import TYPE_CHECKING

import numpy as np

from igccf.core.errors import ArtifactError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator
    from pathlib import Path

logger = logging.getLogger(__name__)

_LOCK_NAME = ".igccf.lock"


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves away from zero for positives.

    Parameters
    ----------
    value:
        Non-negative real.

    Returns
    -------
    int
        ``floor(value + 0.5)`` after snapping ``value`` to nine decimals, so
        products like ``15 * (1 - 0.9)`` land on their exact half.
    """
    return int(np.floor(round(value, 9) + 0.5))


def universe_hash(item_keys: Iterable[str]) -> str:
    """Return the SHA-256 hex digest of an ordered item key table.

    Two artifacts are compatible only if they index items identically, so the
    order of the keys is part of the hash.
    """
    digest = hashlib.sha256()
    for key in item_keys:
        digest.update(key.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def top_n_indices(
    scores: np.ndarray, n: int, excluded: np.ndarray | None = None
) -> np.ndarray:
    """Return the indices of the ``n`` best scores.

    Ordering is by score descending, ties broken by the lower index. Excluded
    indices are never returned.

    Parameters
    ----------
    scores:
        One score per item.
    n:
        Number of indices wanted; fewer are returned when candidates run out.
    excluded:
        Item indices removed before ranking.

    Returns
    -------
    np.ndarray
        Ranked item indices, length ``min(n, candidates)``.
    """
    candidates = np.ones(scores.shape[0], dtype=bool)
    if excluded is not None and len(excluded):
        candidates[excluded] = False
    idx = np.flatnonzero(candidates)
    if n <= 0 or idx.size == 0:
        return idx[:0]
    values = scores[idx]
    if idx.size > n:
        # keep every candidate tied with the n-th best so the tie rule applies
        kth = np.partition(-values, n - 1)[n - 1]
        keep = -values <= kth
        idx, values = idx[keep], values[keep]
    order = np.lexsort((idx, -values))
    return idx[order][:n]


def _holder_alive(lock_path: Path) -> bool:
    """Whether the process recorded in ``lock_path`` is still running.

    A lock file that does not hold a PID counts as held.
    """
    try:
        pid = int(lock_path.read_text(encoding="ascii").strip())
    except FileNotFoundError:
        return False
    except (OSError, ValueError):
        return True
    if pid <= 0 or os.name == "nt":
        return True
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except OSError:
        return True
    return True


def _create_lock(lock_path: Path, directory: Path) -> int:
    for _ in range(2):
        try:
            return os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            if _holder_alive(lock_path):
                break
            logger.warning(
                "stale_lock_removed",
                extra={"directory": str(directory), "lock": str(lock_path)},
            )
            lock_path.unlink(missing_ok=True)
    msg = f"output directory {directory} is locked by another run ({lock_path})"
    raise ArtifactError(msg)


@contextmanager
def directory_lock(directory: Path) -> Iterator[Path]:
    """Hold an exclusive lock file inside ``directory`` while writing to it.

    A lock left behind by a process that is no longer running is replaced.

    Raises
    ------
    ArtifactError
        If another process holds the lock.
    """
    directory.mkdir(parents=True, exist_ok=True)
    lock_path = directory / _LOCK_NAME
    fd = _create_lock(lock_path, directory)
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        logger.debug("directory_locked", extra={"directory": str(directory)})
        yield directory
    finally:
        lock_path.unlink(missing_ok=True)
