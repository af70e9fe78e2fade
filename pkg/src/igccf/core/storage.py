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

"""On-disk artifacts: prepared splits, model files, checkpoints and tables.

Model file layout (little-endian)::

    header    magic "IGCCFMDL", version u16, d u32, k u32, K u32 (0 = full),
              I u32, p f64, l2 f64, flags u8 (1 = self loop, 2 = row norm)
    config    u32 length + UTF-8 JSON of the training configuration
    items     I x (u32 length + UTF-8 key)
    X0        I*d float32, row-major
    P         u64 nnz, then rows int32[nnz], cols int32[nnz], weights float64[nnz]

A checkpoint is a model file followed by ``"ADAM"``, step u64, epochs u32 and
both Adam moments as float64 arrays.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, BinaryIO, Final

import numpy as np
import pandas as pd
import scipy.sparse as sp

from igccf.core.config import TrainConfig
from igccf.core.data import matrix_from_keys, matrix_stats
from igccf.core.errors import ArtifactError, IncompatibleArtifactsError
from igccf.core.models import (
    AdamState,
    DatasetSplit,
    InteractionMatrix,
    ItemEmbeddings,
    PropagationMatrix,
    TrainedModel,
    UserHoldoutSplit,
)
from igccf.core.utils import universe_hash

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from igccf.core.models import MetricsReport, SweepResult, TrainingHistory

logger = logging.getLogger(__name__)

MODEL_MAGIC: Final[bytes] = b"IGCCFMDL"
MODEL_VERSION: Final[int] = 1
ADAM_MAGIC: Final[bytes] = b"ADAM"
MANIFEST_VERSION: Final[int] = 1

_HEADER = struct.Struct("<8sHIIIIddB")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_ADAM_HEADER = struct.Struct("<4sQI")
_SELF_LOOP = 1
_ROW_NORMALIZE = 2

MANIFEST_NAME: Final[str] = "manifest.json"
USERS_NAME: Final[str] = "users.txt"
ITEMS_NAME: Final[str] = "items.txt"
MATRIX_NAME: Final[str] = "interactions.tsv"
SPLIT_NAMES: Final[tuple[str, ...]] = ("train", "validation", "test")
HOLDOUT_NAMES: Final[tuple[str, ...]] = ("seen", "unseen_build", "unseen_eval")


# --- key tables and interaction files ---------------------------------------


def _check_key(key: str) -> None:
    if not key or any(c in key for c in "\t\n\r"):
        msg = f"key {key!r} is empty or contains a tab or newline"
        raise ArtifactError(msg)


def write_keys(path: Path, keys: Sequence[str]) -> None:
    """Write one key per line."""
    for key in keys:
        _check_key(key)
    path.write_text("".join(f"{k}\n" for k in keys), encoding="utf-8", newline="\n")


def read_keys(path: Path) -> tuple[str, ...]:
    """Read a key table written by `write_keys`."""
    if not path.is_file():
        msg = f"missing key table: {path}"
        raise ArtifactError(msg)
    text = path.read_bytes().decode("utf-8")
    return tuple(text.split("\n")[:-1]) if text else ()


def write_interactions(path: Path, matrix: InteractionMatrix) -> None:
    """Write the cells of ``matrix`` as ``user<TAB>item`` key rows."""
    coo = matrix.csr.tocoo()
    users = np.asarray(matrix.user_keys, dtype=object)
    items = np.asarray(matrix.item_keys, dtype=object)
    frame = pd.DataFrame({"user": users[coo.row], "item": items[coo.col]})
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")


def read_interactions(
    path: Path, user_keys: Sequence[str], item_keys: Sequence[str]
) -> InteractionMatrix:
    """Read an interaction file against fixed key tables.

    Raises
    ------
    ArtifactError
        If the file is missing or mentions a key outside the tables.
    """
    if not path.is_file():
        msg = f"missing interaction file: {path}"
        raise ArtifactError(msg)
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    try:
        return matrix_from_keys(
            frame["user"].tolist(),
            frame["item"].tolist(),
            user_keys=user_keys,
            item_keys=item_keys,
        )
    except KeyError as exc:
        msg = f"{path}: key {exc.args[0]!r} is not in the key tables"
        raise ArtifactError(msg) from exc


# --- prepared data ----------------------------------------------------------


@dataclass(slots=True)
class PreparedData:
    """Everything ``prepare`` writes to a run directory.

    Parameters
    ----------
    matrix:
        Filtered interaction matrix.
    split:
        Per-user train / validation / test split of ``matrix``.
    holdout:
        Seen / unseen user partition of ``matrix``.
    manifest:
        Parsed manifest.
    """

    matrix: InteractionMatrix
    split: DatasetSplit
    holdout: UserHoldoutSplit
    manifest: dict[str, Any]

    @property
    def universe_hash(self) -> str:
        """Hash of the item key table."""
        return self.manifest["universe_hash"]


def build_manifest(
    matrix: InteractionMatrix,
    split: DatasetSplit,
    holdout: UserHoldoutSplit,
    source: Mapping[str, Any],
) -> dict[str, Any]:
    """Describe a prepared run directory; contains no timestamps."""
    return {
        "format_version": MANIFEST_VERSION,
        "source": dict(source),
        "stats": matrix_stats(matrix),
        "split": {
            "seed": split.seed,
            "train_frac": split.train_frac,
            "val_frac": split.val_frac,
            "counts": {
                "train": split.train.nnz,
                "validation": split.validation.nnz,
                "test": split.test.nnz,
            },
        },
        "holdout": {
            "seed": holdout.seed,
            "unseen_frac": holdout.unseen_frac,
            "profile_build_frac": holdout.profile_build_frac,
            "seen_users": holdout.train_users.n_users,
            "unseen_users": holdout.unseen_build.n_users,
            "counts": {
                "seen": holdout.train_users.nnz,
                "unseen_build": holdout.unseen_build.nnz,
                "unseen_eval": holdout.unseen_eval.nnz,
            },
        },
        "universe_hash": universe_hash(matrix.item_keys),
    }


def write_prepared(
    directory: Path,
    matrix: InteractionMatrix,
    split: DatasetSplit,
    holdout: UserHoldoutSplit,
    source: Mapping[str, Any],
) -> dict[str, Any]:
    """Write key tables, interaction files and the manifest.

    Returns
    -------
    dict[str, Any]
        The manifest that was written.
    """
    directory.mkdir(parents=True, exist_ok=True)
    write_keys(directory / USERS_NAME, matrix.user_keys)
    write_keys(directory / ITEMS_NAME, matrix.item_keys)
    write_keys(directory / "seen_users.txt", holdout.train_users.user_keys)
    write_keys(directory / "unseen_users.txt", holdout.unseen_build.user_keys)
    write_interactions(directory / MATRIX_NAME, matrix)
    split_parts = (split.train, split.validation, split.test)
    for name, part in zip(SPLIT_NAMES, split_parts, strict=True):
        write_interactions(directory / f"{name}.tsv", part)
    holdout_parts = (holdout.train_users, holdout.unseen_build, holdout.unseen_eval)
    for name, part in zip(HOLDOUT_NAMES, holdout_parts, strict=True):
        write_interactions(directory / f"{name}.tsv", part)
    manifest = build_manifest(matrix, split, holdout, source)
    write_json(directory / MANIFEST_NAME, manifest)
    logger.info(
        "prepared_written",
        extra={"directory": str(directory), **manifest["stats"]},
    )
    return manifest


def load_prepared(directory: Path) -> PreparedData:
    """Reload what `write_prepared` wrote.

    Raises
    ------
    ArtifactError
        If a file is missing or the manifest does not match the key tables.
    """
    manifest = read_json(directory / MANIFEST_NAME)
    version = manifest.get("format_version")
    if version != MANIFEST_VERSION:
        msg = f"{directory / MANIFEST_NAME}: unsupported manifest version {version!r}"
        raise ArtifactError(msg)
    users = read_keys(directory / USERS_NAME)
    items = read_keys(directory / ITEMS_NAME)
    if universe_hash(items) != manifest["universe_hash"]:
        msg = f"{directory}: item table does not match the manifest hash"
        raise IncompatibleArtifactsError(msg)
    matrix = read_interactions(directory / MATRIX_NAME, users, items)
    train, validation, test = (
        read_interactions(directory / f"{n}.tsv", users, items) for n in SPLIT_NAMES
    )
    meta = manifest["split"]
    split = DatasetSplit(
        train, validation, test, meta["seed"], meta["train_frac"], meta["val_frac"]
    )
    seen_users = read_keys(directory / "seen_users.txt")
    unseen_users = read_keys(directory / "unseen_users.txt")
    seen, build, evaluation = (
        read_interactions(directory / f"{n}.tsv", keys, items)
        for n, keys in zip(
            HOLDOUT_NAMES, (seen_users, unseen_users, unseen_users), strict=True
        )
    )
    meta = manifest["holdout"]
    holdout = UserHoldoutSplit(
        seen,
        build,
        evaluation,
        meta["seed"],
        meta["unseen_frac"],
        meta["profile_build_frac"],
    )
    return PreparedData(matrix, split, holdout, manifest)


def write_json(path: Path, payload: Mapping[str, Any]) -> None:
    """Write deterministic, human-readable JSON."""
    text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


def read_json(path: Path) -> dict[str, Any]:
    """Read a JSON object.

    Raises
    ------
    ArtifactError
        If the file is missing or not valid JSON.
    """
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        msg = f"missing artifact: {path}"
        raise ArtifactError(msg) from None
    except json.JSONDecodeError as exc:
        msg = f"{path}: invalid JSON ({exc})"
        raise ArtifactError(msg) from exc


# --- model files ------------------------------------------------------------


def _config_flags(config: TrainConfig) -> int:
    flags = _SELF_LOOP if config.self_loop else 0
    if config.row_normalize:
        flags |= _ROW_NORMALIZE
    return flags


def _write_model(stream: BinaryIO, model: TrainedModel) -> None:
    config = model.config
    x0 = model.item_embeddings.matrix
    stream.write(
        _HEADER.pack(
            MODEL_MAGIC,
            MODEL_VERSION,
            x0.shape[1],
            config.depth,
            config.top_k or 0,
            x0.shape[0],
            config.dropout,
            config.l2_reg,
            _config_flags(config),
        )
    )
    settings = json.dumps(dataclasses.asdict(config), sort_keys=True)
    _write_blob(stream, settings.encode("utf-8"))
    for key in model.item_keys:
        _write_blob(stream, key.encode("utf-8"))
    stream.write(np.ascontiguousarray(x0, dtype="<f4").tobytes())
    coo = model.propagation.matrix.tocoo()
    stream.write(_U64.pack(coo.nnz))
    stream.write(coo.row.astype("<i4").tobytes())
    stream.write(coo.col.astype("<i4").tobytes())
    stream.write(coo.data.astype("<f8").tobytes())


def _write_blob(stream: BinaryIO, payload: bytes) -> None:
    stream.write(_U32.pack(len(payload)))
    stream.write(payload)


class _Reader:
    """Bounds-checked cursor over a model file's bytes."""

    def __init__(self, data: bytes, path: Path) -> None:
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            msg = f"{self.path}: truncated model file"
            raise ArtifactError(msg)
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple[Any, ...]:
        return fmt.unpack(self.take(fmt.size))

    def blob(self) -> bytes:
        (size,) = self.unpack(_U32)
        return self.take(size)

    def array(self, dtype: str, count: int) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(width * count), dtype=dtype, count=count)


def _check_header(path: Path, config: TrainConfig, header: tuple[Any, ...]) -> None:
    expected = (
        config.embedding_dim,
        config.depth,
        config.top_k or 0,
        config.dropout,
        config.l2_reg,
        _config_flags(config),
    )
    if header != expected:
        msg = (
            f"{path}: header (dim, depth, top_k, dropout, l2, flags) {header} "
            f"disagrees with the stored configuration {expected}"
        )
        raise ArtifactError(msg)


def _read_model(reader: _Reader) -> TrainedModel:
    header = reader.unpack(_HEADER)
    magic, version, dim, depth, top_k, n_items, dropout, l2_reg, flags = header
    if magic != MODEL_MAGIC:
        msg = f"{reader.path}: not a model file"
        raise ArtifactError(msg)
    if version != MODEL_VERSION:
        msg = f"{reader.path}: unsupported model format version {version}"
        raise ArtifactError(msg)
    try:
        config = TrainConfig(**json.loads(reader.blob().decode("utf-8")))
    except (TypeError, ValueError) as exc:
        msg = f"{reader.path}: unreadable training configuration ({exc})"
        raise ArtifactError(msg) from exc
    _check_header(reader.path, config, (dim, depth, top_k, dropout, l2_reg, flags))
    item_keys = tuple(reader.blob().decode("utf-8") for _ in range(n_items))
    x0 = reader.array("<f4", n_items * dim).reshape(n_items, dim).astype(np.float64)
    (nnz,) = reader.unpack(_U64)
    rows = reader.array("<i4", nnz)
    cols = reader.array("<i4", nnz)
    weights = reader.array("<f8", nnz).astype(np.float64)
    propagation = sp.csr_matrix((weights, (rows, cols)), shape=(n_items, n_items))
    propagation.sort_indices()
    return TrainedModel(
        ItemEmbeddings(x0), PropagationMatrix(propagation), config, item_keys
    )


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        msg = f"missing model file: {path}"
        raise ArtifactError(msg) from None


def write_model(path: Path, model: TrainedModel) -> None:
    """Write ``model`` in the binary model format."""
    with path.open("wb") as stream:
        _write_model(stream, model)


def read_model(path: Path) -> TrainedModel:
    """Read a model (or the model part of a checkpoint).

    Raises
    ------
    ArtifactError
        On a missing file, bad magic, unknown version or truncation.
    """
    return _read_model(_Reader(_read_bytes(path), path))


def write_checkpoint(
    path: Path, model: TrainedModel, adam_state: AdamState, epochs_done: int
) -> None:
    """Write a model file followed by the optimizer state."""
    with path.open("wb") as stream:
        _write_model(stream, model)
        stream.write(_ADAM_HEADER.pack(ADAM_MAGIC, adam_state.step, epochs_done))
        for moment in (adam_state.first_moment, adam_state.second_moment):
            stream.write(np.ascontiguousarray(moment, dtype="<f8").tobytes())


def read_checkpoint(path: Path) -> tuple[TrainedModel, AdamState, int]:
    """Read a checkpoint written by `write_checkpoint`.

    Returns
    -------
    tuple[TrainedModel, AdamState, int]
        Model, optimizer state and number of completed epochs.
    """
    reader = _Reader(_read_bytes(path), path)
    model = _read_model(reader)
    magic, step, epochs_done = reader.unpack(_ADAM_HEADER)
    if magic != ADAM_MAGIC:
        msg = f"{path}: model file has no optimizer state"
        raise ArtifactError(msg)
    shape = model.item_embeddings.matrix.shape
    size = shape[0] * shape[1]
    first = reader.array("<f8", size).reshape(shape).astype(np.float64)
    second = reader.array("<f8", size).reshape(shape).astype(np.float64)
    return model, AdamState(first, second, step), epochs_done


def check_compatible(
    model: TrainedModel, expected_hash: str, *, source: str = "artifacts"
) -> None:
    """Ensure ``model`` indexes items like the artifacts it is used with.

    Raises
    ------
    IncompatibleArtifactsError
        If the item universe hashes differ.
    """
    actual = universe_hash(model.item_keys)
    if actual != expected_hash:
        msg = (
            f"model item universe {actual[:12]} does not match {source} "
            f"{expected_hash[:12]}; were they prepared from the same data?"
        )
        raise IncompatibleArtifactsError(msg)


# --- tables -----------------------------------------------------------------


def write_table(path: Path, frame: pd.DataFrame) -> None:
    """Write a tab-separated table."""
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n", float_format="%.6f")


def write_history(path: Path, history: TrainingHistory) -> None:
    """Write ``epoch, loss, seconds, <metrics>`` rows."""
    write_table(path, history.to_frame())


def write_report(path: Path, report: MetricsReport) -> None:
    """Write one row per cutoff."""
    write_table(path, report.to_frame())


def sweep_summary(result: SweepResult) -> pd.DataFrame:
    """Seed-averaged scores: one row per value and protocol, one column per metric."""
    frame = result.to_frame()
    if frame.empty:
        return frame
    summary = frame.pivot_table(
        index=["value", "protocol"],
        columns="metric",
        values="score",
        aggfunc="mean",
        sort=False,
    )
    seconds = frame.groupby(["value", "protocol"], sort=False)["train_seconds"].mean()
    summary["train_seconds"] = seconds
    return summary.reset_index()


def write_sweep(directory: Path, result: SweepResult) -> tuple[Path, Path]:
    """Write the long-format results and the seed-averaged summary."""
    long_path = directory / f"sweep_{result.parameter}.tsv"
    summary_path = directory / f"sweep_{result.parameter}_summary.tsv"
    write_table(long_path, result.to_frame())
    write_table(summary_path, sweep_summary(result))
    return long_path, summary_path
