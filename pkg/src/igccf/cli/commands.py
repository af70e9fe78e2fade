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

"""Command implementations behind ``igccf <command>``.

Each command takes the parsed arguments and the merged `RunConfig`, writes
its artifacts under ``config.output_dir`` and returns a process exit code.
Errors propagate to `igccf.app.main`, which maps them to exit codes.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Final

from igccf.cli.formatting import (
    format_recommendations,
    format_report,
    format_stats,
    format_table,
)
from igccf.core.data import (
    build_matrix,
    kcore_filter,
    load_interactions,
    merge_matrices,
    split_per_user,
    split_user_holdout,
)
from igccf.core.embedding import recommend
from igccf.core.errors import ConfigError, UnknownKeysError
from igccf.core.evaluation import evaluate_inductive, evaluate_transductive
from igccf.core.graph import export_edge_list, propagation_edges
from igccf.core.models import INDUCTIVE
from igccf.core.storage import (
    check_compatible,
    load_prepared,
    read_checkpoint,
    read_model,
    sweep_summary,
    write_checkpoint,
    write_history,
    write_model,
    write_prepared,
    write_report,
    write_sweep,
)
from igccf.core.sweep import run_sweep, sweep_registry
from igccf.core.training import fit
from igccf.core.utils import directory_lock

if TYPE_CHECKING:
    import argparse
    from collections.abc import Callable

    from igccf.core.config import RunConfig
    from igccf.core.models import AdamState, InteractionMatrix, TrainedModel
    from igccf.core.storage import PreparedData

logger = logging.getLogger(__name__)

EXIT_OK: Final[int] = 0
EXIT_FAILURE: Final[int] = 1
EXIT_USAGE: Final[int] = 2

MODEL_NAME: Final[str] = "model.bin"
CHECKPOINT_NAME: Final[str] = "checkpoint.bin"
HISTORY_NAME: Final[str] = "history.tsv"


def _emit(text: str) -> None:
    sys.stdout.write(text + "\n")


def _model_path(args: argparse.Namespace, config: RunConfig) -> Path:
    if getattr(args, "model", None):
        return args.model
    return config.output_dir / MODEL_NAME


def cmd_prepare(args: argparse.Namespace, config: RunConfig) -> int:
    """Ingest, filter and split the raw data into ``output_dir``."""
    config.validate(require_data=True)
    data = config.data
    records = load_interactions(
        data.path, data.threshold, delimiter=data.delimiter, header=data.header
    )
    matrix = kcore_filter(build_matrix(records), data.k_core)
    s = config.split
    split = split_per_user(matrix, s.train_frac, s.val_frac, s.seed)
    holdout = split_user_holdout(matrix, s.unseen_frac, s.profile_build_frac, s.seed)
    source = {
        "path": str(data.path),
        "threshold": data.threshold,
        "delimiter": data.delimiter,
        "k_core": data.k_core,
    }
    with directory_lock(config.output_dir) as out:
        manifest = write_prepared(out, matrix, split, holdout, source)
    _emit(format_stats(manifest["stats"]))
    return EXIT_OK


def _training_matrices(
    prepared: PreparedData, config: RunConfig
) -> tuple[InteractionMatrix, InteractionMatrix]:
    """Return the (train, validation) pair the chosen protocol trains on.

    Inductive models only see the seen users; their profiles are split again
    so early stopping has a validation part.
    """
    if config.eval.protocol != INDUCTIVE:
        return prepared.split.train, prepared.split.validation
    s = config.split
    seen = prepared.holdout.train_users
    inner = split_per_user(seen, s.train_frac, s.val_frac, s.seed)
    return merge_matrices(inner.train, inner.test), inner.validation


def _checkpoint_writer(path: Path) -> Callable[[int, TrainedModel, AdamState], None]:
    def write(epoch: int, model: TrainedModel, state: AdamState) -> None:
        write_checkpoint(path, model, state, epoch)

    return write


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    """Fit a model on the prepared splits and write model and history."""
    config.validate()
    prepared = load_prepared(config.output_dir)
    train, validation = _training_matrices(prepared, config)
    resume = read_checkpoint(args.resume) if args.resume else None
    if resume is not None:
        check_compatible(resume[0], prepared.universe_hash, source="prepared data")

    with directory_lock(config.output_dir) as out:
        on_epoch = None
        if args.checkpoint:
            on_epoch = _checkpoint_writer(out / CHECKPOINT_NAME)
        model, history = fit(
            train,
            validation,
            config.train,
            cutoffs=config.eval.cutoffs,
            show_progress=config.show_progress,
            resume=resume,
            on_epoch=on_epoch,
        )
        write_history(out / HISTORY_NAME, history)
        if config.final_retrain:
            epochs = history.best_epoch or config.train.epochs
            logger.info("final_retrain_started", extra={"epochs": epochs})
            model, _ = fit(
                merge_matrices(train, validation),
                None,
                dataclasses.replace(config.train, epochs=epochs),
                show_progress=config.show_progress,
            )
        write_model(out / MODEL_NAME, model)

    _emit(format_table(history.to_frame()))
    _emit(f"best epoch: {history.best_epoch}  model: {out / MODEL_NAME}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    """Score a model on the prepared held-out data."""
    config.validate()
    prepared = load_prepared(config.output_dir)
    model = read_model(_model_path(args, config))
    check_compatible(model, prepared.universe_hash, source="prepared data")
    cutoffs = config.eval.cutoffs
    if config.eval.protocol == INDUCTIVE:
        report = evaluate_inductive(model, prepared.holdout, cutoffs)
    else:
        report = evaluate_transductive(model, prepared.split, cutoffs)
    with directory_lock(config.output_dir) as out:
        write_report(out / f"report_{report.protocol}.tsv", report)
    _emit(format_report(report))
    return EXIT_OK


def _read_profile_keys(args: argparse.Namespace) -> list[str]:
    keys = list(args.items)
    if args.items_file is not None:
        if not args.items_file.is_file():
            msg = f"recommend.items_file: file not found: {args.items_file}"
            raise ConfigError([msg])
        lines = args.items_file.read_text(encoding="utf-8").splitlines()
        keys.extend(line.strip() for line in lines if line.strip())
    return keys


def cmd_recommend(args: argparse.Namespace, config: RunConfig) -> int:
    """Print the top-N items for a profile given as item keys."""
    if args.top_n < 1:
        msg = "recommend.top_n: must be >= 1"
        raise ConfigError([msg])
    model = read_model(_model_path(args, config))
    index = {key: i for i, key in enumerate(model.item_keys)}
    keys = _read_profile_keys(args)
    unknown = [k for k in keys if k not in index]
    if keys and len(unknown) == len(keys):
        raise UnknownKeysError(unknown)
    if unknown:
        logger.warning("unknown_item_keys_skipped", extra={"keys": unknown})
        sys.stderr.write(f"skipping unknown item keys: {', '.join(unknown)}\n")
    profile = sorted({index[k] for k in keys if k in index})
    exclude = not args.include_profile
    ranked = recommend(model, profile, args.top_n, exclude_profile=exclude)
    _emit(format_recommendations([(model.item_keys[i], s) for i, s in ranked]))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """Run a one-parameter sweep and write its result tables."""
    config.validate()
    parameter = sweep_registry.get_parameter_by_name(args.parameter)
    grid = list(parameter.default_grid)
    if args.grid:
        try:
            grid = sweep_registry.parse_grid(parameter.name, args.grid)
        except ValueError as exc:
            msg = f"sweep.grid: {exc}"
            raise ConfigError([msg]) from exc
    seeds = tuple(args.seeds) if args.seeds else config.sweep_seeds
    prepared = load_prepared(config.output_dir)
    result = run_sweep(
        parameter.name,
        grid,
        config.train,
        prepared.matrix,
        seeds,
        split=config.split,
        cutoffs=config.eval.cutoffs,
        show_progress=config.show_progress,
    )
    with directory_lock(config.output_dir) as out:
        long_path, summary_path = write_sweep(out, result)
    _emit(format_table(sweep_summary(result)))
    _emit(f"results: {long_path}  summary: {summary_path}")
    return EXIT_OK


def cmd_export_graph(args: argparse.Namespace, config: RunConfig) -> int:
    """Write the item-item aggregation weights of a model as an edge list."""
    model = read_model(_model_path(args, config))
    with directory_lock(config.output_dir) as out:
        path = args.out or out / "item_graph.tsv"
        graph = propagation_edges(model.propagation)
        edges = export_edge_list(graph, model.item_keys, path)
    _emit(f"{edges} edges written to {path}")
    return EXIT_OK


COMMANDS: Final[dict[str, Callable[[argparse.Namespace, RunConfig], int]]] = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "recommend": cmd_recommend,
    "sweep": cmd_sweep,
    "export-graph": cmd_export_graph,
}
