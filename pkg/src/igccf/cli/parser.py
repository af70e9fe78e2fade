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

"""Argument parsing for the ``igccf`` command."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import TYPE_CHECKING, Final

from igccf.core.sweep import sweep_registry

if TYPE_CHECKING:
    from collections.abc import Callable

OVERRIDES: Final[dict[str, tuple[str, str]]] = {
    "output_dir": ("run", "output_dir"),
    "progress": ("run", "show_progress"),
    "data": ("data", "path"),
    "threshold": ("data", "threshold"),
    "delimiter": ("data", "delimiter"),
    "header": ("data", "header"),
    "k_core": ("data", "k_core"),
    "split_seed": ("split", "seed"),
    "train_frac": ("split", "train_frac"),
    "val_frac": ("split", "val_frac"),
    "unseen_frac": ("split", "unseen_frac"),
    "profile_build_frac": ("split", "profile_build_frac"),
    "dim": ("train", "embedding_dim"),
    "depth": ("train", "depth"),
    "top_k": ("train", "top_k"),
    "learning_rate": ("train", "learning_rate"),
    "batch_size": ("train", "batch_size"),
    "epochs": ("train", "epochs"),
    "dropout": ("train", "dropout"),
    "l2": ("train", "l2_reg"),
    "seed": ("train", "seed"),
    "patience": ("train", "patience"),
    "early_stop_metric": ("train", "early_stop_metric"),
    "self_loop": ("train", "self_loop"),
    "row_normalize": ("train", "row_normalize"),
    "weighting": ("train", "weighting"),
    "dropout_rescale": ("train", "dropout_rescale"),
    "l2_scope": ("train", "l2_scope"),
    "final_retrain": ("run", "final_retrain"),
    "protocol": ("eval", "protocol"),
    "cutoffs": ("eval", "cutoffs"),
}

_MODEL_HELP = "model file (default: <output-dir>/model.bin)"


def collect_overrides(args: argparse.Namespace) -> dict[str, dict[str, object]]:
    """Turn the flags that were given into nested config overrides."""
    out: dict[str, dict[str, object]] = {}
    for dest, (section, key) in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if isinstance(value, list):
            value = tuple(value)
        out.setdefault(section, {})[key] = value
    return out


def _switch(add_argument: Callable[..., object], flag: str, **kwargs: str) -> None:
    add_argument(flag, action=argparse.BooleanOptionalAction, default=None, **kwargs)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument(
        "--output-dir", type=Path, help="run directory for all artifacts"
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    verbosity.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    _switch(common.add_argument, "--progress", help="show progress bars")
    return common


def _data_options() -> argparse.ArgumentParser:
    data = argparse.ArgumentParser(add_help=False)
    group = data.add_argument_group("data")
    group.add_argument("--data", type=Path, help="raw interaction file")
    group.add_argument("--threshold", type=float, help="drop ratings below this value")
    group.add_argument("--delimiter", help="field delimiter (detected when omitted)")
    _switch(group.add_argument, "--header")
    group.add_argument("--k-core", type=int, help="minimum user and item degree")
    group = data.add_argument_group("split")
    group.add_argument("--split-seed", type=int)
    group.add_argument("--train-frac", type=float)
    group.add_argument("--val-frac", type=float)
    group.add_argument("--unseen-frac", type=float, help="share of users held out")
    group.add_argument(
        "--profile-build-frac",
        type=float,
        help="share of an unseen profile used to embed",
    )
    return data


def _train_options() -> argparse.ArgumentParser:
    train = argparse.ArgumentParser(add_help=False)
    group = train.add_argument_group("training")
    group.add_argument("--dim", type=int, help="embedding size d")
    group.add_argument("--depth", type=int, help="convolution depth k")
    group.add_argument("--top-k", help="neighbours kept per item, or 'full'")
    group.add_argument("--learning-rate", type=float)
    group.add_argument("--batch-size", type=int)
    group.add_argument("--epochs", type=int)
    group.add_argument("--dropout", type=float, help="user-profile dropout probability")
    group.add_argument("--l2", type=float, help="L2 coefficient")
    group.add_argument("--seed", type=int)
    group.add_argument("--patience", type=int)
    group.add_argument("--early-stop-metric")
    _switch(group.add_argument, "--self-loop")
    _switch(group.add_argument, "--row-normalize")
    group.add_argument("--weighting", choices=("uniform", "mean"))
    _switch(group.add_argument, "--dropout-rescale")
    group.add_argument("--l2-scope", choices=("batch", "global"))
    return train


def _eval_options() -> argparse.ArgumentParser:
    evaluation = argparse.ArgumentParser(add_help=False)
    group = evaluation.add_argument_group("evaluation")
    group.add_argument("--protocol", choices=("transductive", "inductive"))
    group.add_argument("--cutoffs", type=int, nargs="+", help="ranking cutoffs N")
    return evaluation


def build_parser() -> argparse.ArgumentParser:
    """Build the ``igccf`` argument parser."""
    parser = argparse.ArgumentParser(
        prog="igccf",
        description="Train, evaluate and serve an inductive item-graph recommender.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common_options()
    data = _data_options()
    train = _train_options()
    evaluation = _eval_options()

    sub.add_parser(
        "prepare",
        parents=[common, data],
        help="ingest, k-core filter and split a raw interaction file",
    )

    p = sub.add_parser(
        "train",
        parents=[common, data, train, evaluation],
        help="train a model on prepared splits",
    )
    _switch(
        p.add_argument,
        "--final-retrain",
        help="retrain on train and validation for the best epoch count",
    )
    p.add_argument("--resume", type=Path, help="continue from a checkpoint file")
    p.add_argument(
        "--checkpoint",
        action="store_true",
        help="write checkpoint.bin after every epoch",
    )

    p = sub.add_parser(
        "evaluate", parents=[common, evaluation], help="score a model on held-out data"
    )
    p.add_argument("--model", type=Path, help=_MODEL_HELP)

    p = sub.add_parser(
        "recommend", parents=[common], help="rank items for a profile of item keys"
    )
    p.add_argument("--model", type=Path, help=_MODEL_HELP)
    p.add_argument(
        "--items", nargs="+", default=[], metavar="KEY", help="profile item keys"
    )
    p.add_argument(
        "--items-file", type=Path, help="file with one profile item key per line"
    )
    p.add_argument(
        "-n", "--top-n", type=int, default=10, help="number of items to print"
    )
    p.add_argument(
        "--include-profile",
        action="store_true",
        help="allow profile items in the ranking",
    )

    p = sub.add_parser(
        "sweep",
        parents=[common, data, train, evaluation],
        help="train over a grid of one parameter",
    )
    p.add_argument("parameter", choices=sweep_registry.names())
    p.add_argument(
        "--grid",
        nargs="+",
        metavar="VALUE",
        help="grid values (registry default when omitted)",
    )
    p.add_argument("--seeds", type=int, nargs="+", help="seeds to average over")

    p = sub.add_parser(
        "export-graph", parents=[common], help="write the model's item graph edge list"
    )
    p.add_argument("--model", type=Path, help=_MODEL_HELP)
    p.add_argument(
        "--out",
        type=Path,
        help="edge list path (default: <output-dir>/item_graph.tsv)",
    )
    return parser
