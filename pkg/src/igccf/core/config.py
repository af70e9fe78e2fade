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

"""Core config module.

Configuration is layered: dataclass defaults, then an optional TOML file with
one table per section, then ``IGCCF_<SECTION>_<KEY>`` environment variables,
then explicit overrides (the command line).
"""

from __future__ import annotations

import os
import tomllib
import types
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Literal,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

from dotenv import load_dotenv

from igccf.core.errors import ConfigError

if TYPE_CHECKING:
    from collections.abc import Mapping

Weighting = Literal["uniform", "mean"]
L2Scope = Literal["batch", "global"]
ProtocolName = Literal["transductive", "inductive"]

_ENV_PREFIX = "IGCCF_"
# optional fields read these spellings as unset
_UNSET = frozenset({"", "none", "full"})


@dataclass(slots=True, frozen=True)
class TrainConfig:
    """Model and optimisation hyperparameters.

    Parameters
    ----------
    embedding_dim:
        Embedding size ``d``.
    depth:
        Convolution depth ``k``.
    top_k:
        Neighbours kept per item after pruning; ``None`` keeps the full graph.
    learning_rate:
        Adam step size.
    batch_size:
        Triples per mini-batch.
    epochs:
        Maximum number of epochs.
    dropout:
        User-profile dropout probability ``p``.
    l2_reg:
        L2 coefficient on item embeddings.
    adam_beta1, adam_beta2, adam_epsilon:
        Adam moment decay rates and stabiliser.
    seed:
        Seed for initialisation and sampling.
    patience:
        Epochs without validation improvement tolerated before stopping.
    early_stop_metric:
        Validation metric, ``"ndcg@N"`` or ``"recall@N"``.
    self_loop:
        Add a unit self-loop to every row of the propagation matrix.
    row_normalize:
        Divide every propagation row by its sum.
    weighting:
        Profile weights: ``"uniform"`` (plain sum) or ``"mean"``.
    dropout_rescale:
        Rescale surviving profile entries by ``1 / (1 - p)``.
    l2_scope:
        ``"batch"`` regularises rows touched by the batch, ``"global"`` all rows.
    """

    embedding_dim: int = 64
    depth: int = 1
    top_k: int | None = 20
    learning_rate: float = 1e-3
    batch_size: int = 1024
    epochs: int = 200
    dropout: float = 0.1
    l2_reg: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 42
    patience: int = 10
    early_stop_metric: str = "ndcg@20"
    self_loop: bool = True
    row_normalize: bool = False
    weighting: Weighting = "uniform"
    dropout_rescale: bool = True
    l2_scope: L2Scope = "batch"

    def validate(self) -> list[str]:
        """Return field-level error messages; empty when valid."""
        errors: list[str] = []
        if self.embedding_dim < 1:
            errors.append("train.embedding_dim: must be >= 1")
        if self.depth < 0:
            errors.append("train.depth: must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            errors.append("train.top_k: must be >= 1 or unset")
        if not self.learning_rate >= 0:
            errors.append("train.learning_rate: must be >= 0")
        if self.batch_size < 1:
            errors.append("train.batch_size: must be >= 1")
        if self.epochs < 1:
            errors.append("train.epochs: must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            errors.append("train.dropout: must be in [0, 1)")
        if self.l2_reg < 0:
            errors.append("train.l2_reg: must be >= 0")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            errors.append("train.adam_beta1/adam_beta2: must be in [0, 1)")
        if self.adam_epsilon <= 0:
            errors.append("train.adam_epsilon: must be > 0")
        if self.patience < 0:
            errors.append("train.patience: must be >= 0")
        try:
            parse_metric(self.early_stop_metric)
        except ValueError as exc:
            errors.append(f"train.early_stop_metric: {exc}")
        if self.weighting not in get_args(Weighting):
            errors.append("train.weighting: must be 'uniform' or 'mean'")
        if self.l2_scope not in get_args(L2Scope):
            errors.append("train.l2_scope: must be 'batch' or 'global'")
        return errors


@dataclass(slots=True, frozen=True)
class DataConfig:
    """Raw dataset location and preprocessing.

    Parameters
    ----------
    path:
        Interaction file.
    threshold:
        Minimum rating counted as positive; ``None`` keeps every record.
    delimiter:
        Field delimiter; ``None`` auto-detects.
    k_core:
        Minimum user and item degree after filtering.
    header:
        Skip the first non-comment line (column titles).
    """

    path: Path | None = None
    threshold: float | None = None
    delimiter: str | None = None
    k_core: int = 10
    header: bool = False

    def validate(self) -> list[str]:
        """Return field-level error messages; empty when valid."""
        errors: list[str] = []
        if self.k_core < 1:
            errors.append("data.k_core: must be >= 1")
        if self.delimiter == "":
            errors.append("data.delimiter: must not be empty")
        return errors


@dataclass(slots=True, frozen=True)
class SplitConfig:
    """Seeds and fractions for both evaluation protocols."""

    seed: int = 42
    train_frac: float = 0.8
    val_frac: float = 0.1
    unseen_frac: float = 0.1
    profile_build_frac: float = 0.9

    def validate(self) -> list[str]:
        """Return field-level error messages; empty when valid."""
        errors: list[str] = []
        if self.train_frac <= 0 or self.val_frac <= 0:
            errors.append("split.train_frac/val_frac: must be > 0")
        elif self.train_frac + self.val_frac >= 1:
            errors.append("split.train_frac + split.val_frac: must be < 1")
        if not 0 < self.unseen_frac < 1:
            errors.append("split.unseen_frac: must be in (0, 1)")
        if not 0 < self.profile_build_frac < 1:
            errors.append("split.profile_build_frac: must be in (0, 1)")
        return errors


@dataclass(slots=True, frozen=True)
class EvalConfig:
    """Evaluation settings."""

    cutoffs: tuple[int, ...] = (5, 20)
    protocol: ProtocolName = "transductive"

    def validate(self) -> list[str]:
        """Return field-level error messages; empty when valid."""
        errors: list[str] = []
        if not self.cutoffs or any(n < 1 for n in self.cutoffs):
            errors.append("eval.cutoffs: must be a non-empty list of integers >= 1")
        if self.protocol not in get_args(ProtocolName):
            errors.append("eval.protocol: must be 'transductive' or 'inductive'")
        return errors


@dataclass(slots=True, frozen=True)
class RunConfig:
    """Top-level configuration of a command run.

    Parameters
    ----------
    data, split, train, eval:
        Section configurations.
    output_dir:
        Run directory receiving every artifact.
    final_retrain:
        Retrain on train and validation merged before writing the model.
    sweep_seeds:
        Seeds each sweep point is trained with.
    show_progress:
        Display epoch progress bars.
    """

    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: Path = Path("runs/default")
    final_retrain: bool = False
    sweep_seeds: tuple[int, ...] = (42,)
    show_progress: bool = False

    def validate(self, *, require_data: bool = False) -> None:
        """Validate every section.

        Parameters
        ----------
        require_data:
            Also require ``data.path`` to point at an existing file.

        Raises
        ------
        ConfigError
            With one message per invalid field.
        """
        errors = [
            *self.data.validate(),
            *self.split.validate(),
            *self.train.validate(),
            *self.eval.validate(),
        ]
        if not self.sweep_seeds:
            errors.append("run.sweep_seeds: must not be empty")
        if require_data:
            if self.data.path is None:
                errors.append("data.path: required")
            elif not Path(self.data.path).is_file():
                errors.append(f"data.path: file not found: {self.data.path}")
        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-friendly nested dictionary."""
        raw = asdict(self)
        raw["output_dir"] = str(self.output_dir)
        raw["data"]["path"] = None if self.data.path is None else str(self.data.path)
        return raw


_SECTIONS: dict[str, type] = {
    "data": DataConfig,
    "split": SplitConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def parse_metric(name: str) -> tuple[str, int]:
    """Split ``"ndcg@20"`` into ``("ndcg", 20)``.

    Raises
    ------
    ValueError
        If the metric is unknown or the cutoff is not a positive integer.
    """
    metric, sep, cutoff = name.lower().partition("@")
    if metric not in {"ndcg", "recall"} or not sep or not cutoff.isdigit():
        msg = f"expected 'ndcg@N' or 'recall@N', got {name!r}"
        raise ValueError(msg)
    if int(cutoff) < 1:
        msg = "cutoff must be >= 1"
        raise ValueError(msg)
    return metric, int(cutoff)


def _convert(raw: object, hint: object, where: str) -> object:
    """Coerce ``raw`` (from TOML, environment or CLI) to the annotated type."""
    origin = get_origin(hint)
    if origin in {Union, types.UnionType}:
        args = [a for a in get_args(hint) if a is not type(None)]
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in _UNSET):
            return None
        return _convert(raw, args[0], where)
    if origin is Literal:
        value = str(raw)
        if value not in get_args(hint):
            msg = f"{where}: must be one of {', '.join(get_args(hint))}"
            raise ConfigError([msg])
        return value
    if origin is tuple:
        (item_type, _ellipsis) = get_args(hint)
        if isinstance(raw, str):
            items = raw.split(",")
        else:
            items = list(raw)  # type: ignore[call-overload]
        return tuple(_convert(i, item_type, where) for i in items if str(i).strip())
    try:
        if hint is bool:
            if isinstance(raw, bool):
                return raw
            value = str(raw).strip().lower()
            if value in {"1", "true", "yes", "on"}:
                return True
            if value in {"0", "false", "no", "off"}:
                return False
            msg = f"{where}: expected a boolean, got {raw!r}"
            raise ConfigError([msg])
        if hint is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            if isinstance(raw, str):
                return int(raw.strip())
            return int(raw)  # type: ignore[call-overload]
        if hint is float:
            return float(raw)  # type: ignore[arg-type]
        if hint is Path:
            return Path(str(raw)).expanduser()
    except (TypeError, ValueError):
        msg = f"{where}: cannot interpret {raw!r} as {getattr(hint, '__name__', hint)}"
        raise ConfigError([msg]) from None
    return str(raw)


def _apply_section(section_obj: Any, name: str, values: Mapping[str, object]) -> Any:
    hints = get_type_hints(type(section_obj))
    known = {f.name for f in fields(section_obj)}
    updates: dict[str, object] = {}
    errors: list[str] = []
    for key, raw in values.items():
        if key not in known:
            errors.append(f"{name}.{key}: unknown setting")
            continue
        try:
            updates[key] = _convert(raw, hints[key], f"{name}.{key}")
        except ConfigError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    return replace(section_obj, **updates)


def apply_overrides(
    config: RunConfig, overrides: Mapping[str, Mapping[str, object]]
) -> RunConfig:
    """Return ``config`` with nested ``{section: {key: value}}`` overrides.

    Values of ``None`` are ignored so optional CLI flags can be passed through
    unconditionally. The ``run`` section addresses top-level fields.
    """
    result = config
    errors: list[str] = []
    for section, values in overrides.items():
        present = {k: v for k, v in values.items() if v is not None}
        if not present:
            continue
        try:
            if section == "run":
                result = _apply_section(result, "run", present)
            elif section in _SECTIONS:
                updated = _apply_section(getattr(result, section), section, present)
                result = replace(result, **{section: updated})
            else:
                errors.append(f"{section}: unknown section")
        except ConfigError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    return result


def load_config_file(path: Path | str) -> dict[str, dict[str, object]]:
    """Read a TOML config file into ``{section: {key: value}}``.

    Top-level keys outside any table belong to the ``run`` section.
    """
    p = Path(path)
    if not p.is_file():
        msg = f"config: file not found: {p}"
        raise ConfigError([msg])
    try:
        with p.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        msg = f"config: {p}: {exc}"
        raise ConfigError([msg]) from exc
    out: dict[str, dict[str, object]] = {"run": {}}
    for key, value in raw.items():
        if isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        else:
            out["run"][key] = value
    return out


def load_config_from_env(
    environ: Mapping[str, str] | None = None,
) -> dict[str, dict[str, object]]:
    """Collect ``IGCCF_<SECTION>_<KEY>`` overrides from the environment.

    A ``.env`` file in the working directory is loaded first when ``environ`` is
    not given; variables already set take precedence over the file.

    Environment
    -----------
    IGCCF_TRAIN_LEARNING_RATE:
        Overrides ``train.learning_rate`` (every field follows this pattern).
    IGCCF_RUN_OUTPUT_DIR:
        Overrides the run directory.

    Returns
    -------
    dict[str, dict[str, object]]
        Nested overrides, raw string values.
    """
    if environ is None:
        load_dotenv()
        environ = os.environ
    out: dict[str, dict[str, object]] = {}
    sections = (*_SECTIONS, "run")
    for name, value in environ.items():
        if not name.startswith(_ENV_PREFIX):
            continue
        rest = name[len(_ENV_PREFIX) :].lower()
        for section in sections:
            if rest.startswith(section + "_"):
                out.setdefault(section, {})[rest[len(section) + 1 :]] = value
                break
    return out


def load_config(
    path: Path | str | None = None,
    overrides: Mapping[str, Mapping[str, object]] | None = None,
    *,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Build a `RunConfig` from file, environment and explicit overrides.

    Parameters
    ----------
    path:
        Optional TOML config file.
    overrides:
        Highest-precedence nested overrides (typically CLI flags).
    environ:
        Environment mapping; defaults to ``os.environ`` plus ``.env``.

    Returns
    -------
    RunConfig
        Merged configuration. Call `RunConfig.validate` before use.
    """
    config = RunConfig()
    if path is not None:
        config = apply_overrides(config, load_config_file(path))
    config = apply_overrides(config, load_config_from_env(environ))
    if overrides:
        config = apply_overrides(config, overrides)
    return config
