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

"""One-parameter sweeps: ablations and the training-user fraction study."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

from igccf.core.data import (
    merge_matrices,
    partition_users,
    select_users,
    split_per_user,
)
from igccf.core.errors import ConfigError
from igccf.core.evaluation import evaluate_holdout, evaluate_transductive
from igccf.core.models import INDUCTIVE, TRANSDUCTIVE, SweepPoint, SweepResult
from igccf.core.training import fit

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from igccf.core.config import SplitConfig, TrainConfig
    from igccf.core.models import DatasetSplit, InteractionMatrix

logger = logging.getLogger(__name__)

SweepProtocol = Literal["ablation", "user_fraction"]


def _parse_top_k(raw: str) -> int | None:
    return None if raw.strip().lower() in {"full", "none"} else int(raw)


def _parse_fraction(raw: str) -> float:
    value = float(raw)
    if not 0 < value < 1:
        msg = f"seen-user fraction must be in (0, 1), got {value}"
        raise ValueError(msg)
    return value


@dataclass(slots=True, frozen=True)
class SweepParameter:
    """A parameter the sweep runner knows how to vary.

    Parameters
    ----------
    name:
        Name used on the command line and in result tables.
    parse:
        Converts one textual grid value.
    apply:
        Returns the training config for one grid value.
    default_grid:
        Grid used when none is given.
    protocol:
        ``"ablation"`` evaluates transductively on a per-user split;
        ``"user_fraction"`` trains on a share of the users and reports seen
        and unseen users separately.
    """

    name: str
    parse: Callable[[str], object]
    apply: Callable[[TrainConfig, object], TrainConfig]
    default_grid: tuple[object, ...]
    protocol: SweepProtocol = "ablation"


@dataclass(slots=True)
class SweepRegistry:
    """Registry of sweepable parameters."""

    parameters: dict[str, SweepParameter] = field(default_factory=dict)

    def register(self, parameter: SweepParameter) -> None:
        """Add ``parameter``, replacing any previous entry of that name."""
        self.parameters[parameter.name] = parameter

    def names(self) -> list[str]:
        """Return the registered names in registration order."""
        return list(self.parameters)

    def get_parameter_by_name(self, name: str) -> SweepParameter:
        """Look up a parameter.

        Raises
        ------
        KeyError
            If ``name`` is not registered.
        """
        try:
            return self.parameters[name]
        except KeyError:
            choices = ", ".join(self.parameters)
            msg = f"unknown sweep parameter {name!r}; choose from {choices}"
            raise KeyError(msg) from None

    def parse_grid(self, name: str, values: Sequence[str]) -> list[object]:
        """Parse textual grid values for ``name``."""
        parameter = self.get_parameter_by_name(name)
        return [parameter.parse(v) for v in values]


def _build_registry() -> SweepRegistry:
    registry = SweepRegistry()
    registry.register(
        SweepParameter(
            "depth",
            int,
            lambda c, v: dataclasses.replace(c, depth=v),
            (0, 1, 2, 3),
        )
    )
    registry.register(
        SweepParameter(
            "dropout_p",
            float,
            lambda c, v: dataclasses.replace(c, dropout=v),
            (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
        )
    )
    registry.register(
        SweepParameter(
            "top_k",
            _parse_top_k,
            lambda c, v: dataclasses.replace(c, top_k=v),
            (5, 10, 20, 50, None),
        )
    )
    # the fraction only changes which users are trained on
    registry.register(
        SweepParameter(
            "train_user_fraction",
            _parse_fraction,
            lambda c, _v: c,
            (0.9, 0.7, 0.5, 0.3, 0.1),
            protocol="user_fraction",
        )
    )
    return registry


sweep_registry: SweepRegistry = _build_registry()


def run_sweep(
    parameter: str,
    grid: Sequence[object],
    base: TrainConfig,
    matrix: InteractionMatrix,
    seeds: Sequence[int],
    *,
    split: SplitConfig,
    cutoffs: Sequence[int] = (5, 20),
    show_progress: bool = False,
) -> SweepResult:
    """Train and evaluate one model per grid value and seed.

    Every seed draws its own per-user split (and, for the user-fraction
    sweep, its own user partition); all grid values of a seed share it.
    Training uses the split's train part with early stopping on its
    validation part; the reported time is the wall-clock time of `fit`.

    Parameters
    ----------
    parameter:
        Registered parameter name.
    grid:
        Parsed grid values.
    base:
        Training configuration shared by all points.
    matrix:
        Filtered interaction matrix.
    seeds:
        Seeds for splits, initialisation and sampling.
    split:
        Split fractions.
    cutoffs:
        Evaluation cutoffs.
    show_progress:
        Show epoch progress bars.

    Raises
    ------
    ValueError
        If ``grid`` or ``seeds`` is empty.
    """
    if not grid:
        msg = "sweep grid must not be empty"
        raise ValueError(msg)
    if not seeds:
        msg = "at least one seed is required"
        raise ValueError(msg)
    swept = sweep_registry.get_parameter_by_name(parameter)
    result = SweepResult(parameter, list(grid))
    for seed in seeds:
        per_user = split_per_user(matrix, split.train_frac, split.val_frac, seed)
        for value in grid:
            config = dataclasses.replace(swept.apply(base, value), seed=seed)
            if errors := config.validate():
                raise ConfigError(errors)
            logger.info(
                "sweep_point_started",
                extra={"parameter": parameter, "value": value, "seed": seed},
            )
            if swept.protocol == "user_fraction":
                result.points.extend(
                    _user_fraction_points(
                        per_user,
                        value,
                        config,
                        seed,
                        cutoffs,
                        show_progress=show_progress,
                    )
                )
                continue
            started = time.perf_counter()
            model, _ = fit(
                per_user.train,
                per_user.validation,
                config,
                cutoffs=cutoffs,
                show_progress=show_progress,
            )
            seconds = time.perf_counter() - started
            report = evaluate_transductive(model, per_user, cutoffs)
            result.points.append(SweepPoint(value, seed, report, seconds))
    return result


def _user_fraction_points(
    per_user: DatasetSplit,
    seen_frac: object,
    config: TrainConfig,
    seed: int,
    cutoffs: Sequence[int],
    *,
    show_progress: bool,
) -> list[SweepPoint]:
    """Train on a share of the users; report seen and unseen users separately.

    Both groups are scored on their test part of the same per-user split.
    Unseen users are embedded from their train and validation items, which
    the model never saw.
    """
    train, validation, test = per_user.train, per_user.validation, per_user.test
    seen, unseen = partition_users(train.n_users, 1.0 - float(seen_frac), seed)
    started = time.perf_counter()
    model, _ = fit(
        select_users(train, seen),
        select_users(validation, seen),
        config,
        cutoffs=cutoffs,
        show_progress=show_progress,
    )
    seconds = time.perf_counter() - started
    known = merge_matrices(train, validation)
    points = []
    for users, protocol in ((seen, TRANSDUCTIVE), (unseen, INDUCTIVE)):
        profiles = select_users(known, users)
        targets = select_users(test, users)
        report = evaluate_holdout(model, profiles, targets, cutoffs, protocol=protocol)
        points.append(SweepPoint(seen_frac, seed, report, seconds))
    return points
