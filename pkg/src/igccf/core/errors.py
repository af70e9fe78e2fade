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

"""Core errors module."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path


class IGCCFError(Exception):
    """Base class for all recommender engine errors."""


class InteractionParseError(IGCCFError, ValueError):
    """A line of an interaction file could not be parsed.

    Parameters
    ----------
    path:
        File being read.
    line_number:
        One-based line number of the offending line.
    reason:
        Human-readable description of the problem.
    """

    def __init__(self, path: Path | str, line_number: int, reason: str) -> None:
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{self.path}:{line_number}: {reason}")


class EmptyDatasetError(IGCCFError, ValueError):
    """Ingestion or filtering left no interactions."""


class SplitError(IGCCFError, ValueError):
    """A user profile is too small for the requested split."""

    def __init__(self, user_key: str, size: int, required: int) -> None:
        self.user_key = user_key
        self.size = size
        self.required = required
        super().__init__(
            f"user {user_key!r} has {size} interactions, at least {required} required"
        )


class GraphError(IGCCFError, ValueError):
    """The item graph cannot be built from the given interactions."""


class DimensionMismatchError(IGCCFError, ValueError):
    """Operand shapes do not agree."""


class TrainingDivergedError(IGCCFError, RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, epoch: int, batch: int, learning_rate: float) -> None:
        self.epoch = epoch
        self.batch = batch
        self.learning_rate = learning_rate
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}; "
            f"learning rate {learning_rate:g} is likely too high, "
            f"try {learning_rate / 10:g} or lower"
        )


class ConfigError(IGCCFError, ValueError):
    """Configuration failed validation.

    Parameters
    ----------
    errors:
        One message per invalid field, formatted ``"section.field: reason"``.
    """

    def __init__(self, errors: Sequence[str]) -> None:
        self.errors = list(errors)
        super().__init__("invalid configuration: " + "; ".join(self.errors))


class ArtifactError(IGCCFError):
    """A persisted artifact is missing, corrupt or of an unknown version."""


class IncompatibleArtifactsError(ArtifactError):
    """Artifacts were produced from different item universes."""


class UnknownKeysError(IGCCFError, ValueError):
    """None of the given keys exist in the model's key table."""

    def __init__(self, keys: Sequence[str]) -> None:
        self.keys = list(keys)
        super().__init__("unknown item keys: " + ", ".join(repr(k) for k in self.keys))
