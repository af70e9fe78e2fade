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

"""Plain-text tables for terminal output."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import pandas as pd

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from igccf.core.models import MetricsReport


def _float(value: float) -> str:
    return f"{value:.4f}"


def format_report(report: MetricsReport) -> str:
    """Render a report as one row per metric with a column per cutoff."""
    rows = {
        "Recall": {f"@{n}": report.recall(n) for n in report.cutoffs},
        "NDCG": {f"@{n}": report.ndcg(n) for n in report.cutoffs},
    }
    table = pd.DataFrame.from_dict(rows, orient="index").to_string(float_format=_float)
    footer = f"protocol: {report.protocol}  users: {report.n_users_evaluated}"
    if report.n_users_skipped:
        footer += f"  skipped: {report.n_users_skipped}"
    return f"{table}\n{footer}"


def format_recommendations(ranked: Sequence[tuple[str, float]]) -> str:
    """One ``key<TAB>score`` line per item."""
    return "\n".join(f"{key}\t{score:.6f}" for key, score in ranked)


def format_stats(stats: Mapping[str, Any]) -> str:
    """Render dataset statistics as aligned ``name value`` lines."""
    width = max((len(k) for k in stats), default=0)
    lines = []
    for name, value in stats.items():
        shown = f"{value:.6f}" if isinstance(value, float) else str(value)
        lines.append(f"{name:<{width}}  {shown}")
    return "\n".join(lines)


def format_table(frame: pd.DataFrame) -> str:
    """Render any result table."""
    if frame.empty:
        return "(no rows)"
    return frame.to_string(index=False, float_format=_float)
