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

"""Core recommender logic (data, graph, embeddings, training, evaluation).

The command line front end in `igccf.cli` is a thin layer over these names.
"""

from igccf.core.config import (
    DataConfig,
    EvalConfig,
    RunConfig,
    SplitConfig,
    TrainConfig,
    load_config,
    load_config_from_env,
)
from igccf.core.data import (
    build_matrix,
    kcore_filter,
    load_interactions,
    split_per_user,
    split_user_holdout,
)
from igccf.core.embedding import embed_all_users, embed_user, recommend
from igccf.core.evaluation import (
    evaluate_inductive,
    evaluate_transductive,
    ndcg_at_n,
    recall_at_n,
)
from igccf.core.graph import build_propagation, project_cosine, propagate, topk_prune
from igccf.core.models import (
    DatasetSplit,
    InteractionMatrix,
    ItemEmbeddings,
    ItemGraph,
    MetricsReport,
    PropagationMatrix,
    SweepResult,
    TrainedModel,
    UserHoldoutSplit,
)
from igccf.core.sweep import SweepRegistry, run_sweep, sweep_registry
from igccf.core.training import fit, train_epoch

__all__ = [
    "DataConfig",
    "DatasetSplit",
    "EvalConfig",
    "InteractionMatrix",
    "ItemEmbeddings",
    "ItemGraph",
    "MetricsReport",
    "PropagationMatrix",
    "RunConfig",
    "SplitConfig",
    "SweepRegistry",
    "SweepResult",
    "TrainConfig",
    "TrainedModel",
    "UserHoldoutSplit",
    "build_matrix",
    "build_propagation",
    "embed_all_users",
    "embed_user",
    "evaluate_inductive",
    "evaluate_transductive",
    "fit",
    "kcore_filter",
    "load_config",
    "load_config_from_env",
    "load_interactions",
    "ndcg_at_n",
    "project_cosine",
    "propagate",
    "recall_at_n",
    "recommend",
    "run_sweep",
    "split_per_user",
    "split_user_holdout",
    "sweep_registry",
    "topk_prune",
    "train_epoch",
]
