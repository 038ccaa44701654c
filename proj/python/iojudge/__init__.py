# Copyright 2026 The iojudge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Input/output judging corpora, LLM judges, and human-metric success predictors."""

import os as _os

# The execution sidecar ships next to the extension in installed packages.
_sidecar = _os.path.join(_os.path.dirname(__file__), "iojudge_sidecar.py")
if _os.path.exists(_sidecar):
    _os.environ.setdefault("IOJUDGE_SIDECAR", _sidecar)

from ._iojudge import (  # noqa: E402
    ConfigError,
    InvalidArgument,
    LabeledMatrix,
    RuntimeFailure,
    StageFailure,
    TreeEnsembleModel,
    auroc,
    control_flow_features,
    estimate_sage,
    f1_score,
    judge_report,
    lexical_features,
    prompt_version,
    prune_by_positive_mass,
    report_json,
    report_markdown,
    run_pipeline,
    sage_ranked,
    stratified_split,
    train,
    tree_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "LabeledMatrix",
    "RuntimeFailure",
    "StageFailure",
    "TreeEnsembleModel",
    "auroc",
    "control_flow_features",
    "estimate_sage",
    "f1_score",
    "judge_report",
    "lexical_features",
    "prompt_version",
    "prune_by_positive_mass",
    "report_json",
    "report_markdown",
    "run_pipeline",
    "sage_ranked",
    "stratified_split",
    "train",
    "tree_metrics",
]
