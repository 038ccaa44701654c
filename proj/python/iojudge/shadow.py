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

"""Shadow models: predict a judge's success from the raw serialized triple.

Only the data contract lives here. Fine-tuning an encoder is not part of this
package; ``train_shadow`` and ``eval_shadow`` raise ``NotImplementedError``.
A trainer that follows the contract writes ``<run>/shadow/report.json`` (see
``write_reports``) and the pipeline report picks it up.
"""

from __future__ import annotations

import dataclasses
import json
import os
from typing import Callable, Iterable, Optional, Sequence

SEP = "[SEP]"
MAX_TOKENS = 512


@dataclasses.dataclass(frozen=True)
class ShadowExample:
    triple_id: str
    serialized: str
    success: int


@dataclasses.dataclass(frozen=True)
class ShadowEvalReport:
    target_model_id: str
    auroc: float
    accuracy: float  # at threshold 0.5
    n_train: int
    n_test: int
    epochs: int
    seed: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _whitespace_tokens(text: str) -> list[str]:
    return text.split()


def serialize_example(
    triple_id: str,
    code: str,
    input_text: str,
    output_text: str,
    success: int,
    max_tokens: int = MAX_TOKENS,
    tokenize: Callable[[str], Sequence[str]] = _whitespace_tokens,
) -> Optional[ShadowExample]:
    """``code [SEP] input [SEP] output``, cutting tokens off the end of the code.

    Returns None when input and output alone do not fit; the caller logs the drop.
    ``tokenize`` should be the encoder's tokenizer; whitespace splitting is a
    stand-in that keeps this module dependency-free.
    """
    fixed = len(tokenize(input_text)) + len(tokenize(output_text)) + 2
    if fixed > max_tokens:
        return None
    code_tokens = list(tokenize(code))
    budget = max_tokens - fixed
    if len(code_tokens) > budget:
        code = " ".join(code_tokens[:budget])
    return ShadowExample(triple_id, f"{code} {SEP} {input_text} {SEP} {output_text}", int(success))


def split_serialized(serialized: str) -> tuple[str, str, str]:
    parts = serialized.split(f" {SEP} ")
    if len(parts) != 3:
        raise ValueError("expected exactly two separators")
    return parts[0], parts[1], parts[2]


def train_shadow(examples: Iterable[ShadowExample], seed: int = 0, **hyper):
    raise NotImplementedError("shadow training is provided by an external trainer")


def eval_shadow(model, examples: Iterable[ShadowExample]) -> ShadowEvalReport:
    raise NotImplementedError("shadow evaluation is provided by an external trainer")


def write_reports(run_dir: str, reports: Sequence[ShadowEvalReport]) -> str:
    """Writes the list the pipeline report reads; returns its path."""
    path = os.path.join(run_dir, "shadow", "report.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path + ".tmp", "w", encoding="utf-8") as f:
        json.dump([r.to_dict() for r in reports], f, indent=2)
        f.write("\n")
    os.replace(path + ".tmp", path)
    return path
