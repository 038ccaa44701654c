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

import itertools
import json
import os
import random

import pytest

import iojudge
from iojudge import shadow

SOURCE_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))


def brute_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_f1_matches_harmonic_mean():
    assert iojudge.f1_score(0.926, 0.995) == pytest.approx(0.959, abs=1e-3)
    assert iojudge.f1_score(0.0, 0.0) == 0.0


def test_auroc_against_pairs():
    rng = random.Random(7)
    for _ in range(20):
        n = rng.randint(2, 60)
        labels = [rng.randint(0, 1) for _ in range(n)]
        labels[0], labels[1] = 0, 1
        scores = [rng.choice([0.1, 0.2, 0.3, rng.random()]) for _ in range(n)]
        assert iojudge.auroc(scores, labels) == pytest.approx(brute_auroc(scores, labels), abs=1e-12)
    with pytest.raises(ValueError):
        iojudge.auroc([0.1, 0.2], [1, 1])


def test_train_predict_and_sage_roundtrip():
    rng = random.Random(3)
    rows, ys = [], []
    for _ in range(300):
        r = [rng.gauss(0, 1) for _ in range(4)]
        rows.append(r)
        ys.append(int(r[1] > 0))
    names = ["a", "b", "c", "d"]
    m = iojudge.LabeledMatrix(names, [f"t{i:03d}" for i in range(300)], rows, ys)
    train, test = iojudge.stratified_split(m, 0.8, 1)
    model = iojudge.train(train, n_trees=40, max_depth=3, min_samples_leaf=5, seed=2)
    assert not model.degenerate
    assert iojudge.auroc(model.predict_proba(test.x), test.y) > 0.95
    again = iojudge.TreeEnsembleModel.from_json(model.to_json())
    assert again.to_json() == model.to_json()

    report = iojudge.estimate_sage(model, test, train, n_permutations=16, background_size=16, seed=5)
    assert json.loads(report)["format"] == "iojudge-sage"
    assert iojudge.sage_ranked(report)[0]["name"] == "b"
    pruned = iojudge.prune_by_positive_mass([("x", 0.6), ("y", 0.3), ("z", 0.1)], 0.95)
    assert pruned["retained"] == ["x", "y", "z"]


def test_static_metrics():
    t = iojudge.tree_metrics([-1, 0, 0, 1, 1])
    assert (t["num_nodes"], t["num_edges"], t["diameter"]) == (5, 4, 3)
    cf = iojudge.control_flow_features("for i in range(3):\n    if i:\n        print(i)\n")
    assert cf["num_loops"] == 1 and cf["num_branches"] == 1
    assert iojudge.lexical_features("print(1)", "", "1\n")["code_chars"] == 8


def test_invalid_inputs_raise_value_error():
    with pytest.raises(ValueError):
        iojudge.LabeledMatrix(["a"], ["t1"], [[1.0, 2.0]], [1])
    with pytest.raises(ValueError):
        iojudge.prune_by_positive_mass([("x", -1.0)], 0.95)


def test_shadow_serialization_contract():
    ex = shadow.serialize_example("t", "c", "i", "o", 1)
    assert ex.serialized == "c [SEP] i [SEP] o"
    assert shadow.split_serialized(ex.serialized) == ("c", "i", "o")
    long_code = " ".join(f"tok{i}" for i in range(1000))
    ex = shadow.serialize_example("t", long_code, "3 4", "7", 0, max_tokens=20)
    code, x, y = shadow.split_serialized(ex.serialized)
    assert (x, y) == ("3 4", "7")
    assert len(code.split()) == 20 - 3 - 2
    assert shadow.serialize_example("t", "c", "x " * 30, "y", 1, max_tokens=20) is None
    with pytest.raises(NotImplementedError):
        shadow.train_shadow([])


def test_pipeline_from_python(tmp_path):
    cfg = json.load(open(os.path.join(SOURCE_DIR, "configs", "fixture_mock.json")))
    cfg["corpus_root"] = os.path.join(SOURCE_DIR, "tests", "fixtures", "corpus")
    cfg["run_dir"] = str(tmp_path / "run")
    cfg["judge"]["models"] = ["mock:code_chars_lt:60"]
    cfg["predictor"]["n_trees"] = 20
    cfg["sage"].update({"n_permutations": 8, "background_size": 8})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    ran = iojudge.run_pipeline(str(path))
    assert ran == ["corpus", "metrics", "judge", "predictor", "sage"]
    assert iojudge.run_pipeline(str(path), "sage") == []
    report = json.loads(iojudge.report_json(str(tmp_path / "run")))
    assert report["shadow"] == "not run"
    shadow.write_reports(
        str(tmp_path / "run"),
        [shadow.ShadowEvalReport("mock:code_chars_lt:60", 0.8, 0.75, 80, 20, 1, 0)],
    )
    assert "| `mock:code_chars_lt:60` | 0.800 |" in iojudge.report_markdown(str(tmp_path / "run"))
    with pytest.raises(ValueError):
        iojudge.run_pipeline(str(path), "nonsense")
