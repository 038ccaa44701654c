// Copyright 2026 The iojudge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>

#include "doctest.h"
#include "iojudge/pipeline.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace iojudge;
using namespace iojudge::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kModel = "mock:code_chars_lt:60";

json base_config(const fs::path& run_dir) {
  return {
      {"corpus_root", testing::fixture("corpus").string()},
      {"run_dir", run_dir.string()},
      {"fuzz_budget", 4},
      {"execution", {{"timeout_s", 5.0}}},
      {"judge", {{"models", {kModel, "mock:even_output_length"}}, {"split", "all"}}},
      {"predictor", {{"n_trees", 30}, {"max_depth", 3}, {"min_samples_leaf", 5}}},
      {"sage", {{"n_permutations", 8}, {"background_size", 8}, {"top_k", 5}}},
  };
}

RunConfig config_for(const fs::path& run_dir) {
  return RunConfig::from_json(base_config(run_dir).dump(), fs::current_path());
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel == "manifest.json" || rel == ".lock") continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config rejects unknown keys and bad values") {
  const auto dir = testing::scratch_dir("pipeline-config");
  auto j = base_config(dir / "run");
  j["judge"]["temprature"] = 0;
  CHECK_THROWS_AS(RunConfig::from_json(j.dump(), dir), ConfigError);
  j = base_config(dir / "run");
  j["sage"]["threshold"] = 1.5;
  CHECK_THROWS_AS(RunConfig::from_json(j.dump(), dir), ConfigError);
  j = base_config(dir / "run");
  j["judge"]["models"] = {"gpt-x"};  // remote model without an endpoint
  CHECK_THROWS_AS(RunConfig::from_json(j.dump(), dir), ConfigError);
  j = base_config(dir / "run");
  j["judge"]["models"] = {"mock:no_such_rule"};
  CHECK_THROWS_AS(RunConfig::from_json(j.dump(), dir), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{not json", dir), ConfigError);
  CHECK_THROWS_AS(parse_stage("shadow"), ConfigError);
  CHECK(parse_stage("sage") == Stage::kSage);

  // Relative paths follow the config file, and run_dir stays out of the
  // canonical form.
  j = base_config("runs/a");
  j["corpus_root"] = "corpus";
  const auto c = RunConfig::from_json(j.dump(), dir);
  CHECK(c.run_dir == dir / "runs" / "a");
  CHECK(c.corpus_root == dir / "corpus");
  CHECK(c.to_json().find("runs/a") == std::string::npos);
  CHECK(c.stage_hash(Stage::kJudge) != c.stage_hash(Stage::kSage));
}

TEST_CASE("stage hashes track only the settings each stage uses") {
  const auto dir = testing::scratch_dir("pipeline-hash");
  auto a = config_for(dir / "run");
  auto b = a;
  b.sage.threads = 4;
  b.judge.options.max_concurrency = 1;
  for (Stage s : all_stages()) CHECK(a.stage_hash(s) == b.stage_hash(s));
  b.sage.n_permutations = 9;
  CHECK(a.stage_hash(Stage::kSage) != b.stage_hash(Stage::kSage));
  CHECK(a.stage_hash(Stage::kPredictor) == b.stage_hash(Stage::kPredictor));
  b.seeds.split = 99;
  CHECK(a.stage_hash(Stage::kPredictor) != b.stage_hash(Stage::kPredictor));
  CHECK(a.stage_hash(Stage::kCorpus) == b.stage_hash(Stage::kCorpus));
}

TEST_CASE("stages refuse to run ahead of their inputs") {
  const auto dir = testing::scratch_dir("pipeline-dag");
  Pipeline p(config_for(dir / "run"));
  CHECK_THROWS_AS(p.run_stage(Stage::kMetrics), StageFailure);
  CHECK_THROWS_AS(p.run_stage(Stage::kSage), StageFailure);
  CHECK(p.run_stage(Stage::kCorpus));
  CHECK(p.is_complete(Stage::kCorpus));
  CHECK_THROWS_AS(p.run_stage(Stage::kJudge), StageFailure);
  CHECK(p.incomplete_reason(Stage::kMetrics).find("has not run") != std::string::npos);

  // A second pipeline on the same directory is locked out.
  CHECK_THROWS_AS(Pipeline(config_for(dir / "run")), StageFailure);
}

TEST_CASE("full run, no-op rerun, staleness and byte-identical reruns") {
  const auto dir = testing::scratch_dir("pipeline-run");
  std::map<std::string, std::string> first;
  {
    Pipeline p(config_for(dir / "a"));
    const auto ran = p.run_all();
    CHECK(ran.size() == all_stages().size());
    for (Stage s : all_stages()) CHECK(p.is_complete(s));
    CHECK(p.run_all().empty());
    CHECK_FALSE(p.run_stage(Stage::kPredictor));
    first = tree_contents(dir / "a");
  }
  for (const char* f : {"config.json", "corpus/dataset.jsonl", "metrics/features.csv",
                        "judge/summary.json", "predictor/mock_code_chars_lt_60/model.json",
                        "sage/mock_code_chars_lt_60/report.json", "report.md", "report.json"}) {
    CAPTURE(f);
    CHECK(first.count(f) == 1);
  }

  {
    Pipeline p(config_for(dir / "b"));
    p.run_all();
  }
  const auto second = tree_contents(dir / "b");
  CHECK(first.size() == second.size());
  for (const auto& [path, bytes] : first) {
    CAPTURE(path);
    REQUIRE(second.count(path) == 1);
    CHECK(second.at(path) == bytes);
  }

  // Tampering with an artifact makes its stage stale, and downstream stages
  // refuse until it is rebuilt.
  {
    const auto target = dir / "a" / "metrics" / "features.csv";
    write_file_atomic(target, read_file(target) + "\n");
    Pipeline p(config_for(dir / "a"));
    const auto why = p.incomplete_reason(Stage::kMetrics);
    CHECK(why.find("artifact modified: metrics/features.csv") != std::string::npos);
    CHECK_THROWS_AS(p.run_stage(Stage::kJudge), StageFailure);
    CHECK(p.run_stage(Stage::kMetrics));
    CHECK(p.is_complete(Stage::kMetrics));
    CHECK(p.is_complete(Stage::kJudge));  // metrics digest unchanged after rebuild
  }

  // A changed setting invalidates only its own stage and whatever follows.
  {
    auto cfg = config_for(dir / "a");
    cfg.sage.n_permutations = 10;
    Pipeline p(cfg);
    CHECK(p.is_complete(Stage::kPredictor));
    CHECK(p.incomplete_reason(Stage::kSage).find("configuration") != std::string::npos);
  }
}

TEST_CASE("report aggregates match the judgment records") {
  const auto dir = testing::scratch_dir("pipeline-report");
  {
    Pipeline p(config_for(dir / "run"));
    p.run_all();
  }
  const auto report = json::parse(read_file(dir / "run" / "report.json"));
  for (const std::string model : {kModel, "mock:even_output_length"}) {
    CAPTURE(model);
    const auto records =
        judge::records_from_jsonl(read_file(dir / "run" / "judge" / model_slug(model) / "records.jsonl"));
    int tp = 0, fp = 0, tn = 0, fn = 0;
    int successes = 0;
    for (const auto& r : records) {
      // An invalid verdict is scored as the wrong answer.
      const bool truth = r.label == 1;
      const bool yes = r.verdict == judge::Verdict::kInvalid ? !truth : r.verdict == judge::Verdict::kMatch;
      tp += yes && truth;
      fp += yes && !truth;
      tn += !yes && !truth;
      fn += !yes && truth;
      successes += r.success;
    }
    CHECK(successes == tp + tn);
    const auto& all = report.at("judge").at(model).at("all");
    CHECK(all.at("tp").get<int>() == tp);
    CHECK(all.at("fp").get<int>() == fp);
    CHECK(all.at("tn").get<int>() == tn);
    CHECK(all.at("fn").get<int>() == fn);
    const double acc = static_cast<double>(tp + tn) / static_cast<double>(records.size());
    CHECK(all.at("accuracy").get<double>() == doctest::Approx(acc).epsilon(1e-12));
  }

  const auto& models = report.at("models");
  REQUIRE(models.size() == 2);
  for (const auto& m : models) {
    REQUIRE(m.at("predictor").is_object());
    REQUIRE(m.at("sage").is_object());
    const auto& s = m.at("sage");
    CHECK(s.at("retained_count").get<std::size_t>() == s.at("retained").size());
    CHECK(s.at("top_features").size() <= 5);
  }
  CHECK(report.at("shadow") == "not run");
  const auto md = read_file(dir / "run" / "report.md");
  CHECK(md.find("| Pruned |") != std::string::npos);
  CHECK(md.find("## Shadow models\n\nnot run") != std::string::npos);

  // The report reflects a shadow evaluation once one is placed in the run.
  write_file_atomic(dir / "run" / "shadow" / "report.json",
                    R"([{"target_model_id": "mock:code_chars_lt:60", "auroc": 0.71}])");
  CHECK(report_markdown(dir / "run").find("| `mock:code_chars_lt:60` | 0.710 |") != std::string::npos);
}
