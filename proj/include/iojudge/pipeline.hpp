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

// Stage-by-stage orchestration: corpus -> metrics -> judge -> predictor ->
// sage, each writing hashed artifacts into one run directory.
//
// Run directory layout:
//   config.json                 resolved configuration
//   manifest.json               per-stage artifact hashes
//   corpus/{dataset.jsonl,split.json,log.jsonl,summary.json}
//   metrics/{catalog.json,features.csv}
//   judge/summary.json, judge/<model>/records.jsonl
//   predictor/<model>/{model.json,split.json,scores.csv,summary.json}
//   sage/<model>/{report.json,comparison.json,pruned_model.json,table.md}
//   report.json, report.md

#ifndef IOJUDGE_PIPELINE_HPP_
#define IOJUDGE_PIPELINE_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "iojudge/corpus.hpp"
#include "iojudge/judge.hpp"
#include "iojudge/predictor.hpp"

namespace iojudge::pipeline {

enum class Stage { kCorpus, kMetrics, kJudge, kPredictor, kSage };

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);  // throws ConfigError
const std::vector<Stage>& all_stages();    // DAG order

/// Invalid or unreadable configuration (exit status 2 in the CLI).
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A stage could not run or failed (exit status 1 in the CLI).
class StageFailure : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

struct Seeds {
  std::uint64_t fuzz = 1;
  std::uint64_t negatives = 2;
  std::uint64_t split = 3;
  std::uint64_t predictor = 4;
  std::uint64_t sage = 5;
};

struct JudgeConfig {
  std::vector<std::string> models;
  std::string endpoint;  // OpenAI-compatible base URL; unused by mock models
  std::string api_key_env = "IOJUDGE_API_KEY";
  std::string split = "eval";  // "eval" problems only, or "all"
  bool cache = true;           // <run>/judge/cache
  judge::JudgeOptions options;
};

struct SageConfig {
  int n_permutations = 512;
  int background_size = 128;
  int max_eval_rows = 0;
  int threads = 1;
  double threshold = 0.95;
  int top_k = 20;
};

struct RunConfig {
  std::filesystem::path corpus_root;
  std::filesystem::path run_dir;
  Seeds seeds;
  int fuzz_budget = 8;
  int workers = 1;
  std::string python = "python3";
  ExecutionLimits execution;
  corpus::LengthLimits limits;
  JudgeConfig judge;
  predictor::Hyperparameters predictor;
  SageConfig sage;
  bool shadow = false;  // reads shadow/report.json when present

  /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static RunConfig from_json(std::string_view text, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& file);
  /// Canonical form with every default filled in.
  std::string to_json() const;
  /// Hash of the settings that affect `stage`.
  std::string stage_hash(Stage stage) const;
};

struct StageRecord {
  std::string config_hash;
  std::map<std::string, std::string> upstream;   // stage -> digest
  std::map<std::string, std::string> artifacts;  // relative path -> SHA-256
  std::string digest;                            // over the artifact list
  std::string completed_at;                      // UTC, informational
};

struct RunManifest {
  std::string config_hash;
  std::string interpreter;
  std::map<std::string, StageRecord> stages;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

using ServiceFactory = corpus::ServiceFactory;
using ClientFactory = std::function<std::unique_ptr<judge::ChatClient>(const JudgeConfig&)>;

/// Filesystem-safe name for a model id.
std::string model_slug(std::string_view model_id);

class Pipeline {
 public:
  /// Takes the run-directory lock; throws StageFailure when another process
  /// holds it. Empty factories use the sidecar and the HTTP client.
  explicit Pipeline(RunConfig config, ServiceFactory services = {}, ClientFactory clients = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Runs every stage that is not complete, then writes the report.
  /// Returns the stages that actually ran.
  std::vector<Stage> run_all();
  /// Runs one stage. Upstream stages must be complete and current; returns
  /// false when the stage was already complete (no-op).
  bool run_stage(Stage stage);

  /// Empty when complete; otherwise why not.
  std::string incomplete_reason(Stage stage) const;
  bool is_complete(Stage stage) const { return incomplete_reason(stage).empty(); }
  const RunManifest& manifest() const { return manifest_; }

 private:
  void run_corpus();
  void run_metrics();
  void run_judge();
  void run_predictor();
  void run_sage();
  void write_artifact(const std::string& rel, std::string_view contents,
                      std::map<std::string, std::string>& hashes) const;
  void finish_stage(Stage stage, std::map<std::string, std::string> artifacts);
  std::string read_artifact(const std::string& rel) const;

  RunConfig config_;
  ServiceFactory services_;
  ClientFactory clients_;
  RunManifest manifest_;
  int lock_fd_ = -1;
};

/// Summary documents built only from the artifacts on disk. Sections whose
/// stage has not run are marked absent.
std::string report_json(const std::filesystem::path& run_dir);
std::string report_markdown(const std::filesystem::path& run_dir);
/// Writes report.json and report.md into the run directory.
void write_report(const std::filesystem::path& run_dir);

}  // namespace iojudge::pipeline

#endif  // IOJUDGE_PIPELINE_HPP_
