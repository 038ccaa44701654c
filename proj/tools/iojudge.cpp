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

// iojudge command-line front end.
//
//   iojudge pipeline run --config run.json [--stage sage] [--set sage.threads=4]
//   iojudge pipeline report --run runs/a
//   iojudge judge run --dataset dataset.jsonl --model mock:oracle --out judged/
//   iojudge judge report --records judged/records.jsonl
//   iojudge predictor train --data labeled.csv --out model.json
//   iojudge predictor predict --model model.json --data labeled.csv --out scores.csv
//   iojudge sage run --model model.json --data labeled.csv --perms 512 --background 128 --seed 5
//
// Exit status: 0 success, 1 runtime/stage failure, 2 usage or configuration error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iojudge/judge.hpp"
#include "iojudge/pipeline.hpp"
#include "iojudge/predictor.hpp"
#include "iojudge/sage.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace iojudge;
using nlohmann::json;

namespace {

constexpr int kFailure = 1;
constexpr int kUsage = 2;

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out && *out != "-") {
    write_file_atomic(*out, text);
  } else {
    std::fwrite(text.data(), 1, text.size(), stdout);
  }
}

// Applies "a.b.c=value" to a JSON object; value is parsed as JSON when it
// parses, otherwise taken as a string.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw pipeline::ConfigError("--set expects key.path=value, got '" + assignment + "'");
  }
  const auto keys = split(assignment.substr(0, eq), '.');
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw pipeline::ConfigError("--set: " + keys[i] + " is not an object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw pipeline::ConfigError("--set: cannot assign into a non-object");
  (*node)[keys.back()] = std::move(value);
}

pipeline::RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides,
                                 const std::optional<std::string>& run_dir) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const std::exception& e) {
    throw pipeline::ConfigError("config: cannot read " + file + ": " + e.what());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw pipeline::ConfigError("config: " + file + " is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  const auto base = fs::absolute(file).parent_path();
  if (run_dir) j["run_dir"] = fs::absolute(*run_dir).string();
  return pipeline::RunConfig::from_json(j.dump(), base);
}

predictor::LabeledMatrix load_labeled(const std::string& path) {
  return predictor::labeled_from_csv(read_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iojudge: input/output judging corpora, judges, and human-metric predictors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "iojudge 0.1.0");

  // ---- pipeline ----------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "Run or report the staged pipeline");
  pipe->require_subcommand(1);
  std::string config_file, stage_name, report_dir;
  std::optional<std::string> run_dir_override;
  std::vector<std::string> overrides;
  auto* pipe_run = pipe->add_subcommand("run", "Run every incomplete stage, or one stage");
  pipe_run->add_option("--config", config_file, "JSON run configuration")->required();
  pipe_run->add_option("--stage", stage_name, "corpus, metrics, judge, predictor or sage");
  pipe_run->add_option("--run-dir", run_dir_override, "Override run_dir");
  pipe_run->add_option("--set", overrides, "Override a config value: key.path=value");
  auto* pipe_status = pipe->add_subcommand("status", "Show which stages are complete");
  pipe_status->add_option("--config", config_file, "JSON run configuration")->required();
  pipe_status->add_option("--run-dir", run_dir_override, "Override run_dir");
  pipe_status->add_option("--set", overrides, "Override a config value: key.path=value");
  auto* pipe_report = pipe->add_subcommand("report", "Write report.json and report.md");
  pipe_report->add_option("--run", report_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  // ---- judge -------------------------------------------------------------
  auto* judge_cmd = app.add_subcommand("judge", "Query a judge model over a dataset");
  judge_cmd->require_subcommand(1);
  std::string dataset, model_id, out_dir, endpoint, api_key_env = "IOJUDGE_API_KEY", records_file;
  judge::JudgeOptions jopt;
  bool no_cache = false;
  auto* judge_run = judge_cmd->add_subcommand("run", "Judge every triple in a dataset");
  judge_run->add_option("--dataset", dataset, "JSON-lines dataset")->required()->check(CLI::ExistingFile);
  judge_run->add_option("--model", model_id, "Model id, or mock:<rule>")->required();
  judge_run->add_option("--out", out_dir, "Output directory")->required();
  judge_run->add_option("--endpoint", endpoint, "OpenAI-compatible base URL");
  judge_run->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  judge_run->add_option("--max-concurrency", jopt.max_concurrency)->capture_default_str();
  judge_run->add_option("--rps", jopt.requests_per_second, "Requests per second, 0 = unlimited")
      ->capture_default_str();
  judge_run->add_option("--max-retries", jopt.max_retries)->capture_default_str();
  judge_run->add_option("--timeout", jopt.request_timeout_s, "Per-request timeout, seconds")
      ->capture_default_str();
  judge_run->add_flag("--no-cache", no_cache, "Do not read or write <out>/cache");
  auto* judge_report = judge_cmd->add_subcommand("report", "Aggregate metrics from records");
  judge_report->add_option("--records", records_file, "records.jsonl")->required()->check(CLI::ExistingFile);

  // ---- predictor ---------------------------------------------------------
  auto* pred = app.add_subcommand("predictor", "Train or apply the success predictor");
  pred->require_subcommand(1);
  std::string data_file, model_file, features_file;
  std::optional<std::string> out_file;
  predictor::Hyperparameters hyper;
  double holdout = 0.0;
  std::uint64_t split_seed = 3;
  auto* pred_join = pred->add_subcommand("join", "Attach judgment success labels to a feature matrix");
  pred_join->add_option("--features", features_file, "features.csv")->required()->check(CLI::ExistingFile);
  pred_join->add_option("--records", records_file, "records.jsonl")->required()->check(CLI::ExistingFile);
  pred_join->add_option("--out", out_file, "Labeled CSV (default stdout)");
  auto* pred_train = pred->add_subcommand("train", "Fit a boosted-tree model on a labeled CSV");
  pred_train->add_option("--data", data_file, "Labeled CSV")->required()->check(CLI::ExistingFile);
  pred_train->add_option("--out", out_file, "Model JSON (default stdout)");
  pred_train->add_option("--trees", hyper.n_trees)->capture_default_str();
  pred_train->add_option("--depth", hyper.max_depth)->capture_default_str();
  pred_train->add_option("--learning-rate", hyper.learning_rate)->capture_default_str();
  pred_train->add_option("--subsample", hyper.subsample)->capture_default_str();
  pred_train->add_option("--min-leaf", hyper.min_samples_leaf)->capture_default_str();
  pred_train->add_option("--lambda", hyper.lambda)->capture_default_str();
  pred_train->add_option("--seed", hyper.seed)->capture_default_str();
  pred_train->add_option("--holdout", holdout, "Stratified test fraction; reports its AUROC on stderr")
      ->check(CLI::Range(0.0, 0.9));
  pred_train->add_option("--split-seed", split_seed)->capture_default_str();
  auto* pred_predict = pred->add_subcommand("predict", "Score rows; writes triple_id,score[,label]");
  pred_predict->add_option("--model", model_file, "Model JSON")->required()->check(CLI::ExistingFile);
  pred_predict->add_option("--data", data_file, "Labeled or feature CSV")->required()->check(CLI::ExistingFile);
  pred_predict->add_option("--out", out_file, "Scores CSV (default stdout)");

  // ---- sage --------------------------------------------------------------
  auto* sage_cmd = app.add_subcommand("sage", "SAGE feature importance");
  sage_cmd->require_subcommand(1);
  sage::SageOptions sopt;
  std::optional<std::string> markdown_file;
  std::size_t top_k = 20;
  double threshold = 0.95;
  auto* sage_run = sage_cmd->add_subcommand("run", "Estimate SAGE values of a model on labeled rows");
  sage_run->add_option("--model", model_file, "Model JSON")->required()->check(CLI::ExistingFile);
  sage_run->add_option("--data", data_file, "Labeled CSV (evaluation rows)")->required()->check(CLI::ExistingFile);
  sage_run->add_option("--background-data", features_file,
                       "Labeled CSV to draw the background from (default: --data)");
  sage_run->add_option("--perms", sopt.n_permutations)->capture_default_str()->check(CLI::Range(2, 1 << 24));
  sage_run->add_option("--background", sopt.background_size)->capture_default_str()->check(CLI::PositiveNumber);
  sage_run->add_option("--seed", sopt.seed)->capture_default_str();
  sage_run->add_option("--eval-rows", sopt.max_eval_rows, "Cap on evaluation rows, 0 = all")
      ->capture_default_str();
  sage_run->add_option("--threads", sopt.threads)->capture_default_str()->check(CLI::PositiveNumber);
  sage_run->add_option("--out", out_file, "Report JSON (default stdout)");
  sage_run->add_option("--markdown", markdown_file, "Also write the top-k table here");
  sage_run->add_option("--top-k", top_k)->capture_default_str();
  sage_run->add_option("--threshold", threshold, "Report the pruned subset at this mass fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (pipe_run->parsed()) {
      auto cfg = load_config(config_file, overrides, run_dir_override);
      std::optional<pipeline::Stage> only;
      if (!stage_name.empty()) only = pipeline::parse_stage(stage_name);
      pipeline::Pipeline p(std::move(cfg));
      if (only) {
        const bool ran = p.run_stage(*only);
        std::cerr << pipeline::stage_name(*only) << (ran ? ": done" : ": already complete") << "\n";
      } else {
        const auto ran = p.run_all();
        for (auto s : pipeline::all_stages()) {
          const bool did = std::find(ran.begin(), ran.end(), s) != ran.end();
          std::cerr << pipeline::stage_name(s) << (did ? ": done" : ": already complete") << "\n";
        }
      }
      return 0;
    }
    if (pipe_status->parsed()) {
      pipeline::Pipeline p(load_config(config_file, overrides, run_dir_override));
      bool all = true;
      for (auto s : pipeline::all_stages()) {
        const auto why = p.incomplete_reason(s);
        all = all && why.empty();
        std::cout << pipeline::stage_name(s) << ": " << (why.empty() ? "complete" : why) << "\n";
      }
      return all ? 0 : kFailure;
    }
    if (pipe_report->parsed()) {
      pipeline::write_report(report_dir);
      std::cout << read_file(fs::path(report_dir) / "report.md");
      return 0;
    }

    if (judge_run->parsed()) {
      const auto triples = corpus::dataset_from_jsonl(read_file(dataset));
      std::unique_ptr<judge::ChatClient> client;
      if (!judge::is_mock_model(model_id)) {
        if (endpoint.empty()) throw InvalidArgument("--endpoint is required for non-mock models");
        const char* key = std::getenv(api_key_env.c_str());
        client = std::make_unique<judge::HttpChatClient>(endpoint, key ? key : "");
      }
      if (!no_cache) jopt.cache_dir = fs::path(out_dir) / "cache";
      const auto records = judge::judge_all(client.get(), model_id, triples, jopt);
      fs::create_directories(out_dir);
      write_file_atomic(fs::path(out_dir) / "records.jsonl", judge::records_to_jsonl(records));
      const auto summary = judge::report_json(records);
      write_file_atomic(fs::path(out_dir) / "summary.json", summary);
      std::cout << summary;
      return 0;
    }
    if (judge_report->parsed()) {
      std::cout << judge::report_json(judge::records_from_jsonl(read_file(records_file)));
      return 0;
    }

    if (pred_join->parsed()) {
      const auto m = predictor::join_labels(metrics::matrix_from_csv(read_file(features_file)),
                                            judge::records_from_jsonl(read_file(records_file)));
      emit(out_file, predictor::labeled_to_csv(m));
      return 0;
    }
    if (pred_train->parsed()) {
      auto m = load_labeled(data_file);
      if (holdout > 0.0) {
        auto [train_m, test_m] = predictor::stratified_split(m, 1.0 - holdout, split_seed);
        const auto model = predictor::train(train_m, hyper);
        const auto scores = predictor::predict_proba(model, test_m.names, test_m.x);
        std::fprintf(stderr, "train rows %zu, test rows %zu, test AUROC %.6f%s\n", train_m.rows(),
                     test_m.rows(), predictor::auroc(scores, test_m.y),
                     model.degenerate ? " (degenerate model)" : "");
        emit(out_file, model.to_json());
      } else {
        emit(out_file, predictor::train(m, hyper).to_json());
      }
      return 0;
    }
    if (pred_predict->parsed()) {
      const auto model = predictor::TreeEnsembleModel::from_json(read_file(model_file));
      const std::string text = read_file(data_file);
      const auto header = text.substr(0, text.find('\n'));
      const bool labeled = header.size() >= 8 && header.compare(header.size() - 8, 8, ",success") == 0;
      std::string csv;
      if (labeled) {
        const auto m = predictor::labeled_from_csv(text);
        const auto scores = predictor::predict_proba(model, m.names, m.x);
        csv = "triple_id,score,label\n";
        for (std::size_t i = 0; i < scores.size(); ++i) {
          csv += m.ids[i] + "," + format_double(scores[i]) + "," + std::to_string(m.y[i]) + "\n";
        }
        if (m.rows() > 0) {
          try {
            std::fprintf(stderr, "AUROC %.6f over %zu rows\n", predictor::auroc(scores, m.y), m.rows());
          } catch (const InvalidArgument&) {
            std::fprintf(stderr, "AUROC undefined: only one class present\n");
          }
        }
      } else {
        const auto fm = metrics::matrix_from_csv(text);
        const auto scores = predictor::predict_proba(model, fm.names, fm.rows);
        csv = "triple_id,score\n";
        for (std::size_t i = 0; i < scores.size(); ++i) csv += fm.ids[i] + "," + format_double(scores[i]) + "\n";
      }
      emit(out_file, csv);
      return 0;
    }

    if (sage_run->parsed()) {
      const auto model = predictor::TreeEnsembleModel::from_json(read_file(model_file));
      const auto eval = load_labeled(data_file);
      if (eval.names != model.feature_names) {
        throw InvalidArgument("data columns do not match the model's feature catalog");
      }
      const auto bg_source = features_file.empty() ? eval : load_labeled(features_file);
      const auto background = sage::sample_background(bg_source, sopt.background_size, sopt.seed);
      const auto report = sage::estimate_sage(model, eval, background, sopt);
      emit(out_file, report.to_json());
      if (markdown_file) write_file_atomic(*markdown_file, report.markdown(top_k));
      try {
        const auto pruned = sage::prune_by_positive_mass(report, threshold);
        std::fprintf(stderr, "%zu of %zu features carry %.1f%% of the positive mass\n",
                     pruned.retained.size(), report.features.size(), 100.0 * threshold);
      } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "%s\n", e.what());
      }
      return 0;
    }
  } catch (const pipeline::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const pipeline::StageFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
