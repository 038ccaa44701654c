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

#include "iojudge/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <set>
#include <unordered_set>

#include "iojudge/metrics.hpp"
#include "iojudge/sage.hpp"
#include "iojudge/sidecar.hpp"
#include "json.hpp"

namespace iojudge::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Stages

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kCorpus: return "corpus";
    case Stage::kMetrics: return "metrics";
    case Stage::kJudge: return "judge";
    case Stage::kPredictor: return "predictor";
    case Stage::kSage: return "sage";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::kCorpus, Stage::kMetrics, Stage::kJudge,
                                         Stage::kPredictor, Stage::kSage};
  return stages;
}

Stage parse_stage(std::string_view name) {
  for (Stage s : all_stages()) {
    if (stage_name(s) == name) return s;
  }
  if (name == "shadow") {
    throw ConfigError("the shadow stage is not part of this build; place its report at "
                      "<run>/shadow/report.json to include it in the summary");
  }
  throw ConfigError("unknown stage '" + std::string(name) +
                    "' (expected corpus, metrics, judge, predictor or sage)");
}

std::string model_slug(std::string_view model_id) {
  std::string out;
  for (char c : model_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '-';
    out += safe ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

// Small typed reader that reports the dotted path of a bad value.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw ConfigError("config: unknown key " + where(k));
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  Reader child(const char* key) const { return Reader(j_.at(key), where(key)); }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::runtime_error("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::runtime_error("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::runtime_error("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::runtime_error("");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
            v.get<long long>() < 0) {
          throw std::runtime_error("");
        }
      } else {
        if (!v.is_array()) throw std::runtime_error("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: " + where(key) + " has the wrong type");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config: " + (path_.empty() ? std::string("top level") : path_) + " " + what);
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

ordered_json hyper_json(const predictor::Hyperparameters& h) {
  return {{"n_trees", h.n_trees},       {"max_depth", h.max_depth},
          {"learning_rate", h.learning_rate}, {"subsample", h.subsample},
          {"min_samples_leaf", h.min_samples_leaf}, {"lambda", h.lambda}};
}

ordered_json judge_json(const JudgeConfig& j, bool for_hash) {
  ordered_json out;
  out["models"] = j.models;
  out["endpoint"] = j.endpoint;
  if (!for_hash) out["api_key_env"] = j.api_key_env;
  out["split"] = j.split;
  if (!for_hash) out["cache"] = j.cache;
  out["max_retries"] = j.options.max_retries;
  out["backoff_base_s"] = j.options.backoff_base_s;
  out["invalid_requeries"] = j.options.invalid_requeries;
  out["request_timeout_s"] = j.options.request_timeout_s;
  if (!for_hash) {
    out["max_concurrency"] = j.options.max_concurrency;
    out["requests_per_second"] = j.options.requests_per_second;
  }
  out["prompt_version"] = judge::prompt_version();
  if (!for_hash) out.erase("prompt_version");
  return out;
}

ordered_json sage_json(const SageConfig& s, bool for_hash) {
  ordered_json out{{"n_permutations", s.n_permutations}, {"background_size", s.background_size},
                   {"max_eval_rows", s.max_eval_rows}};
  if (!for_hash) out["threads"] = s.threads;
  out["threshold"] = s.threshold;
  out["top_k"] = s.top_k;
  return out;
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  const Reader top(j, "");
  top.allow({"corpus_root", "run_dir", "seeds", "fuzz_budget", "workers", "python", "execution",
             "limits", "judge", "predictor", "sage", "stages"});
  RunConfig c;
  std::string corpus_root, run_dir;
  require(top.has("corpus_root"), "corpus_root is required");
  require(top.has("run_dir"), "run_dir is required");
  top.get("corpus_root", corpus_root);
  top.get("run_dir", run_dir);
  c.corpus_root = fs::weakly_canonical(base_dir / corpus_root);
  c.run_dir = fs::weakly_canonical(base_dir / run_dir);
  top.get("fuzz_budget", c.fuzz_budget);
  top.get("workers", c.workers);
  top.get("python", c.python);
  require(c.fuzz_budget >= 1, "fuzz_budget must be at least 1");
  require(c.workers >= 1, "workers must be at least 1");

  if (top.has("seeds")) {
    const auto s = top.child("seeds");
    s.allow({"fuzz", "negatives", "split", "predictor", "sage"});
    s.get("fuzz", c.seeds.fuzz);
    s.get("negatives", c.seeds.negatives);
    s.get("split", c.seeds.split);
    s.get("predictor", c.seeds.predictor);
    s.get("sage", c.seeds.sage);
  }
  if (top.has("execution")) {
    const auto e = top.child("execution");
    e.allow({"timeout_s", "memory_mb"});
    e.get("timeout_s", c.execution.timeout_s);
    std::uint64_t mb = c.execution.memory_bytes >> 20;
    e.get("memory_mb", mb);
    c.execution.memory_bytes = mb << 20;
    require(c.execution.timeout_s > 0, "execution.timeout_s must be positive");
    require(mb > 0, "execution.memory_mb must be positive");
  }
  if (top.has("limits")) {
    const auto l = top.child("limits");
    l.allow({"code_chars", "input_chars", "output_chars"});
    l.get("code_chars", c.limits.code_chars);
    l.get("input_chars", c.limits.input_chars);
    l.get("output_chars", c.limits.output_chars);
  }
  require(c.limits.code_chars > 0 && c.limits.input_chars > 0 && c.limits.output_chars > 0,
          "limits must be positive");

  require(top.has("judge"), "judge section is required");
  {
    const auto jr = top.child("judge");
    jr.allow({"models", "endpoint", "api_key_env", "split", "cache", "max_retries", "backoff_base_s",
              "invalid_requeries", "request_timeout_s", "max_concurrency", "requests_per_second"});
    jr.get("models", c.judge.models);
    jr.get("endpoint", c.judge.endpoint);
    jr.get("api_key_env", c.judge.api_key_env);
    jr.get("split", c.judge.split);
    jr.get("cache", c.judge.cache);
    jr.get("max_retries", c.judge.options.max_retries);
    jr.get("backoff_base_s", c.judge.options.backoff_base_s);
    jr.get("invalid_requeries", c.judge.options.invalid_requeries);
    jr.get("request_timeout_s", c.judge.options.request_timeout_s);
    jr.get("max_concurrency", c.judge.options.max_concurrency);
    jr.get("requests_per_second", c.judge.options.requests_per_second);
    require(!c.judge.models.empty(), "judge.models must list at least one model");
    require(c.judge.split == "eval" || c.judge.split == "all", "judge.split must be \"eval\" or \"all\"");
    require(c.judge.options.max_retries >= 0 && c.judge.options.invalid_requeries >= 0 &&
                c.judge.options.max_concurrency >= 1 && c.judge.options.requests_per_second >= 0 &&
                c.judge.options.request_timeout_s > 0 && c.judge.options.backoff_base_s >= 0,
            "judge retry/concurrency settings out of range");
    std::set<std::string> slugs;
    bool needs_endpoint = false;
    for (const auto& m : c.judge.models) {
      require(!m.empty(), "judge.models entries must be non-empty");
      require(slugs.insert(model_slug(m)).second, "judge.models contains duplicates: " + m);
      if (judge::is_mock_model(m)) {
        // Validate the rule now rather than mid-run.
        corpus::Triple probe{corpus::Program{"p", "s", "x"}, "i", "o", 1,
                             corpus::Origin::kExecutedPositive};
        try {
          judge::mock_judge(probe, m.substr(5));
        } catch (const std::exception& e) {
          throw ConfigError("config: judge model " + m + ": " + e.what());
        }
      } else {
        needs_endpoint = true;
      }
    }
    require(!needs_endpoint || !c.judge.endpoint.empty(), "judge.endpoint is required for non-mock models");
  }
  if (top.has("predictor")) {
    const auto p = top.child("predictor");
    p.allow({"n_trees", "max_depth", "learning_rate", "subsample", "min_samples_leaf", "lambda"});
    p.get("n_trees", c.predictor.n_trees);
    p.get("max_depth", c.predictor.max_depth);
    p.get("learning_rate", c.predictor.learning_rate);
    p.get("subsample", c.predictor.subsample);
    p.get("min_samples_leaf", c.predictor.min_samples_leaf);
    p.get("lambda", c.predictor.lambda);
  }
  require(c.predictor.n_trees >= 0 && c.predictor.max_depth >= 0 && c.predictor.learning_rate > 0 &&
              c.predictor.subsample > 0 && c.predictor.subsample <= 1 &&
              c.predictor.min_samples_leaf >= 1 && c.predictor.lambda >= 0,
          "predictor hyperparameters out of range");
  c.predictor.seed = c.seeds.predictor;
  if (top.has("sage")) {
    const auto s = top.child("sage");
    s.allow({"n_permutations", "background_size", "max_eval_rows", "threads", "threshold", "top_k"});
    s.get("n_permutations", c.sage.n_permutations);
    s.get("background_size", c.sage.background_size);
    s.get("max_eval_rows", c.sage.max_eval_rows);
    s.get("threads", c.sage.threads);
    s.get("threshold", c.sage.threshold);
    s.get("top_k", c.sage.top_k);
  }
  require(c.sage.n_permutations >= 2, "sage.n_permutations must be at least 2");
  require(c.sage.background_size >= 1, "sage.background_size must be positive");
  require(c.sage.max_eval_rows >= 0 && c.sage.threads >= 1 && c.sage.top_k >= 1,
          "sage settings out of range");
  require(c.sage.threshold > 0 && c.sage.threshold <= 1, "sage.threshold must be in (0, 1]");
  if (top.has("stages")) {
    const auto s = top.child("stages");
    s.allow({"shadow"});
    s.get("shadow", c.shadow);
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const std::exception& e) {
    throw ConfigError("config: cannot read " + file.string() + ": " + e.what());
  }
  return from_json(text, fs::absolute(file).parent_path());
}

std::string RunConfig::to_json() const {
  // run_dir is where the run lives, not what it computes, so it is left out
  // and two run directories with the same settings get identical files.
  ordered_json j;
  j["corpus_root"] = corpus_root.string();
  j["seeds"] = {{"fuzz", seeds.fuzz},           {"negatives", seeds.negatives},
                {"split", seeds.split},         {"predictor", seeds.predictor},
                {"sage", seeds.sage}};
  j["fuzz_budget"] = fuzz_budget;
  j["workers"] = workers;
  j["python"] = python;
  j["execution"] = {{"timeout_s", execution.timeout_s}, {"memory_mb", execution.memory_bytes >> 20}};
  j["limits"] = {{"code_chars", limits.code_chars},
                 {"input_chars", limits.input_chars},
                 {"output_chars", limits.output_chars}};
  j["judge"] = judge_json(judge, false);
  j["predictor"] = hyper_json(predictor);
  j["sage"] = sage_json(sage, false);
  j["stages"] = {{"shadow", shadow}};
  return j.dump(2) + "\n";
}

std::string RunConfig::stage_hash(Stage stage) const {
  ordered_json j;
  switch (stage) {
    case Stage::kCorpus:
      j["corpus_root"] = corpus_root.string();
      j["fuzz"] = seeds.fuzz;
      j["negatives"] = seeds.negatives;
      j["fuzz_budget"] = fuzz_budget;
      j["execution"] = {{"timeout_s", execution.timeout_s}, {"memory_bytes", execution.memory_bytes}};
      j["limits"] = {limits.code_chars, limits.input_chars, limits.output_chars};
      break;
    case Stage::kMetrics:
      j["catalog"] = "training-split vocabularies";
      break;
    case Stage::kJudge:
      j = judge_json(judge, true);
      break;
    case Stage::kPredictor:
      j["hyper"] = hyper_json(predictor);
      j["split"] = seeds.split;
      j["seed"] = seeds.predictor;
      break;
    case Stage::kSage:
      j["sage"] = sage_json(sage, true);
      j["seed"] = seeds.sage;
      j["hyper"] = hyper_json(predictor);
      j["predictor_seed"] = seeds.predictor;
      break;
  }
  j["stage"] = stage_name(stage);
  return sha256_hex(j.dump()).substr(0, 16);
}

// ---------------------------------------------------------------------------
// Manifest

std::string RunManifest::to_json() const {
  ordered_json j;
  j["format"] = "iojudge-manifest";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["interpreter"] = interpreter;
  ordered_json st = ordered_json::object();
  for (Stage s : all_stages()) {
    const auto it = stages.find(std::string(stage_name(s)));
    if (it == stages.end()) continue;
    const auto& r = it->second;
    ordered_json e;
    e["config_hash"] = r.config_hash;
    e["upstream"] = r.upstream;
    e["artifacts"] = r.artifacts;
    e["digest"] = r.digest;
    e["completed_at"] = r.completed_at;
    st[it->first] = std::move(e);
  }
  j["stages"] = std::move(st);
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  const auto j = json::parse(text);
  if (j.value("format", "") != "iojudge-manifest" || j.value("version", 0) != 1) {
    throw InvalidArgument("not an iojudge-manifest v1 file");
  }
  RunManifest m;
  m.config_hash = j.value("config_hash", "");
  m.interpreter = j.value("interpreter", "");
  for (const auto& [name, e] : j.at("stages").items()) {
    StageRecord r;
    r.config_hash = e.at("config_hash").get<std::string>();
    r.upstream = e.at("upstream").get<std::map<std::string, std::string>>();
    r.artifacts = e.at("artifacts").get<std::map<std::string, std::string>>();
    r.digest = e.at("digest").get<std::string>();
    r.completed_at = e.value("completed_at", "");
    m.stages[name] = std::move(r);
  }
  return m;
}

namespace {

std::string artifacts_digest(const std::map<std::string, std::string>& artifacts) {
  std::string text;
  for (const auto& [path, hash] : artifacts) text += path + "\t" + hash + "\n";
  return sha256_hex(text);
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<Stage> predecessor(Stage s) {
  const auto& all = all_stages();
  const auto it = std::find(all.begin(), all.end(), s);
  if (it == all.begin()) return std::nullopt;
  return *(it - 1);
}

std::unique_ptr<judge::ChatClient> default_client(const JudgeConfig& cfg) {
  const bool all_mock = std::all_of(cfg.models.begin(), cfg.models.end(),
                                    [](const std::string& m) { return judge::is_mock_model(m); });
  if (all_mock) return nullptr;
  const char* key = std::getenv(cfg.api_key_env.c_str());
  return std::make_unique<judge::HttpChatClient>(cfg.endpoint, key ? key : "");
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(RunConfig config, ServiceFactory services, ClientFactory clients)
    : config_(std::move(config)), services_(std::move(services)), clients_(std::move(clients)) {
  if (!services_) {
    const std::string python = config_.python;
    services_ = [python] {
      SidecarOptions o;
      o.python = python;
      return std::unique_ptr<ExecutionService>(std::make_unique<SidecarClient>(o));
    };
  }
  if (!clients_) clients_ = default_client;

  fs::create_directories(config_.run_dir);
  const auto lock_path = config_.run_dir / ".lock";
  lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StageFailure("cannot open lock file " + lock_path.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw StageFailure("run directory " + config_.run_dir.string() +
                       " is in use by another pipeline process");
  }
  const auto manifest_path = config_.run_dir / "manifest.json";
  if (fs::exists(manifest_path)) manifest_ = RunManifest::from_json(read_file(manifest_path));
}

Pipeline::~Pipeline() {
  if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the flock
}

std::string Pipeline::incomplete_reason(Stage stage) const {
  const std::string name(stage_name(stage));
  const auto it = manifest_.stages.find(name);
  if (it == manifest_.stages.end()) return "stage '" + name + "' has not run";
  const auto& rec = it->second;
  std::vector<std::string> problems;
  if (rec.config_hash != config_.stage_hash(stage)) {
    problems.push_back("configuration for stage '" + name + "' changed since it ran");
  }
  if (const auto up = predecessor(stage)) {
    const std::string up_name(stage_name(*up));
    const auto up_it = manifest_.stages.find(up_name);
    const std::string current = up_it == manifest_.stages.end() ? "(none)" : up_it->second.digest;
    const auto rec_it = rec.upstream.find(up_name);
    const std::string recorded = rec_it == rec.upstream.end() ? "(none)" : rec_it->second;
    if (current != recorded) {
      problems.push_back("upstream stage '" + up_name + "' changed since '" + name +
                         "' ran (recorded " + recorded.substr(0, 16) + ", current " +
                         current.substr(0, 16) + ")");
    }
  }
  for (const auto& [rel, hash] : rec.artifacts) {
    const auto path = config_.run_dir / rel;
    if (!fs::exists(path)) {
      problems.push_back("artifact missing: " + rel);
      continue;
    }
    const auto on_disk = sha256_hex(read_file(path));
    if (on_disk != hash) {
      problems.push_back("artifact modified: " + rel + " (manifest " + hash.substr(0, 16) +
                         ", on disk " + on_disk.substr(0, 16) + ")");
    }
  }
  std::string out;
  for (const auto& p : problems) out += (out.empty() ? "" : "; ") + p;
  return out;
}

bool Pipeline::run_stage(Stage stage) {
  const std::string name(stage_name(stage));
  for (Stage up : all_stages()) {
    if (up == stage) break;
    const auto why = incomplete_reason(up);
    if (!why.empty()) {
      throw StageFailure("cannot run stage '" + name + "': upstream stage '" +
                         std::string(stage_name(up)) + "' is not complete: " + why);
    }
  }
  if (is_complete(stage)) return false;
  // The run directory records the configuration its newest artifacts used.
  const std::string resolved = config_.to_json();
  manifest_.config_hash = sha256_hex(resolved).substr(0, 16);
  write_file_atomic(config_.run_dir / "config.json", resolved);
  try {
    switch (stage) {
      case Stage::kCorpus: run_corpus(); break;
      case Stage::kMetrics: run_metrics(); break;
      case Stage::kJudge: run_judge(); break;
      case Stage::kPredictor: run_predictor(); break;
      case Stage::kSage: run_sage(); break;
    }
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure("stage '" + name + "' failed: " + e.what());
  }
  return true;
}

std::vector<Stage> Pipeline::run_all() {
  std::vector<Stage> ran;
  for (Stage s : all_stages()) {
    if (run_stage(s)) ran.push_back(s);
  }
  write_report(config_.run_dir);
  return ran;
}

void Pipeline::write_artifact(const std::string& rel, std::string_view contents,
                              std::map<std::string, std::string>& hashes) const {
  const auto path = config_.run_dir / rel;
  fs::create_directories(path.parent_path());
  write_file_atomic(path, contents);
  hashes[rel] = sha256_hex(contents);
}

std::string Pipeline::read_artifact(const std::string& rel) const {
  return read_file(config_.run_dir / rel);
}

void Pipeline::finish_stage(Stage stage, std::map<std::string, std::string> artifacts) {
  StageRecord rec;
  rec.config_hash = config_.stage_hash(stage);
  if (const auto up = predecessor(stage)) {
    const std::string up_name(stage_name(*up));
    rec.upstream[up_name] = manifest_.stages.at(up_name).digest;
  }
  rec.digest = artifacts_digest(artifacts);
  rec.artifacts = std::move(artifacts);
  rec.completed_at = utc_now();
  manifest_.stages[std::string(stage_name(stage))] = std::move(rec);
  write_file_atomic(config_.run_dir / "manifest.json", manifest_.to_json());
}

void Pipeline::run_corpus() {
  const auto programs = corpus::load_corpus(config_.corpus_root);
  if (programs.empty()) throw StageFailure("corpus root has no programs: " + config_.corpus_root.string());
  corpus::BuildOptions opts;
  opts.fuzz_budget = config_.fuzz_budget;
  opts.fuzz_seed = config_.seeds.fuzz;
  opts.negative_seed = config_.seeds.negatives;
  opts.limits = config_.execution;
  opts.length_limits = config_.limits;
  opts.workers = config_.workers;
  const auto ds = corpus::build_dataset(programs, opts, services_);
  manifest_.interpreter = services_()->interpreter_version();

  std::size_t positives = 0;
  for (const auto& t : ds.triples) positives += static_cast<std::size_t>(t.label);
  std::map<std::string, std::size_t> events;
  for (const auto& e : ds.log) ++events[e.event];
  ordered_json summary;
  summary["programs"] = programs.size();
  summary["triples"] = ds.triples.size();
  summary["positives"] = positives;
  summary["negatives"] = ds.triples.size() - positives;
  summary["train_problems"] = ds.split.train_problems.size();
  summary["eval_problems"] = ds.split.eval_problems.size();
  summary["log_events"] = events;
  summary["interpreter"] = manifest_.interpreter;

  std::map<std::string, std::string> art;
  write_artifact("corpus/dataset.jsonl", corpus::dataset_to_jsonl(ds.triples), art);
  write_artifact("corpus/split.json", corpus::split_to_json(ds.split), art);
  write_artifact("corpus/log.jsonl", corpus::log_to_jsonl(ds.log), art);
  write_artifact("corpus/summary.json", summary.dump(2) + "\n", art);
  finish_stage(Stage::kCorpus, std::move(art));
}

void Pipeline::run_metrics() {
  const auto triples = corpus::dataset_from_jsonl(read_artifact("corpus/dataset.jsonl"));
  const auto split = corpus::split_from_json(read_artifact("corpus/split.json"));
  auto service = services_();

  // Vocabularies come from the training problems' programs only.
  std::vector<std::string> codes;
  std::unordered_set<std::string> seen;
  for (const auto& t : triples) {
    if (!split.train_problems.count(t.program.problem_id)) continue;
    if (seen.insert(t.program.source).second) codes.push_back(t.program.source);
  }
  if (codes.empty()) throw StageFailure("no training-split programs to build the feature catalog from");
  std::vector<OpcodeSequence> seqs;
  for (const auto& code : codes) {
    auto d = service->disassemble(code);
    if (d.ok()) seqs.push_back(std::move(*d.sequence));
  }
  const auto catalog = metrics::build_catalog(codes, seqs, service->interpreter_version());
  metrics::FeatureExtractor extractor(catalog, *service);
  metrics::FeatureMatrix fm;
  fm.names = catalog.names;
  for (const auto& t : triples) {
    fm.ids.push_back(t.id());
    fm.rows.push_back(extractor.extract(t).values);
  }
  std::map<std::string, std::string> art;
  write_artifact("metrics/catalog.json", catalog.to_json(), art);
  write_artifact("metrics/features.csv", metrics::matrix_to_csv(fm), art);
  finish_stage(Stage::kMetrics, std::move(art));
}

void Pipeline::run_judge() {
  const auto all = corpus::dataset_from_jsonl(read_artifact("corpus/dataset.jsonl"));
  const auto split = corpus::split_from_json(read_artifact("corpus/split.json"));
  std::vector<corpus::Triple> triples;
  for (const auto& t : all) {
    if (config_.judge.split == "all" || split.eval_problems.count(t.program.problem_id)) {
      triples.push_back(t);
    }
  }
  if (triples.empty()) throw StageFailure("no triples selected for judging");
  auto options = config_.judge.options;
  if (config_.judge.cache) options.cache_dir = config_.run_dir / "judge" / "cache";
  const auto client = clients_(config_.judge);

  std::map<std::string, std::string> art;
  std::vector<judge::JudgmentRecord> everything;
  for (const auto& model : config_.judge.models) {
    if (!judge::is_mock_model(model) && !client) {
      throw StageFailure("no chat client available for model " + model);
    }
    auto records = judge::judge_all(client.get(), model, triples, options);
    write_artifact("judge/" + model_slug(model) + "/records.jsonl", judge::records_to_jsonl(records), art);
    everything.insert(everything.end(), records.begin(), records.end());
  }
  write_artifact("judge/summary.json", judge::report_json(everything), art);
  finish_stage(Stage::kJudge, std::move(art));
}

namespace {

predictor::LabeledMatrix labeled_for(const std::string& features_csv, const std::string& records_jsonl) {
  return predictor::join_labels(metrics::matrix_from_csv(features_csv),
                                judge::records_from_jsonl(records_jsonl));
}

std::vector<std::size_t> rows_with_ids(const predictor::LabeledMatrix& m, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.ids.size(); ++i) index[m.ids[i]] = i;
  std::vector<std::size_t> rows;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw StageFailure("split refers to unknown triple " + id);
    rows.push_back(it->second);
  }
  return rows;
}

}  // namespace

void Pipeline::run_predictor() {
  const std::string features = read_artifact("metrics/features.csv");
  std::map<std::string, std::string> art;
  for (const auto& model : config_.judge.models) {
    const std::string slug = model_slug(model);
    const auto m = labeled_for(features, read_artifact("judge/" + slug + "/records.jsonl"));
    auto [train_m, test_m] = predictor::stratified_split(m, 0.8, config_.seeds.split);
    const auto fitted = predictor::train(train_m, config_.predictor);
    const auto scores = predictor::predict_proba(fitted, test_m.names, test_m.x);
    const double auc = predictor::auroc(scores, test_m.y);

    std::string csv = "triple_id,score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
      csv += test_m.ids[i] + "," + format_double(scores[i]) + "," + std::to_string(test_m.y[i]) + "\n";
    }
    ordered_json split_json{{"ratio", 0.8}, {"seed", config_.seeds.split}, {"train", train_m.ids},
                            {"test", test_m.ids}};
    std::size_t positives = 0;
    for (int y : m.y) positives += static_cast<std::size_t>(y);
    ordered_json summary;
    summary["model"] = model;
    summary["rows"] = m.rows();
    summary["successes"] = positives;
    summary["n_train"] = train_m.rows();
    summary["n_test"] = test_m.rows();
    summary["n_features"] = m.cols();
    summary["test_auroc"] = auc;
    summary["degenerate"] = fitted.degenerate;

    const std::string dir = "predictor/" + slug + "/";
    write_artifact(dir + "model.json", fitted.to_json(), art);
    write_artifact(dir + "split.json", split_json.dump(2) + "\n", art);
    write_artifact(dir + "scores.csv", csv, art);
    write_artifact(dir + "summary.json", summary.dump(2) + "\n", art);
  }
  finish_stage(Stage::kPredictor, std::move(art));
}

void Pipeline::run_sage() {
  const std::string features = read_artifact("metrics/features.csv");
  std::map<std::string, std::string> art;
  for (const auto& model : config_.judge.models) {
    const std::string slug = model_slug(model);
    const auto m = labeled_for(features, read_artifact("judge/" + slug + "/records.jsonl"));
    const auto split = json::parse(read_artifact("predictor/" + slug + "/split.json"));
    const auto train_m = m.take_rows(rows_with_ids(m, split.at("train").get<std::vector<std::string>>()));
    const auto test_m = m.take_rows(rows_with_ids(m, split.at("test").get<std::vector<std::string>>()));
    const auto fitted = predictor::TreeEnsembleModel::from_json(read_artifact("predictor/" + slug + "/model.json"));

    sage::SageOptions opt;
    opt.n_permutations = config_.sage.n_permutations;
    opt.background_size = config_.sage.background_size;
    opt.max_eval_rows = config_.sage.max_eval_rows;
    opt.threads = config_.sage.threads;
    opt.seed = config_.seeds.sage;
    const auto c = sage::compare_on_split(train_m, test_m, fitted, config_.predictor,
                                          config_.sage.threshold, opt);
    const std::string dir = "sage/" + slug + "/";
    write_artifact(dir + "report.json", c.sage.to_json(), art);
    write_artifact(dir + "comparison.json", c.to_json(), art);
    write_artifact(dir + "pruned_model.json", c.pruned_model.to_json(), art);
    write_artifact(dir + "table.md", c.sage.markdown(static_cast<std::size_t>(config_.sage.top_k)), art);
  }
  finish_stage(Stage::kSage, std::move(art));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::optional<json> read_json(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  return json::parse(read_file(p));
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct ReportData {
  std::vector<std::string> models;
  int top_k = 20;
  std::optional<json> judge;
  std::map<std::string, json> predictor;   // by model
  std::map<std::string, json> comparison;  // by model
  std::map<std::string, sage::SageReport> sage;
  std::optional<json> shadow;
};

ReportData load_report_data(const fs::path& run_dir) {
  const auto cfg = read_json(run_dir / "config.json");
  if (!cfg) throw StageFailure("not a run directory (no config.json): " + run_dir.string());
  ReportData d;
  d.models = cfg->at("judge").at("models").get<std::vector<std::string>>();
  d.top_k = cfg->at("sage").value("top_k", 20);
  d.judge = read_json(run_dir / "judge" / "summary.json");
  for (const auto& m : d.models) {
    const auto slug = model_slug(m);
    if (auto p = read_json(run_dir / "predictor" / slug / "summary.json")) d.predictor[m] = *p;
    if (auto c = read_json(run_dir / "sage" / slug / "comparison.json")) d.comparison[m] = *c;
    const auto sr = run_dir / "sage" / slug / "report.json";
    if (fs::exists(sr)) d.sage[m] = sage::SageReport::from_json(read_file(sr));
  }
  d.shadow = read_json(run_dir / "shadow" / "report.json");
  return d;
}

// Shadow reports may hold one evaluation or a list of them.
std::vector<json> shadow_entries(const json& j) {
  if (j.is_array()) return {j.begin(), j.end()};
  return {j};
}

}  // namespace

std::string report_json(const fs::path& run_dir) {
  const auto d = load_report_data(run_dir);
  ordered_json out;
  out["format"] = "iojudge-report";
  out["version"] = 1;
  out["judge"] = d.judge ? ordered_json::parse(d.judge->dump()) : ordered_json(nullptr);
  auto models = ordered_json::array();
  for (const auto& m : d.models) {
    ordered_json e;
    e["model"] = m;
    const auto p = d.predictor.find(m);
    e["predictor"] = p == d.predictor.end() ? ordered_json(nullptr) : ordered_json::parse(p->second.dump());
    const auto c = d.comparison.find(m);
    const auto s = d.sage.find(m);
    if (c == d.comparison.end() || s == d.sage.end()) {
      e["sage"] = nullptr;
    } else {
      auto sj = ordered_json::parse(c->second.dump());
      auto top = ordered_json::array();
      const auto ranked = s->second.ranked();
      for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(d.top_k); ++i) {
        top.push_back({{"name", ranked[i].name}, {"value", ranked[i].value}, {"std_error", ranked[i].std_error}});
      }
      sj["base_loss"] = s->second.base_loss;
      sj["full_loss"] = s->second.full_loss;
      sj["n_permutations"] = s->second.n_permutations;
      sj["background_size"] = s->second.background_size;
      sj["top_features"] = std::move(top);
      e["sage"] = std::move(sj);
    }
    models.push_back(std::move(e));
  }
  out["models"] = std::move(models);
  out["shadow"] = d.shadow ? ordered_json::parse(d.shadow->dump()) : ordered_json("not run");
  return out.dump(2) + "\n";
}

std::string report_markdown(const fs::path& run_dir) {
  const auto d = load_report_data(run_dir);
  std::string md = "# iojudge run report\n\n## Judged models\n\n";
  if (!d.judge) {
    md += "Absent: the judge stage has not run.\n\n";
  } else {
    md += "Invalid verdicts count as wrong answers.\n\n";
    md += "| Model | n | Accuracy | Precision | Recall | F1 | Invalid |\n";
    md += "|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& [model, e] : d.judge->items()) {
      const auto& a = e.at("all");
      md += "| `" + model + "` | " + std::to_string(e.at("n").get<std::size_t>()) + " | " +
            fixed(a.at("accuracy").get<double>(), 3) + " | " + fixed(a.at("precision").get<double>(), 3) +
            " | " + fixed(a.at("recall").get<double>(), 3) + " | " + fixed(a.at("f1").get<double>(), 3) +
            " | " + std::to_string(a.at("invalid").get<std::size_t>()) + " |\n";
    }
    md += "\n";
  }

  md += "## Human-metric predictor\n\n";
  for (const auto& m : d.models) {
    md += "### `" + m + "`\n\n";
    const auto p = d.predictor.find(m);
    if (p == d.predictor.end()) {
      md += "Absent: the predictor stage has not run.\n\n";
      continue;
    }
    const auto& ps = p->second;
    md += "Rows: " + std::to_string(ps.at("rows").get<std::size_t>()) + " (" +
          std::to_string(ps.at("n_train").get<std::size_t>()) + " train, " +
          std::to_string(ps.at("n_test").get<std::size_t>()) + " test); successes: " +
          std::to_string(ps.at("successes").get<std::size_t>()) + ".\n\n";
    if (ps.at("degenerate").get<bool>()) {
      md += "The full model found no usable split and predicts the base rate.\n\n";
    }
    const auto c = d.comparison.find(m);
    if (c == d.comparison.end()) {
      md += "| Model | Test AUROC | Features |\n|---|---:|---:|\n";
      md += "| Full | " + fixed(ps.at("test_auroc").get<double>(), 3) + " | " +
            std::to_string(ps.at("n_features").get<std::size_t>()) + " |\n\n";
      md += "SAGE: absent (the sage stage has not run).\n\n";
      continue;
    }
    const auto& cs = c->second;
    md += "| Model | Test AUROC | Features |\n|---|---:|---:|\n";
    md += "| Full | " + fixed(cs.at("full_auroc").get<double>(), 3) + " | " +
          std::to_string(cs.at("n_features").get<std::size_t>()) + " |\n";
    md += "| Pruned | " + fixed(cs.at("pruned_auroc").get<double>(), 3) + " | " +
          std::to_string(cs.at("retained_count").get<std::size_t>()) + " (" +
          fixed(100.0 * cs.at("retained_fraction").get<double>(), 1) + "%) |\n\n";
    md += "Retained features cover " + fixed(cs.at("covered_mass").get<double>(), 6) + " of " +
          fixed(cs.at("total_positive_mass").get<double>(), 6) + " nats of positive SAGE mass (threshold " +
          fixed(cs.at("threshold").get<double>(), 2) + ").\n\n";
    const auto& s = d.sage.at(m);
    md += "Top " + std::to_string(std::min<std::size_t>(static_cast<std::size_t>(d.top_k), s.features.size())) +
          " SAGE features (" + std::to_string(s.n_permutations) + " permutations, background " +
          std::to_string(s.background_size) + "):\n\n";
    md += s.markdown(static_cast<std::size_t>(d.top_k)) + "\n";
  }

  md += "## Shadow models\n\n";
  if (!d.shadow) {
    md += "not run\n";
  } else {
    md += "| Target model | Test AUROC |\n|---|---:|\n";
    for (const auto& e : shadow_entries(*d.shadow)) {
      md += "| `" + e.value("target_model_id", std::string("?")) + "` | " +
            fixed(e.value("auroc", 0.0), 3) + " |\n";
    }
  }
  return md;
}

void write_report(const fs::path& run_dir) {
  write_file_atomic(run_dir / "report.json", report_json(run_dir));
  write_file_atomic(run_dir / "report.md", report_markdown(run_dir));
}

}  // namespace iojudge::pipeline
