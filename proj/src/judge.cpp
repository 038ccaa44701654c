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

#include "iojudge/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace iojudge::judge {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kMatch:
      return "match";
    case Verdict::kNoMatch:
      return "no_match";
    default:
      return "invalid";
  }
}

Verdict parse_verdict_name(std::string_view name) {
  if (name == "match") return Verdict::kMatch;
  if (name == "no_match") return Verdict::kNoMatch;
  if (name == "invalid") return Verdict::kInvalid;
  throw InvalidArgument("unknown verdict: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Records

std::string record_to_json(const JudgmentRecord& r) {
  ordered_json j;
  j["triple_id"] = r.triple_id;
  j["model_id"] = r.model_id;
  j["verdict"] = verdict_name(r.verdict);
  j["success"] = r.success;
  j["label"] = r.label;
  j["raw_response"] = r.raw_response;
  j["latency"] = r.latency;
  j["prompt_version"] = r.prompt_version;
  j["attempts"] = r.attempts;
  j["error"] = r.error;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

JudgmentRecord record_from_json(std::string_view line) {
  const json j = json::parse(line);
  JudgmentRecord r;
  r.triple_id = j.at("triple_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.verdict = parse_verdict_name(j.at("verdict").get<std::string>());
  r.success = j.at("success").get<int>();
  r.label = j.at("label").get<int>();
  r.raw_response = j.value("raw_response", "");
  r.latency = j.value("latency", 0.0);
  r.prompt_version = j.value("prompt_version", "");
  r.attempts = j.value("attempts", 0);
  r.error = j.value("error", "");
  if (r.success != success_of(r.verdict, r.label)) {
    throw InvalidArgument("record " + r.triple_id + " has an inconsistent success label");
  }
  return r;
}

std::string records_to_jsonl(const std::vector<JudgmentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r);
    out.push_back('\n');
  }
  return out;
}

std::vector<JudgmentRecord> records_from_jsonl(std::string_view text) {
  std::vector<JudgmentRecord> out;
  for (const auto& line : split(text, '\n')) {
    if (!line.empty()) out.push_back(record_from_json(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompting

namespace {

constexpr std::string_view kSystem =
    "You are an expert Python programmer. You will be shown a Python program, the text "
    "it receives on standard input, and a candidate output. Decide whether the candidate "
    "output is exactly what the program prints when run on that input.";
constexpr std::string_view kProgramHead = "Program:\n```python\n";
constexpr std::string_view kInputHead = "\n```\n\nInput:\n```\n";
constexpr std::string_view kOutputHead = "\n```\n\nCandidate output:\n```\n";
constexpr std::string_view kQuestion =
    "\n```\n\nDoes the candidate output exactly match the program's output on this input? "
    "Answer with exactly \"yes\" or \"no\".";

}  // namespace

Prompt render_prompt(const corpus::Triple& triple) {
  Prompt p;
  p.system = std::string(kSystem);
  p.user.reserve(triple.program.source.size() + triple.input.size() + triple.output.size() + 256);
  p.user.append(kProgramHead).append(triple.program.source);
  p.user.append(kInputHead).append(triple.input);
  p.user.append(kOutputHead).append(triple.output);
  p.user.append(kQuestion);
  return p;
}

const std::string& prompt_version() {
  static const std::string version = [] {
    std::string tpl;
    for (auto part : {kSystem, kProgramHead, kInputHead, kOutputHead, kQuestion}) {
      tpl.append(part).push_back('\x1f');
    }
    return sha256_hex(tpl).substr(0, 12);
  }();
  return version;
}

Verdict parse_judgment(std::string_view response) {
  Verdict last = Verdict::kInvalid;
  std::size_t i = 0;
  while (i < response.size()) {
    if (!std::isalnum(static_cast<unsigned char>(response[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string word;
    while (j < response.size() && std::isalnum(static_cast<unsigned char>(response[j]))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(response[j]))));
      ++j;
    }
    if (word == "yes") last = Verdict::kMatch;
    if (word == "no") last = Verdict::kNoMatch;
    i = j;
  }
  return last;
}

int success_of(Verdict verdict, int label) {
  if (verdict == Verdict::kInvalid) return 0;
  return (verdict == Verdict::kMatch ? 1 : 0) == label ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Transport

HttpChatClient::HttpChatClient(std::string endpoint, std::string api_key)
    : api_key_(std::move(api_key)) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidArgument("judge endpoint must be an http(s) URL: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  origin_ = endpoint.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  path_ = base + "/chat/completions";
}

ChatReply HttpChatClient::complete(const ChatRequest& request) {
  ChatReply reply;
  httplib::Client cli(origin_);
  const auto timeout = std::chrono::duration<double>(request.timeout_s);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const json body = {
      {"model", request.model},
      {"temperature", 0},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.prompt.system}},
                    {{"role", "user"}, {"content", request.prompt.user}}})}};
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    reply.error = "transport: " + httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  if (res->status != 200) {
    reply.error = "http status " + std::to_string(res->status);
    return reply;
  }
  try {
    const json j = json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    reply.content = content.is_string() ? content.get<std::string>() : "";
  } catch (const json::exception& e) {
    reply.error = std::string("malformed completion: ") + e.what();
  }
  return reply;
}

// ---------------------------------------------------------------------------
// Judging

namespace {

constexpr std::string_view kMockPrefix = "mock:";

double parse_number(std::string_view text, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(text), &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("bad number in mock rule " + std::string(what) + ": " + std::string(text));
  }
}

/// Spaces request starts at least 1/rate seconds apart across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second) : per_second_(per_second) {}
  void acquire() {
    if (per_second_ <= 0) return;
    Clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = Clock::now();
      slot = std::max(now, next_);
      next_ = slot + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double>(1.0 / per_second_));
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  double per_second_;
  std::mutex mu_;
  Clock::time_point next_{};
};

std::optional<JudgmentRecord> cache_read(const JudgeOptions& options, const std::string& key) {
  if (!options.cache_dir) return std::nullopt;
  const auto path = *options.cache_dir / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return record_from_json(read_file(path));
  } catch (const std::exception&) {
    return std::nullopt;  // a torn or foreign file is simply a miss
  }
}

void cache_write(const JudgeOptions& options, const std::string& key, const JudgmentRecord& r) {
  if (!options.cache_dir) return;
  write_file_atomic(*options.cache_dir / (key + ".json"), record_to_json(r) + "\n");
}

JudgmentRecord judge_one(ChatClient* client, std::string_view model_id,
                         const corpus::Triple& triple, const JudgeOptions& options,
                         RateLimiter* limiter) {
  if (is_mock_model(model_id)) {
    return mock_judge(triple, model_id.substr(kMockPrefix.size()));
  }
  if (client == nullptr) throw InvalidArgument("no chat client for model " + std::string(model_id));
  const std::string key = cache_key(model_id, triple);
  if (auto cached = cache_read(options, key)) return *cached;

  JudgmentRecord r;
  r.triple_id = triple.id();
  r.model_id = std::string(model_id);
  r.label = triple.label;
  r.prompt_version = prompt_version();
  const ChatRequest request{std::string(model_id), render_prompt(triple), options.request_timeout_s};
  bool transport_failed = false;
  for (int query = 0; query <= options.invalid_requeries; ++query) {
    ChatReply reply;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      if (limiter != nullptr) limiter->acquire();
      const auto start = Clock::now();
      reply = client->complete(request);
      r.latency += std::chrono::duration<double>(Clock::now() - start).count();
      ++r.attempts;
      if (reply.ok() || !reply.transient()) break;
      if (attempt < options.max_retries) {
        std::this_thread::sleep_for(std::chrono::duration<double>(
            options.backoff_base_s * std::ldexp(1.0, attempt)));
      }
    }
    if (!reply.ok()) {
      transport_failed = true;
      r.verdict = Verdict::kInvalid;
      r.error = reply.error.empty() ? "request failed" : reply.error;
      break;
    }
    r.raw_response = reply.content;
    r.error = reply.error;
    r.verdict = parse_judgment(reply.content);
    if (r.verdict != Verdict::kInvalid) break;
  }
  r.success = success_of(r.verdict, r.label);
  // Failed transports are not cached so that a rerun tries again.
  if (!transport_failed) cache_write(options, key, r);
  return r;
}

}  // namespace

std::string cache_key(std::string_view model_id, const corpus::Triple& triple) {
  std::string material;
  for (std::string_view part :
       {model_id, std::string_view(triple.program.problem_id),
        std::string_view(triple.program.submission_id), std::string_view(triple.program.source),
        std::string_view(triple.input), std::string_view(triple.output)}) {
    material.append(part).push_back('\0');
  }
  material.push_back(triple.label == 1 ? '1' : '0');
  material.push_back('\0');
  material.append(prompt_version());
  return sha256_hex(material);
}

bool is_mock_model(std::string_view model_id) {
  return model_id.substr(0, kMockPrefix.size()) == kMockPrefix;
}

JudgmentRecord mock_judge(const corpus::Triple& triple, std::string_view rule) {
  bool yes = false;
  if (rule == "always_yes") {
    yes = true;
  } else if (rule == "always_no") {
    yes = false;
  } else if (rule == "even_output_length") {
    yes = utf8_length(triple.output) % 2 == 0;
  } else if (rule == "oracle") {
    yes = triple.label == 1;
  } else if (rule.substr(0, 14) == "code_chars_lt:") {
    yes = static_cast<double>(utf8_length(triple.program.source)) <
          parse_number(rule.substr(14), rule);
  } else if (rule.substr(0, 5) == "hash:") {
    const double p = parse_number(rule.substr(5), rule);
    const std::string h = sha256_hex("mock-hash:" + triple.id());
    const double u = static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / std::ldexp(1.0, 52);
    yes = u < p;
  } else {
    throw InvalidArgument("unknown mock rule: " + std::string(rule));
  }
  JudgmentRecord r;
  r.triple_id = triple.id();
  r.model_id = std::string(kMockPrefix) + std::string(rule);
  r.label = triple.label;
  r.raw_response = yes ? "yes" : "no";
  r.verdict = yes ? Verdict::kMatch : Verdict::kNoMatch;
  r.success = success_of(r.verdict, r.label);
  r.prompt_version = prompt_version();
  return r;
}

JudgmentRecord judge_triple(ChatClient* client, std::string_view model_id,
                            const corpus::Triple& triple, const JudgeOptions& options) {
  RateLimiter limiter(options.requests_per_second);
  return judge_one(client, model_id, triple, options, &limiter);
}

std::vector<JudgmentRecord> judge_all(ChatClient* client, std::string_view model_id,
                                      const std::vector<corpus::Triple>& triples,
                                      const JudgeOptions& options) {
  if (options.max_concurrency < 1) throw InvalidArgument("max_concurrency must be >= 1");
  std::vector<JudgmentRecord> records(triples.size());
  RateLimiter limiter(options.requests_per_second);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < triples.size(); i = next++) {
        records[i] = judge_one(client, model_id, triples[i], options, &limiter);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = triples.size();
    }
  };
  const int threads = is_mock_model(model_id)
                          ? 1
                          : std::min<int>(options.max_concurrency, static_cast<int>(triples.size()));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(records.begin(), records.end(),
                   [](const JudgmentRecord& a, const JudgmentRecord& b) { return a.triple_id < b.triple_id; });
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0 ? 2.0 * precision * recall / denom : 0.0;
}

AggregateMetrics aggregate(const std::vector<JudgmentRecord>& records, bool exclude_invalid) {
  if (records.empty()) throw InvalidArgument("aggregate: no records");
  AggregateMetrics m;
  for (const auto& r : records) {
    if (r.verdict == Verdict::kInvalid) {
      ++m.invalid;
      if (exclude_invalid) continue;
      (r.label == 1 ? m.fn : m.fp) += 1;
      continue;
    }
    const bool predicted = r.verdict == Verdict::kMatch;
    if (predicted && r.label == 1) ++m.tp;
    if (predicted && r.label == 0) ++m.fp;
    if (!predicted && r.label == 0) ++m.tn;
    if (!predicted && r.label == 1) ++m.fn;
  }
  const auto n = static_cast<double>(m.tp + m.fp + m.tn + m.fn);
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(m.tp + m.tn) / n;
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace {

ordered_json metrics_json(const AggregateMetrics& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["invalid"] = m.invalid;
  return j;
}

}  // namespace

std::string report_json(const std::vector<JudgmentRecord>& records) {
  std::map<std::string, std::vector<JudgmentRecord>> by_model;
  for (const auto& r : records) by_model[r.model_id].push_back(r);
  ordered_json out = ordered_json::object();
  for (const auto& [model, rs] : by_model) {
    ordered_json entry;
    entry["n"] = rs.size();
    entry["all"] = metrics_json(aggregate(rs, false));
    const auto valid = static_cast<std::size_t>(std::count_if(
        rs.begin(), rs.end(), [](const JudgmentRecord& r) { return r.verdict != Verdict::kInvalid; }));
    entry["excluding_invalid"] = valid == 0 ? ordered_json(nullptr) : metrics_json(aggregate(rs, true));
    out[model] = entry;
  }
  return out.dump(2) + "\n";
}

}  // namespace iojudge::judge
