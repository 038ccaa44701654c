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

// Asking a model whether a candidate output is consistent with a program,
// and scoring its answers.

#ifndef IOJUDGE_JUDGE_HPP_
#define IOJUDGE_JUDGE_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iojudge/corpus.hpp"

namespace iojudge::judge {

enum class Verdict { kMatch, kNoMatch, kInvalid };

std::string_view verdict_name(Verdict v);  // "match", "no_match", "invalid"
Verdict parse_verdict_name(std::string_view name);

struct JudgmentRecord {
  std::string triple_id;
  std::string model_id;
  Verdict verdict = Verdict::kInvalid;
  int success = 0;  // s_M
  int label = 0;    // t, copied so records can be scored on their own
  std::string raw_response;
  double latency = 0.0;  // seconds, summed over attempts
  std::string prompt_version;
  int attempts = 0;  // model queries made
  std::string error;
};

std::string record_to_json(const JudgmentRecord& r);  // single line, no newline
JudgmentRecord record_from_json(std::string_view line);
std::string records_to_jsonl(const std::vector<JudgmentRecord>& records);
std::vector<JudgmentRecord> records_from_jsonl(std::string_view text);

// ---------------------------------------------------------------------------
// Prompting

struct Prompt {
  std::string system;
  std::string user;
};

Prompt render_prompt(const corpus::Triple& triple);
/// 12 hex digits of SHA-256 over the template text.
const std::string& prompt_version();

/// Case-insensitive scan for standalone "yes"/"no" tokens; the last one wins.
Verdict parse_judgment(std::string_view response);

/// success = [verdict bit == label]; invalid verdicts are never successes.
int success_of(Verdict verdict, int label);

// ---------------------------------------------------------------------------
// Transport

struct ChatRequest {
  std::string model;
  Prompt prompt;
  double timeout_s = 60.0;
};

struct ChatReply {
  int status = 0;  // HTTP status; 0 when the transport failed
  std::string content;
  std::string error;
  bool transient() const { return status == 0 || status == 429 || status >= 500; }
  bool ok() const { return status == 200; }
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Must be safe to call from several threads at once.
  virtual ChatReply complete(const ChatRequest& request) = 0;
};

/// OpenAI-compatible chat completions: POST <endpoint>/chat/completions with
/// temperature 0. `endpoint` is e.g. "http://localhost:8000/v1".
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string api_key);
  ChatReply complete(const ChatRequest& request) override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // .../chat/completions
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Judging

struct JudgeOptions {
  int max_retries = 3;          // transient transport failures
  double backoff_base_s = 1.0;  // waits base, 2*base, 4*base
  int invalid_requeries = 1;
  double request_timeout_s = 60.0;
  int max_concurrency = 8;
  double requests_per_second = 0.0;  // 0 = unlimited
  std::optional<std::filesystem::path> cache_dir;
};

/// Cache entry name: SHA-256 of (model_id, triple, prompt_version).
std::string cache_key(std::string_view model_id, const corpus::Triple& triple);

/// Deterministic offline judge. Rules: "always_yes", "always_no",
/// "even_output_length", "code_chars_lt:<N>", "oracle", "hash:<p>".
JudgmentRecord mock_judge(const corpus::Triple& triple, std::string_view rule_spec);
bool is_mock_model(std::string_view model_id);  // "mock:<rule>"

/// Judges one triple. Never throws for transport problems: exhausted retries
/// give an invalid record with an error note.
JudgmentRecord judge_triple(ChatClient* client, std::string_view model_id,
                            const corpus::Triple& triple, const JudgeOptions& options);

/// Judges every triple with bounded concurrency. Records come back sorted by
/// triple id. `client` may be null for mock models.
std::vector<JudgmentRecord> judge_all(ChatClient* client, std::string_view model_id,
                                      const std::vector<corpus::Triple>& triples,
                                      const JudgeOptions& options);

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t invalid = 0;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

/// 2PR/(P+R), or 0 when P+R = 0.
double f1_score(double precision, double recall);

/// Positive class: t = 1. Invalid verdicts count as wrong predictions
/// (t=1 -> FN, t=0 -> FP) unless `exclude_invalid`.
AggregateMetrics aggregate(const std::vector<JudgmentRecord>& records, bool exclude_invalid = false);

/// {"<model>": {"all": {...}, "excluding_invalid": {...}}} for every model in
/// the records, models sorted.
std::string report_json(const std::vector<JudgmentRecord>& records);

}  // namespace iojudge::judge

#endif  // IOJUDGE_JUDGE_HPP_
