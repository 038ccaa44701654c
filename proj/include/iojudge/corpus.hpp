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

// Labeled (program, input, output) dataset construction.

#ifndef IOJUDGE_CORPUS_HPP_
#define IOJUDGE_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "iojudge/common.hpp"
#include "iojudge/sidecar.hpp"

namespace iojudge::corpus {

struct Program {
  std::string problem_id;
  std::string submission_id;
  std::string source;
};

enum class Origin { kExecutedPositive, kShuffledNegative };

std::string_view origin_name(Origin origin);
Origin parse_origin(std::string_view name);

struct Triple {
  Program program;
  std::string input;
  std::string output;
  int label = 1;
  Origin origin = Origin::kExecutedPositive;

  /// 16 hex digits of SHA-256 over the identifying fields.
  std::string id() const;
};

struct SplitManifest {
  std::vector<std::string> ordering;  // lexicographic
  std::set<std::string> eval_problems;
  std::set<std::string> train_problems;
};

/// Events that drop or skip data; kept so that dataset counts can be
/// reconciled.
struct LogEntry {
  std::string event;  // "execution_failed", "nondeterministic", "no_donor", ...
  std::string problem_id;
  std::string submission_id;
  std::string input;
  std::string detail;
};
using CorpusLog = std::vector<LogEntry>;

struct LengthLimits {
  std::size_t code_chars = 5000;
  std::size_t input_chars = 500;
  std::size_t output_chars = 500;
};

// ---------------------------------------------------------------------------
// Fuzzing

struct IntRange {
  std::int64_t lo = -1'000'000;
  std::int64_t hi = 1'000'000;
};

/// Single integer. With probability 0.2 the value is one of {-1, 0, 1, 2, 10}
/// (restricted to `range`), otherwise uniform over `range`.
std::string gen_integer_line(Engine& engine, IntRange range = {});
/// 1 to 20 space-separated integers drawn as in gen_integer_line.
std::string gen_integer_list(Engine& engine, IntRange range = {});
/// 1 to 50 lowercase ASCII letters.
std::string gen_lowercase_string(Engine& engine);
/// 2 to 5 lines, each from one of the three generators above.
std::string gen_multi_line(Engine& engine, IntRange range = {});

struct FuzzOptions {
  bool integer_line = true;
  bool integer_list = true;
  bool lowercase_string = true;
  bool multi_line = true;
  IntRange range;
};

/// Up to `budget` distinct inputs, round-robin across the enabled generators.
/// The stream depends only on (seed, problem_id, submission_id).
std::vector<std::string> fuzz_inputs(const Program& program, int budget, std::uint64_t seed,
                                     const FuzzOptions& options = {});

// ---------------------------------------------------------------------------
// Dataset operations

/// Program output with trailing line breaks removed.
std::string normalize_output(std::string_view stdout_text);

/// Runs each input twice; keeps inputs whose two runs agree and are usable.
/// Per-input failures are logged. SidecarUnavailable propagates.
std::vector<Triple> execute_and_collect(const Program& program,
                                        const std::vector<std::string>& inputs,
                                        ExecutionService& service,
                                        const ExecutionLimits& limits, CorpusLog* log);

/// One triple per (problem_id, input, output); the first occurrence wins.
std::vector<Triple> deduplicate(const std::vector<Triple>& triples);

/// For every positive (p, x, y), one negative (p, x, y') with y' = f_p(x')
/// for some x' != x and y' != y, chosen uniformly among the eligible outputs.
/// Returns the negatives only.
std::vector<Triple> make_negatives(const std::vector<Triple>& positives, std::uint64_t seed,
                                   CorpusLog* log);

/// Every tenth problem id (lexicographic order, index 0 first) is held out.
SplitManifest split_by_problem(const std::set<std::string>& problems);

std::vector<Triple> apply_length_filters(const std::vector<Triple>& triples,
                                         const LengthLimits& limits = {});

/// Sort order of dataset files: (problem_id, submission_id, input, label desc).
void sort_triples(std::vector<Triple>& triples);

// ---------------------------------------------------------------------------
// Corpus I/O and end-to-end build

/// Reads `<root>/<problem_id>/<submission_id>.py`, sorted by id.
std::vector<Program> load_corpus(const std::filesystem::path& root);

struct BuildOptions {
  int fuzz_budget = 8;
  std::uint64_t fuzz_seed = 1;
  std::uint64_t negative_seed = 2;
  FuzzOptions fuzz;
  ExecutionLimits limits;
  LengthLimits length_limits;
  int workers = 1;
};

struct Dataset {
  std::vector<Triple> triples;  // sorted
  SplitManifest split;
  CorpusLog log;
};

using ServiceFactory = std::function<std::unique_ptr<ExecutionService>()>;

/// fuzz -> execute -> deduplicate -> negatives -> length filters -> split.
/// Each worker owns one service from `make_service`.
Dataset build_dataset(const std::vector<Program>& programs, const BuildOptions& options,
                      const ServiceFactory& make_service);

std::string dataset_to_jsonl(const std::vector<Triple>& triples);
std::vector<Triple> dataset_from_jsonl(std::string_view text);
std::string split_to_json(const SplitManifest& split);
SplitManifest split_from_json(std::string_view text);
std::string log_to_jsonl(const CorpusLog& log);

}  // namespace iojudge::corpus

#endif  // IOJUDGE_CORPUS_HPP_
