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

#include "iojudge/corpus.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>
#include <unordered_set>

#include "json.hpp"

namespace iojudge::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view origin_name(Origin origin) {
  return origin == Origin::kExecutedPositive ? "executed_positive" : "shuffled_negative";
}

Origin parse_origin(std::string_view name) {
  if (name == "executed_positive") return Origin::kExecutedPositive;
  if (name == "shuffled_negative") return Origin::kShuffledNegative;
  throw InvalidArgument("unknown triple origin: " + std::string(name));
}

std::string Triple::id() const {
  std::string key;
  key.reserve(program.problem_id.size() + program.submission_id.size() + input.size() +
              output.size() + 8);
  key.append(program.problem_id).push_back('\0');
  key.append(program.submission_id).push_back('\0');
  key.append(input).push_back('\0');
  key.append(output).push_back('\0');
  key.push_back(label == 1 ? '1' : '0');
  return sha256_hex(key).substr(0, 16);
}

// ---------------------------------------------------------------------------
// Fuzzing

namespace {

constexpr std::array<std::int64_t, 5> kSpecialIntegers = {-1, 0, 1, 2, 10};

std::int64_t draw_integer(Engine& engine, IntRange range) {
  std::vector<std::int64_t> specials;
  for (auto v : kSpecialIntegers) {
    if (v >= range.lo && v <= range.hi) specials.push_back(v);
  }
  const double u = uniform01(engine);
  if (u < 0.2 && !specials.empty()) {
    return specials[uniform_below(engine, specials.size())];
  }
  return uniform_int(engine, range.lo, range.hi);
}

}  // namespace

std::string gen_integer_line(Engine& engine, IntRange range) {
  return std::to_string(draw_integer(engine, range));
}

std::string gen_integer_list(Engine& engine, IntRange range) {
  const auto n = uniform_int(engine, 1, 20);
  std::string out;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i > 0) out.push_back(' ');
    out += std::to_string(draw_integer(engine, range));
  }
  return out;
}

std::string gen_lowercase_string(Engine& engine) {
  const auto n = uniform_int(engine, 1, 50);
  std::string out;
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(static_cast<char>('a' + uniform_below(engine, 26)));
  }
  return out;
}

std::string gen_multi_line(Engine& engine, IntRange range) {
  const auto n = uniform_int(engine, 2, 5);
  std::string out;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i > 0) out.push_back('\n');
    switch (uniform_below(engine, 3)) {
      case 0:
        out += gen_integer_line(engine, range);
        break;
      case 1:
        out += gen_integer_list(engine, range);
        break;
      default:
        out += gen_lowercase_string(engine);
        break;
    }
  }
  return out;
}

std::vector<std::string> fuzz_inputs(const Program& program, int budget, std::uint64_t seed,
                                     const FuzzOptions& options) {
  if (budget < 1) throw InvalidArgument("fuzz budget must be >= 1");
  using Gen = std::function<std::string(Engine&)>;
  std::vector<Gen> gens;
  const IntRange range = options.range;
  if (options.integer_line) gens.emplace_back([range](Engine& e) { return gen_integer_line(e, range); });
  if (options.integer_list) gens.emplace_back([range](Engine& e) { return gen_integer_list(e, range); });
  if (options.lowercase_string) gens.emplace_back([](Engine& e) { return gen_lowercase_string(e); });
  if (options.multi_line) gens.emplace_back([range](Engine& e) { return gen_multi_line(e, range); });
  std::vector<std::string> out;
  if (gens.empty()) return out;

  Engine engine(derive_seed(seed, program.problem_id + "/" + program.submission_id));
  std::unordered_set<std::string> seen;
  const auto max_attempts = static_cast<std::size_t>(budget) * 20;
  for (std::size_t attempt = 0;
       out.size() < static_cast<std::size_t>(budget) && attempt < max_attempts; ++attempt) {
    std::string candidate = gens[attempt % gens.size()](engine);
    if (seen.insert(candidate).second) out.push_back(std::move(candidate));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset operations

std::string normalize_output(std::string_view stdout_text) {
  while (!stdout_text.empty() && (stdout_text.back() == '\n' || stdout_text.back() == '\r')) {
    stdout_text.remove_suffix(1);
  }
  return std::string(stdout_text);
}

std::vector<Triple> execute_and_collect(const Program& program,
                                        const std::vector<std::string>& inputs,
                                        ExecutionService& service,
                                        const ExecutionLimits& limits, CorpusLog* log) {
  auto note = [&](std::string event, const std::string& input, std::string detail) {
    if (log != nullptr) {
      log->push_back(LogEntry{std::move(event), program.problem_id, program.submission_id,
                              input, std::move(detail)});
    }
  };
  std::vector<Triple> out;
  for (const auto& input : inputs) {
    const std::string stdin_text = input + "\n";
    const ExecutionResult first = service.run(program.source, stdin_text, limits);
    if (!first.usable()) {
      note("execution_failed", input,
           first.timed_out ? "timeout" : "exit_status=" + std::to_string(first.exit_status));
      continue;
    }
    const ExecutionResult second = service.run(program.source, stdin_text, limits);
    if (!second.usable() || second.stdout_text != first.stdout_text) {
      note("nondeterministic", input, "repeated execution disagreed");
      continue;
    }
    std::string output = normalize_output(first.stdout_text);
    if (output.empty()) {
      note("execution_failed", input, "blank output");
      continue;
    }
    out.push_back(Triple{program, input, std::move(output), 1, Origin::kExecutedPositive});
  }
  return out;
}

std::vector<Triple> deduplicate(const std::vector<Triple>& triples) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::vector<Triple> out;
  for (const auto& t : triples) {
    if (seen.emplace(t.program.problem_id, t.input, t.output).second) out.push_back(t);
  }
  return out;
}

std::vector<Triple> make_negatives(const std::vector<Triple>& positives, std::uint64_t seed,
                                   CorpusLog* log) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<const Triple*>> by_program;
  for (const auto& t : positives) {
    if (t.label != 1) throw InvalidArgument("make_negatives expects positives only");
    by_program[{t.program.problem_id, t.program.submission_id}].push_back(&t);
  }
  std::vector<Triple> negatives;
  for (const auto& t : positives) {
    const auto& group = by_program[{t.program.problem_id, t.program.submission_id}];
    std::set<std::string> donors;  // sorted, distinct
    for (const Triple* other : group) {
      if (other->input != t.input && other->output != t.output) donors.insert(other->output);
    }
    if (donors.empty()) {
      if (log != nullptr) {
        log->push_back(LogEntry{"no_donor", t.program.problem_id, t.program.submission_id,
                                t.input, "no output of another input differs"});
      }
      continue;
    }
    Engine engine(derive_seed(seed, t.program.problem_id + '\0' + t.program.submission_id +
                                        '\0' + t.input));
    auto it = donors.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(uniform_below(engine, donors.size())));
    negatives.push_back(Triple{t.program, t.input, *it, 0, Origin::kShuffledNegative});
  }
  return negatives;
}

SplitManifest split_by_problem(const std::set<std::string>& problems) {
  if (problems.empty()) throw InvalidArgument("split_by_problem: no problems");
  SplitManifest split;
  split.ordering.assign(problems.begin(), problems.end());  // std::set is sorted
  for (std::size_t i = 0; i < split.ordering.size(); ++i) {
    (i % 10 == 0 ? split.eval_problems : split.train_problems).insert(split.ordering[i]);
  }
  return split;
}

std::vector<Triple> apply_length_filters(const std::vector<Triple>& triples,
                                         const LengthLimits& limits) {
  std::vector<Triple> out;
  for (const auto& t : triples) {
    if (utf8_length(t.program.source) <= limits.code_chars &&
        utf8_length(t.input) <= limits.input_chars &&
        utf8_length(t.output) <= limits.output_chars) {
      out.push_back(t);
    }
  }
  return out;
}

void sort_triples(std::vector<Triple>& triples) {
  std::stable_sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.program.problem_id, a.program.submission_id, a.input, b.label,
                    a.output) < std::tie(b.program.problem_id, b.program.submission_id,
                                         b.input, a.label, b.output);
  });
}

// ---------------------------------------------------------------------------
// Corpus I/O and build

std::vector<Program> load_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InvalidArgument("corpus root is not a directory: " + root.string());
  std::vector<Program> programs;
  for (const auto& problem_dir : fs::directory_iterator(root)) {
    if (!problem_dir.is_directory()) continue;
    for (const auto& file : fs::directory_iterator(problem_dir.path())) {
      if (!file.is_regular_file() || file.path().extension() != ".py") continue;
      std::string source = read_file(file.path());
      if (source.empty()) continue;
      programs.push_back(Program{problem_dir.path().filename().string(),
                                 file.path().stem().string(), std::move(source)});
    }
  }
  std::sort(programs.begin(), programs.end(), [](const Program& a, const Program& b) {
    return std::tie(a.problem_id, a.submission_id) < std::tie(b.problem_id, b.submission_id);
  });
  return programs;
}

Dataset build_dataset(const std::vector<Program>& programs, const BuildOptions& options,
                      const ServiceFactory& make_service) {
  struct Slot {
    std::vector<Triple> positives;
    CorpusLog log;
  };
  std::vector<Slot> slots(programs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&]() {
    try {
      auto service = make_service();
      for (std::size_t i = next++; i < programs.size(); i = next++) {
        const auto inputs = fuzz_inputs(programs[i], options.fuzz_budget, options.fuzz_seed,
                                        options.fuzz);
        if (inputs.empty()) continue;
        slots[i].positives = execute_and_collect(programs[i], inputs, *service, options.limits,
                                                 &slots[i].log);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = programs.size();
    }
  };
  const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(programs.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  // Deterministic reduction in corpus order.
  Dataset ds;
  std::vector<Triple> positives;
  for (auto& slot : slots) {
    for (auto& t : slot.positives) positives.push_back(std::move(t));
    for (auto& e : slot.log) ds.log.push_back(std::move(e));
  }
  sort_triples(positives);
  positives = deduplicate(positives);
  auto negatives = make_negatives(positives, options.negative_seed, &ds.log);
  std::vector<Triple> all = std::move(positives);
  for (auto& t : negatives) all.push_back(std::move(t));
  all = apply_length_filters(all, options.length_limits);
  sort_triples(all);
  std::set<std::string> problems;
  for (const auto& p : programs) problems.insert(p.problem_id);
  if (!problems.empty()) ds.split = split_by_problem(problems);
  ds.triples = std::move(all);
  return ds;
}

std::string dataset_to_jsonl(const std::vector<Triple>& triples) {
  std::string out;
  for (const auto& t : triples) {
    ordered_json j;
    j["problem_id"] = t.program.problem_id;
    j["submission_id"] = t.program.submission_id;
    j["code"] = t.program.source;
    j["input"] = t.input;
    j["output"] = t.output;
    j["label"] = t.label;
    j["origin"] = origin_name(t.origin);
    j["triple_id"] = t.id();
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<Triple> dataset_from_jsonl(std::string_view text) {
  std::vector<Triple> out;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    Triple t;
    t.program.problem_id = j.at("problem_id").get<std::string>();
    t.program.submission_id = j.at("submission_id").get<std::string>();
    t.program.source = j.at("code").get<std::string>();
    t.input = j.at("input").get<std::string>();
    t.output = j.at("output").get<std::string>();
    t.label = j.at("label").get<int>();
    t.origin = parse_origin(j.at("origin").get<std::string>());
    if ((t.label == 1) != (t.origin == Origin::kExecutedPositive)) {
      throw InvalidArgument("dataset record label/origin mismatch for " + t.id());
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::string split_to_json(const SplitManifest& split) {
  ordered_json j;
  j["eval_problems"] = std::vector<std::string>(split.eval_problems.begin(), split.eval_problems.end());
  j["train_problems"] = std::vector<std::string>(split.train_problems.begin(), split.train_problems.end());
  return j.dump(2) + "\n";
}

SplitManifest split_from_json(std::string_view text) {
  const json j = json::parse(text);
  SplitManifest split;
  for (const auto& p : j.at("eval_problems")) split.eval_problems.insert(p.get<std::string>());
  for (const auto& p : j.at("train_problems")) split.train_problems.insert(p.get<std::string>());
  std::set<std::string> all = split.eval_problems;
  all.insert(split.train_problems.begin(), split.train_problems.end());
  split.ordering.assign(all.begin(), all.end());
  return split;
}

std::string log_to_jsonl(const CorpusLog& log) {
  std::string out;
  for (const auto& e : log) {
    ordered_json j;
    j["event"] = e.event;
    j["problem_id"] = e.problem_id;
    j["submission_id"] = e.submission_id;
    j["input"] = e.input;
    j["detail"] = e.detail;
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

}  // namespace iojudge::corpus
