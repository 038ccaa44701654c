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
#include <map>
#include <set>
#include <tuple>

#include "doctest.h"
#include "iojudge/corpus.hpp"
#include "support.hpp"

using namespace iojudge;
using namespace iojudge::corpus;

namespace {

Program prog(std::string problem, std::string sub, std::string code = "print(input())") {
  return Program{std::move(problem), std::move(sub), std::move(code)};
}

Triple pos(const Program& p, std::string x, std::string y) {
  return Triple{p, std::move(x), std::move(y), 1, Origin::kExecutedPositive};
}

// Independent re-statement of the integer-line draw: a 53-bit uniform picks
// between the special values and the full range; bounded draws reject the
// top partial bucket of the 64-bit output.
std::uint64_t ref_below(std::mt19937_64& e, std::uint64_t n) {
  const unsigned __int128 space = static_cast<unsigned __int128>(1) << 64;
  const auto usable = static_cast<unsigned __int128>(space / n * n);
  while (true) {
    const unsigned __int128 v = e();
    if (v < usable) return static_cast<std::uint64_t>(v % n);
  }
}

std::int64_t ref_integer(std::mt19937_64& e, std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> special;
  for (std::int64_t v : {-1, 0, 1, 2, 10}) {
    if (v >= lo && v <= hi) special.push_back(v);
  }
  const double u = std::ldexp(static_cast<double>(e() >> 11), -53);
  if (u < 0.2) return special[ref_below(e, special.size())];
  return lo + static_cast<std::int64_t>(ref_below(e, static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

TEST_CASE("fuzz_inputs is deterministic and distinct") {
  const auto p = prog("p1", "s1");
  const auto a = fuzz_inputs(p, 5, 42);
  CHECK(a == fuzz_inputs(p, 5, 42));
  CHECK(a.size() == 5);
  const auto b = fuzz_inputs(p, 3, 7);
  CHECK(b.size() == 3);
  CHECK(std::set<std::string>(b.begin(), b.end()).size() == 3);
  CHECK(fuzz_inputs(prog("p1", "s2"), 5, 42) != a);  // streams differ per program
  CHECK_THROWS_AS(fuzz_inputs(p, 0, 1), InvalidArgument);
}

TEST_CASE("fuzz_inputs cycles through the enabled generators") {
  const auto inputs = fuzz_inputs(prog("p", "s"), 8, 3);
  REQUIRE(inputs.size() == 8);
  auto is_int = [](const std::string& s) {
    return !s.empty() && s.find_first_not_of("-0123456789") == std::string::npos;
  };
  CHECK(is_int(inputs[0]));
  CHECK(inputs[1].find('\n') == std::string::npos);
  CHECK(std::all_of(inputs[2].begin(), inputs[2].end(), [](char c) { return c >= 'a' && c <= 'z'; }));
  CHECK(inputs[3].find('\n') != std::string::npos);

  FuzzOptions none;
  none.integer_line = none.integer_list = none.lowercase_string = none.multi_line = false;
  CHECK(fuzz_inputs(prog("p", "s"), 5, 1, none).empty());
}

TEST_CASE("integer-line stream matches an independent re-run of the documented draw") {
  Engine engine(1);
  std::mt19937_64 ref(1);
  for (int i = 0; i < 200; ++i) {
    const std::string got = gen_integer_line(engine, IntRange{0, 100});
    CHECK(got == std::to_string(ref_integer(ref, 0, 100)));
  }
}

TEST_CASE("integer generator puts about a fifth of its mass on special values") {
  Engine engine(9);
  int special = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto v = std::stoll(gen_integer_line(engine));
    if (v == -1 || v == 0 || v == 1 || v == 2 || v == 10) ++special;
  }
  CHECK(special / double(n) == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("generator shapes respect their length ranges") {
  Engine engine(5);
  for (int i = 0; i < 300; ++i) {
    const auto list = split(gen_integer_list(engine), ' ');
    CHECK(list.size() >= 1);
    CHECK(list.size() <= 20);
    const auto s = gen_lowercase_string(engine);
    CHECK(s.size() >= 1);
    CHECK(s.size() <= 50);
    const auto lines = split(gen_multi_line(engine), '\n');
    CHECK(lines.size() >= 2);
    CHECK(lines.size() <= 5);
  }
}

TEST_CASE("execute_and_collect keeps deterministic usable runs") {
  testing::FakeService svc;
  svc.define_text("print(input())", [](std::string_view in) {
    return std::string(in.substr(0, in.find('\n')));
  });
  svc.define_text("print(2*int(input()))", [](std::string_view in) {
    return std::to_string(2 * std::stoll(std::string(in)));
  });
  int counter = 0;
  svc.define("import random\nprint(random.random())", [&counter](std::string_view) {
    ExecutionResult r;
    r.stdout_text = std::to_string(++counter) + "\n";
    return r;
  });
  CorpusLog log;
  const auto id = execute_and_collect(prog("p", "s", "print(input())"), {"5"}, svc, {}, &log);
  REQUIRE(id.size() == 1);
  CHECK(id[0].input == "5");
  CHECK(id[0].output == "5");
  CHECK(id[0].label == 1);

  const auto dbl = execute_and_collect(prog("p", "s", "print(2*int(input()))"), {"3"}, svc, {}, &log);
  REQUIRE(dbl.size() == 1);
  CHECK(dbl[0].output == "6");

  const auto rnd = execute_and_collect(prog("p", "r", "import random\nprint(random.random())"),
                                       {"1", "2"}, svc, {}, &log);
  CHECK(rnd.empty());
  CHECK(std::count_if(log.begin(), log.end(),
                      [](const LogEntry& e) { return e.event == "nondeterministic"; }) == 2);

  const auto crash = execute_and_collect(prog("p", "c", "unknown"), {"1"}, svc, {}, &log);
  CHECK(crash.empty());
  CHECK(log.back().event == "execution_failed");
}

TEST_CASE("normalize_output strips only trailing line breaks") {
  CHECK(normalize_output("6\n") == "6");
  CHECK(normalize_output("a\r\n\n") == "a");
  CHECK(normalize_output("  a b \n") == "  a b ");
  CHECK(normalize_output("a\nb\n") == "a\nb");
}

TEST_CASE("deduplicate keys on problem, input and output") {
  const auto a = prog("p", "a");
  const auto b = prog("p", "b");
  auto same = deduplicate({pos(a, "3", "6"), pos(b, "3", "6")});
  REQUIRE(same.size() == 1);
  CHECK(same[0].program.submission_id == "a");
  CHECK(deduplicate({pos(a, "3", "6"), pos(a, "4", "8")}).size() == 2);

  // 10 triples, 7 distinct keys; counted by brute force.
  const auto q = prog("q", "a");
  std::vector<Triple> ten = {pos(a, "1", "1"), pos(b, "1", "1"), pos(a, "2", "2"),
                             pos(q, "1", "1"), pos(q, "1", "1"), pos(a, "3", "3"),
                             pos(b, "3", "4"), pos(q, "2", "2"), pos(b, "2", "2"),
                             pos(q, "9", "9")};
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (const auto& t : ten) keys.emplace(t.program.problem_id, t.input, t.output);
  CHECK(keys.size() == 7);
  const auto d = deduplicate(ten);
  CHECK(d.size() == keys.size());
  CHECK(deduplicate(d).size() == d.size());
}

TEST_CASE("make_negatives pairs inputs with other outputs of the same program") {
  const auto p = prog("p", "s");
  CorpusLog log;
  const auto neg = make_negatives({pos(p, "2", "4"), pos(p, "3", "6")}, 1, &log);
  REQUIRE(neg.size() == 2);
  CHECK(neg[0].input == "2");
  CHECK(neg[0].output == "6");
  CHECK(neg[0].label == 0);
  CHECK(neg[0].origin == Origin::kShuffledNegative);
  CHECK(neg[1].output == "4");

  const auto c = prog("c", "s", "print(\"hi\")");
  log.clear();
  CHECK(make_negatives({pos(c, "a", "hi"), pos(c, "b", "hi")}, 1, &log).empty());
  CHECK(log.size() == 2);
  CHECK(log[0].event == "no_donor");

  // Donors never cross programs.
  const auto other = prog("p", "t");
  CHECK(make_negatives({pos(p, "1", "1"), pos(other, "2", "2")}, 1, &log).empty());
}

TEST_CASE("make_negatives draws donors uniformly and deterministically") {
  const auto p = prog("p", "s");
  std::vector<Triple> positives;
  for (int i = 0; i < 5; ++i) positives.push_back(pos(p, std::to_string(i), "y" + std::to_string(i)));
  CHECK(make_negatives(positives, 3, nullptr).size() == 5);
  std::map<std::string, int> picks;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    picks[make_negatives({positives}, seed, nullptr)[0].output]++;
  }
  REQUIRE(picks.size() == 4);  // y1..y4, never y0
  for (const auto& [y, n] : picks) {
    CHECK(y != "y0");
    CHECK(n / 4000.0 == doctest::Approx(0.25).epsilon(0.15));
  }
  const auto a = make_negatives(positives, 11, nullptr);
  const auto b = make_negatives(positives, 11, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].output == b[i].output);
}

TEST_CASE("every tenth problem is held out") {
  std::set<std::string> twenty;
  for (int i = 0; i < 20; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "p%03d", i);
    twenty.insert(buf);
  }
  const auto s = split_by_problem(twenty);
  CHECK(s.eval_problems == std::set<std::string>{"p000", "p010"});
  CHECK(s.train_problems.size() == 18);

  std::set<std::string> nine;
  for (int i = 0; i < 9; ++i) nine.insert("q" + std::to_string(i));
  CHECK(split_by_problem(nine).eval_problems == std::set<std::string>{"q0"});

  std::set<std::string> hundred;
  for (int i = 0; i < 100; ++i) hundred.insert("r" + std::to_string(1000 + i));
  const auto h = split_by_problem(hundred);
  CHECK(h.eval_problems.size() == 10);
  CHECK(h.train_problems.size() == 90);
  for (const auto& e : h.eval_problems) CHECK(h.train_problems.count(e) == 0);

  // Ordering is lexicographic, not numeric.
  const auto lex = split_by_problem({"p2", "p10", "p1"});
  CHECK(lex.ordering == std::vector<std::string>{"p1", "p10", "p2"});
  CHECK_THROWS_AS(split_by_problem({}), InvalidArgument);
}

TEST_CASE("length filters are inclusive at 5000/500/500") {
  auto make = [](std::size_t code, std::size_t in, std::size_t out) {
    return Triple{Program{"p", "s", std::string(code, 'c')}, std::string(in, 'i'),
                  std::string(out, 'o'), 1, Origin::kExecutedPositive};
  };
  CHECK(apply_length_filters({make(5000, 500, 500)}).size() == 1);
  CHECK(apply_length_filters({make(5001, 1, 1)}).empty());
  CHECK(apply_length_filters({make(1, 501, 1)}).empty());
  CHECK(apply_length_filters({make(1, 1, 501)}).empty());
  // Characters, not bytes: 500 two-byte characters are still 500.
  Triple wide = make(10, 1, 1);
  wide.input.clear();
  for (int i = 0; i < 500; ++i) wide.input += "\xC3\xA9";
  CHECK(apply_length_filters({wide}).size() == 1);
}

TEST_CASE("dataset JSONL round-trips and is sorted") {
  const auto p = prog("p", "s");
  std::vector<Triple> ts = {pos(p, "2", "4"),
                            Triple{p, "2", "6", 0, Origin::kShuffledNegative},
                            pos(p, "10", "20")};
  sort_triples(ts);
  CHECK(ts[0].input == "10");
  CHECK(ts[1].label == 1);
  CHECK(ts[2].label == 0);
  const std::string text = dataset_to_jsonl(ts);
  CHECK(text.find("{\"problem_id\":\"p\",\"submission_id\":\"s\",\"code\":") == 0);
  const auto back = dataset_from_jsonl(text);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id() == ts[i].id());
    CHECK(back[i].origin == ts[i].origin);
  }
  CHECK(dataset_to_jsonl(back) == text);
  CHECK(ts[1].id() != ts[2].id());
  CHECK(ts[0].id().size() == 16);
}

TEST_CASE("split manifest round-trips") {
  const auto s = split_by_problem({"a", "b", "c"});
  const auto back = split_from_json(split_to_json(s));
  CHECK(back.eval_problems == s.eval_problems);
  CHECK(back.train_problems == s.train_problems);
}

TEST_CASE("build_dataset does not depend on the worker count") {
  std::vector<Program> programs;
  for (int i = 0; i < 6; ++i) {
    programs.push_back(prog("p" + std::to_string(i % 3), "s" + std::to_string(i),
                            "code" + std::to_string(i % 4)));
  }
  auto factory = [] {
    auto svc = std::make_unique<testing::FakeService>();
    for (int k = 0; k < 4; ++k) {
      svc->define_text("code" + std::to_string(k), [k](std::string_view in) {
        return std::string(in.substr(0, in.find('\n'))) + "#" + std::to_string(k % 2);
      });
    }
    return svc;
  };
  BuildOptions opt;
  opt.fuzz_budget = 4;
  const auto one = build_dataset(programs, opt, factory);
  opt.workers = 3;
  const auto three = build_dataset(programs, opt, factory);
  CHECK(dataset_to_jsonl(one.triples) == dataset_to_jsonl(three.triples));
  CHECK(!one.triples.empty());
  std::size_t positives = 0;
  for (const auto& t : one.triples) positives += t.label;
  CHECK(positives * 2 == one.triples.size());
}

TEST_CASE("load_corpus reads the fixture layout") {
  const auto programs = load_corpus(testing::fixture("corpus"));
  CHECK(programs.size() == 20);
  CHECK(programs.front().problem_id == "p01");
  CHECK(programs.front().submission_id == "s1");
  CHECK_THROWS_AS(load_corpus("/nonexistent"), InvalidArgument);
}
