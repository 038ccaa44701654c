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

#include <atomic>
#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "iojudge/judge.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace iojudge;
using namespace iojudge::judge;
using corpus::Origin;
using corpus::Program;
using corpus::Triple;

namespace {

Triple triple(std::string code, std::string x, std::string y, int label) {
  return Triple{Program{"p", "s", std::move(code)}, std::move(x), std::move(y), label,
                label == 1 ? Origin::kExecutedPositive : Origin::kShuffledNegative};
}

JudgmentRecord rec(Verdict v, int label) {
  JudgmentRecord r;
  r.verdict = v;
  r.label = label;
  r.success = success_of(v, label);
  return r;
}

// A local chat-completions server that answers from a script of
// (status, content) pairs; the last entry repeats.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::vector<std::pair<int, std::string>> script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::pair<int, std::string> step;
      {
        std::lock_guard lock(mu_);
        last_body = req.body;
        last_auth = req.get_header_value("Authorization");
        step = script_[std::min(calls.load(), script_.size() - 1)];
        ++calls;
      }
      res.status = step.first;
      nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", step.second}}}}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::atomic<std::size_t> calls{0};
  std::string last_body;
  std::string last_auth;

 private:
  std::vector<std::pair<int, std::string>> script_;
  httplib::Server server_;
  std::mutex mu_;
  int port_ = 0;
  std::thread thread_;
};

JudgeOptions fast_options() {
  JudgeOptions o;
  o.backoff_base_s = 0.001;
  o.request_timeout_s = 5;
  return o;
}

}  // namespace

TEST_CASE("prompts are deterministic and ordered") {
  const auto t = triple("print(input())", "5", "5", 1);
  const auto a = render_prompt(t);
  const auto b = render_prompt(t);
  CHECK(a.user == b.user);
  CHECK(a.system == b.system);
  const auto code_at = a.user.find("print(input())");
  const auto input_at = a.user.find("Input:");
  const auto output_at = a.user.find("Candidate output:");
  CHECK(code_at < input_at);
  CHECK(input_at < output_at);
  CHECK(a.user.find("Does the candidate output exactly match the program's output on this input? "
                    "Answer with exactly \"yes\" or \"no\".") != std::string::npos);

  const auto c = render_prompt(triple("print(input())", "5", "6", 0));
  REQUIRE(c.user.size() == a.user.size());
  std::size_t first = 0;
  while (a.user[first] == c.user[first]) ++first;
  CHECK(first > output_at);
  CHECK(a.user.substr(first + 1) == c.user.substr(first + 1));

  CHECK(prompt_version().size() == 12);
  CHECK(prompt_version() == prompt_version());
}

TEST_CASE("parse_judgment takes the last standalone yes/no") {
  CHECK(parse_judgment("Yes.") == Verdict::kMatch);
  CHECK(parse_judgment("Let me think\xE2\x80\xA6 the answer is no") == Verdict::kNoMatch);
  CHECK(parse_judgment("The output is 42.") == Verdict::kInvalid);
  CHECK(parse_judgment("NO") == Verdict::kNoMatch);
  CHECK(parse_judgment("no... actually, YES!") == Verdict::kMatch);
  CHECK(parse_judgment("yesterday nobody knows") == Verdict::kInvalid);
  CHECK(parse_judgment("") == Verdict::kInvalid);
}

TEST_CASE("success follows the verdict and the label") {
  CHECK(success_of(Verdict::kMatch, 1) == 1);
  CHECK(success_of(Verdict::kNoMatch, 1) == 0);
  CHECK(success_of(Verdict::kNoMatch, 0) == 1);
  CHECK(success_of(Verdict::kMatch, 0) == 0);
  CHECK(success_of(Verdict::kInvalid, 0) == 0);
  CHECK(success_of(Verdict::kInvalid, 1) == 0);
}

TEST_CASE("F1 reproduces the published precision/recall pairs") {
  CHECK(std::fabs(f1_score(0.926, 0.995) - 0.959) <= 0.001);
  CHECK(std::fabs(f1_score(0.556, 0.892) - 0.685) <= 0.001);
  CHECK(std::fabs(f1_score(0.514, 0.931) - 0.662) <= 0.001);
  CHECK(f1_score(0, 0) == 0);
}

TEST_CASE("aggregate agrees with a brute-force confusion matrix") {
  Engine e(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<JudgmentRecord> rs;
    const auto n = uniform_int(e, 1, 60);
    for (std::int64_t i = 0; i < n; ++i) {
      rs.push_back(rec(static_cast<Verdict>(uniform_below(e, 3)), static_cast<int>(uniform_below(e, 2))));
    }
    int tp = 0, fp = 0, tn = 0, fn = 0, invalid = 0;
    for (const auto& r : rs) {
      const bool says_yes = r.verdict == Verdict::kMatch;
      const bool wrong_invalid = r.verdict == Verdict::kInvalid;
      if (wrong_invalid) ++invalid;
      if (r.label == 1) (says_yes ? tp : fn)++;
      else (says_yes || wrong_invalid ? fp : tn)++;
    }
    const auto m = aggregate(rs);
    CHECK(m.tp == std::size_t(tp));
    CHECK(m.fp == std::size_t(fp));
    CHECK(m.tn == std::size_t(tn));
    CHECK(m.fn == std::size_t(fn));
    CHECK(m.invalid == std::size_t(invalid));
    CHECK(m.accuracy == doctest::Approx(double(tp + tn) / double(n)));
    std::size_t successes = 0;
    for (const auto& r : rs) successes += static_cast<std::size_t>(r.success);
    CHECK(successes == m.tp + m.tn);
  }
  CHECK_THROWS_AS(aggregate({}), InvalidArgument);
}

TEST_CASE("perfect verdicts on a balanced set") {
  const auto m = aggregate({rec(Verdict::kMatch, 1), rec(Verdict::kNoMatch, 0),
                            rec(Verdict::kMatch, 1), rec(Verdict::kNoMatch, 0)});
  CHECK(m.accuracy == 1.0);
  CHECK(m.f1 == 1.0);
  const auto ex = aggregate({rec(Verdict::kMatch, 1), rec(Verdict::kInvalid, 1)}, true);
  CHECK(ex.accuracy == 1.0);
  CHECK(ex.invalid == 1);
}

TEST_CASE("mock judges") {
  const auto pos = triple("print(input())", "5", "5", 1);
  const auto neg = triple("print(input())", "5", "66", 0);
  CHECK(mock_judge(pos, "always_yes").success == 1);
  CHECK(mock_judge(neg, "always_yes").success == 0);
  CHECK(aggregate({mock_judge(pos, "always_yes"), mock_judge(neg, "always_yes")}).accuracy == 0.5);
  CHECK(mock_judge(neg, "even_output_length").verdict == Verdict::kMatch);
  CHECK(mock_judge(neg, "oracle").success == 1);
  CHECK(mock_judge(pos, "code_chars_lt:100").verdict == Verdict::kMatch);
  CHECK(mock_judge(pos, "code_chars_lt:5").verdict == Verdict::kNoMatch);
  CHECK_THROWS_AS(mock_judge(pos, "sometimes"), InvalidArgument);
  CHECK_THROWS_AS(mock_judge(pos, "hash:abc"), InvalidArgument);

  // Labels are reconstructible by re-applying the rule offline.
  std::vector<Triple> ts;
  for (int i = 0; i < 40; ++i) {
    ts.push_back(triple(std::string(static_cast<std::size_t>(60 + i * 3), 'x'), std::to_string(i), "y", i % 2));
  }
  const auto records = judge_all(nullptr, "mock:code_chars_lt:100", ts, {});
  std::map<std::string, const Triple*> by_id;
  for (const auto& t : ts) by_id[t.id()] = &t;
  for (const auto& r : records) {
    const Triple& t = *by_id.at(r.triple_id);
    const bool yes = t.program.source.size() < 100;
    CHECK(r.success == ((yes ? 1 : 0) == t.label ? 1 : 0));
  }
  int yes_count = 0;
  for (int i = 0; i < 400; ++i) {
    yes_count += mock_judge(triple("c", std::to_string(i), "y", 1), "hash:0.3").verdict == Verdict::kMatch;
  }
  CHECK(yes_count / 400.0 == doctest::Approx(0.3).epsilon(0.25));
}

TEST_CASE("records round-trip through JSONL and reject inconsistent success") {
  auto r = mock_judge(triple("c", "1", "1", 1), "always_no");
  const auto back = records_from_jsonl(records_to_jsonl({r}));
  REQUIRE(back.size() == 1);
  CHECK(record_to_json(back[0]) == record_to_json(r));
  r.success = 1;
  CHECK_THROWS_AS(record_from_json(record_to_json(r)), InvalidArgument);
}

TEST_CASE("HTTP judge retries transient failures") {
  ScriptedServer server({{500, ""}, {503, ""}, {200, "Yes."}});
  HttpChatClient client(server.endpoint(), "secret");
  const auto r = judge_triple(&client, "m1", triple("print(1)", "", "1", 1), fast_options());
  CHECK(r.verdict == Verdict::kMatch);
  CHECK(r.success == 1);
  CHECK(r.attempts == 3);
  CHECK(server.calls == 3);
  CHECK(server.last_auth == "Bearer secret");
  const auto body = nlohmann::json::parse(server.last_body);
  CHECK(body["temperature"] == 0);
  CHECK(body["model"] == "m1");
  CHECK(body["messages"][1]["content"].get<std::string>().find("print(1)") != std::string::npos);
}

TEST_CASE("HTTP judge gives up after three retries without caching") {
  ScriptedServer server({{429, ""}});
  HttpChatClient client(server.endpoint(), "");
  auto opt = fast_options();
  const auto dir = testing::scratch_dir("judge-giveup");
  opt.cache_dir = dir;
  const auto r = judge_triple(&client, "m1", triple("print(1)", "", "1", 1), opt);
  CHECK(r.verdict == Verdict::kInvalid);
  CHECK(r.success == 0);
  CHECK_FALSE(r.error.empty());
  CHECK(server.calls == 4);
  CHECK(std::filesystem::is_empty(dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP judge does not retry client errors") {
  ScriptedServer server({{400, ""}});
  HttpChatClient client(server.endpoint(), "");
  const auto r = judge_triple(&client, "m1", triple("print(1)", "", "1", 1), fast_options());
  CHECK(r.verdict == Verdict::kInvalid);
  CHECK(server.calls == 1);
}

TEST_CASE("unreachable endpoints become invalid records") {
  HttpChatClient client("http://127.0.0.1:1/v1", "");
  const auto r = judge_triple(&client, "m1", triple("print(1)", "", "1", 1), fast_options());
  CHECK(r.verdict == Verdict::kInvalid);
  CHECK(r.attempts == 4);
}

TEST_CASE("invalid verdicts are re-queried once") {
  ScriptedServer server({{200, "I am not sure."}, {200, "no"}});
  HttpChatClient client(server.endpoint(), "");
  const auto r = judge_triple(&client, "m1", triple("print(1)", "", "2", 0), fast_options());
  CHECK(r.verdict == Verdict::kNoMatch);
  CHECK(r.success == 1);
  CHECK(server.calls == 2);

  ScriptedServer stubborn({{200, "maybe"}});
  HttpChatClient c2(stubborn.endpoint(), "");
  const auto r2 = judge_triple(&c2, "m1", triple("print(1)", "", "2", 0), fast_options());
  CHECK(r2.verdict == Verdict::kInvalid);
  CHECK(r2.raw_response == "maybe");
  CHECK(stubborn.calls == 2);
}

TEST_CASE("cached triples are served without network calls") {
  ScriptedServer server({{200, "yes"}});
  HttpChatClient client(server.endpoint(), "");
  auto opt = fast_options();
  const auto dir = testing::scratch_dir("judge-cache");
  opt.cache_dir = dir;
  opt.max_concurrency = 4;
  std::vector<Triple> ts;
  for (int i = 0; i < 12; ++i) ts.push_back(triple("print(input())", std::to_string(i), std::to_string(i), 1));
  const auto first = judge_all(&client, "m1", ts, opt);
  CHECK(server.calls == 12);
  const auto second = judge_all(&client, "m1", ts, opt);
  CHECK(server.calls == 12);
  CHECK(records_to_jsonl(first) == records_to_jsonl(second));
  for (std::size_t i = 1; i < first.size(); ++i) CHECK(first[i - 1].triple_id < first[i].triple_id);
  // A different model or prompt target is a different key.
  CHECK(cache_key("m1", ts[0]) != cache_key("m2", ts[0]));
  CHECK(cache_key("m1", ts[0]) != cache_key("m1", ts[1]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("report lists every model") {
  std::vector<JudgmentRecord> rs;
  for (int i = 0; i < 4; ++i) {
    auto t = triple("c", std::to_string(i), "y", i % 2);
    rs.push_back(mock_judge(t, "always_yes"));
    rs.push_back(mock_judge(t, "oracle"));
  }
  const auto j = nlohmann::json::parse(report_json(rs));
  CHECK(j["mock:always_yes"]["all"]["accuracy"] == 0.5);
  CHECK(j["mock:oracle"]["all"]["f1"] == 1.0);
  CHECK(j["mock:oracle"]["n"] == 4);
}
