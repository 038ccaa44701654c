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

#include "doctest.h"
#include "iojudge/sidecar.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace iojudge;
using nlohmann::json;

namespace {

SidecarClient& client() {
  static SidecarClient c;
  return c;
}

}  // namespace

TEST_CASE("protocol responses match the golden transcript") {
  // wall_time is the only nondeterministic field and is dropped before
  // comparison.
  const auto requests = split(read_file(testing::source_dir() / "tests/golden/sidecar/requests.jsonl"), '\n');
  const auto responses = split(read_file(testing::source_dir() / "tests/golden/sidecar/responses.jsonl"), '\n');
  std::size_t checked = 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].empty()) continue;
    CAPTURE(requests[i]);
    json got = json::parse(client().roundtrip(requests[i]));
    if (got.contains("result") && got["result"].is_object()) got["result"].erase("wall_time");
    CHECK(got == json::parse(responses[i]));
    ++checked;
  }
  CHECK(checked == 9);
}

TEST_CASE("run executes programs with stdin") {
  const auto r = client().run("print(2*int(input()))", "3\n", {});
  CHECK(r.stdout_text == "6\n");
  CHECK(r.exit_status == 0);
  CHECK(r.usable());
}

TEST_CASE("run enforces the timeout") {
  const auto r = client().run("while True: pass", "", ExecutionLimits{0.5, 256ULL << 20});
  CHECK(r.timed_out);
  CHECK_FALSE(r.usable());
}

TEST_CASE("sandbox blocks file writes and sockets") {
  const auto dir = testing::scratch_dir("sandbox");
  const auto target = dir / "leak.txt";
  const auto w = client().run("open(" + json(target.string()).dump() + ", 'w').write('x')", "", {});
  CHECK(w.exit_status != 0);
  CHECK_FALSE(std::filesystem::exists(target));
  const auto s = client().run("import socket\nsocket.socket()", "", {});
  CHECK(s.exit_status != 0);
  const auto p = client().run("import os\nos.system('true')", "", {});
  CHECK(p.exit_status != 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("memory cap stops runaway allocation") {
  const auto r = client().run("x = bytearray(10**9)\nprint(1)", "", ExecutionLimits{5.0, 128ULL << 20});
  CHECK(r.exit_status != 0);
}

TEST_CASE("disassembly is flattened in definition order") {
  const auto d = client().disassemble("x = 1");
  REQUIRE(d.ok());
  const std::vector<Opcode> expected = {{100, "LOAD_CONST"}, {90, "STORE_NAME"},
                                        {100, "LOAD_CONST"}, {83, "RETURN_VALUE"}};
  CHECK(d.sequence->ops == expected);
  const auto bad = client().disassemble("def (:");
  CHECK_FALSE(bad.ok());
  CHECK(bad.error.find("SyntaxError") != std::string::npos);
}

TEST_CASE("disassembly matches the reference disassembler") {
  const std::string code = "def f(a):\n    return [i * a for i in range(3)]\nprint(f(2))\n";
  const auto d = client().disassemble(code);
  REQUIRE(d.ok());
  const auto dir = testing::scratch_dir("dis");
  write_file_atomic(dir / "p.py", code);
  const std::string ref = testing::run_command(
      "python3 -c \"import dis,sys,types\n"
      "def walk(c):\n"
      "    for i in dis.get_instructions(c): print(i.opname)\n"
      "    for k in c.co_consts:\n"
      "        if isinstance(k, types.CodeType): walk(k)\n"
      "walk(compile(open(sys.argv[1]).read(), '<p>', 'exec'))\" " + (dir / "p.py").string());
  std::string ours;
  for (const auto& op : d.sequence->ops) ours += op.name + "\n";
  CHECK(ours == ref);
  std::filesystem::remove_all(dir);
}

TEST_CASE("interpreter version is reported") {
  CHECK(client().interpreter_version().rfind("cpython-3.", 0) == 0);
}

TEST_CASE("missing sidecar script surfaces as unavailable") {
  SidecarClient broken(SidecarOptions{"python3", "/nonexistent/sidecar.py"});
  CHECK_THROWS_AS(broken.interpreter_version(), SidecarUnavailable);
}
