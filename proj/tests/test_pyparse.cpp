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

// The parser is checked against CPython's own `ast` module: for every
// snippet, per-node-type counts must agree exactly.

#include <algorithm>
#include <map>
#include <sstream>

#include "doctest.h"
#include "iojudge/pysyntax.hpp"
#include "support.hpp"

using namespace iojudge;

namespace {

std::string our_counts(std::string_view source) {
  const auto parsed = py::parse_module(source);
  if (!parsed.ok()) return "ERROR";
  std::map<std::string, int> counts;
  std::vector<const py::Node*> stack{parsed.module.get()};
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    ++counts[std::string(py::node_kind_name(n->kind))];
    for (const auto& c : n->children) stack.push_back(c.node.get());
  }
  std::ostringstream out;
  for (const auto& [k, v] : counts) out << k << ' ' << v << '\n';
  return out.str();
}

std::string reference_counts(const std::filesystem::path& file) {
  std::string out = testing::run_command(
      "python3 " + (testing::source_dir() / "tests/oracles/ast_oracle.py").string() + " '" +
      file.string() + "'");
  if (out.rfind("ERROR", 0) == 0) return "ERROR";
  return out;
}

std::string reference_counts_for(std::string_view source, const std::filesystem::path& dir) {
  const auto file = dir / "snippet.py";
  write_file_atomic(file, source);
  return reference_counts(file);
}

}  // namespace

TEST_CASE("tokenizer classifies tokens") {
  const auto ts = py::tokenize("x = 'a'  # c\nif x:\n    y = 0x1F\n");
  std::vector<py::TokenKind> kinds;
  for (const auto& t : ts.tokens) kinds.push_back(t.kind);
  using K = py::TokenKind;
  const std::vector<K> expected = {K::kName, K::kOp,  K::kString, K::kComment, K::kNewline,
                                   K::kName, K::kName, K::kOp,    K::kNewline, K::kIndent,
                                   K::kName, K::kOp,  K::kNumber, K::kNewline, K::kDedent,
                                   K::kEnd};
  CHECK(kinds == expected);
  CHECK(ts.errors.empty());
}

TEST_CASE("tokenizer recovers from bad characters") {
  const auto ts = py::tokenize("x = 1 $ 2\n");
  CHECK_FALSE(ts.errors.empty());
  CHECK(std::any_of(ts.tokens.begin(), ts.tokens.end(),
                    [](const py::Token& t) { return t.kind == py::TokenKind::kError; }));
}

TEST_CASE("syntax errors are reported, not thrown") {
  for (const char* bad : {"def (:", "x = = 1", "if x\n  y", "return )", "f(**x, *y)", "f(a=1, b)", "f(x for x in y, 1)"}) {
    const auto r = py::parse_module(bad);
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.error.empty());
  }
}

TEST_CASE("node counts agree with the reference parser on snippets") {
  const auto dir = testing::scratch_dir("pyparse");
  const std::vector<std::string> snippets = {
      "x = 1\n",
      "print(input())\n",
      "a, *b = c[1:2, ::3]\n",
      "def f(a, /, b=1, *c, d, e=2, **g) -> int:\n    return a\n",
      "async def g():\n    async with a as b, c:\n        await x\n    async for i in y:\n        yield i\n",
      "class C(B, metaclass=M):\n    @staticmethod\n    def m(): pass\n",
      "try:\n    pass\nexcept (A, B) as e:\n    raise X from e\nelse:\n    pass\nfinally:\n    del a[0], b.c\n",
      "x = [i for i in range(3) if i if i > 0]\ny = {k: v for k, v in z}\nw = {*a, *b}\n",
      "s = f'{x!r:>{w}} {y=} {{lit}}'\n",
      "lambda *a, k=1, **kw: (yield)\n",
      "if a:\n    pass\nelif b:\n    pass\nelse:\n    pass\n",
      "while (n := n - 1) > 0 and not done or flag:\n    x += 1; y @= z\n",
      "import a.b as c\nfrom ..m import (x as y, z)\nglobal q\n",
      "with (open(a) as f, open(b) as g):\n    pass\n",
      "x = 1 if y else -2 ** ~z\nassert x, 'msg'\n",
      "d = {**a, 'k': 1}\nt = ()\nl = [*a]\nprint(*args, sep='', **kw)\n",
      "for i, (j, k) in enumerate(z):\n    continue\nelse:\n    break\n",
      "x: int = 5\ny: list[int]\n",
      "s = 'a' 'b' \"\"\"c\"\"\" rb'd'\n",
      "a < b <= c != d is not e not in f\n",
  };
  for (const auto& s : snippets) {
    CAPTURE(s);
    CHECK(our_counts(s) == reference_counts_for(s, dir));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("node counts agree with the reference parser on standard-library modules") {
  const std::filesystem::path lib = testing::run_command(
      "python3 -c \"import sysconfig;print(sysconfig.get_paths()['stdlib'],end='')\"");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(lib)) {
    if (e.is_regular_file() && e.path().extension() == ".py") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  REQUIRE(files.size() > 40);
  // A fixed, evenly spaced sample keeps the runtime small.
  for (std::size_t i = 0; i < files.size(); i += files.size() / 40) {
    CAPTURE(files[i]);
    const std::string source = read_file(files[i]);
    if (source.find("\nmatch ") != std::string::npos ||
        source.find(" match ") != std::string::npos) {
      continue;  // match statements are outside the supported grammar
    }
    CHECK(our_counts(source) == reference_counts(files[i]));
  }
}
