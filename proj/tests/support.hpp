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

// Shared helpers for the test binaries.

#ifndef IOJUDGE_TESTS_SUPPORT_HPP_
#define IOJUDGE_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "iojudge/common.hpp"
#include "iojudge/sidecar.hpp"

namespace iojudge::testing {

inline std::filesystem::path source_dir() { return IOJUDGE_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& rel) {
  return source_dir() / "tests" / "fixtures" / rel;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto base = std::filesystem::temp_directory_path() /
              ("iojudge-test-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

/// Runs a shell command and returns its stdout; throws on non-zero exit.
inline std::string run_command(const std::string& cmd) {
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw RuntimeFailure("popen failed: " + cmd);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  if (status != 0) throw RuntimeFailure("command failed: " + cmd);
  return out;
}

/// In-process stand-in for the sidecar: programs are C++ functions of stdin.
class FakeService : public ExecutionService {
 public:
  using Program = std::function<ExecutionResult(std::string_view stdin_text)>;

  void define(std::string code, Program program) { programs_[std::move(code)] = std::move(program); }
  /// Convenience: a program that prints f(stdin) followed by a newline.
  void define_text(std::string code, std::function<std::string(std::string_view)> f) {
    define(std::move(code), [f](std::string_view in) {
      ExecutionResult r;
      r.stdout_text = f(in) + "\n";
      return r;
    });
  }
  void set_disassembly(std::string code, Disassembly d) { disassembly_[std::move(code)] = std::move(d); }

  ExecutionResult run(std::string_view code, std::string_view stdin_text,
                      const ExecutionLimits&) override {
    ++run_calls;
    if (!allow_run) throw RuntimeFailure("run disabled");
    const auto it = programs_.find(std::string(code));
    if (it == programs_.end()) {
      ExecutionResult crash;
      crash.exit_status = 1;
      return crash;
    }
    return it->second(stdin_text);
  }

  Disassembly disassemble(std::string_view code) override {
    ++disassemble_calls;
    const auto it = disassembly_.find(std::string(code));
    if (it != disassembly_.end()) return it->second;
    Disassembly d;
    d.sequence = OpcodeSequence{{{100, "LOAD_CONST"}, {83, "RETURN_VALUE"}}};
    return d;
  }

  std::string interpreter_version() override { return "fake-0"; }

  bool allow_run = true;
  int run_calls = 0;
  int disassemble_calls = 0;

 private:
  std::map<std::string, Program> programs_;
  std::map<std::string, Disassembly> disassembly_;
};

}  // namespace iojudge::testing

#endif  // IOJUDGE_TESTS_SUPPORT_HPP_
