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

// Client side of the interpreter sidecar protocol (docs/sidecar_protocol.md).

#ifndef IOJUDGE_SIDECAR_HPP_
#define IOJUDGE_SIDECAR_HPP_

#include <sys/types.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iojudge/common.hpp"

namespace iojudge {

struct ExecutionLimits {
  double timeout_s = 5.0;
  std::uint64_t memory_bytes = 256ULL << 20;
};

struct ExecutionResult {
  std::string stdout_text;
  int exit_status = 0;
  double wall_time = 0.0;
  bool timed_out = false;

  /// Only a clean, non-empty, in-time run may stand in for f_p(x).
  bool usable() const { return !timed_out && exit_status == 0 && !stdout_text.empty(); }
};

struct Opcode {
  int id = 0;
  std::string name;
  friend bool operator==(const Opcode&, const Opcode&) = default;
};

/// Opcodes of every code object (module, functions, comprehensions) in
/// definition order.
struct OpcodeSequence {
  std::vector<Opcode> ops;
};

struct Disassembly {
  std::optional<OpcodeSequence> sequence;  // empty when compilation failed
  std::string error;
  bool ok() const { return sequence.has_value(); }
};

/// Runs and disassembles programs. Implemented by the sidecar client and by
/// test doubles.
class ExecutionService {
 public:
  virtual ~ExecutionService() = default;
  virtual ExecutionResult run(std::string_view code, std::string_view stdin_text,
                              const ExecutionLimits& limits) = 0;
  virtual Disassembly disassemble(std::string_view code) = 0;
  /// e.g. "cpython-3.10.12"
  virtual std::string interpreter_version() = 0;
};

/// The sidecar process could not be started or stopped answering.
class SidecarUnavailable : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

struct SidecarOptions {
  std::string python = "python3";  // interpreter used to host the sidecar
  std::string script;              // empty: IOJUDGE_SIDECAR or the built-in path
};

/// Owns one sidecar process and speaks the JSON-lines protocol with it.
/// Not thread-safe; give each worker its own client.
class SidecarClient final : public ExecutionService {
 public:
  explicit SidecarClient(SidecarOptions options = {});
  ~SidecarClient() override;
  SidecarClient(const SidecarClient&) = delete;
  SidecarClient& operator=(const SidecarClient&) = delete;

  ExecutionResult run(std::string_view code, std::string_view stdin_text,
                      const ExecutionLimits& limits) override;
  Disassembly disassemble(std::string_view code) override;
  std::string interpreter_version() override;

  /// Sends one raw request line and returns the raw response line.
  std::string roundtrip(std::string_view request_line);

  static std::string default_script();

 private:
  void start();
  void stop();
  std::string read_line();

  SidecarOptions options_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  std::string version_;
};

}  // namespace iojudge

#endif  // IOJUDGE_SIDECAR_HPP_
