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

#include "iojudge/sidecar.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "json.hpp"

namespace iojudge {
namespace {

using nlohmann::json;

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SidecarUnavailable(std::string("sidecar write failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

SidecarClient::SidecarClient(SidecarOptions options) : options_(std::move(options)) {
  if (options_.script.empty()) options_.script = default_script();
  start();
}

SidecarClient::~SidecarClient() { stop(); }

std::string SidecarClient::default_script() {
  if (const char* env = std::getenv("IOJUDGE_SIDECAR"); env != nullptr && *env != '\0') {
    return env;
  }
#ifdef IOJUDGE_SIDECAR_SCRIPT
  return IOJUDGE_SIDECAR_SCRIPT;
#else
  return "iojudge_sidecar.py";
#endif
}

void SidecarClient::start() {
  // A dead sidecar must surface as an error, not kill the pipeline.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw SidecarUnavailable("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw SidecarUnavailable("fork() failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    const char* argv[] = {options_.python.c_str(), "-B", options_.script.c_str(), nullptr};
    ::execvp(argv[0], const_cast<char* const*>(argv));
    std::_Exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

void SidecarClient::stop() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string SidecarClient::read_line() {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw SidecarUnavailable("sidecar closed its output stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string SidecarClient::roundtrip(std::string_view request_line) {
  if (to_child_ < 0) throw SidecarUnavailable("sidecar is not running");
  std::string line(request_line);
  line.push_back('\n');
  write_all(to_child_, line);
  return read_line();
}

namespace {

json call(SidecarClient& client, json request) {
  json response;
  const std::string raw = client.roundtrip(request.dump());
  try {
    response = json::parse(raw);
  } catch (const json::exception&) {
    throw SidecarUnavailable("malformed sidecar response: " + raw.substr(0, 200));
  }
  if (!response.is_object() || !response.contains("ok")) {
    throw SidecarUnavailable("malformed sidecar response: " + raw.substr(0, 200));
  }
  return response;
}

}  // namespace

ExecutionResult SidecarClient::run(std::string_view code, std::string_view stdin_text,
                                   const ExecutionLimits& limits) {
  json request = {{"id", next_id_++},
                  {"kind", "run"},
                  {"code", code},
                  {"stdin", stdin_text},
                  {"timeout", limits.timeout_s},
                  {"memory_cap", limits.memory_bytes}};
  const json response = call(*this, std::move(request));
  if (!response.at("ok").get<bool>()) {
    throw RuntimeFailure("sidecar rejected run request: " +
                         response.value("error", std::string("unknown error")));
  }
  const json& r = response.at("result");
  ExecutionResult result;
  result.stdout_text = r.at("stdout").get<std::string>();
  result.exit_status = r.at("exit_status").get<int>();
  result.wall_time = r.at("wall_time").get<double>();
  result.timed_out = r.at("timed_out").get<bool>();
  return result;
}

Disassembly SidecarClient::disassemble(std::string_view code) {
  json request = {{"id", next_id_++}, {"kind", "disassemble"}, {"code", code}};
  const json response = call(*this, std::move(request));
  Disassembly out;
  if (!response.at("ok").get<bool>()) {
    out.error = response.value("error", std::string("unknown error"));
    return out;
  }
  OpcodeSequence seq;
  for (const auto& op : response.at("result").at("ops")) {
    seq.ops.push_back(Opcode{op.at(0).get<int>(), op.at(1).get<std::string>()});
  }
  out.sequence = std::move(seq);
  return out;
}

std::string SidecarClient::interpreter_version() {
  if (!version_.empty()) return version_;
  json request = {{"id", next_id_++}, {"kind", "version"}};
  const json response = call(*this, std::move(request));
  if (!response.at("ok").get<bool>()) throw SidecarUnavailable("version request failed");
  const json& r = response.at("result");
  version_ = r.at("implementation").get<std::string>() + "-" + r.at("python").get<std::string>();
  return version_;
}

}  // namespace iojudge
