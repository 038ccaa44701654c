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

#ifndef IOJUDGE_COMMON_HPP_
#define IOJUDGE_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iojudge {

/// Raised when a caller violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for environment failures (I/O, subprocess, network).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Stable 64-bit FNV-1a; identical on every platform.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a stream label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// ---------------------------------------------------------------------------
// Random numbers
//
// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so the bounded draws below are written out to keep
// every stream byte-identical across standard libraries.

using Engine = std::mt19937_64;

/// Uniform integer in [0, n) by rejection sampling on the raw 64-bit output.
std::uint64_t uniform_below(Engine& engine, std::uint64_t n);

/// Uniform integer in [lo, hi] (inclusive).
std::int64_t uniform_int(Engine& engine, std::int64_t lo, std::int64_t hi);

/// Uniform double in [0, 1) built from the top 53 bits.
double uniform01(Engine& engine);

/// Standard normal via Box-Muller (two uniform01 draws per value).
double standard_normal(Engine& engine);

/// Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void shuffle(std::vector<T>& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

// ---------------------------------------------------------------------------
// Text

/// Number of Unicode code points in UTF-8 text (continuation bytes skipped).
std::size_t utf8_length(std::string_view text);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

std::vector<std::string> split(std::string_view text, char sep);

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace iojudge

#endif  // IOJUDGE_COMMON_HPP_
