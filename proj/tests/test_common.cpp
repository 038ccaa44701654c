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

#include <charconv>
#include <cmath>
#include <set>

#include "doctest.h"
#include "iojudge/common.hpp"
#include "support.hpp"

using namespace iojudge;

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("engine is the standard mt19937_64") {
  // The standard fixes the 10000th output of a default-seeded engine.
  Engine e;
  e.discard(9999);
  CHECK(e() == 9981545732273789042ULL);
}

TEST_CASE("bounded draws stay in range and cover it") {
  Engine e(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = uniform_below(e, 6);
    REQUIRE(v < 6);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);
  for (int i = 0; i < 1000; ++i) {
    const auto v = uniform_int(e, -3, 3);
    REQUIRE(v >= -3);
    REQUIRE(v <= 3);
    const double u = uniform01(e);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK_THROWS_AS(uniform_below(e, 0), InvalidArgument);
  CHECK_THROWS_AS(uniform_int(e, 2, 1), InvalidArgument);
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, std::uint64_t{0}) != derive_seed(1, std::uint64_t{1}));
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("utf8 length counts code points") {
  CHECK(utf8_length("") == 0);
  CHECK(utf8_length("abc") == 3);
  CHECK(utf8_length("h\xC3\xA9llo") == 5);         // é
  CHECK(utf8_length("\xF0\x9F\x98\x80") == 1);     // emoji
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 123456789.125}) {
    const std::string s = format_double(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("split keeps empty fields") {
  const auto parts = split("a,,b,", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[1].empty());
  CHECK(parts[3].empty());
}

TEST_CASE("atomic write replaces file contents") {
  const auto dir = testing::scratch_dir("common");
  const auto path = dir / "f.txt";
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  CHECK(read_file(path) == "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  std::filesystem::remove_all(dir);
}
