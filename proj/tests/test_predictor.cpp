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

#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "iojudge/predictor.hpp"

using namespace iojudge;
using namespace iojudge::predictor;

namespace {

std::string row_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%06zu", i);
  return buf;
}

// Labels are the indicator of column 0 exceeding 0.3; other columns are noise.
LabeledMatrix threshold_data(std::size_t n, std::size_t cols, std::uint64_t seed) {
  Engine e(seed);
  LabeledMatrix m;
  for (std::size_t c = 0; c < cols; ++c) m.names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    for (std::size_t c = 0; c < cols; ++c) row.push_back(uniform01(e));
    m.y.push_back(row[0] > 0.3 ? 1 : 0);
    m.x.push_back(std::move(row));
    m.ids.push_back(row_id(i));
  }
  return m;
}

double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

Hyperparameters small_hyper(std::uint64_t seed) {
  Hyperparameters h;
  h.n_trees = 60;
  h.seed = seed;
  return h;
}

}  // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK(auroc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), InvalidArgument);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}), InvalidArgument);
}

TEST_CASE("auroc matches pairwise counting and ignores monotone transforms") {
  Engine e(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + static_cast<std::size_t>(uniform_below(e, 199));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_below(e, 12)) / 4.0;  // plenty of ties
      y[i] = static_cast<int>(uniform_below(e, 2));
    }
    y[0] = 1;
    y[1] = 0;
    const double a = auroc(s, y);
    CHECK(std::abs(a - brute_auroc(s, y)) <= 1e-9);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
    CHECK(auroc(t, y) == a);
  }
}

TEST_CASE("stratified split arithmetic") {
  LabeledMatrix m;
  m.names = {"a"};
  for (std::size_t i = 0; i < 100; ++i) {
    m.ids.push_back(row_id(i));
    m.x.push_back({static_cast<double>(i)});
    m.y.push_back(i < 60 ? 1 : 0);
  }
  auto [train, test] = stratified_split(m, 0.8, 5);
  auto positives = [](const LabeledMatrix& p) {
    int s = 0;
    for (int v : p.y) s += v;
    return s;
  };
  CHECK(train.rows() == 80);
  CHECK(positives(train) == 48);
  CHECK(positives(test) == 12);
  auto [train2, test2] = stratified_split(m, 0.8, 5);
  CHECK(train2.ids == train.ids);
  CHECK(test2.ids == test.ids);
  auto [train3, test3] = stratified_split(m, 0.8, 6);
  CHECK(train3.ids != train.ids);

  LabeledMatrix ten = m.take_rows({0, 1, 2, 3, 4, 95, 96, 97, 98, 99});
  auto [tr, te] = stratified_split(ten, 0.8, 1);
  CHECK(tr.rows() == 8);
  CHECK(positives(tr) == 4);
  CHECK(te.rows() == 2);
  CHECK(positives(te) == 1);

  LabeledMatrix single = m.take_rows({0, 1, 2});
  CHECK_THROWS_AS(stratified_split(single, 0.8, 1), InvalidArgument);
}

TEST_CASE("predict_proba closed forms") {
  TreeEnsembleModel empty;
  empty.feature_names = {"a", "b"};
  CHECK(predict_proba(empty, std::vector<double>{3, -1}) == 0.5);
  CHECK_THROWS_AS(predict_proba(empty, std::vector<double>{3}), InvalidArgument);
  CHECK_THROWS_AS(predict_proba(empty, {"b", "a"}, {{1, 2}}), InvalidArgument);

  TreeEnsembleModel one = empty;
  one.base_score = 0.25;
  one.learning_rate = 0.1;
  Tree leaf;
  leaf.feature = {-1};
  leaf.threshold = {0};
  leaf.left = {-1};
  leaf.right = {-1};
  leaf.value = {2.0};
  one.trees.push_back(leaf);
  const double expect = 1.0 / (1.0 + std::exp(-(0.25 + 0.1 * 2.0)));
  CHECK(std::abs(predict_proba(one, std::vector<double>{0, 0}) - expect) < 1e-15);

  const auto back = TreeEnsembleModel::from_json(one.to_json());
  CHECK(back.to_json() == one.to_json());
}

TEST_CASE("a thresholded feature is learned") {
  const auto m = threshold_data(1000, 5, 11);
  auto [train_m, test_m] = stratified_split(m, 0.8, 3);
  const auto model = train(train_m, small_hyper(1));
  CHECK_FALSE(model.degenerate);
  const auto scores = predict_proba(model, test_m.names, test_m.x);
  CHECK(auroc(scores, test_m.y) >= 0.99);
  // Training rows land on the right side of 0.5.
  int wrong = 0;
  for (std::size_t r = 0; r < train_m.rows(); ++r) {
    const double p = predict_proba(model, train_m.x[r]);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    if ((p > 0.5) != (train_m.y[r] == 1)) ++wrong;
  }
  CHECK(wrong == 0);
}

TEST_CASE("coin-flip labels give chance-level AUROC") {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = threshold_data(1000, 5, 1000 + seed);
    Engine e(derive_seed(seed, "coin"));
    for (auto& label : m.y) label = static_cast<int>(uniform_below(e, 2));
    auto [train_m, test_m] = stratified_split(m, 0.8, seed);
    const auto model = train(train_m, small_hyper(seed));
    sum += auroc(predict_proba(model, test_m.names, test_m.x), test_m.y);
  }
  const double mean = sum / 10;
  MESSAGE("mean coin-flip AUROC " << mean);
  CHECK(mean >= 0.45);
  CHECK(mean <= 0.55);
}

TEST_CASE("training ignores row order and is reproducible") {
  const auto m = threshold_data(300, 4, 21);
  std::vector<std::size_t> perm(m.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  Engine e(4);
  shuffle(perm, e);
  const auto shuffled = m.take_rows(perm);
  const auto a = train(m, small_hyper(8));
  const auto b = train(shuffled, small_hyper(8));
  const auto c = train(m, small_hyper(8));
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json() == c.to_json());
  CHECK(a.to_json() != train(m, small_hyper(9)).to_json());
}

TEST_CASE("constant features fall back to the base rate") {
  LabeledMatrix m;
  m.names = {"k1", "k2"};
  for (std::size_t i = 0; i < 50; ++i) {
    m.ids.push_back(row_id(i));
    m.x.push_back({1.0, 2.0});
    m.y.push_back(i < 10 ? 1 : 0);
  }
  const auto model = train(m, Hyperparameters{});
  CHECK(model.degenerate);
  CHECK(model.trees.empty());
  CHECK(std::abs(predict_proba(model, m.x[0]) - 0.2) < 1e-12);
}

TEST_CASE("training preconditions") {
  auto m = threshold_data(30, 2, 1);
  for (auto& v : m.y) v = 1;
  CHECK_THROWS_AS(train(m, Hyperparameters{}), InvalidArgument);
  auto dup = threshold_data(30, 2, 1);
  dup.ids[1] = dup.ids[0];
  CHECK_THROWS_AS(train(dup, Hyperparameters{}), InvalidArgument);
  LabeledMatrix empty;
  CHECK_THROWS_AS(train(empty, Hyperparameters{}), InvalidArgument);
}

TEST_CASE("labeled CSV round trip and join") {
  const auto m = threshold_data(7, 3, 2);
  const auto back = labeled_from_csv(labeled_to_csv(m));
  CHECK(back.names == m.names);
  CHECK(back.ids == m.ids);
  CHECK(back.y == m.y);
  CHECK(back.x == m.x);

  metrics::FeatureMatrix fm;
  fm.names = {"a"};
  fm.ids = {"t1", "t2", "t3"};
  fm.rows = {{1}, {2}, {3}};
  judge::JudgmentRecord r1;
  r1.triple_id = "t3";
  r1.success = 1;
  judge::JudgmentRecord r2;
  r2.triple_id = "t1";
  const auto joined = join_labels(fm, {r1, r2});
  CHECK(joined.ids == std::vector<std::string>{"t1", "t3"});
  CHECK(joined.y == std::vector<int>{0, 1});
}
