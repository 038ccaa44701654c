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

// Gradient-boosted trees on logistic loss, and rank-based AUROC.

#ifndef IOJUDGE_PREDICTOR_HPP_
#define IOJUDGE_PREDICTOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iojudge/judge.hpp"
#include "iojudge/metrics.hpp"

namespace iojudge::predictor {

/// Feature rows with binary success labels. Row ids must be unique.
struct LabeledMatrix {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> x;
  std::vector<int> y;

  std::size_t rows() const { return x.size(); }
  std::size_t cols() const { return names.size(); }
  void validate() const;  // shape, labels in {0,1}, unique ids, finite values
  LabeledMatrix take_rows(const std::vector<std::size_t>& rows) const;
  LabeledMatrix take_columns(const std::vector<std::size_t>& cols) const;
  std::vector<std::size_t> column_indices(const std::vector<std::string>& wanted) const;
};

/// Joins a feature matrix with judgment records on triple id; rows without a
/// record are dropped.
LabeledMatrix join_labels(const metrics::FeatureMatrix& features,
                          const std::vector<judge::JudgmentRecord>& records);

/// CSV with header `triple_id,<names...>,success`.
std::string labeled_to_csv(const LabeledMatrix& m);
LabeledMatrix labeled_from_csv(std::string_view text);

/// Per class: round(ratio * n_c) rows to train (at least one row on each side
/// when the class has two or more), chosen by a seeded shuffle. Each part
/// keeps the input row order.
std::pair<LabeledMatrix, LabeledMatrix> stratified_split(const LabeledMatrix& m, double ratio,
                                                         std::uint64_t seed);

struct Hyperparameters {
  int n_trees = 300;
  int max_depth = 6;
  double learning_rate = 0.1;
  double subsample = 0.8;
  int min_samples_leaf = 20;
  double lambda = 1.0;  // L2 penalty on leaf values
  std::uint64_t seed = 0;
};

/// Flat binary tree; a node is a leaf when feature < 0. Rows with
/// x[feature] < threshold go left.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  std::size_t size() const { return feature.size(); }
  double predict(std::span<const double> row) const;
  /// Index of the leaf reached by `row`.
  int leaf(std::span<const double> row) const;
};

struct TreeEnsembleModel {
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;  // log-odds
  bool degenerate = false;  // no usable split: predicts the base rate
  Hyperparameters hyper;

  double margin(std::span<const double> row) const;
  std::string to_json() const;
  static TreeEnsembleModel from_json(std::string_view text);
};

double sigmoid(double z);

/// Rows are processed in id order, so the model does not depend on the order
/// of the input rows.
TreeEnsembleModel train(const LabeledMatrix& train, const Hyperparameters& hyper);

/// logistic(base + lr * sum of tree outputs). Throws on a length mismatch.
double predict_proba(const TreeEnsembleModel& model, std::span<const double> row);
/// Also checks that `names` is the model's feature list.
std::vector<double> predict_proba(const TreeEnsembleModel& model,
                                  const std::vector<std::string>& names,
                                  const std::vector<std::vector<double>>& rows);

/// Mann-Whitney AUROC with average ranks for ties.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace iojudge::predictor

#endif  // IOJUDGE_PREDICTOR_HPP_
