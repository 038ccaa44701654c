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

// Global, loss-based Shapley importances (SAGE) for tree ensembles, and
// pruning to the features that carry most of the positive importance.
//
// Hidden features are marginalized by averaging the model's probability over
// a fixed background sample; the loss is binary cross-entropy in nats.

#ifndef IOJUDGE_SAGE_HPP_
#define IOJUDGE_SAGE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iojudge/predictor.hpp"

namespace iojudge::sage {

struct FeatureImportance {
  std::string name;
  double value = 0.0;      // expected loss reduction, nats
  double std_error = 0.0;  // 0 for exact enumeration
};

struct SageReport {
  std::vector<FeatureImportance> features;  // catalog order
  int n_permutations = 0;
  int background_size = 0;
  int n_eval_rows = 0;
  std::uint64_t seed = 0;
  double base_loss = 0.0;  // every feature marginalized
  double full_loss = 0.0;  // every feature revealed

  /// Value descending, ties by name ascending.
  std::vector<FeatureImportance> ranked() const;
  double value_sum() const;
  std::string to_json() const;
  static SageReport from_json(std::string_view text);
  std::string markdown(std::size_t top_k) const;
};

struct SageOptions {
  int n_permutations = 512;
  int background_size = 128;
  int max_eval_rows = 0;  // 0 = every evaluation row
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Seeded sample of `size` rows (all rows if fewer) in input order.
std::vector<std::vector<double>> sample_background(const predictor::LabeledMatrix& rows, int size,
                                                   std::uint64_t seed);

/// Binary cross-entropy in nats with probabilities clipped to [1e-15, 1-1e-15].
double log_loss(double p, int label);

/// Mean over eval rows of the loss when only `revealed` features come from
/// the row and the rest are averaged over `background`. Straightforward
/// evaluation, one full model pass per background row.
double coalition_loss(const predictor::TreeEnsembleModel& model,
                      const predictor::LabeledMatrix& eval,
                      const std::vector<std::vector<double>>& background,
                      const std::vector<bool>& revealed);

/// Permutation-sampling estimator. Every permutation walks every evaluation
/// row; std_error is the spread of the per-permutation means / sqrt(P).
SageReport estimate_sage(const predictor::TreeEnsembleModel& model,
                         const predictor::LabeledMatrix& eval,
                         const std::vector<std::vector<double>>& background,
                         const SageOptions& options);

/// Exact Shapley values over all orderings (small feature counts only).
SageReport exact_sage(const predictor::TreeEnsembleModel& model, const predictor::LabeledMatrix& eval,
                      const std::vector<std::vector<double>>& background);

struct PrunedSubset {
  std::vector<std::string> retained;  // descending value
  double covered_mass = 0.0;
  double total_positive_mass = 0.0;
  double threshold = 0.95;
};

/// Shortest prefix of the positive features (value descending, name
/// ascending) whose cumulative value reaches threshold * total positive mass.
PrunedSubset prune_by_positive_mass(const SageReport& report, double threshold = 0.95);
PrunedSubset prune_by_positive_mass(const std::vector<FeatureImportance>& values,
                                    double threshold = 0.95);

struct Comparison {
  std::size_t n_features = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double full_auroc = 0.0;
  double pruned_auroc = 0.0;
  bool full_degenerate = false;
  PrunedSubset pruned;
  double retained_fraction = 0.0;
  SageReport sage;
  predictor::TreeEnsembleModel full_model;
  predictor::TreeEnsembleModel pruned_model;

  std::string to_json() const;  // summary only; models are written separately
};

/// SAGE for `full_model` on the held-out rows with a background drawn from
/// the training rows, pruning, and a model retrained on the retained columns.
/// Both models are scored on the held-out rows. When no feature has positive
/// importance the pruned model keeps no columns and predicts the base rate.
Comparison compare_on_split(const predictor::LabeledMatrix& train,
                            const predictor::LabeledMatrix& test,
                            const predictor::TreeEnsembleModel& full_model,
                            const predictor::Hyperparameters& hyper, double threshold,
                            const SageOptions& options);

/// Stratified 80/20 split, full model, SAGE on the held-out part with a
/// background drawn from the training part, pruning, and a retrained model on
/// the retained columns. Both models are scored on the held-out part.
Comparison compare_full_vs_pruned(const predictor::LabeledMatrix& matrix,
                                  const predictor::Hyperparameters& hyper, double threshold,
                                  const SageOptions& options, std::uint64_t split_seed);

}  // namespace iojudge::sage

#endif  // IOJUDGE_SAGE_HPP_
