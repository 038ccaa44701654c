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

#include "iojudge/sage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace iojudge::sage {

using predictor::LabeledMatrix;
using predictor::TreeEnsembleModel;

std::vector<FeatureImportance> SageReport::ranked() const {
  auto out = features;
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.name < b.name;
  });
  return out;
}

double SageReport::value_sum() const {
  double s = 0.0;
  for (const auto& f : features) s += f.value;
  return s;
}

std::string SageReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "iojudge-sage";
  j["version"] = 1;
  j["n_permutations"] = n_permutations;
  j["background_size"] = background_size;
  j["n_eval_rows"] = n_eval_rows;
  j["seed"] = seed;
  j["base_loss"] = base_loss;
  j["full_loss"] = full_loss;
  auto fs = nlohmann::ordered_json::array();
  for (const auto& f : features) {
    fs.push_back({{"name", f.name}, {"value", f.value}, {"std_error", f.std_error}});
  }
  j["features"] = std::move(fs);
  return j.dump(2) + "\n";
}

SageReport SageReport::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "iojudge-sage" || j.value("version", 0) != 1) {
    throw InvalidArgument("not an iojudge-sage v1 report");
  }
  SageReport r;
  r.n_permutations = j.at("n_permutations").get<int>();
  r.background_size = j.at("background_size").get<int>();
  r.n_eval_rows = j.at("n_eval_rows").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.base_loss = j.at("base_loss").get<double>();
  r.full_loss = j.at("full_loss").get<double>();
  for (const auto& f : j.at("features")) {
    r.features.push_back({f.at("name").get<std::string>(), f.at("value").get<double>(),
                          f.at("std_error").get<double>()});
  }
  return r;
}

std::string SageReport::markdown(std::size_t top_k) const {
  std::string out = "| Rank | Feature | SAGE value (nats) | Std. error |\n|---:|---|---:|---:|\n";
  const auto r = ranked();
  char buf[64];
  for (std::size_t i = 0; i < r.size() && i < top_k; ++i) {
    out += "| " + std::to_string(i + 1) + " | `" + r[i].name + "` | ";
    std::snprintf(buf, sizeof buf, "%.6f", r[i].value);
    out += buf;
    out += " | ";
    std::snprintf(buf, sizeof buf, "%.6f", r[i].std_error);
    out += buf;
    out += " |\n";
  }
  return out;
}

std::vector<std::vector<double>> sample_background(const LabeledMatrix& rows, int size,
                                                   std::uint64_t seed) {
  if (size <= 0) throw InvalidArgument("background size must be positive");
  if (rows.rows() == 0) throw InvalidArgument("background source has no rows");
  std::vector<std::size_t> idx(rows.rows());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > static_cast<std::size_t>(size)) {
    Engine engine(derive_seed(seed, "sage-background"));
    shuffle(idx, engine);
    idx.resize(static_cast<std::size_t>(size));
    std::sort(idx.begin(), idx.end());
  }
  std::vector<std::vector<double>> out;
  for (auto i : idx) out.push_back(rows.x[i]);
  return out;
}

double log_loss(double p, int label) {
  const double q = std::clamp(p, 1e-15, 1.0 - 1e-15);
  return label == 1 ? -std::log(q) : -std::log1p(-q);
}

namespace {

void check_inputs(const TreeEnsembleModel& model, const LabeledMatrix& eval,
                  const std::vector<std::vector<double>>& background) {
  eval.validate();
  if (eval.names != model.feature_names) {
    throw InvalidArgument("evaluation rows do not use the model's feature catalog");
  }
  if (eval.rows() == 0) throw InvalidArgument("no evaluation rows");
  if (background.empty()) throw InvalidArgument("background set is empty");
  for (const auto& b : background) {
    if (b.size() != model.feature_names.size()) {
      throw InvalidArgument("background row does not match the model's feature catalog");
    }
  }
}

double mean_probability_loss(const std::vector<double>& probs, int label) {
  double s = 0.0;
  for (double p : probs) s += p;
  return log_loss(s / static_cast<double>(probs.size()), label);
}

// Incremental evaluation of permutations, one evaluation row at a time.
//
// For a (row, background) pair, the hybrid input takes revealed features from
// the row and the rest from the background row. A tree's hybrid path changes
// only when a feature is revealed at a node on the current path where the row
// and the background row branch differently. Such nodes are kept in per-feature
// watch lists; when one fires and is still on the path (an O(1) Euler-tour
// ancestor test), only the subtree below it is re-walked.
class PermutationRunner {
 public:
  PermutationRunner(const TreeEnsembleModel& model, const LabeledMatrix& eval,
                    const std::vector<std::vector<double>>& background)
      : model_(model), eval_(eval), background_(background), d_(model.feature_names.size()) {
    const std::size_t B = background.size();
    const std::size_t T = model.trees.size();
    bg_leaf_.assign(B * T, 0);
    bg_margin_.assign(B, model.base_score);
    for (std::size_t b = 0; b < B; ++b) {
      double sum = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const int leaf = model.trees[t].leaf(background[b]);
        bg_leaf_[b * T + t] = leaf;
        sum += model.trees[t].value[static_cast<std::size_t>(leaf)];
      }
      bg_margin_[b] = model.base_score + model.learning_rate * sum;
    }
    tin_.resize(T);
    tout_.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& tree = model.trees[t];
      tin_[t].assign(tree.size(), 0);
      tout_[t].assign(tree.size(), 0);
      int clock = 0;
      std::vector<std::pair<int, bool>> stack{{0, false}};
      while (!stack.empty()) {
        auto [n, done] = stack.back();
        stack.pop_back();
        const auto u = static_cast<std::size_t>(n);
        if (done) {
          tout_[t][u] = clock - 1;
          continue;
        }
        tin_[t][u] = clock++;
        stack.emplace_back(n, true);
        if (tree.feature[u] >= 0) {
          stack.emplace_back(tree.right[u], false);
          stack.emplace_back(tree.left[u], false);
        }
      }
    }
  }

  /// Adds, for every permutation k, the loss drop credited to each feature on
  /// evaluation row i to totals[k]. Permutations in [k_begin, k_end).
  void run_row(std::size_t i, const std::vector<std::vector<std::size_t>>& orders,
               std::size_t k_begin, std::size_t k_end,
               std::vector<std::vector<double>>& totals) const {
    const std::size_t B = background_.size();
    const std::size_t T = model_.trees.size();
    const auto& x = eval_.x[i];
    const int y = eval_.y[i];

    std::vector<char> revealed(d_, 0);
    WatchLists initial(d_);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < T; ++t) register_below(x, b, t, 0, revealed, initial);
    }
    std::vector<double> bg_prob(B);
    for (std::size_t b = 0; b < B; ++b) bg_prob[b] = predictor::sigmoid(bg_margin_[b]);
    const double start_loss = mean_probability_loss(bg_prob, y);

    WatchLists watch(d_);
    std::vector<int> leaf(bg_leaf_.size());
    std::vector<double> margin(B), prob(B);
    for (std::size_t k = k_begin; k < k_end; ++k) {
      std::fill(revealed.begin(), revealed.end(), 0);
      for (std::size_t f = 0; f < d_; ++f) watch[f].assign(initial[f].begin(), initial[f].end());
      std::copy(bg_leaf_.begin(), bg_leaf_.end(), leaf.begin());
      std::copy(bg_margin_.begin(), bg_margin_.end(), margin.begin());
      std::copy(bg_prob.begin(), bg_prob.end(), prob.begin());
      double before = start_loss;
      auto& out = totals[k];
      for (std::size_t j : orders[k]) {
        revealed[j] = 1;
        bool dirty = false;
        // New entries only go to unrevealed features, never to watch[j].
        for (const Entry& e : watch[j]) {
          const auto& tree = model_.trees[e.t];
          int& cur = leaf[e.b * T + e.t];
          const auto u = static_cast<std::size_t>(e.node);
          const auto& tin = tin_[e.t];
          const auto c = static_cast<std::size_t>(cur);
          if (tin[u] > tin[c] || tin[c] > tout_[e.t][u]) continue;  // no longer on the path
          // The decision at this node now follows the row.
          const int child = x[j] < tree.threshold[u] ? tree.left[u] : tree.right[u];
          const int now = register_below(x, e.b, e.t, child, revealed, watch);
          margin[e.b] += model_.learning_rate * (tree.value[static_cast<std::size_t>(now)] -
                                                 tree.value[c]);
          prob[e.b] = predictor::sigmoid(margin[e.b]);
          cur = now;
          dirty = true;
        }
        const double after = dirty ? mean_probability_loss(prob, y) : before;
        out[j] += before - after;
        before = after;
      }
    }
  }

 private:
  struct Entry {
    std::uint32_t b;
    std::uint32_t t;
    std::int32_t node;
  };
  using WatchLists = std::vector<std::vector<Entry>>;

  // Walks the hybrid path of tree t from `node` and returns the leaf,
  // recording nodes whose feature is hidden and where the row and the
  // background row disagree.
  int register_below(const std::vector<double>& x, std::size_t b, std::size_t t, int node,
                     const std::vector<char>& revealed, WatchLists& watch) const {
    const auto& tree = model_.trees[t];
    const auto& bg = background_[b];
    auto n = static_cast<std::size_t>(node);
    while (tree.feature[n] >= 0) {
      const auto f = static_cast<std::size_t>(tree.feature[n]);
      const double thr = tree.threshold[n];
      const bool bg_left = bg[f] < thr;
      const bool x_left = x[f] < thr;
      bool go_left;
      if (revealed[f]) {
        go_left = x_left;
      } else {
        go_left = bg_left;
        if (x_left != bg_left) {
          watch[f].push_back(Entry{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(t),
                                   static_cast<std::int32_t>(n)});
        }
      }
      n = static_cast<std::size_t>(go_left ? tree.left[n] : tree.right[n]);
    }
    return static_cast<int>(n);
  }

  const TreeEnsembleModel& model_;
  const LabeledMatrix& eval_;
  const std::vector<std::vector<double>>& background_;
  std::size_t d_;
  std::vector<int> bg_leaf_;  // [background][tree]
  std::vector<double> bg_margin_;
  std::vector<std::vector<int>> tin_, tout_;  // Euler-tour intervals per tree
};

}  // namespace

double coalition_loss(const TreeEnsembleModel& model, const LabeledMatrix& eval,
                      const std::vector<std::vector<double>>& background,
                      const std::vector<bool>& revealed) {
  check_inputs(model, eval, background);
  if (revealed.size() != model.feature_names.size()) throw InvalidArgument("revealed mask size");
  double total = 0.0;
  std::vector<double> probs(background.size());
  for (std::size_t i = 0; i < eval.rows(); ++i) {
    for (std::size_t b = 0; b < background.size(); ++b) {
      std::vector<double> z = background[b];
      for (std::size_t f = 0; f < z.size(); ++f) {
        if (revealed[f]) z[f] = eval.x[i][f];
      }
      probs[b] = predictor::predict_proba(model, z);
    }
    total += mean_probability_loss(probs, eval.y[i]);
  }
  return total / static_cast<double>(eval.rows());
}

SageReport estimate_sage(const TreeEnsembleModel& model, const LabeledMatrix& eval_in,
                         const std::vector<std::vector<double>>& background,
                         const SageOptions& options) {
  check_inputs(model, eval_in, background);
  if (options.n_permutations < 2) throw InvalidArgument("n_permutations must be at least 2");

  LabeledMatrix eval = eval_in;
  if (options.max_eval_rows > 0 && eval.rows() > static_cast<std::size_t>(options.max_eval_rows)) {
    std::vector<std::size_t> idx(eval.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Engine engine(derive_seed(options.seed, "sage-eval-rows"));
    shuffle(idx, engine);
    idx.resize(static_cast<std::size_t>(options.max_eval_rows));
    std::sort(idx.begin(), idx.end());
    eval = eval_in.take_rows(idx);
  }

  const std::size_t d = model.feature_names.size();
  const auto P = static_cast<std::size_t>(options.n_permutations);
  std::vector<std::vector<std::size_t>> orders(P);
  for (std::size_t k = 0; k < P; ++k) {
    orders[k].resize(d);
    std::iota(orders[k].begin(), orders[k].end(), 0);
    Engine engine(derive_seed(options.seed, static_cast<std::uint64_t>(k)));
    shuffle(orders[k], engine);
  }
  const PermutationRunner runner(model, eval, background);
  // per_perm[k][j]: summed over rows, in row order, for every thread count.
  std::vector<std::vector<double>> per_perm(P, std::vector<double>(d, 0.0));
  const auto threads = static_cast<std::size_t>(std::max(1, options.threads));
  for (std::size_t i = 0; i < eval.rows(); ++i) {
    if (threads == 1) {
      runner.run_row(i, orders, 0, P, per_perm);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] { runner.run_row(i, orders, P * w / threads, P * (w + 1) / threads, per_perm); });
      }
    }
  }
  for (auto& v : per_perm) {
    for (auto& x : v) x /= static_cast<double>(eval.rows());
  }

  SageReport report;
  report.n_permutations = options.n_permutations;
  report.background_size = static_cast<int>(background.size());
  report.n_eval_rows = static_cast<int>(eval.rows());
  report.seed = options.seed;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < P; ++k) mean += per_perm[k][j];
    mean /= static_cast<double>(P);
    double ss = 0.0;
    for (std::size_t k = 0; k < P; ++k) ss += (per_perm[k][j] - mean) * (per_perm[k][j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(P - 1));
    report.features.push_back({model.feature_names[j], mean, sd / std::sqrt(static_cast<double>(P))});
  }
  report.base_loss = coalition_loss(model, eval, background, std::vector<bool>(d, false));
  report.full_loss = coalition_loss(model, eval, background, std::vector<bool>(d, true));
  return report;
}

SageReport exact_sage(const TreeEnsembleModel& model, const LabeledMatrix& eval,
                      const std::vector<std::vector<double>>& background) {
  check_inputs(model, eval, background);
  const std::size_t d = model.feature_names.size();
  if (d > 12) throw InvalidArgument("exact enumeration is limited to 12 features");
  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> v(subsets);
  for (std::size_t s = 0; s < subsets; ++s) {
    std::vector<bool> mask(d);
    for (std::size_t f = 0; f < d; ++f) mask[f] = (s >> f) & 1u;
    v[s] = coalition_loss(model, eval, background, mask);
  }
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t k = 1; k <= d; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);

  SageReport report;
  report.n_eval_rows = static_cast<int>(eval.rows());
  report.background_size = static_cast<int>(background.size());
  for (std::size_t j = 0; j < d; ++j) {
    double phi = 0.0;
    for (std::size_t s = 0; s < subsets; ++s) {
      if ((s >> j) & 1u) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double w = fact[size] * fact[d - size - 1] / fact[d];
      phi += w * (v[s] - v[s | (std::size_t{1} << j)]);
    }
    report.features.push_back({model.feature_names[j], phi, 0.0});
  }
  report.base_loss = v[0];
  report.full_loss = v[subsets - 1];
  return report;
}

PrunedSubset prune_by_positive_mass(const std::vector<FeatureImportance>& values, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must be in (0, 1]");
  std::vector<FeatureImportance> pos;
  double best = -INFINITY;
  for (const auto& f : values) {
    best = std::max(best, f.value);
    if (f.value > 0.0) pos.push_back(f);
  }
  if (pos.empty()) {
    throw InvalidArgument("no feature has a positive SAGE value (largest value " +
                          format_double(best) + " over " + std::to_string(values.size()) +
                          " features); nothing to retain");
  }
  std::stable_sort(pos.begin(), pos.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.name < b.name;
  });
  PrunedSubset out;
  out.threshold = threshold;
  for (const auto& f : pos) out.total_positive_mass += f.value;
  // A relative tolerance absorbs rounding in the running sums.
  const double target = threshold * out.total_positive_mass * (1.0 - 1e-12);
  for (const auto& f : pos) {
    out.retained.push_back(f.name);
    out.covered_mass += f.value;
    if (out.covered_mass >= target) break;
  }
  return out;
}

PrunedSubset prune_by_positive_mass(const SageReport& report, double threshold) {
  return prune_by_positive_mass(report.features, threshold);
}

std::string Comparison::to_json() const {
  nlohmann::ordered_json j;
  j["n_features"] = n_features;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["full_auroc"] = full_auroc;
  j["pruned_auroc"] = pruned_auroc;
  j["full_model_degenerate"] = full_degenerate;
  j["threshold"] = pruned.threshold;
  j["retained"] = pruned.retained;
  j["retained_count"] = pruned.retained.size();
  j["retained_fraction"] = retained_fraction;
  j["covered_mass"] = pruned.covered_mass;
  j["total_positive_mass"] = pruned.total_positive_mass;
  return j.dump(2) + "\n";
}

Comparison compare_on_split(const LabeledMatrix& train_m, const LabeledMatrix& test_m,
                            const TreeEnsembleModel& full_model, const predictor::Hyperparameters& hyper,
                            double threshold, const SageOptions& options) {
  Comparison c;
  c.n_features = full_model.feature_names.size();
  c.n_train = train_m.rows();
  c.n_test = test_m.rows();
  c.full_model = full_model;
  c.full_degenerate = full_model.degenerate;
  c.full_auroc = predictor::auroc(predictor::predict_proba(full_model, test_m.names, test_m.x), test_m.y);

  const auto background = sample_background(train_m, options.background_size, options.seed);
  c.sage = estimate_sage(full_model, test_m, background, options);
  const bool any_positive = std::any_of(c.sage.features.begin(), c.sage.features.end(),
                                        [](const FeatureImportance& f) { return f.value > 0.0; });
  if (any_positive) {
    c.pruned = prune_by_positive_mass(c.sage, threshold);
  } else {
    c.pruned.threshold = threshold;
  }
  c.retained_fraction = c.n_features == 0 ? 0.0
                                          : static_cast<double>(c.pruned.retained.size()) /
                                                static_cast<double>(c.n_features);
  const auto cols = train_m.column_indices(c.pruned.retained);
  const auto pruned_train = train_m.take_columns(cols);
  const auto pruned_test = test_m.take_columns(cols);
  c.pruned_model = predictor::train(pruned_train, hyper);
  c.pruned_auroc = predictor::auroc(
      predictor::predict_proba(c.pruned_model, pruned_test.names, pruned_test.x), pruned_test.y);
  return c;
}

Comparison compare_full_vs_pruned(const LabeledMatrix& matrix, const predictor::Hyperparameters& hyper,
                                  double threshold, const SageOptions& options,
                                  std::uint64_t split_seed) {
  auto [train_m, test_m] = predictor::stratified_split(matrix, 0.8, split_seed);
  const auto full = predictor::train(train_m, hyper);
  return compare_on_split(train_m, test_m, full, hyper, threshold, options);
}

}  // namespace iojudge::sage
