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

#include "iojudge/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace iojudge::predictor {

// ---------------------------------------------------------------------------
// LabeledMatrix

void LabeledMatrix::validate() const {
  if (x.size() != y.size() || x.size() != ids.size()) {
    throw InvalidArgument("labeled matrix: ids, rows and labels differ in length");
  }
  std::unordered_set<std::string_view> seen;
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r].size() != names.size()) throw InvalidArgument("labeled matrix: ragged row " + ids[r]);
    if (y[r] != 0 && y[r] != 1) throw InvalidArgument("labeled matrix: label must be 0 or 1");
    if (!seen.insert(ids[r]).second) throw InvalidArgument("labeled matrix: duplicate id " + ids[r]);
    for (double v : x[r]) {
      if (!std::isfinite(v)) throw InvalidArgument("labeled matrix: non-finite value in " + ids[r]);
    }
  }
}

LabeledMatrix LabeledMatrix::take_rows(const std::vector<std::size_t>& rows) const {
  LabeledMatrix out;
  out.names = names;
  for (auto r : rows) {
    out.ids.push_back(ids.at(r));
    out.x.push_back(x.at(r));
    out.y.push_back(y.at(r));
  }
  return out;
}

LabeledMatrix LabeledMatrix::take_columns(const std::vector<std::size_t>& cols) const {
  LabeledMatrix out;
  out.ids = ids;
  out.y = y;
  for (auto c : cols) out.names.push_back(names.at(c));
  out.x.reserve(x.size());
  for (const auto& row : x) {
    std::vector<double> r;
    r.reserve(cols.size());
    for (auto c : cols) r.push_back(row.at(c));
    out.x.push_back(std::move(r));
  }
  return out;
}

std::vector<std::size_t> LabeledMatrix::column_indices(const std::vector<std::string>& wanted) const {
  std::vector<std::size_t> out;
  for (const auto& w : wanted) {
    const auto it = std::find(names.begin(), names.end(), w);
    if (it == names.end()) throw InvalidArgument("no column named " + w);
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return out;
}

LabeledMatrix join_labels(const metrics::FeatureMatrix& features,
                          const std::vector<judge::JudgmentRecord>& records) {
  std::unordered_map<std::string, int> success;
  for (const auto& r : records) {
    const auto [it, fresh] = success.emplace(r.triple_id, r.success);
    if (!fresh && it->second != r.success) {
      throw InvalidArgument("conflicting records for triple " + r.triple_id);
    }
  }
  LabeledMatrix m;
  m.names = features.names;
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    const auto it = success.find(features.ids[i]);
    if (it == success.end()) continue;
    m.ids.push_back(features.ids[i]);
    m.x.push_back(features.rows[i]);
    m.y.push_back(it->second);
  }
  return m;
}

std::string labeled_to_csv(const LabeledMatrix& m) {
  metrics::FeatureMatrix fm;
  fm.names = m.names;
  fm.names.emplace_back("success");
  fm.ids = m.ids;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.x[r];
    row.push_back(m.y[r]);
    fm.rows.push_back(std::move(row));
  }
  return metrics::matrix_to_csv(fm);
}

LabeledMatrix labeled_from_csv(std::string_view text) {
  auto fm = metrics::matrix_from_csv(text);
  if (fm.names.empty() || fm.names.back() != "success") {
    throw InvalidArgument("labeled CSV must end with a success column");
  }
  LabeledMatrix m;
  m.names.assign(fm.names.begin(), fm.names.end() - 1);
  m.ids = std::move(fm.ids);
  for (auto& row : fm.rows) {
    const double label = row.back();
    if (label != 0.0 && label != 1.0) throw InvalidArgument("success must be 0 or 1");
    row.pop_back();
    m.x.push_back(std::move(row));
    m.y.push_back(static_cast<int>(label));
  }
  m.validate();
  return m;
}

std::pair<LabeledMatrix, LabeledMatrix> stratified_split(const LabeledMatrix& m, double ratio,
                                                         std::uint64_t seed) {
  m.validate();
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must be in (0, 1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < m.rows(); ++r) by_class[m.y[r]].push_back(r);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw InvalidArgument("stratified_split needs both classes");
  }
  std::vector<std::size_t> train_rows, test_rows;
  for (int c = 0; c < 2; ++c) {
    auto rows = by_class[c];
    Engine engine(derive_seed(seed, "stratified-split-" + std::to_string(c)));
    shuffle(rows, engine);
    const auto n = static_cast<long>(rows.size());
    long n_train = std::lround(ratio * static_cast<double>(n));
    if (n >= 2) n_train = std::clamp(n_train, 1L, n - 1);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
    test_rows.insert(test_rows.end(), rows.begin() + n_train, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {m.take_rows(train_rows), m.take_rows(test_rows)};
}

// ---------------------------------------------------------------------------
// Trees

int Tree::leaf(std::span<const double> row) const {
  int n = 0;
  while (feature[static_cast<std::size_t>(n)] >= 0) {
    const auto i = static_cast<std::size_t>(n);
    n = row[static_cast<std::size_t>(feature[i])] < threshold[i] ? left[i] : right[i];
  }
  return n;
}

double Tree::predict(std::span<const double> row) const {
  return value[static_cast<std::size_t>(leaf(row))];
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double TreeEnsembleModel::margin(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(row);
  return base_score + learning_rate * sum;
}

double predict_proba(const TreeEnsembleModel& model, std::span<const double> row) {
  if (row.size() != model.feature_names.size()) {
    throw InvalidArgument("feature vector has " + std::to_string(row.size()) +
                          " values, model expects " + std::to_string(model.feature_names.size()));
  }
  return sigmoid(model.margin(row));
}

std::vector<double> predict_proba(const TreeEnsembleModel& model,
                                  const std::vector<std::string>& names,
                                  const std::vector<std::vector<double>>& rows) {
  if (names != model.feature_names) {
    throw InvalidArgument("feature catalog does not match the model's catalog");
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict_proba(model, r));
  return out;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree level by level with exact greedy splits. `node_of[r]` holds
// the frontier node of an in-sample row, or -1.
Tree grow_tree(const LabeledMatrix& m, const std::vector<std::vector<std::uint32_t>>& order,
               const std::vector<double>& g, const std::vector<double>& h,
               std::vector<int> node_of, const Hyperparameters& hp) {
  Tree tree;
  auto new_node = [&tree] {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(0.0);
    return static_cast<int>(tree.feature.size() - 1);
  };
  new_node();
  std::vector<int> frontier{0};
  const double lambda = hp.lambda;
  const auto min_leaf = static_cast<std::size_t>(std::max(1, hp.min_samples_leaf));

  for (int depth = 0; !frontier.empty(); ++depth) {
    // Local index of each frontier node.
    std::unordered_map<int, std::size_t> local;
    for (std::size_t k = 0; k < frontier.size(); ++k) local[frontier[k]] = k;
    const std::size_t K = frontier.size();
    std::vector<double> G(K, 0.0), H(K, 0.0);
    std::vector<std::size_t> C(K, 0);
    std::vector<int> slot(m.rows(), -1);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (node_of[r] < 0) continue;
      const auto k = local.at(node_of[r]);
      slot[r] = static_cast<int>(k);
      G[k] += g[r];
      H[k] += h[r];
      ++C[k];
    }
    std::vector<SplitCandidate> best(K);
    if (depth < hp.max_depth) {
      std::vector<double> GL(K), HL(K), last(K);
      std::vector<std::size_t> CL(K);
      for (std::size_t f = 0; f < m.cols(); ++f) {
        std::fill(GL.begin(), GL.end(), 0.0);
        std::fill(HL.begin(), HL.end(), 0.0);
        std::fill(CL.begin(), CL.end(), 0);
        for (std::uint32_t r : order[f]) {
          const int s = slot[r];
          if (s < 0) continue;
          const auto k = static_cast<std::size_t>(s);
          const double v = m.x[r][f];
          if (CL[k] >= min_leaf && C[k] - CL[k] >= min_leaf && v > last[k]) {
            const double gr = G[k] - GL[k];
            const double hr = H[k] - HL[k];
            const double gain = GL[k] * GL[k] / (HL[k] + lambda) + gr * gr / (hr + lambda) -
                                G[k] * G[k] / (H[k] + lambda);
            if (gain > best[k].gain + 1e-12) {
              double thr = 0.5 * (last[k] + v);
              if (!(thr > last[k])) thr = v;
              best[k] = SplitCandidate{gain, static_cast<int>(f), thr};
            }
          }
          GL[k] += g[r];
          HL[k] += h[r];
          ++CL[k];
          last[k] = v;
        }
      }
    }
    std::vector<int> next;
    std::vector<std::pair<int, int>> children(K, {-1, -1});
    for (std::size_t k = 0; k < K; ++k) {
      const auto n = static_cast<std::size_t>(frontier[k]);
      if (best[k].feature < 0) {
        tree.value[n] = -G[k] / (H[k] + lambda);
        continue;
      }
      tree.feature[n] = best[k].feature;
      tree.threshold[n] = best[k].threshold;
      const int l = new_node();
      const int r = new_node();
      tree.left[n] = l;
      tree.right[n] = r;
      children[k] = {l, r};
      next.push_back(l);
      next.push_back(r);
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (slot[r] < 0) continue;
      const auto k = static_cast<std::size_t>(slot[r]);
      if (children[k].first < 0) {
        node_of[r] = -1;
        continue;
      }
      const auto n = static_cast<std::size_t>(frontier[k]);
      node_of[r] = m.x[r][static_cast<std::size_t>(tree.feature[n])] < tree.threshold[n]
                       ? children[k].first
                       : children[k].second;
    }
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace

TreeEnsembleModel train(const LabeledMatrix& input, const Hyperparameters& hp) {
  input.validate();
  if (input.rows() == 0) throw InvalidArgument("train: no rows");
  if (hp.n_trees < 0 || hp.max_depth < 0 || !(hp.learning_rate > 0) ||
      !(hp.subsample > 0 && hp.subsample <= 1) || hp.lambda < 0) {
    throw InvalidArgument("train: invalid hyperparameters");
  }
  // Canonical row order makes the model independent of input order.
  std::vector<std::size_t> perm(input.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return input.ids[a] < input.ids[b]; });
  const LabeledMatrix m = input.take_rows(perm);

  const std::size_t n = m.rows();
  const double positives = std::accumulate(m.y.begin(), m.y.end(), 0.0);
  if (positives == 0 || positives == static_cast<double>(n)) {
    throw InvalidArgument("train: both classes are required");
  }

  TreeEnsembleModel model;
  model.feature_names = m.names;
  model.learning_rate = hp.learning_rate;
  model.hyper = hp;
  const double rate = positives / static_cast<double>(n);
  model.base_score = std::log(rate / (1.0 - rate));

  bool any_varying = false;
  std::vector<std::vector<std::uint32_t>> order(m.cols());
  for (std::size_t f = 0; f < m.cols(); ++f) {
    auto& o = order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return m.x[a][f] < m.x[b][f]; });
    if (n > 0 && m.x[o.front()][f] < m.x[o.back()][f]) any_varying = true;
  }
  if (!any_varying) {
    model.degenerate = true;
    return model;
  }

  std::vector<double> margin(n, model.base_score), g(n), h(n);
  const auto sample_size = static_cast<std::size_t>(
      std::max<long>(1, std::lround(hp.subsample * static_cast<double>(n))));
  bool any_split = false;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < hp.n_trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(margin[r]);
      g[r] = p - m.y[r];
      h[r] = std::max(p * (1.0 - p), 1e-16);
    }
    std::vector<int> node_of(n, -1);
    if (sample_size >= n) {
      std::fill(node_of.begin(), node_of.end(), 0);
    } else {
      Engine engine(derive_seed(hp.seed, static_cast<std::uint64_t>(t)));
      auto idx = all;
      // Partial Fisher-Yates: the first sample_size slots are the sample.
      for (std::size_t i = 0; i < sample_size; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(engine, n - i));
        std::swap(idx[i], idx[j]);
        node_of[idx[i]] = 0;
      }
    }
    Tree tree = grow_tree(m, order, g, h, std::move(node_of), hp);
    if (tree.size() > 1) any_split = true;
    for (std::size_t r = 0; r < n; ++r) margin[r] += hp.learning_rate * tree.predict(m.x[r]);
    model.trees.push_back(std::move(tree));
  }
  model.degenerate = !any_split;
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

std::string TreeEnsembleModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "iojudge-gbdt";
  j["version"] = 1;
  j["feature_names"] = feature_names;
  j["learning_rate"] = learning_rate;
  j["base_score"] = base_score;
  j["degenerate"] = degenerate;
  j["hyperparameters"] = {{"n_trees", hyper.n_trees},       {"max_depth", hyper.max_depth},
                          {"learning_rate", hyper.learning_rate}, {"subsample", hyper.subsample},
                          {"min_samples_leaf", hyper.min_samples_leaf}, {"lambda", hyper.lambda},
                          {"seed", hyper.seed}};
  auto trees_json = nlohmann::ordered_json::array();
  for (const auto& t : trees) {
    nlohmann::ordered_json tj;
    tj["feature"] = t.feature;
    tj["threshold"] = t.threshold;
    tj["left"] = t.left;
    tj["right"] = t.right;
    tj["value"] = t.value;
    trees_json.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees_json);
  return j.dump() + "\n";
}

TreeEnsembleModel TreeEnsembleModel::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "iojudge-gbdt" || j.value("version", 0) != 1) {
    throw InvalidArgument("not an iojudge-gbdt v1 model");
  }
  TreeEnsembleModel m;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.base_score = j.at("base_score").get<double>();
  m.degenerate = j.at("degenerate").get<bool>();
  const auto& hp = j.at("hyperparameters");
  m.hyper.n_trees = hp.at("n_trees").get<int>();
  m.hyper.max_depth = hp.at("max_depth").get<int>();
  m.hyper.learning_rate = hp.at("learning_rate").get<double>();
  m.hyper.subsample = hp.at("subsample").get<double>();
  m.hyper.min_samples_leaf = hp.at("min_samples_leaf").get<int>();
  m.hyper.lambda = hp.at("lambda").get<double>();
  m.hyper.seed = hp.at("seed").get<std::uint64_t>();
  const auto n_features = static_cast<int>(m.feature_names.size());
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.feature = tj.at("feature").get<std::vector<int>>();
    t.threshold = tj.at("threshold").get<std::vector<double>>();
    t.left = tj.at("left").get<std::vector<int>>();
    t.right = tj.at("right").get<std::vector<int>>();
    t.value = tj.at("value").get<std::vector<double>>();
    const auto size = t.feature.size();
    if (size == 0 || t.threshold.size() != size || t.left.size() != size ||
        t.right.size() != size || t.value.size() != size) {
      throw InvalidArgument("malformed tree in model file");
    }
    for (std::size_t i = 0; i < size; ++i) {
      if (t.feature[i] >= n_features) throw InvalidArgument("tree split on unknown feature");
      if (t.feature[i] >= 0) {
        // Children always come after their parent, so traversal terminates.
        const auto l = t.left[i], r = t.right[i];
        if (l <= static_cast<int>(i) || r <= static_cast<int>(i) || l >= static_cast<int>(size) ||
            r >= static_cast<int>(size)) {
          throw InvalidArgument("malformed tree links in model file");
        }
      }
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

// ---------------------------------------------------------------------------
// AUROC

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auroc: length mismatch");
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("auroc: labels must be 0/1");
    if (std::isnan(scores[i])) throw InvalidArgument("auroc: NaN score");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("auroc: both classes are required");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are 1-based; tied runs share their average rank. Sums of ranks are
  // kept doubled so that they stay integral.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const std::uint64_t doubled_avg = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[idx[k]] == 1) doubled_rank_sum += doubled_avg;
    }
    i = j + 1;
  }
  const double rank_sum = static_cast<double>(doubled_rank_sum) / 2.0;
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace iojudge::predictor
