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

// Python bindings: the metric arithmetic, the predictor, SAGE, and the
// pipeline entry points. Heavy loops release the GIL.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iojudge/judge.hpp"
#include "iojudge/metrics.hpp"
#include "iojudge/pipeline.hpp"
#include "iojudge/predictor.hpp"
#include "iojudge/sage.hpp"

namespace pb = pybind11;
using namespace iojudge;

namespace {

pb::dict feature_dict(const metrics::FeatureMap& m) {
  pb::dict d;
  for (const auto& [k, v] : m.entries()) d[pb::str(k)] = v;
  return d;
}

pb::dict importance_dict(const sage::FeatureImportance& f) {
  pb::dict d;
  d["name"] = f.name;
  d["value"] = f.value;
  d["std_error"] = f.std_error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_iojudge, m) {
  m.doc() = "iojudge native core";

  pb::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  pb::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);
  pb::register_exception<pipeline::ConfigError>(m, "ConfigError", PyExc_ValueError);
  pb::register_exception<pipeline::StageFailure>(m, "StageFailure", PyExc_RuntimeError);

  // ---- judge arithmetic
  m.def("f1_score", &judge::f1_score, pb::arg("precision"), pb::arg("recall"));
  m.def(
      "judge_report",
      [](const std::string& records_jsonl) { return judge::report_json(judge::records_from_jsonl(records_jsonl)); },
      pb::arg("records_jsonl"), "Aggregate metrics JSON for a records.jsonl text.");
  m.def("prompt_version", &judge::prompt_version);

  // ---- static metrics
  m.def(
      "lexical_features",
      [](const std::string& code, const std::string& input, const std::string& output) {
        return feature_dict(metrics::extract_lexical(code, input, output));
      },
      pb::arg("code"), pb::arg("input") = "", pb::arg("output") = "");
  m.def(
      "control_flow_features",
      [](const std::string& code) { return feature_dict(metrics::extract_control_flow(code)); },
      pb::arg("code"));
  m.def(
      "tree_metrics",
      [](const std::vector<int>& parent) {
        const auto t = metrics::tree_metrics(parent);
        pb::dict d;
        d["num_nodes"] = t.num_nodes;
        d["num_edges"] = t.num_edges;
        d["max_depth"] = t.max_depth;
        d["avg_branching"] = t.avg_branching;
        d["density"] = t.density;
        d["diameter"] = t.diameter;
        d["avg_shortest_path"] = t.avg_shortest_path;
        return d;
      },
      pb::arg("parent"), "Metrics of a rooted tree given as a preorder parent array.");

  // ---- predictor
  pb::class_<predictor::LabeledMatrix>(m, "LabeledMatrix")
      .def(pb::init([](std::vector<std::string> names, std::vector<std::string> ids,
                       std::vector<std::vector<double>> x, std::vector<int> y) {
             predictor::LabeledMatrix lm{std::move(names), std::move(ids), std::move(x), std::move(y)};
             lm.validate();
             return lm;
           }),
           pb::arg("names"), pb::arg("ids"), pb::arg("x"), pb::arg("y"))
      .def_static("from_csv", [](const std::string& text) { return predictor::labeled_from_csv(text); })
      .def("to_csv", [](const predictor::LabeledMatrix& lm) { return predictor::labeled_to_csv(lm); })
      .def_readonly("names", &predictor::LabeledMatrix::names)
      .def_readonly("ids", &predictor::LabeledMatrix::ids)
      .def_readonly("x", &predictor::LabeledMatrix::x)
      .def_readonly("y", &predictor::LabeledMatrix::y)
      .def("__len__", &predictor::LabeledMatrix::rows);

  m.def(
      "stratified_split",
      [](const predictor::LabeledMatrix& lm, double ratio, std::uint64_t seed) {
        return predictor::stratified_split(lm, ratio, seed);
      },
      pb::arg("matrix"), pb::arg("ratio") = 0.8, pb::arg("seed") = 0);

  pb::class_<predictor::TreeEnsembleModel>(m, "TreeEnsembleModel")
      .def_static("from_json", &predictor::TreeEnsembleModel::from_json)
      .def("to_json", &predictor::TreeEnsembleModel::to_json)
      .def_readonly("feature_names", &predictor::TreeEnsembleModel::feature_names)
      .def_readonly("base_score", &predictor::TreeEnsembleModel::base_score)
      .def_readonly("degenerate", &predictor::TreeEnsembleModel::degenerate)
      .def_property_readonly("n_trees", [](const predictor::TreeEnsembleModel& t) { return t.trees.size(); })
      .def(
          "predict_proba",
          [](const predictor::TreeEnsembleModel& t, const std::vector<std::vector<double>>& rows) {
            std::vector<double> out;
            out.reserve(rows.size());
            for (const auto& r : rows) out.push_back(predictor::predict_proba(t, r));
            return out;
          },
          pb::arg("rows"));

  m.def(
      "train",
      [](const predictor::LabeledMatrix& lm, int n_trees, int max_depth, double learning_rate,
         double subsample, int min_samples_leaf, double lambda, std::uint64_t seed) {
        predictor::Hyperparameters h;
        h.n_trees = n_trees;
        h.max_depth = max_depth;
        h.learning_rate = learning_rate;
        h.subsample = subsample;
        h.min_samples_leaf = min_samples_leaf;
        h.lambda = lambda;
        h.seed = seed;
        pb::gil_scoped_release release;
        return predictor::train(lm, h);
      },
      pb::arg("matrix"), pb::arg("n_trees") = 300, pb::arg("max_depth") = 6, pb::arg("learning_rate") = 0.1,
      pb::arg("subsample") = 0.8, pb::arg("min_samples_leaf") = 20, pb::arg("reg_lambda") = 1.0,
      pb::arg("seed") = 0);

  m.def(
      "auroc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return predictor::auroc(scores, labels);
      },
      pb::arg("scores"), pb::arg("labels"), "Mann-Whitney AUROC with average ranks for ties.");

  // ---- SAGE
  m.def(
      "estimate_sage",
      [](const predictor::TreeEnsembleModel& model, const predictor::LabeledMatrix& eval,
         const predictor::LabeledMatrix& background_source, int n_permutations, int background_size,
         std::uint64_t seed, int threads, int max_eval_rows) {
        sage::SageOptions o;
        o.n_permutations = n_permutations;
        o.background_size = background_size;
        o.seed = seed;
        o.threads = threads;
        o.max_eval_rows = max_eval_rows;
        pb::gil_scoped_release release;
        const auto bg = sage::sample_background(background_source, background_size, seed);
        return sage::estimate_sage(model, eval, bg, o).to_json();
      },
      pb::arg("model"), pb::arg("eval"), pb::arg("background_source"), pb::arg("n_permutations") = 512,
      pb::arg("background_size") = 128, pb::arg("seed") = 0, pb::arg("threads") = 1,
      pb::arg("max_eval_rows") = 0, "Returns the SAGE report as JSON text.");
  m.def(
      "prune_by_positive_mass",
      [](const std::vector<std::pair<std::string, double>>& values, double threshold) {
        std::vector<sage::FeatureImportance> fi;
        for (const auto& [n, v] : values) fi.push_back({n, v, 0.0});
        const auto p = sage::prune_by_positive_mass(fi, threshold);
        pb::dict d;
        d["retained"] = p.retained;
        d["covered_mass"] = p.covered_mass;
        d["total_positive_mass"] = p.total_positive_mass;
        d["threshold"] = p.threshold;
        return d;
      },
      pb::arg("values"), pb::arg("threshold") = 0.95);
  m.def(
      "sage_ranked",
      [](const std::string& report_json) {
        pb::list out;
        for (const auto& f : sage::SageReport::from_json(report_json).ranked()) out.append(importance_dict(f));
        return out;
      },
      pb::arg("report_json"));

  // ---- pipeline
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, std::optional<std::string> stage) {
        auto cfg = pipeline::RunConfig::load(config);
        pb::gil_scoped_release release;
        pipeline::Pipeline p(std::move(cfg));
        std::vector<std::string> ran;
        if (stage) {
          const auto s = pipeline::parse_stage(*stage);
          if (p.run_stage(s)) ran.emplace_back(pipeline::stage_name(s));
        } else {
          for (auto s : p.run_all()) ran.emplace_back(pipeline::stage_name(s));
        }
        return ran;
      },
      pb::arg("config"), pb::arg("stage") = pb::none(), "Runs the pipeline; returns the stages that ran.");
  m.def("report_json", &pipeline::report_json, pb::arg("run_dir"));
  m.def("report_markdown", &pipeline::report_markdown, pb::arg("run_dir"));
}
