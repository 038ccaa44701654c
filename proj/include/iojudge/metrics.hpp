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

// Static feature extraction: lexical, opcode, AST-graph and control-flow
// families. Nothing here executes the program under analysis.

#ifndef IOJUDGE_METRICS_HPP_
#define IOJUDGE_METRICS_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iojudge/corpus.hpp"
#include "iojudge/pysyntax.hpp"
#include "iojudge/sidecar.hpp"

namespace iojudge::metrics {

/// Feature values in emission order.
class FeatureMap {
 public:
  void set(std::string name, double value);
  double at(std::string_view name) const;  // throws InvalidArgument if absent
  bool contains(std::string_view name) const;
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

inline constexpr std::string_view kOtherSentinel = "OTHER";

/// Ordered feature names plus the frozen vocabularies they were built from.
struct FeatureCatalog {
  std::vector<std::string> opcode_vocabulary;     // sorted, without OTHER
  std::vector<std::string> node_type_vocabulary;  // sorted, without OTHER
  std::vector<std::string> names;
  std::string interpreter;  // e.g. "cpython-3.10.12"; empty = unpinned

  /// Builds `names` from the vocabularies.
  static FeatureCatalog from_vocabularies(std::vector<std::string> opcodes,
                                          std::vector<std::string> node_types,
                                          std::string interpreter = {});

  std::size_t size() const { return names.size(); }
  std::size_t index_of(std::string_view name) const;  // throws if absent
  /// 16 hex digits of SHA-256 over the serialized catalog.
  std::string id() const;
  std::string to_json() const;
  static FeatureCatalog from_json(std::string_view text);
};

struct FeatureVector {
  std::string catalog_id;
  std::vector<double> values;  // aligned to catalog names
};

// ---------------------------------------------------------------------------
// Families

/// Lexical family. Token features come from the tokenizer even when the code
/// does not parse; parse_failed reports whether it did.
FeatureMap extract_lexical(std::string_view code, std::string_view input,
                           std::string_view output);

/// Opcode family. A missing or empty sequence yields zeros and parse_failed=1.
FeatureMap extract_opcode_features(const Disassembly& disassembly, const FeatureCatalog& catalog);
FeatureMap extract_opcode_features(const OpcodeSequence& seq, const FeatureCatalog& catalog);

/// Metrics of a rooted tree seen as an undirected graph. `parent[0]` must be
/// -1 and every other entry must point to an earlier node.
struct TreeMetrics {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::size_t max_depth = 0;
  double avg_branching = 0.0;  // children per non-leaf node
  double density = 0.0;        // 2E / (V (V - 1)), 0 when V < 2
  std::size_t diameter = 0;
  double avg_shortest_path = 0.0;  // mean over ordered pairs u != v
};
TreeMetrics tree_metrics(const std::vector<int>& parent);

/// Preorder parent array of a syntax tree (root first).
std::vector<int> parent_array(const py::Node& root);

FeatureMap extract_ast_graph(std::string_view code, const FeatureCatalog& catalog);
FeatureMap extract_ast_graph(const py::ParseResult& parsed, const FeatureCatalog& catalog);

FeatureMap extract_control_flow(std::string_view code);
FeatureMap extract_control_flow(const py::ParseResult& parsed);

// ---------------------------------------------------------------------------
// Catalog and full vectors

/// Vocabularies are the opcode names and node types observed in the training
/// programs, sorted. Throws InvalidArgument when `training_codes` is empty.
FeatureCatalog build_catalog(const std::vector<std::string>& training_codes,
                             const std::vector<OpcodeSequence>& opcode_seqs,
                             std::string interpreter = {});

/// Extracts catalog-aligned vectors; code-dependent features are cached per
/// distinct source text. Only `disassemble` is ever called on the service.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureCatalog& catalog, ExecutionService& service);

  FeatureVector extract(const corpus::Triple& triple);
  /// Catalog-ordered values of the concatenated family maps.
  std::vector<double> assemble(const FeatureMap& lexical, const FeatureMap& opcode,
                               const FeatureMap& ast, const FeatureMap& cfg) const;

 private:
  struct CodeFeatures {
    FeatureMap opcode;
    FeatureMap ast;
    FeatureMap cfg;
    bool parse_failed = false;
  };
  const CodeFeatures& code_features(const std::string& code);

  const FeatureCatalog& catalog_;
  ExecutionService& service_;
  std::string catalog_id_;
  std::map<std::string, CodeFeatures> cache_;  // keyed by SHA-256 of code
};

FeatureVector extract_all(const corpus::Triple& triple, ExecutionService& service,
                          const FeatureCatalog& catalog);

// ---------------------------------------------------------------------------
// Feature matrix files: CSV with header `triple_id,<names...>[,<extra>]`.

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

std::string matrix_to_csv(const FeatureMatrix& matrix);
FeatureMatrix matrix_from_csv(std::string_view text);

}  // namespace iojudge::metrics

#endif  // IOJUDGE_METRICS_HPP_
