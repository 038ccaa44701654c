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

#include "iojudge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace iojudge::metrics {

using py::Field;
using py::Node;
using py::NodeKind;

namespace {

constexpr const char* kLexicalNames[] = {
    "code_chars",        "code_lines",      "token_count",          "num_identifiers",
    "num_unique_identifiers", "avg_identifier_length", "num_comments", "comment_chars",
    "num_string_literals", "num_numeric_literals", "len_input",        "len_output"};
constexpr const char* kOpcodeHead[] = {"num_opcodes", "num_unique_opcodes", "opcode_entropy"};
constexpr const char* kAstHead[] = {"ast_num_nodes",  "ast_num_edges",       "ast_max_depth",
                                    "ast_avg_branching", "ast_density",      "ast_diameter",
                                    "ast_avg_shortest_path"};
constexpr const char* kCfgNames[] = {"cyclomatic_total", "num_loops",        "num_branches",
                                     "num_functions",    "max_nesting_depth", "num_basic_blocks",
                                     "avg_basic_block_size"};
constexpr std::string_view kParseFailed = "parse_failed";

std::string op_feature(std::string_view name) { return "op_freq_" + std::string(name); }
std::string node_feature(std::string_view name) { return "nodecount_" + std::string(name); }

// Preorder visit without recursion; deep expression chains are common.
template <typename Fn>
void preorder(const Node& root, Fn&& fn) {
  std::vector<const Node*> stack{&root};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    fn(*n);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
      stack.push_back(it->node.get());
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureMap / FeatureCatalog

void FeatureMap::set(std::string name, double value) {
  for (auto& [k, v] : entries_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(std::move(name), value);
}

double FeatureMap::at(std::string_view name) const {
  for (const auto& [k, v] : entries_) {
    if (k == name) return v;
  }
  throw InvalidArgument("feature not present: " + std::string(name));
}

bool FeatureMap::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

FeatureCatalog FeatureCatalog::from_vocabularies(std::vector<std::string> opcodes,
                                                 std::vector<std::string> node_types,
                                                 std::string interpreter) {
  for (auto* vocab : {&opcodes, &node_types}) {
    std::sort(vocab->begin(), vocab->end());
    vocab->erase(std::unique(vocab->begin(), vocab->end()), vocab->end());
    vocab->erase(std::remove(vocab->begin(), vocab->end(), std::string(kOtherSentinel)),
                 vocab->end());
  }
  FeatureCatalog c;
  c.opcode_vocabulary = std::move(opcodes);
  c.node_type_vocabulary = std::move(node_types);
  c.interpreter = std::move(interpreter);
  for (const char* n : kLexicalNames) c.names.emplace_back(n);
  for (const char* n : kOpcodeHead) c.names.emplace_back(n);
  for (const auto& op : c.opcode_vocabulary) c.names.push_back(op_feature(op));
  c.names.push_back(op_feature(kOtherSentinel));
  for (const char* n : kAstHead) c.names.emplace_back(n);
  for (const auto& t : c.node_type_vocabulary) c.names.push_back(node_feature(t));
  c.names.push_back(node_feature(kOtherSentinel));
  for (const char* n : kCfgNames) c.names.emplace_back(n);
  c.names.emplace_back(kParseFailed);
  return c;
}

std::size_t FeatureCatalog::index_of(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("feature not in catalog: " + std::string(name));
  return static_cast<std::size_t>(it - names.begin());
}

std::string FeatureCatalog::id() const { return sha256_hex(to_json()).substr(0, 16); }

std::string FeatureCatalog::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "iojudge-catalog";
  j["version"] = 1;
  j["interpreter"] = interpreter;
  j["opcode_vocabulary"] = opcode_vocabulary;
  j["node_type_vocabulary"] = node_type_vocabulary;
  j["names"] = names;
  return j.dump(2) + "\n";
}

FeatureCatalog FeatureCatalog::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "iojudge-catalog" || j.value("version", 0) != 1) {
    throw InvalidArgument("not an iojudge feature catalog (format/version)");
  }
  auto c = from_vocabularies(j.at("opcode_vocabulary").get<std::vector<std::string>>(),
                             j.at("node_type_vocabulary").get<std::vector<std::string>>(),
                             j.value("interpreter", ""));
  if (c.names != j.at("names").get<std::vector<std::string>>()) {
    throw InvalidArgument("catalog names do not match its vocabularies");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Lexical family

FeatureMap extract_lexical(std::string_view code, std::string_view input,
                           std::string_view output) {
  const auto stream = py::tokenize(code);
  std::size_t token_count = 0, identifiers = 0, ident_chars = 0, comments = 0,
              comment_chars = 0, strings = 0, numbers = 0;
  std::unordered_set<std::string_view> unique_identifiers;
  for (const auto& tok : stream.tokens) {
    switch (tok.kind) {
      case py::TokenKind::kName:
        ++token_count;
        if (!py::is_keyword(tok.text)) {
          ++identifiers;
          ident_chars += utf8_length(tok.text);
          unique_identifiers.insert(tok.text);
        }
        break;
      case py::TokenKind::kNumber:
        ++token_count;
        ++numbers;
        break;
      case py::TokenKind::kString:
        ++token_count;
        ++strings;
        break;
      case py::TokenKind::kOp:
        ++token_count;
        break;
      case py::TokenKind::kComment:
        ++comments;
        comment_chars += utf8_length(tok.text);
        break;
      default:
        break;
    }
  }
  std::size_t lines = static_cast<std::size_t>(std::count(code.begin(), code.end(), '\n'));
  if (!code.empty() && code.back() != '\n') ++lines;

  FeatureMap m;
  m.set("code_chars", static_cast<double>(utf8_length(code)));
  m.set("code_lines", static_cast<double>(lines));
  m.set("token_count", static_cast<double>(token_count));
  m.set("num_identifiers", static_cast<double>(identifiers));
  m.set("num_unique_identifiers", static_cast<double>(unique_identifiers.size()));
  m.set("avg_identifier_length",
        identifiers == 0 ? 0.0 : static_cast<double>(ident_chars) / static_cast<double>(identifiers));
  m.set("num_comments", static_cast<double>(comments));
  m.set("comment_chars", static_cast<double>(comment_chars));
  m.set("num_string_literals", static_cast<double>(strings));
  m.set("num_numeric_literals", static_cast<double>(numbers));
  m.set("len_input", static_cast<double>(utf8_length(input)));
  m.set("len_output", static_cast<double>(utf8_length(output)));
  m.set(std::string(kParseFailed), py::parse_module(code).ok() ? 0.0 : 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Opcode family

FeatureMap extract_opcode_features(const OpcodeSequence& seq, const FeatureCatalog& catalog) {
  FeatureMap m;
  const double n = static_cast<double>(seq.ops.size());
  std::map<std::string, std::size_t> counts;
  for (const auto& op : seq.ops) ++counts[op.name];
  double entropy = 0.0;
  for (const auto& [name, c] : counts) {
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log2(p);
  }
  m.set("num_opcodes", n);
  m.set("num_unique_opcodes", static_cast<double>(counts.size()));
  m.set("opcode_entropy", counts.size() <= 1 ? 0.0 : entropy);
  std::size_t known = 0;
  for (const auto& name : catalog.opcode_vocabulary) {
    const auto it = counts.find(name);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    known += c;
    m.set(op_feature(name), n == 0 ? 0.0 : static_cast<double>(c) / n);
  }
  m.set(op_feature(kOtherSentinel),
        n == 0 ? 0.0 : static_cast<double>(seq.ops.size() - known) / n);
  m.set(std::string(kParseFailed), seq.ops.empty() ? 1.0 : 0.0);
  return m;
}

FeatureMap extract_opcode_features(const Disassembly& disassembly, const FeatureCatalog& catalog) {
  static const OpcodeSequence kEmpty;
  return extract_opcode_features(disassembly.ok() ? *disassembly.sequence : kEmpty, catalog);
}

// ---------------------------------------------------------------------------
// AST graph family

std::vector<int> parent_array(const Node& root) {
  std::vector<int> parent;
  std::vector<std::pair<const Node*, int>> stack{{&root, -1}};
  while (!stack.empty()) {
    auto [n, p] = stack.back();
    stack.pop_back();
    const int self = static_cast<int>(parent.size());
    parent.push_back(p);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
      stack.emplace_back(it->node.get(), self);
    }
  }
  return parent;
}

TreeMetrics tree_metrics(const std::vector<int>& parent) {
  TreeMetrics t;
  const std::size_t v = parent.size();
  t.num_nodes = v;
  if (v == 0) return t;
  if (parent[0] != -1) throw InvalidArgument("tree_metrics: node 0 must be the root");
  std::vector<std::vector<int>> adj(v);
  std::vector<std::size_t> depth(v, 0);
  std::vector<std::size_t> child_count(v, 0);
  for (std::size_t i = 1; i < v; ++i) {
    const int p = parent[i];
    if (p < 0 || static_cast<std::size_t>(p) >= i) {
      throw InvalidArgument("tree_metrics: parent must precede its child");
    }
    adj[i].push_back(p);
    adj[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
    depth[i] = depth[static_cast<std::size_t>(p)] + 1;
    ++child_count[static_cast<std::size_t>(p)];
  }
  t.num_edges = v - 1;
  t.max_depth = *std::max_element(depth.begin(), depth.end());
  const auto internal = static_cast<std::size_t>(
      std::count_if(child_count.begin(), child_count.end(), [](std::size_t c) { return c > 0; }));
  t.avg_branching = internal == 0 ? 0.0 : static_cast<double>(t.num_edges) / static_cast<double>(internal);
  if (v < 2) return t;
  t.density = 2.0 * static_cast<double>(t.num_edges) /
              (static_cast<double>(v) * static_cast<double>(v - 1));

  // Exact all-pairs distances: one BFS per source.
  std::vector<int> dist(v);
  std::vector<int> queue(v);
  std::uint64_t total = 0;
  std::size_t diameter = 0;
  for (std::size_t s = 0; s < v; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::size_t head = 0, tail = 0;
    queue[tail++] = static_cast<int>(s);
    dist[s] = 0;
    while (head < tail) {
      const int u = queue[head++];
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
          total += static_cast<std::uint64_t>(dist[static_cast<std::size_t>(w)]);
          diameter = std::max(diameter, static_cast<std::size_t>(dist[static_cast<std::size_t>(w)]));
          queue[tail++] = w;
        }
      }
    }
  }
  t.diameter = diameter;
  t.avg_shortest_path = static_cast<double>(total) / (static_cast<double>(v) * static_cast<double>(v - 1));
  return t;
}

namespace {

FeatureMap ast_zeros(const FeatureCatalog& catalog) {
  FeatureMap m;
  for (const char* n : kAstHead) m.set(n, 0.0);
  for (const auto& t : catalog.node_type_vocabulary) m.set(node_feature(t), 0.0);
  m.set(node_feature(kOtherSentinel), 0.0);
  m.set(std::string(kParseFailed), 1.0);
  return m;
}

}  // namespace

FeatureMap extract_ast_graph(const py::ParseResult& parsed, const FeatureCatalog& catalog) {
  if (!parsed.ok()) return ast_zeros(catalog);
  const TreeMetrics t = tree_metrics(parent_array(*parsed.module));
  std::map<std::string_view, std::size_t> counts;
  preorder(*parsed.module, [&](const Node& n) { ++counts[py::node_kind_name(n.kind)]; });

  FeatureMap m;
  m.set("ast_num_nodes", static_cast<double>(t.num_nodes));
  m.set("ast_num_edges", static_cast<double>(t.num_edges));
  m.set("ast_max_depth", static_cast<double>(t.max_depth));
  m.set("ast_avg_branching", t.avg_branching);
  m.set("ast_density", t.density);
  m.set("ast_diameter", static_cast<double>(t.diameter));
  m.set("ast_avg_shortest_path", t.avg_shortest_path);
  std::size_t known = 0;
  for (const auto& type : catalog.node_type_vocabulary) {
    const auto it = counts.find(type);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    known += c;
    m.set(node_feature(type), static_cast<double>(c));
  }
  m.set(node_feature(kOtherSentinel), static_cast<double>(t.num_nodes - known));
  m.set(std::string(kParseFailed), 0.0);
  return m;
}

FeatureMap extract_ast_graph(std::string_view code, const FeatureCatalog& catalog) {
  return extract_ast_graph(py::parse_module(code), catalog);
}

// ---------------------------------------------------------------------------
// Control-flow family

namespace {

bool is_function(NodeKind k) {
  return k == NodeKind::FunctionDef || k == NodeKind::AsyncFunctionDef;
}
bool is_loop(NodeKind k) {
  return k == NodeKind::For || k == NodeKind::AsyncFor || k == NodeKind::While;
}

// Basic blocks of one function body. Blocks end after a branch test, around
// loop headers, at try/except boundaries and after jumps; nested function
// bodies are separate graphs, class bodies are inline.
class BlockCounter {
 public:
  explicit BlockCounter(std::vector<std::size_t>& sizes) : sizes_(sizes) {}

  void walk(const std::vector<const Node*>& stmts) {
    for (const Node* s : stmts) statement(*s);
  }
  void close() {
    if (current_ > 0) sizes_.push_back(current_);
    current_ = 0;
  }

 private:
  void statement(const Node& s) {
    switch (s.kind) {
      case NodeKind::If:
        ++current_;
        close();
        walk(s.field(Field::kBody));
        close();
        walk(s.field(Field::kOrElse));
        close();
        break;
      case NodeKind::For:
      case NodeKind::AsyncFor:
      case NodeKind::While:
        close();
        ++current_;
        close();
        walk(s.field(Field::kBody));
        close();
        walk(s.field(Field::kOrElse));
        close();
        break;
      case NodeKind::Try:
        close();
        walk(s.field(Field::kBody));
        close();
        for (const Node* h : s.field(Field::kHandlers)) {
          walk(h->field(Field::kBody));
          close();
        }
        walk(s.field(Field::kOrElse));
        close();
        walk(s.field(Field::kFinalBody));
        close();
        break;
      case NodeKind::Return:
      case NodeKind::Raise:
      case NodeKind::Break:
      case NodeKind::Continue:
        ++current_;
        close();
        break;
      case NodeKind::FunctionDef:
      case NodeKind::AsyncFunctionDef: {
        ++current_;
        BlockCounter inner(sizes_);
        inner.walk(s.field(Field::kBody));
        inner.close();
        break;
      }
      case NodeKind::ClassDef:
      case NodeKind::With:
      case NodeKind::AsyncWith:
        ++current_;
        walk(s.field(Field::kBody));
        break;
      default:
        ++current_;
        break;
    }
  }

  std::vector<std::size_t>& sizes_;
  std::size_t current_ = 0;
};

bool adds_nesting(const Node& n) {
  switch (n.kind) {
    case NodeKind::If:
      return !n.is_elif;
    case NodeKind::For:
    case NodeKind::AsyncFor:
    case NodeKind::While:
    case NodeKind::With:
    case NodeKind::AsyncWith:
    case NodeKind::Try:
      return true;
    default:
      return false;
  }
}

bool is_statement_list_field(Field f) {
  return f == Field::kBody || f == Field::kOrElse || f == Field::kFinalBody ||
         f == Field::kHandlers;
}

std::size_t nesting_depth(const Node& n, std::size_t depth) {
  const std::size_t here = depth + (adds_nesting(n) ? 1 : 0);
  std::size_t best = here;
  for (const auto& c : n.children) {
    if (is_statement_list_field(c.field)) best = std::max(best, nesting_depth(*c.node, here));
  }
  return best;
}

FeatureMap cfg_zeros() {
  FeatureMap m;
  for (const char* n : kCfgNames) m.set(n, 0.0);
  m.set(std::string(kParseFailed), 1.0);
  return m;
}

}  // namespace

FeatureMap extract_control_flow(const py::ParseResult& parsed) {
  if (!parsed.ok()) return cfg_zeros();
  const Node& root = *parsed.module;
  std::size_t functions = 1, loops = 0, branches = 0, decisions = 0;
  preorder(root, [&](const Node& n) {
    if (is_function(n.kind)) ++functions;
    if (is_loop(n.kind)) {
      ++loops;
      ++decisions;
    }
    switch (n.kind) {
      case NodeKind::If:
        ++branches;
        ++decisions;
        break;
      case NodeKind::ExceptHandler:
      case NodeKind::IfExp:
        ++decisions;
        break;
      case NodeKind::BoolOp:
        // children: operator node, then the operands
        decisions += n.children.size() - 2;
        break;
      case NodeKind::comprehension:
        decisions += n.field(Field::kIfs).size();
        break;
      default:
        break;
    }
  });

  std::vector<std::size_t> sizes;
  BlockCounter module_blocks(sizes);
  module_blocks.walk(root.field(Field::kBody));
  module_blocks.close();
  std::size_t statements = 0;
  for (auto s : sizes) statements += s;

  FeatureMap m;
  m.set("cyclomatic_total", static_cast<double>(functions + decisions));
  m.set("num_loops", static_cast<double>(loops));
  m.set("num_branches", static_cast<double>(branches));
  m.set("num_functions", static_cast<double>(functions));
  m.set("max_nesting_depth", static_cast<double>(nesting_depth(root, 0)));
  m.set("num_basic_blocks", static_cast<double>(sizes.size()));
  m.set("avg_basic_block_size",
        sizes.empty() ? 0.0 : static_cast<double>(statements) / static_cast<double>(sizes.size()));
  m.set(std::string(kParseFailed), 0.0);
  return m;
}

FeatureMap extract_control_flow(std::string_view code) {
  return extract_control_flow(py::parse_module(code));
}

// ---------------------------------------------------------------------------
// Catalog and full vectors

FeatureCatalog build_catalog(const std::vector<std::string>& training_codes,
                             const std::vector<OpcodeSequence>& opcode_seqs,
                             std::string interpreter) {
  if (training_codes.empty()) throw InvalidArgument("build_catalog: empty training set");
  std::set<std::string> opcodes;
  for (const auto& seq : opcode_seqs) {
    for (const auto& op : seq.ops) opcodes.insert(op.name);
  }
  std::set<std::string> node_types;
  std::unordered_set<std::string_view> seen_code;
  for (const auto& code : training_codes) {
    if (!seen_code.insert(code).second) continue;
    const auto parsed = py::parse_module(code);
    if (!parsed.ok()) continue;
    preorder(*parsed.module,
             [&](const Node& n) { node_types.emplace(py::node_kind_name(n.kind)); });
  }
  return FeatureCatalog::from_vocabularies({opcodes.begin(), opcodes.end()},
                                           {node_types.begin(), node_types.end()},
                                           std::move(interpreter));
}

FeatureExtractor::FeatureExtractor(const FeatureCatalog& catalog, ExecutionService& service)
    : catalog_(catalog), service_(service), catalog_id_(catalog.id()) {
  if (!catalog_.interpreter.empty()) {
    const std::string actual = service_.interpreter_version();
    if (actual != catalog_.interpreter) {
      throw InvalidArgument("catalog was built with " + catalog_.interpreter +
                            " but the sidecar runs " + actual);
    }
  }
}

const FeatureExtractor::CodeFeatures& FeatureExtractor::code_features(const std::string& code) {
  const std::string key = sha256_hex(code);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  CodeFeatures f;
  Disassembly dis;
  try {
    dis = service_.disassemble(code);
  } catch (const RuntimeFailure& e) {
    dis.error = e.what();  // opcode family is zeroed, the batch continues
  }
  f.opcode = extract_opcode_features(dis, catalog_);
  const auto parsed = py::parse_module(code);
  f.parse_failed = !parsed.ok();
  f.ast = extract_ast_graph(parsed, catalog_);
  f.cfg = extract_control_flow(parsed);
  return cache_.emplace(key, std::move(f)).first->second;
}

std::vector<double> FeatureExtractor::assemble(const FeatureMap& lexical, const FeatureMap& opcode,
                                               const FeatureMap& ast, const FeatureMap& cfg) const {
  std::unordered_map<std::string_view, double> values;
  double parse_failed = 0.0;
  for (const FeatureMap* m : {&lexical, &opcode, &ast, &cfg}) {
    for (const auto& [name, v] : m->entries()) {
      if (name == kParseFailed) {
        parse_failed = std::max(parse_failed, v);
      } else {
        values[name] = v;
      }
    }
  }
  values[kParseFailed] = parse_failed;
  std::vector<double> out;
  out.reserve(catalog_.size());
  for (const auto& name : catalog_.names) {
    const auto it = values.find(name);
    if (it == values.end()) throw InvalidArgument("family maps lack feature " + name);
    if (!std::isfinite(it->second)) throw RuntimeFailure("non-finite feature " + name);
    out.push_back(it->second);
  }
  return out;
}

FeatureVector FeatureExtractor::extract(const corpus::Triple& triple) {
  const CodeFeatures& f = code_features(triple.program.source);
  FeatureMap lexical = extract_lexical(triple.program.source, triple.input, triple.output);
  return FeatureVector{catalog_id_, assemble(lexical, f.opcode, f.ast, f.cfg)};
}

FeatureVector extract_all(const corpus::Triple& triple, ExecutionService& service,
                          const FeatureCatalog& catalog) {
  FeatureExtractor extractor(catalog, service);
  return extractor.extract(triple);
}

// ---------------------------------------------------------------------------
// CSV

std::string matrix_to_csv(const FeatureMatrix& matrix) {
  std::string out = "triple_id";
  for (const auto& n : matrix.names) out += "," + n;
  out.push_back('\n');
  if (matrix.ids.size() != matrix.rows.size()) throw InvalidArgument("ids/rows size mismatch");
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    if (matrix.rows[r].size() != matrix.names.size()) throw InvalidArgument("ragged feature row");
    out += matrix.ids[r];
    for (double v : matrix.rows[r]) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

FeatureMatrix matrix_from_csv(std::string_view text) {
  FeatureMatrix m;
  bool header = true;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (header) {
      if (cells.empty() || cells[0] != "triple_id") {
        throw InvalidArgument("feature CSV must start with a triple_id column");
      }
      m.names.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != m.names.size() + 1) throw InvalidArgument("ragged feature CSV row");
    m.ids.push_back(cells[0]);
    std::vector<double> row;
    row.reserve(m.names.size());
    for (std::size_t i = 1; i < cells.size(); ++i) {
      double v = 0.0;
      const auto& c = cells[i];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw InvalidArgument("bad numeric cell '" + c + "' in feature CSV");
      }
      row.push_back(v);
    }
    m.rows.push_back(std::move(row));
  }
  if (header) throw InvalidArgument("feature CSV is empty");
  return m;
}

}  // namespace iojudge::metrics
