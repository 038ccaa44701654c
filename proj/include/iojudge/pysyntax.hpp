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

// Tokenizer and parser for Python 3 source text.
//
// The tree produced here mirrors the node classes of CPython's `ast` module
// (3.10 grammar, without `match` statements), including expression contexts
// (Load/Store/Del) and operator nodes, so that node counts agree with
// `ast.walk` on the same source.

#ifndef IOJUDGE_PYSYNTAX_HPP_
#define IOJUDGE_PYSYNTAX_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iojudge::py {

enum class TokenKind : std::uint8_t {
  kName,
  kNumber,
  kString,
  kOp,
  kComment,
  kNewline,  // end of a logical line
  kNl,       // non-logical line break
  kIndent,
  kDedent,
  kError,
  kEnd,
};

struct Token {
  TokenKind kind;
  std::string_view text;  // view into the tokenized source
  int line = 0;           // 1-based
  int col = 0;            // byte column, 0-based
};

struct TokenStream {
  std::vector<Token> tokens;
  std::vector<std::string> errors;  // empty when the lexer saw valid input
};

/// Tokenizes `source`. Never throws: malformed input yields kError tokens and
/// entries in `errors`, and lexing resumes at the next character.
TokenStream tokenize(std::string_view source);

bool is_keyword(std::string_view name);

// ---------------------------------------------------------------------------
// Syntax tree

#define IOJUDGE_PY_NODE_KINDS(X)                                              \
  X(Module) X(FunctionDef) X(AsyncFunctionDef) X(ClassDef) X(Return)          \
  X(Delete) X(Assign) X(AugAssign) X(AnnAssign) X(For) X(AsyncFor) X(While)   \
  X(If) X(With) X(AsyncWith) X(Raise) X(Try) X(Assert) X(Import)              \
  X(ImportFrom) X(Global) X(Nonlocal) X(Expr) X(Pass) X(Break) X(Continue)    \
  X(BoolOp) X(NamedExpr) X(BinOp) X(UnaryOp) X(Lambda) X(IfExp) X(Dict)       \
  X(Set) X(ListComp) X(SetComp) X(DictComp) X(GeneratorExp) X(Await)          \
  X(Yield) X(YieldFrom) X(Compare) X(Call) X(FormattedValue) X(JoinedStr)     \
  X(Constant) X(Attribute) X(Subscript) X(Starred) X(Name) X(List) X(Tuple)   \
  X(Slice) X(Load) X(Store) X(Del) X(And) X(Or) X(Add) X(Sub) X(Mult)         \
  X(MatMult) X(Div) X(Mod) X(Pow) X(LShift) X(RShift) X(BitOr) X(BitXor)      \
  X(BitAnd) X(FloorDiv) X(Invert) X(Not) X(UAdd) X(USub) X(Eq) X(NotEq)       \
  X(Lt) X(LtE) X(Gt) X(GtE) X(Is) X(IsNot) X(In) X(NotIn) X(comprehension)    \
  X(ExceptHandler) X(arguments) X(arg) X(keyword) X(alias) X(withitem)

enum class NodeKind : std::uint8_t {
#define IOJUDGE_PY_ENUM(name) name,
  IOJUDGE_PY_NODE_KINDS(IOJUDGE_PY_ENUM)
#undef IOJUDGE_PY_ENUM
};

std::string_view node_kind_name(NodeKind kind);

/// Which field of the parent a child occupies. Only the fields that the
/// control-flow analysis distinguishes get their own tag.
enum class Field : std::uint8_t {
  kOther,
  kBody,
  kOrElse,
  kFinalBody,
  kHandlers,
  kTest,
  kIfs,
};

struct Node {
  struct Child {
    Field field;
    std::unique_ptr<Node> node;
  };

  explicit Node(NodeKind k, int line_no = 0) : kind(k), line(line_no) {}

  NodeKind kind;
  int line = 0;
  bool is_elif = false;  // If node written as an `elif` clause
  std::vector<Child> children;

  Node* add(std::unique_ptr<Node> child, Field field = Field::kOther);
  /// Children tagged with `field`, in insertion order.
  std::vector<const Node*> field(Field field) const;
};

struct ParseResult {
  std::unique_ptr<Node> module;  // null on failure
  std::string error;             // "line N: message" when module is null
  bool ok() const { return module != nullptr; }
};

/// Parses a module. Syntax errors are reported in the result, never thrown.
ParseResult parse_module(std::string_view source);

}  // namespace iojudge::py

#endif  // IOJUDGE_PYSYNTAX_HPP_
