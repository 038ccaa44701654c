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

// Recursive-descent parser producing CPython-shaped syntax trees.

#include <array>
#include <cctype>
#include <string>
#include <utility>

#include "iojudge/pysyntax.hpp"

namespace iojudge::py {
namespace {

using Ptr = std::unique_ptr<Node>;

struct SyntaxError {
  int line;
  std::string message;
};

constexpr std::string_view kNodeNames[] = {
#define IOJUDGE_PY_NAME(name) #name,
    IOJUDGE_PY_NODE_KINDS(IOJUDGE_PY_NAME)
#undef IOJUDGE_PY_NAME
};

Ptr make(NodeKind kind, int line) { return std::make_unique<Node>(kind, line); }

Ptr make_ctx(NodeKind ctx) { return std::make_unique<Node>(ctx); }

struct OpEntry {
  std::string_view text;
  NodeKind kind;
};

constexpr std::array<OpEntry, 13> kAugOps = {{
    {"+=", NodeKind::Add},     {"-=", NodeKind::Sub},      {"*=", NodeKind::Mult},
    {"@=", NodeKind::MatMult}, {"/=", NodeKind::Div},      {"%=", NodeKind::Mod},
    {"&=", NodeKind::BitAnd},  {"|=", NodeKind::BitOr},    {"^=", NodeKind::BitXor},
    {"<<=", NodeKind::LShift}, {">>=", NodeKind::RShift},  {"**=", NodeKind::Pow},
    {"//=", NodeKind::FloorDiv},
}};

bool is_ctx(NodeKind k) {
  return k == NodeKind::Load || k == NodeKind::Store || k == NodeKind::Del;
}

class Parser {
 public:
  // `tokens` must not contain comments or non-logical newlines.
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Ptr file() {
    auto module = make(NodeKind::Module, 1);
    while (!at(TokenKind::kEnd)) {
      if (at(TokenKind::kNewline)) {
        ++pos_;
        continue;
      }
      for (auto& s : statement()) module->add(std::move(s), Field::kBody);
    }
    return module;
  }

  // Parses a complete expression for an f-string replacement field. The
  // token stream was produced from "(" + text + ")".
  Ptr fstring_expression() {
    auto e = atom();
    if (!at(TokenKind::kEnd)) fail("f-string: expecting '}'");
    return e;
  }

 private:
  // -- token helpers -------------------------------------------------------

  const Token& peek(std::size_t k = 0) const {
    const std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  bool at(TokenKind kind) const { return peek().kind == kind; }
  bool at_op(std::string_view op, std::size_t k = 0) const {
    return peek(k).kind == TokenKind::kOp && peek(k).text == op;
  }
  bool at_kw(std::string_view kw, std::size_t k = 0) const {
    return peek(k).kind == TokenKind::kName && peek(k).text == kw;
  }
  bool at_plain_name(std::size_t k = 0) const {
    return peek(k).kind == TokenKind::kName && !is_keyword(peek(k).text);
  }
  int line() const { return peek().line; }

  [[noreturn]] void fail(const std::string& message) const {
    throw SyntaxError{line(), message};
  }
  void expect_op(std::string_view op) {
    if (!at_op(op)) fail("expected '" + std::string(op) + "'");
    ++pos_;
  }
  void expect_kw(std::string_view kw) {
    if (!at_kw(kw)) fail("expected '" + std::string(kw) + "'");
    ++pos_;
  }
  bool accept_op(std::string_view op) {
    if (!at_op(op)) return false;
    ++pos_;
    return true;
  }
  bool accept_kw(std::string_view kw) {
    if (!at_kw(kw)) return false;
    ++pos_;
    return true;
  }
  std::string_view expect_name() {
    if (!at_plain_name()) fail("expected a name");
    return toks_[pos_++].text;
  }

  // -- statements ----------------------------------------------------------

  std::vector<Ptr> statement() {
    if (at(TokenKind::kIndent)) fail("unexpected indent");
    if (at(TokenKind::kDedent)) fail("unexpected dedent");
    if (at(TokenKind::kError)) fail("invalid token");
    std::vector<Ptr> out;
    if (at_kw("if")) {
      out.push_back(if_stmt());
    } else if (at_kw("while")) {
      out.push_back(while_stmt());
    } else if (at_kw("for")) {
      out.push_back(for_stmt(false));
    } else if (at_kw("try")) {
      out.push_back(try_stmt());
    } else if (at_kw("with")) {
      out.push_back(with_stmt(false));
    } else if (at_kw("def")) {
      out.push_back(funcdef(false, {}));
    } else if (at_kw("class")) {
      out.push_back(classdef({}));
    } else if (at_kw("async")) {
      out.push_back(async_stmt({}));
    } else if (at_op("@")) {
      out.push_back(decorated());
    } else {
      out = simple_stmt();
    }
    return out;
  }

  std::vector<Ptr> simple_stmt() {
    std::vector<Ptr> out;
    out.push_back(small_stmt());
    while (accept_op(";")) {
      if (at(TokenKind::kNewline) || at(TokenKind::kEnd)) break;
      out.push_back(small_stmt());
    }
    if (at(TokenKind::kNewline)) {
      ++pos_;
    } else if (!at(TokenKind::kEnd)) {
      fail("invalid syntax");
    }
    return out;
  }

  std::vector<Ptr> block() {
    expect_op(":");
    if (!at(TokenKind::kNewline)) return simple_stmt();
    ++pos_;
    if (!at(TokenKind::kIndent)) fail("expected an indented block");
    ++pos_;
    std::vector<Ptr> body;
    while (!at(TokenKind::kDedent) && !at(TokenKind::kEnd)) {
      if (at(TokenKind::kNewline)) {
        ++pos_;
        continue;
      }
      for (auto& s : statement()) body.push_back(std::move(s));
    }
    if (at(TokenKind::kDedent)) ++pos_;
    return body;
  }

  static void attach(Node& parent, std::vector<Ptr> nodes, Field field) {
    for (auto& n : nodes) parent.add(std::move(n), field);
  }

  Ptr if_stmt() {
    // Entered on 'if' or 'elif'.
    auto node = make(NodeKind::If, line());
    ++pos_;
    node->add(namedexpr_test(), Field::kTest);
    attach(*node, block(), Field::kBody);
    if (at_kw("elif")) {
      node->add(if_stmt(), Field::kOrElse)->is_elif = true;
    } else if (accept_kw("else")) {
      attach(*node, block(), Field::kOrElse);
    }
    return node;
  }

  Ptr while_stmt() {
    auto node = make(NodeKind::While, line());
    expect_kw("while");
    node->add(namedexpr_test(), Field::kTest);
    attach(*node, block(), Field::kBody);
    if (accept_kw("else")) attach(*node, block(), Field::kOrElse);
    return node;
  }

  Ptr for_stmt(bool is_async) {
    auto node = make(is_async ? NodeKind::AsyncFor : NodeKind::For, line());
    expect_kw("for");
    node->add(target_list());
    expect_kw("in");
    node->add(testlist_star_expr());
    attach(*node, block(), Field::kBody);
    if (accept_kw("else")) attach(*node, block(), Field::kOrElse);
    return node;
  }

  Ptr try_stmt() {
    auto node = make(NodeKind::Try, line());
    expect_kw("try");
    attach(*node, block(), Field::kBody);
    bool any_handler = false;
    while (at_kw("except")) {
      any_handler = true;
      auto handler = make(NodeKind::ExceptHandler, line());
      ++pos_;
      if (!at_op(":")) {
        handler->add(test());
        if (accept_kw("as")) expect_name();
      }
      attach(*handler, block(), Field::kBody);
      node->add(std::move(handler), Field::kHandlers);
    }
    if (any_handler && accept_kw("else")) attach(*node, block(), Field::kOrElse);
    bool has_finally = false;
    if (accept_kw("finally")) {
      has_finally = true;
      attach(*node, block(), Field::kFinalBody);
    }
    if (!any_handler && !has_finally) fail("expected 'except' or 'finally' block");
    return node;
  }

  Ptr with_item() {
    auto item = make(NodeKind::withitem, line());
    item->add(test());
    if (accept_kw("as")) {
      auto target = star_target_atom();
      set_context(*target, NodeKind::Store);
      item->add(std::move(target));
    }
    return item;
  }

  Ptr with_stmt(bool is_async) {
    auto node = make(is_async ? NodeKind::AsyncWith : NodeKind::With, line());
    expect_kw("with");
    std::vector<Ptr> items;
    bool parsed = false;
    if (at_op("(")) {
      // Parenthesized form `with (a as b, c):`; fall back if it is an
      // ordinary parenthesized expression.
      const std::size_t save = pos_;
      try {
        ++pos_;
        items.push_back(with_item());
        while (accept_op(",")) {
          if (at_op(")")) break;
          items.push_back(with_item());
        }
        expect_op(")");
        if (!at_op(":")) throw SyntaxError{line(), "not a parenthesized with"};
        parsed = true;
      } catch (const SyntaxError&) {
        pos_ = save;
        items.clear();
      }
    }
    if (!parsed) {
      items.push_back(with_item());
      while (accept_op(",")) items.push_back(with_item());
    }
    for (auto& it : items) node->add(std::move(it));
    attach(*node, block(), Field::kBody);
    return node;
  }

  Ptr decorated() {
    std::vector<Ptr> decorators;
    while (accept_op("@")) {
      decorators.push_back(namedexpr_test());
      if (!at(TokenKind::kNewline)) fail("expected newline after decorator");
      ++pos_;
    }
    if (at_kw("def")) return funcdef(false, std::move(decorators));
    if (at_kw("class")) return classdef(std::move(decorators));
    if (at_kw("async")) return async_stmt(std::move(decorators));
    fail("expected function or class after decorator");
  }

  Ptr async_stmt(std::vector<Ptr> decorators) {
    expect_kw("async");
    if (at_kw("def")) return funcdef(true, std::move(decorators));
    if (!decorators.empty()) fail("expected 'def' after 'async'");
    if (at_kw("for")) return for_stmt(true);
    if (at_kw("with")) return with_stmt(true);
    fail("expected 'def', 'for' or 'with' after 'async'");
  }

  Ptr funcdef(bool is_async, std::vector<Ptr> decorators) {
    auto node = make(is_async ? NodeKind::AsyncFunctionDef : NodeKind::FunctionDef, line());
    expect_kw("def");
    expect_name();
    expect_op("(");
    node->add(arguments(")", true));
    expect_op(")");
    Ptr returns;
    if (accept_op("->")) returns = test();
    attach(*node, block(), Field::kBody);
    attach(*node, std::move(decorators), Field::kOther);
    if (returns) node->add(std::move(returns));
    return node;
  }

  Ptr classdef(std::vector<Ptr> decorators) {
    auto node = make(NodeKind::ClassDef, line());
    expect_kw("class");
    expect_name();
    if (accept_op("(")) {
      call_arguments(*node);
      expect_op(")");
    }
    attach(*node, block(), Field::kBody);
    attach(*node, std::move(decorators), Field::kOther);
    return node;
  }

  Ptr arg_node(bool annotations) {
    auto a = make(NodeKind::arg, line());
    expect_name();
    if (annotations && accept_op(":")) a->add(test());
    return a;
  }

  // Parameter list up to (not including) `closing`.
  Ptr arguments(std::string_view closing, bool annotations) {
    auto node = make(NodeKind::arguments, line());
    std::vector<Ptr> posonly, args, defaults, kwonly, kw_defaults;
    Ptr vararg, kwarg;
    bool seen_star = false;
    bool seen_default = false;
    bool seen_slash = false;
    while (!at_op(closing)) {
      if (kwarg) fail("arguments cannot follow var-keyword argument");
      if (accept_op("/")) {
        if (seen_slash || seen_star || args.empty()) fail("invalid '/' in parameters");
        seen_slash = true;
        for (auto& a : args) posonly.push_back(std::move(a));
        args.clear();
      } else if (accept_op("*")) {
        if (seen_star) fail("* argument may appear only once");
        seen_star = true;
        if (!at_op(",") && !at_op(closing)) vararg = arg_node(annotations);
      } else if (accept_op("**")) {
        kwarg = arg_node(annotations);
      } else {
        auto a = arg_node(annotations);
        Ptr def;
        if (accept_op("=")) def = test();
        if (seen_star) {
          kwonly.push_back(std::move(a));
          if (def) kw_defaults.push_back(std::move(def));
        } else {
          if (def) {
            seen_default = true;
            defaults.push_back(std::move(def));
          } else if (seen_default) {
            fail("non-default argument follows default argument");
          }
          args.push_back(std::move(a));
        }
      }
      if (!at_op(closing)) expect_op(",");
    }
    if (seen_star && !vararg && kwonly.empty()) fail("named arguments must follow bare *");
    for (auto& a : posonly) node->add(std::move(a));
    for (auto& a : args) node->add(std::move(a));
    if (vararg) node->add(std::move(vararg));
    for (auto& a : kwonly) node->add(std::move(a));
    for (auto& d : kw_defaults) node->add(std::move(d));
    if (kwarg) node->add(std::move(kwarg));
    for (auto& d : defaults) node->add(std::move(d));
    return node;
  }

  Ptr small_stmt() {
    const int ln = line();
    if (accept_kw("pass")) return make(NodeKind::Pass, ln);
    if (accept_kw("break")) return make(NodeKind::Break, ln);
    if (accept_kw("continue")) return make(NodeKind::Continue, ln);
    if (accept_kw("return")) {
      auto node = make(NodeKind::Return, ln);
      if (!at_stmt_end()) node->add(testlist_star_expr());
      return node;
    }
    if (accept_kw("raise")) {
      auto node = make(NodeKind::Raise, ln);
      if (!at_stmt_end()) {
        node->add(test());
        if (accept_kw("from")) node->add(test());
      }
      return node;
    }
    if (at_kw("global") || at_kw("nonlocal")) {
      auto node = make(at_kw("global") ? NodeKind::Global : NodeKind::Nonlocal, ln);
      ++pos_;
      expect_name();
      while (accept_op(",")) expect_name();
      return node;
    }
    if (accept_kw("del")) {
      auto node = make(NodeKind::Delete, ln);
      do {
        if (at_stmt_end()) break;
        auto target = expr();
        set_context(*target, NodeKind::Del);
        node->add(std::move(target));
      } while (accept_op(","));
      if (node->children.empty()) fail("invalid syntax");
      return node;
    }
    if (accept_kw("assert")) {
      auto node = make(NodeKind::Assert, ln);
      node->add(test());
      if (accept_op(",")) node->add(test());
      return node;
    }
    if (accept_kw("import")) {
      auto node = make(NodeKind::Import, ln);
      do {
        auto alias = make(NodeKind::alias, line());
        dotted_name();
        if (accept_kw("as")) expect_name();
        node->add(std::move(alias));
      } while (accept_op(","));
      return node;
    }
    if (accept_kw("from")) return import_from(ln);
    if (at_kw("yield")) {
      auto node = make(NodeKind::Expr, ln);
      node->add(yield_expr());
      return node;
    }
    return expr_stmt();
  }

  bool at_stmt_end() const {
    return at(TokenKind::kNewline) || at(TokenKind::kEnd) || at_op(";");
  }

  void dotted_name() {
    expect_name();
    while (accept_op(".")) expect_name();
  }

  Ptr import_from(int ln) {
    auto node = make(NodeKind::ImportFrom, ln);
    bool has_dots = false;
    while (at_op(".") || at_op("...")) {
      has_dots = true;
      ++pos_;
    }
    if (!at_kw("import")) {
      dotted_name();
    } else if (!has_dots) {
      fail("invalid syntax");
    }
    expect_kw("import");
    if (accept_op("*")) {
      node->add(make(NodeKind::alias, ln));
      return node;
    }
    const bool paren = accept_op("(");
    do {
      if (paren && at_op(")")) break;
      auto alias = make(NodeKind::alias, line());
      expect_name();
      if (accept_kw("as")) expect_name();
      node->add(std::move(alias));
    } while (accept_op(","));
    if (paren) expect_op(")");
    return node;
  }

  Ptr expr_stmt() {
    const int ln = line();
    auto first = testlist_star_expr();
    if (at_op(":")) {
      ++pos_;
      auto node = make(NodeKind::AnnAssign, ln);
      const NodeKind k = first->kind;
      if (k != NodeKind::Name && k != NodeKind::Attribute && k != NodeKind::Subscript) {
        fail("illegal target for annotation");
      }
      set_context(*first, NodeKind::Store);
      node->add(std::move(first));
      node->add(test());
      if (accept_op("=")) node->add(at_kw("yield") ? yield_expr() : testlist_star_expr());
      return node;
    }
    for (const auto& op : kAugOps) {
      if (at_op(op.text)) {
        ++pos_;
        const NodeKind k = first->kind;
        if (k != NodeKind::Name && k != NodeKind::Attribute && k != NodeKind::Subscript) {
          fail("illegal expression for augmented assignment");
        }
        auto node = make(NodeKind::AugAssign, ln);
        set_context(*first, NodeKind::Store);
        node->add(std::move(first));
        node->add(make(op.kind, ln));
        node->add(at_kw("yield") ? yield_expr() : testlist());
        return node;
      }
    }
    if (!at_op("=")) {
      auto node = make(NodeKind::Expr, ln);
      node->add(std::move(first));
      return node;
    }
    std::vector<Ptr> parts;
    parts.push_back(std::move(first));
    while (accept_op("=")) {
      parts.push_back(at_kw("yield") ? yield_expr() : testlist_star_expr());
    }
    auto node = make(NodeKind::Assign, ln);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      set_context(*parts[i], NodeKind::Store);
      node->add(std::move(parts[i]));
    }
    node->add(std::move(parts.back()));
    return node;
  }

  // -- assignment targets --------------------------------------------------

  static Node* ctx_child(Node& n) {
    if (n.children.empty()) return nullptr;
    Node* last = n.children.back().node.get();
    return is_ctx(last->kind) ? last : nullptr;
  }

  void set_context(Node& n, NodeKind ctx) {
    switch (n.kind) {
      case NodeKind::Name:
      case NodeKind::Attribute:
      case NodeKind::Subscript:
        ctx_child(n)->kind = ctx;
        return;
      case NodeKind::Starred:
        ctx_child(n)->kind = ctx;
        set_context(*n.children.front().node, ctx);
        return;
      case NodeKind::List:
      case NodeKind::Tuple:
        ctx_child(n)->kind = ctx;
        for (auto& c : n.children) {
          if (!is_ctx(c.node->kind)) set_context(*c.node, ctx);
        }
        return;
      default:
        fail(ctx == NodeKind::Del ? "cannot delete expression"
                                  : "cannot assign to expression");
    }
  }

  // for-loop and comprehension targets.
  Ptr target_list() {
    const int ln = line();
    std::vector<Ptr> elts;
    bool comma = false;
    elts.push_back(star_or_expr());
    while (at_op(",")) {
      ++pos_;
      comma = true;
      if (at_kw("in") || at_op("=")) break;
      elts.push_back(star_or_expr());
    }
    Ptr target;
    if (!comma) {
      target = std::move(elts.front());
    } else {
      target = sequence(NodeKind::Tuple, ln, std::move(elts));
    }
    set_context(*target, NodeKind::Store);
    return target;
  }

  Ptr star_target_atom() { return star_or_expr(); }

  // -- expressions ---------------------------------------------------------

  Ptr sequence(NodeKind kind, int ln, std::vector<Ptr> elts) {
    auto node = make(kind, ln);
    for (auto& e : elts) node->add(std::move(e));
    node->add(make_ctx(NodeKind::Load));
    return node;
  }

  Ptr star_or_expr() {
    if (at_op("*")) {
      auto node = make(NodeKind::Starred, line());
      ++pos_;
      node->add(expr());
      node->add(make_ctx(NodeKind::Load));
      return node;
    }
    return expr();
  }

  Ptr star_or_named() {
    if (at_op("*")) return star_or_expr();
    return namedexpr_test();
  }

  bool at_expr_terminator() const {
    if (at(TokenKind::kNewline) || at(TokenKind::kEnd)) return true;
    if (peek().kind == TokenKind::kOp) {
      const auto t = peek().text;
      if (t == ")" || t == "]" || t == "}" || t == "=" || t == ":" || t == ";") return true;
      return t.size() >= 2 && t.back() == '=' && t != "==" && t != "<=" && t != ">=" &&
             t != "!=";
    }
    return at_kw("in") || at_kw("for") || at_kw("if") || at_kw("else") ||
           at_kw("async") || at_kw("from");
  }

  // Comma-separated list that becomes a Tuple when a comma is present.
  Ptr testlist_star_expr() {
    const int ln = line();
    auto first = star_or_named();
    if (!at_op(",")) {
      if (first->kind == NodeKind::NamedExpr && !parenthesized_last_) {
        fail("invalid syntax: unparenthesized assignment expression");
      }
      return first;
    }
    std::vector<Ptr> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_expr_terminator()) break;
      elts.push_back(star_or_named());
    }
    return sequence(NodeKind::Tuple, ln, std::move(elts));
  }

  Ptr testlist() {
    const int ln = line();
    auto first = test();
    if (!at_op(",")) return first;
    std::vector<Ptr> elts;
    elts.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_expr_terminator()) break;
      elts.push_back(test());
    }
    return sequence(NodeKind::Tuple, ln, std::move(elts));
  }

  Ptr namedexpr_test() {
    parenthesized_last_ = false;
    if (at_plain_name() && at_op(":=", 1)) {
      auto node = make(NodeKind::NamedExpr, line());
      auto target = make(NodeKind::Name, line());
      ++pos_;
      target->add(make_ctx(NodeKind::Store));
      ++pos_;  // :=
      node->add(std::move(target));
      node->add(test());
      return node;
    }
    auto e = test();
    if (at_op(":=")) fail("cannot use assignment expressions with this target");
    return e;
  }

  Ptr test() {
    if (at_kw("lambda")) return lambdef(true);
    const int ln = line();
    auto body = or_test();
    if (at_kw("if")) {
      ++pos_;
      auto node = make(NodeKind::IfExp, ln);
      node->add(or_test(), Field::kTest);
      expect_kw("else");
      node->add(std::move(body));
      node->add(test());
      return node;
    }
    return body;
  }

  Ptr test_nocond() {
    if (at_kw("lambda")) return lambdef(false);
    return or_test();
  }

  Ptr lambdef(bool allow_cond) {
    auto node = make(NodeKind::Lambda, line());
    expect_kw("lambda");
    node->add(arguments(":", false));
    expect_op(":");
    node->add(allow_cond ? test() : test_nocond());
    return node;
  }

  Ptr bool_chain(NodeKind op, std::string_view kw, Ptr (Parser::*next)()) {
    const int ln = line();
    auto first = (this->*next)();
    if (!at_kw(kw)) return first;
    auto node = make(NodeKind::BoolOp, ln);
    node->add(make(op, ln));
    node->add(std::move(first));
    while (accept_kw(kw)) node->add((this->*next)());
    return node;
  }

  Ptr or_test() { return bool_chain(NodeKind::Or, "or", &Parser::and_test); }
  Ptr and_test() { return bool_chain(NodeKind::And, "and", &Parser::not_test); }

  Ptr not_test() {
    if (at_kw("not")) {
      auto node = make(NodeKind::UnaryOp, line());
      ++pos_;
      node->add(make(NodeKind::Not, node->line));
      node->add(not_test());
      return node;
    }
    return comparison();
  }

  bool comp_op(NodeKind* out) {
    if (peek().kind == TokenKind::kOp) {
      static constexpr std::array<OpEntry, 6> kCmp = {{{"<", NodeKind::Lt},
                                                      {">", NodeKind::Gt},
                                                      {"==", NodeKind::Eq},
                                                      {">=", NodeKind::GtE},
                                                      {"<=", NodeKind::LtE},
                                                      {"!=", NodeKind::NotEq}}};
      for (const auto& c : kCmp) {
        if (peek().text == c.text) {
          ++pos_;
          *out = c.kind;
          return true;
        }
      }
      return false;
    }
    if (at_kw("in")) {
      ++pos_;
      *out = NodeKind::In;
      return true;
    }
    if (at_kw("not") && at_kw("in", 1)) {
      pos_ += 2;
      *out = NodeKind::NotIn;
      return true;
    }
    if (at_kw("is")) {
      ++pos_;
      *out = NodeKind::Is;
      if (accept_kw("not")) *out = NodeKind::IsNot;
      return true;
    }
    return false;
  }

  Ptr comparison() {
    const int ln = line();
    auto left = expr();
    NodeKind op{};
    std::vector<Ptr> ops, comparators;
    while (comp_op(&op)) {
      ops.push_back(make(op, ln));
      comparators.push_back(expr());
    }
    if (ops.empty()) return left;
    auto node = make(NodeKind::Compare, ln);
    node->add(std::move(left));
    for (auto& o : ops) node->add(std::move(o));
    for (auto& c : comparators) node->add(std::move(c));
    return node;
  }

  Ptr binary_level(int level) {
    // Levels from loosest to tightest.
    static constexpr std::array<std::array<OpEntry, 5>, 6> kLevels = {{
        {{{"|", NodeKind::BitOr}}},
        {{{"^", NodeKind::BitXor}}},
        {{{"&", NodeKind::BitAnd}}},
        {{{"<<", NodeKind::LShift}, {">>", NodeKind::RShift}}},
        {{{"+", NodeKind::Add}, {"-", NodeKind::Sub}}},
        {{{"*", NodeKind::Mult},
          {"/", NodeKind::Div},
          {"%", NodeKind::Mod},
          {"//", NodeKind::FloorDiv},
          {"@", NodeKind::MatMult}}},
    }};
    if (level == static_cast<int>(kLevels.size())) return factor();
    auto left = binary_level(level + 1);
    while (peek().kind == TokenKind::kOp) {
      const OpEntry* match = nullptr;
      for (const auto& e : kLevels[static_cast<std::size_t>(level)]) {
        if (!e.text.empty() && peek().text == e.text) match = &e;
      }
      if (match == nullptr) break;
      const int ln = line();
      ++pos_;
      auto node = make(NodeKind::BinOp, ln);
      node->add(std::move(left));
      node->add(make(match->kind, ln));
      node->add(binary_level(level + 1));
      left = std::move(node);
    }
    return left;
  }

  Ptr expr() { return binary_level(0); }

  Ptr factor() {
    NodeKind op{};
    if (at_op("+")) {
      op = NodeKind::UAdd;
    } else if (at_op("-")) {
      op = NodeKind::USub;
    } else if (at_op("~")) {
      op = NodeKind::Invert;
    } else {
      return power();
    }
    auto node = make(NodeKind::UnaryOp, line());
    ++pos_;
    node->add(make(op, node->line));
    node->add(factor());
    return node;
  }

  Ptr power() {
    const int ln = line();
    Ptr base;
    if (at_kw("await")) {
      ++pos_;
      base = make(NodeKind::Await, ln);
      base->add(primary());
    } else {
      base = primary();
    }
    if (accept_op("**")) {
      auto node = make(NodeKind::BinOp, ln);
      node->add(std::move(base));
      node->add(make(NodeKind::Pow, ln));
      node->add(factor());
      return node;
    }
    return base;
  }

  Ptr primary() {
    auto node = atom();
    while (true) {
      const int ln = line();
      if (accept_op("(")) {
        auto call = make(NodeKind::Call, ln);
        call->add(std::move(node));
        call_arguments(*call);
        expect_op(")");
        node = std::move(call);
      } else if (accept_op("[")) {
        auto sub = make(NodeKind::Subscript, ln);
        sub->add(std::move(node));
        sub->add(subscript_list());
        expect_op("]");
        sub->add(make_ctx(NodeKind::Load));
        node = std::move(sub);
      } else if (accept_op(".")) {
        auto attr = make(NodeKind::Attribute, ln);
        attr->add(std::move(node));
        expect_name();
        attr->add(make_ctx(NodeKind::Load));
        node = std::move(attr);
      } else {
        return node;
      }
    }
  }

  void call_arguments(Node& call) {
    std::vector<Ptr> args, keywords;
    bool seen_keyword = false, seen_double_star = false;
    while (!at_op(")")) {
      const int ln = line();
      if (at_op("*")) {
        if (seen_double_star) fail("iterable argument unpacking follows keyword argument unpacking");
        ++pos_;
        auto star = make(NodeKind::Starred, ln);
        star->add(test());
        star->add(make_ctx(NodeKind::Load));
        args.push_back(std::move(star));
      } else if (accept_op("**")) {
        seen_double_star = true;
        auto kw = make(NodeKind::keyword, ln);
        kw->add(test());
        keywords.push_back(std::move(kw));
      } else if (at_plain_name() && at_op("=", 1)) {
        seen_keyword = true;
        pos_ += 2;
        auto kw = make(NodeKind::keyword, ln);
        kw->add(test());
        keywords.push_back(std::move(kw));
      } else {
        if (seen_double_star) fail("positional argument follows keyword argument unpacking");
        if (seen_keyword) fail("positional argument follows keyword argument");
        auto e = namedexpr_test();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
          if (!args.empty() || !keywords.empty()) fail("Generator expression must be parenthesized");
          auto gen = make(NodeKind::GeneratorExp, ln);
          gen->add(std::move(e));
          comprehension_clauses(*gen);
          if (!at_op(")")) fail("Generator expression must be parenthesized");
          e = std::move(gen);
        }
        args.push_back(std::move(e));
      }
      if (!at_op(")")) expect_op(",");
    }
    for (auto& a : args) call.add(std::move(a));
    for (auto& k : keywords) call.add(std::move(k));
  }

  Ptr subscript_list() {
    const int ln = line();
    std::vector<Ptr> items;
    bool trailing = false;
    items.push_back(subscript());
    while (accept_op(",")) {
      if (at_op("]")) {
        trailing = true;
        break;
      }
      items.push_back(subscript());
    }
    if (items.size() == 1 && !trailing) return std::move(items.front());
    return sequence(NodeKind::Tuple, ln, std::move(items));
  }

  Ptr subscript() {
    const int ln = line();
    Ptr lower;
    if (!at_op(":")) {
      lower = at_op("*") ? star_or_expr() : namedexpr_test();
      if (!at_op(":")) return lower;
    }
    auto slice = make(NodeKind::Slice, ln);
    expect_op(":");
    if (lower) slice->add(std::move(lower));
    if (!at_op(":") && !at_op(",") && !at_op("]")) slice->add(test());
    if (accept_op(":")) {
      if (!at_op(",") && !at_op("]")) slice->add(test());
    }
    return slice;
  }

  void comprehension_clauses(Node& owner) {
    while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      auto comp = make(NodeKind::comprehension, line());
      accept_kw("async");
      expect_kw("for");
      comp->add(target_list());
      expect_kw("in");
      comp->add(or_test());
      while (at_kw("if")) {
        ++pos_;
        comp->add(test_nocond(), Field::kIfs);
      }
      owner.add(std::move(comp));
    }
  }

  bool at_comp_for() const { return at_kw("for") || (at_kw("async") && at_kw("for", 1)); }

  Ptr yield_expr() {
    const int ln = line();
    expect_kw("yield");
    if (accept_kw("from")) {
      auto node = make(NodeKind::YieldFrom, ln);
      node->add(test());
      return node;
    }
    auto node = make(NodeKind::Yield, ln);
    if (!at_op(")") && !at_op("]") && !at_op("}") && !at_stmt_end() && !at_op("=")) {
      node->add(testlist_star_expr());
    }
    return node;
  }

  Ptr atom() {
    const Token& tok = peek();
    const int ln = tok.line;
    switch (tok.kind) {
      case TokenKind::kName: {
        if (tok.text == "None" || tok.text == "True" || tok.text == "False") {
          ++pos_;
          return make(NodeKind::Constant, ln);
        }
        if (is_keyword(tok.text)) fail("invalid syntax near '" + std::string(tok.text) + "'");
        ++pos_;
        auto name = make(NodeKind::Name, ln);
        name->add(make_ctx(NodeKind::Load));
        return name;
      }
      case TokenKind::kNumber:
        ++pos_;
        return make(NodeKind::Constant, ln);
      case TokenKind::kString:
        return strings();
      case TokenKind::kOp:
        break;
      default:
        fail("invalid syntax");
    }
    if (accept_op("...")) return make(NodeKind::Constant, ln);
    if (accept_op("(")) {
      if (accept_op(")")) return sequence(NodeKind::Tuple, ln, {});
      if (at_kw("yield")) {
        auto y = yield_expr();
        expect_op(")");
        return y;
      }
      auto first = star_or_named();
      if (at_comp_for()) {
        auto gen = make(NodeKind::GeneratorExp, ln);
        gen->add(std::move(first));
        comprehension_clauses(*gen);
        expect_op(")");
        return gen;
      }
      if (accept_op(")")) {
        parenthesized_last_ = true;
        return first;
      }
      std::vector<Ptr> elts;
      elts.push_back(std::move(first));
      while (accept_op(",")) {
        if (at_op(")")) break;
        elts.push_back(star_or_named());
      }
      expect_op(")");
      return sequence(NodeKind::Tuple, ln, std::move(elts));
    }
    if (accept_op("[")) {
      if (accept_op("]")) return sequence(NodeKind::List, ln, {});
      auto first = star_or_named();
      if (at_comp_for()) {
        auto comp = make(NodeKind::ListComp, ln);
        comp->add(std::move(first));
        comprehension_clauses(*comp);
        expect_op("]");
        return comp;
      }
      std::vector<Ptr> elts;
      elts.push_back(std::move(first));
      while (accept_op(",")) {
        if (at_op("]")) break;
        elts.push_back(star_or_named());
      }
      expect_op("]");
      return sequence(NodeKind::List, ln, std::move(elts));
    }
    if (accept_op("{")) return brace_display(ln);
    fail("invalid syntax near '" + std::string(tok.text) + "'");
  }

  Ptr brace_display(int ln) {
    if (accept_op("}")) return make(NodeKind::Dict, ln);
    // Dict when the first entry is `**x` or `k: v`.
    if (at_op("**") || dict_ahead()) {
      std::vector<Ptr> keys_values;
      bool first = true;
      while (!at_op("}")) {
        if (accept_op("**")) {
          keys_values.push_back(expr());
        } else {
          keys_values.push_back(test());
          expect_op(":");
          keys_values.push_back(test());
          if (first && at_comp_for()) {
            auto comp = make(NodeKind::DictComp, ln);
            for (auto& kv : keys_values) comp->add(std::move(kv));
            comprehension_clauses(*comp);
            expect_op("}");
            return comp;
          }
        }
        first = false;
        if (!at_op("}")) expect_op(",");
      }
      expect_op("}");
      auto node = make(NodeKind::Dict, ln);
      for (auto& kv : keys_values) node->add(std::move(kv));
      return node;
    }
    auto first = star_or_named();
    if (at_comp_for()) {
      auto comp = make(NodeKind::SetComp, ln);
      comp->add(std::move(first));
      comprehension_clauses(*comp);
      expect_op("}");
      return comp;
    }
    auto node = make(NodeKind::Set, ln);
    node->add(std::move(first));
    while (accept_op(",")) {
      if (at_op("}")) break;
      node->add(star_or_named());
    }
    expect_op("}");
    return node;
  }

  // Scans ahead for a ':' at bracket depth 0 before the first ',' or '}'.
  bool dict_ahead() const {
    int depth = 0;
    bool in_lambda = false;
    for (std::size_t i = pos_; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == TokenKind::kEnd) return false;
      if (t.kind == TokenKind::kName && t.text == "lambda" && depth == 0) in_lambda = true;
      if (t.kind != TokenKind::kOp) continue;
      if (t.text == "(" || t.text == "[" || t.text == "{") {
        ++depth;
      } else if (t.text == ")" || t.text == "]" || t.text == "}") {
        if (depth == 0) return false;
        --depth;
      } else if (depth == 0 && t.text == ":") {
        if (in_lambda) {
          in_lambda = false;
          continue;
        }
        return true;
      } else if (depth == 0 && t.text == ",") {
        return false;
      }
    }
    return false;
  }

  Ptr strings();

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  bool parenthesized_last_ = false;
};

// ---------------------------------------------------------------------------
// String literals and f-strings

struct StringPiece {
  bool is_expr = false;
  bool nonempty_literal = false;
  Ptr value;  // FormattedValue when is_expr
};

std::vector<Token> significant_tokens(std::string_view source, std::string* error) {
  TokenStream ts = tokenize(source);
  if (!ts.errors.empty()) {
    *error = ts.errors.front();
    return {};
  }
  std::vector<Token> out;
  out.reserve(ts.tokens.size());
  for (const Token& t : ts.tokens) {
    if (t.kind == TokenKind::kComment || t.kind == TokenKind::kNl) continue;
    out.push_back(t);
  }
  return out;
}

Ptr parse_fstring_expr(std::string_view text, int line) {
  std::string wrapped = "(" + std::string(text) + ")";
  std::string error;
  auto toks = significant_tokens(wrapped, &error);
  if (!error.empty()) throw SyntaxError{line, "f-string: " + error};
  // Drop the trailing NEWLINE the tokenizer adds to close the line.
  std::vector<Token> expr_tokens;
  for (const Token& t : toks) {
    if (t.kind == TokenKind::kNewline) continue;
    expr_tokens.push_back(Token{t.kind, t.text, line, t.col});
  }
  // The token views point into `wrapped`, which lives until parsing ends.
  Parser sub(std::move(expr_tokens));
  return sub.fstring_expression();
}

class FStringScanner {
 public:
  FStringScanner(std::string_view body, bool raw, int line)
      : body_(body), raw_(raw), line_(line) {}

  // Parses replacement fields and literal runs until `stop` ('}' for a
  // nested format spec) or the end of the body.
  void scan(std::vector<StringPiece>& out, bool nested) {
    while (pos_ < body_.size()) {
      const char c = body_[pos_];
      if (c == '{') {
        if (!nested && pos_ + 1 < body_.size() && body_[pos_ + 1] == '{') {
          literal(out, true);
          pos_ += 2;
          continue;
        }
        ++pos_;
        replacement_field(out);
        continue;
      }
      if (c == '}') {
        if (nested) return;
        if (pos_ + 1 < body_.size() && body_[pos_ + 1] == '}') {
          literal(out, true);
          pos_ += 2;
          continue;
        }
        throw SyntaxError{line_, "f-string: single '}' is not allowed"};
      }
      if (c == '\\' && !raw_) {
        if (pos_ + 1 < body_.size() && (body_[pos_ + 1] == '\n' || body_[pos_ + 1] == '\r')) {
          pos_ += 2;  // line continuation contributes nothing
          continue;
        }
        if (pos_ + 2 < body_.size() && body_[pos_ + 1] == 'N' && body_[pos_ + 2] == '{') {
          const auto close = body_.find('}', pos_);
          pos_ = close == std::string_view::npos ? body_.size() : close + 1;
          literal(out, true);
          continue;
        }
        pos_ += 2;
        literal(out, true);
        continue;
      }
      ++pos_;
      literal(out, true);
    }
    if (nested) throw SyntaxError{line_, "f-string: expecting '}'"};
  }

 private:
  static void literal(std::vector<StringPiece>& out, bool nonempty) {
    if (!out.empty() && !out.back().is_expr) {
      out.back().nonempty_literal = out.back().nonempty_literal || nonempty;
      return;
    }
    StringPiece piece;
    piece.nonempty_literal = nonempty;
    out.push_back(std::move(piece));
  }

  void replacement_field(std::vector<StringPiece>& out) {
    const std::size_t start = pos_;
    int depth = 0;
    char quote = 0;
    std::size_t end = std::string_view::npos;
    bool debug = false;
    for (; pos_ < body_.size(); ++pos_) {
      const char c = body_[pos_];
      if (quote != 0) {
        if (c == quote) quote = 0;
        continue;
      }
      if (c == '\'' || c == '"') {
        quote = c;
      } else if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
        --depth;
      } else if (depth == 0) {
        if (c == '}' || c == ':') {
          end = pos_;
          break;
        }
        if (c == '!' && pos_ + 1 < body_.size() && body_[pos_ + 1] != '=') {
          end = pos_;
          break;
        }
        if (c == '=' && pos_ + 1 < body_.size() &&
            (body_[pos_ + 1] == '}' || body_[pos_ + 1] == '!' || body_[pos_ + 1] == ':')) {
          const char prev = pos_ > start ? body_[pos_ - 1] : '\0';
          if (prev != '=' && prev != '!' && prev != '<' && prev != '>') {
            debug = true;
            end = pos_;
            ++pos_;
            break;
          }
        }
      }
    }
    if (end == std::string_view::npos) throw SyntaxError{line_, "f-string: expecting '}'"};
    std::string_view text = body_.substr(start, end - start);
    if (text.find_first_not_of(" \t\r\n\f") == std::string_view::npos) {
      throw SyntaxError{line_, "f-string: empty expression not allowed"};
    }
    auto value = parse_fstring_expr(text, line_);
    if (debug) literal(out, true);  // the "expr=" text
    auto formatted = make(NodeKind::FormattedValue, line_);
    formatted->add(std::move(value));
    if (pos_ < body_.size() && body_[pos_] == '!') {
      pos_ += 2;  // conversion character
    }
    if (pos_ < body_.size() && body_[pos_] == ':') {
      ++pos_;
      std::vector<StringPiece> spec;
      scan(spec, true);
      auto spec_node = make(NodeKind::JoinedStr, line_);
      for (auto& p : spec) {
        if (p.is_expr) {
          spec_node->add(std::move(p.value));
        } else if (p.nonempty_literal) {
          spec_node->add(make(NodeKind::Constant, line_));
        }
      }
      formatted->add(std::move(spec_node));
    }
    if (pos_ >= body_.size() || body_[pos_] != '}') {
      throw SyntaxError{line_, "f-string: expecting '}'"};
    }
    ++pos_;
    StringPiece piece;
    piece.is_expr = true;
    piece.value = std::move(formatted);
    out.push_back(std::move(piece));
  }

  std::string_view body_;
  bool raw_;
  int line_;
  std::size_t pos_ = 0;
};

Ptr Parser::strings() {
  const int ln = line();
  std::vector<StringPiece> pieces;
  bool any_f = false;
  bool any_bytes = false;
  bool any_text = false;
  // First pass decides Constant vs JoinedStr.
  for (std::size_t k = 0; peek(k).kind == TokenKind::kString; ++k) {
    const auto text = peek(k).text;
    const auto q = text.find_first_of("'\"");
    const auto prefix = text.substr(0, q);
    bool f = false;
    bool b = false;
    for (char c : prefix) {
      f = f || c == 'f' || c == 'F';
      b = b || c == 'b' || c == 'B';
    }
    any_f = any_f || f;
    any_bytes = any_bytes || b;
    any_text = any_text || !b;
  }
  if (any_bytes && any_text) fail("cannot mix bytes and nonbytes literals");
  if (!any_f) {
    while (at(TokenKind::kString)) ++pos_;
    return make(NodeKind::Constant, ln);
  }
  while (at(TokenKind::kString)) {
    const auto text = toks_[pos_].text;
    ++pos_;
    const auto q = text.find_first_of("'\"");
    const auto prefix = text.substr(0, q);
    bool f = false;
    bool raw = false;
    for (char c : prefix) {
      f = f || c == 'f' || c == 'F';
      raw = raw || c == 'r' || c == 'R';
    }
    const bool triple = text.size() >= q + 6 && text[q + 1] == text[q] && text[q + 2] == text[q];
    const std::size_t quote_len = triple ? 3 : 1;
    const auto body = text.substr(q + quote_len, text.size() - q - 2 * quote_len);
    if (f) {
      FStringScanner(body, raw, ln).scan(pieces, false);
    } else if (!body.empty()) {
      const bool only_continuations =
          !raw && body.find_first_not_of("\\\r\n") == std::string_view::npos &&
          body.find("\\\\") == std::string_view::npos;
      if (!only_continuations) {
        if (!pieces.empty() && !pieces.back().is_expr) {
          pieces.back().nonempty_literal = true;
        } else {
          StringPiece p;
          p.nonempty_literal = true;
          pieces.push_back(std::move(p));
        }
      }
    }
  }
  auto joined = make(NodeKind::JoinedStr, ln);
  for (auto& p : pieces) {
    if (p.is_expr) {
      joined->add(std::move(p.value));
    } else if (p.nonempty_literal) {
      joined->add(make(NodeKind::Constant, ln));
    }
  }
  return joined;
}

}  // namespace

std::string_view node_kind_name(NodeKind kind) {
  return kNodeNames[static_cast<std::size_t>(kind)];
}

Node* Node::add(std::unique_ptr<Node> child, Field field) {
  children.push_back(Child{field, std::move(child)});
  return children.back().node.get();
}

std::vector<const Node*> Node::field(Field f) const {
  std::vector<const Node*> out;
  for (const auto& c : children) {
    if (c.field == f) out.push_back(c.node.get());
  }
  return out;
}

ParseResult parse_module(std::string_view source) {
  ParseResult result;
  std::string error;
  auto toks = significant_tokens(source, &error);
  if (!error.empty()) {
    result.error = error;
    return result;
  }
  try {
    Parser parser(std::move(toks));
    result.module = parser.file();
  } catch (const SyntaxError& e) {
    result.error = "line " + std::to_string(e.line) + ": " + e.message;
  }
  return result;
}

}  // namespace iojudge::py
