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

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "iojudge/pysyntax.hpp"

namespace iojudge::py {
namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False",  "None",     "True",  "and",    "as",     "assert", "async",
    "await",  "break",    "class", "continue", "def",  "del",    "elif",
    "else",   "except",   "finally", "for",  "from",   "global", "if",
    "import", "in",       "is",    "lambda", "nonlocal", "not",  "or",
    "pass",   "raise",    "return", "try",   "while",  "with",   "yield"};

// Longest match first.
constexpr std::array<std::string_view, 48> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "!=", "%=", "&=", "**", "*=", "+=", "-=",
    "->",  "//",  "/=",  ":=",  "<<",  "<=", "==", ">=", ">>", "@=", "^=", "|=",
    "~",   "%",   "&",   "(",   ")",   "*",  "+",  ",",  "-",  ".",  "/",  ":",
    ";",   "<",   "=",   ">",   "@",   "[",  "]",  "^",  "{",  "|",  "}",  "!"};

bool ident_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool ident_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool valid_string_prefix(std::string_view prefix) {
  std::string p;
  for (char c : prefix) p.push_back(static_cast<char>(std::tolower(c)));
  static constexpr std::array<std::string_view, 11> kPrefixes = {
      "", "r", "u", "f", "b", "fr", "rf", "br", "rb", "ur", "ru"};
  if (p == "ur" || p == "ru") return false;  // not valid in Python 3
  return std::find(kPrefixes.begin(), kPrefixes.end(), p) != kPrefixes.end();
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    indents_.push_back(0);
    bool at_line_start = true;
    bool line_has_content = false;
    while (pos_ < src_.size()) {
      if (at_line_start && depth_ == 0) {
        at_line_start = false;
        if (!handle_indentation()) {  // blank or comment-only line
          at_line_start = true;
          continue;
        }
      }
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (c == ' ' || c == '\t' || c == '\f') {
        ++pos_;
        continue;
      }
      if (c == '\r' || c == '\n') {
        const std::size_t start = pos_;
        consume_newline();
        if (depth_ == 0 && line_has_content) {
          emit(TokenKind::kNewline, start, pos_ - start);
          line_has_content = false;
        } else {
          emit(TokenKind::kNl, start, pos_ - start);
        }
        at_line_start = depth_ == 0;
        continue;
      }
      if (c == '#') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
        emit(TokenKind::kComment, start, pos_ - start);
        continue;
      }
      if (c == '\\') {
        const std::size_t start = pos_;
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '\n' || src_[pos_] == '\r')) {
          consume_newline();  // explicit line joining
          continue;
        }
        error(start, "unexpected character after line continuation character");
        emit(TokenKind::kError, start, 1);
        continue;
      }
      line_has_content = true;
      if (ident_start(c)) {
        lex_name_or_string();
        continue;
      }
      if (std::isdigit(c) ||
          (c == '.' && pos_ + 1 < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
        continue;
      }
      if (c == '\'' || c == '"') {
        lex_string(pos_, pos_);
        continue;
      }
      lex_operator();
    }
    // Close the final logical line.
    if (line_has_content) emit(TokenKind::kNewline, src_.size(), 0);
    if (depth_ > 0) error(src_.size(), "unexpected EOF: unclosed bracket");
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit(TokenKind::kDedent, src_.size(), 0);
    }
    emit(TokenKind::kEnd, src_.size(), 0);
    return std::move(out_);
  }

 private:
  void consume_newline() {
    if (src_[pos_] == '\r') {
      ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '\n') ++pos_;
    } else {
      ++pos_;
    }
    ++line_;
    line_start_ = pos_;
  }

  void emit(TokenKind kind, std::size_t start, std::size_t len) {
    out_.tokens.push_back(Token{kind, src_.substr(std::min(start, src_.size()), len),
                                line_, static_cast<int>(start - std::min(start, line_start_))});
  }

  void error(std::size_t at, const std::string& message) {
    (void)at;
    out_.errors.push_back("line " + std::to_string(line_) + ": " + message);
  }

  // Returns false when the physical line carries no tokens.
  bool handle_indentation() {
    int col = 0;
    std::size_t p = pos_;
    while (p < src_.size()) {
      const char c = src_[p];
      if (c == ' ') {
        ++col;
      } else if (c == '\t') {
        col = (col / 8 + 1) * 8;
      } else if (c == '\f') {
        col = 0;
      } else {
        break;
      }
      ++p;
    }
    if (p >= src_.size()) {
      pos_ = p;
      return false;
    }
    const char c = src_[p];
    if (c == '\n' || c == '\r' || c == '#') {
      // Blank or comment-only line.
      pos_ = p;
      if (c == '#') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
        emit(TokenKind::kComment, start, pos_ - start);
      }
      if (pos_ < src_.size()) {
        const std::size_t start = pos_;
        consume_newline();
        emit(TokenKind::kNl, start, pos_ - start);
      }
      return false;
    }
    pos_ = p;
    if (col > indents_.back()) {
      indents_.push_back(col);
      emit(TokenKind::kIndent, line_start_, p - line_start_);
    } else {
      while (col < indents_.back()) {
        indents_.pop_back();
        emit(TokenKind::kDedent, p, 0);
      }
      if (col != indents_.back()) {
        error(p, "unindent does not match any outer indentation level");
        emit(TokenKind::kError, p, 0);
      }
    }
    return true;
  }

  void lex_name_or_string() {
    const std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < src_.size() && ident_char(static_cast<unsigned char>(src_[p]))) ++p;
    if (p < src_.size() && (src_[p] == '\'' || src_[p] == '"') && p - start <= 2 &&
        valid_string_prefix(src_.substr(start, p - start))) {
      lex_string(start, p);
      return;
    }
    pos_ = p;
    emit(TokenKind::kName, start, p - start);
  }

  void lex_number() {
    const std::size_t start = pos_;
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() &&
             (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
    };
    auto is_dec = [](unsigned char c) { return std::isdigit(c) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
        std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
      pos_ += 2;
      digits([](unsigned char c) { return std::isxdigit(c) != 0; });
    } else {
      digits(is_dec);
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        digits(is_dec);
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t q = pos_ + 1;
        if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
        if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) {
          pos_ = q;
          digits(is_dec);
        }
      }
      if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) ++pos_;
    }
    emit(TokenKind::kNumber, start, pos_ - start);
  }

  // `start` is the token start (prefix included), `quote_at` the opening quote.
  void lex_string(std::size_t start, std::size_t quote_at) {
    const char q = src_[quote_at];
    const int start_line = line_;
    const int start_col = static_cast<int>(start - line_start_);
    const bool triple = quote_at + 2 < src_.size() && src_[quote_at + 1] == q &&
                        src_[quote_at + 2] == q;
    std::size_t p = quote_at + (triple ? 3 : 1);
    bool closed = false;
    while (p < src_.size()) {
      const char c = src_[p];
      if (c == '\\') {
        if (p + 1 < src_.size() && (src_[p + 1] == '\n' || src_[p + 1] == '\r')) {
          pos_ = p + 1;
          consume_newline();
          p = pos_;
          continue;
        }
        p += 2;
        continue;
      }
      if (c == '\n' || c == '\r') {
        if (!triple) break;
        pos_ = p;
        consume_newline();
        p = pos_;
        continue;
      }
      if (c == q) {
        if (!triple) {
          ++p;
          closed = true;
          break;
        }
        if (p + 2 < src_.size() && src_[p + 1] == q && src_[p + 2] == q) {
          p += 3;
          closed = true;
          break;
        }
      }
      ++p;
    }
    p = std::min(p, src_.size());
    pos_ = p;
    Token tok{closed ? TokenKind::kString : TokenKind::kError,
              src_.substr(start, p - start), start_line, start_col};
    out_.tokens.push_back(tok);
    if (!closed) {
      out_.errors.push_back("line " + std::to_string(start_line) +
                            ": unterminated string literal");
    }
  }

  void lex_operator() {
    const std::size_t start = pos_;
    for (std::string_view op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        if (op == "!") break;  // lone '!' is not an operator
        pos_ += op.size();
        if (op == "(" || op == "[" || op == "{") ++depth_;
        if (op == ")" || op == "]" || op == "}") {
          if (depth_ == 0) {
            error(start, "unmatched '" + std::string(op) + "'");
          } else {
            --depth_;
          }
        }
        emit(TokenKind::kOp, start, op.size());
        return;
      }
    }
    // Unknown character: consume one UTF-8 sequence.
    std::size_t len = 1;
    while (pos_ + len < src_.size() &&
           (static_cast<unsigned char>(src_[pos_ + len]) & 0xC0) == 0x80)
      ++len;
    pos_ += len;
    error(start, "invalid character");
    emit(TokenKind::kError, start, len);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  int line_ = 1;
  int depth_ = 0;
  std::vector<int> indents_;
  TokenStream out_;
};

}  // namespace

bool is_keyword(std::string_view name) {
  return std::find(kKeywords.begin(), kKeywords.end(), name) != kKeywords.end();
}

TokenStream tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace iojudge::py
