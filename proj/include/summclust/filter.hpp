#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "summclust/dataset.hpp"

namespace summclust {

// Sample restrictions are conjunctions of `column OP literal` joined by `&`,
// with OP one of == != < <= > >=. Literals are numbers, or bare/quoted
// strings when the column is categorical (== and != only).

namespace filter_detail {

enum class Op { eq, ne, lt, le, gt, ge };

struct Term {
  std::string column;
  Op op;
  std::string literal;
};

struct Lexer {
  const std::string& src;
  std::size_t pos = 0;

  explicit Lexer(const std::string& s) : src(s) {}

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= src.size();
  }
  char peek() {
    skip_ws();
    return pos < src.size() ? src[pos] : '\0';
  }

  std::string ident_or_literal() {
    skip_ws();
    if (pos >= src.size()) throw std::invalid_argument("filter: unexpected end of expression");
    if (src[pos] == '"' || src[pos] == '\'') {
      const char quote = src[pos++];
      std::string out;
      while (pos < src.size() && src[pos] != quote) out.push_back(src[pos++]);
      if (pos >= src.size()) throw std::invalid_argument("filter: unterminated string literal");
      ++pos;
      return out;
    }
    std::size_t start = pos;
    while (pos < src.size()) {
      const char c = src[pos];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
          c == '-' || c == '+') {
        ++pos;
      } else {
        break;
      }
    }
    if (pos == start) {
      throw std::invalid_argument(std::string("filter: unexpected character '") +
                                  src[pos] + "'");
    }
    return src.substr(start, pos - start);
  }

  Op op() {
    skip_ws();
    auto two = [&](char a, char b) {
      return pos + 1 < src.size() && src[pos] == a && src[pos + 1] == b;
    };
    if (two('=', '=')) { pos += 2; return Op::eq; }
    if (two('!', '=')) { pos += 2; return Op::ne; }
    if (two('<', '=')) { pos += 2; return Op::le; }
    if (two('>', '=')) { pos += 2; return Op::ge; }
    if (pos < src.size() && src[pos] == '<') { ++pos; return Op::lt; }
    if (pos < src.size() && src[pos] == '>') { ++pos; return Op::gt; }
    throw std::invalid_argument("filter: expected comparison operator");
  }
};

inline std::vector<Term> parse(const std::string& expr) {
  Lexer lex(expr);
  std::vector<Term> terms;
  if (lex.done()) throw std::invalid_argument("filter: empty expression");
  for (;;) {
    Term t;
    t.column = lex.ident_or_literal();
    t.op = lex.op();
    t.literal = lex.ident_or_literal();
    terms.push_back(std::move(t));
    if (lex.done()) break;
    if (lex.peek() != '&') {
      throw std::invalid_argument("filter: expected '&' between terms");
    }
    ++lex.pos;
    if (lex.done()) throw std::invalid_argument("filter: trailing '&'");
  }
  return terms;
}

inline bool compare(double lhs, Op op, double rhs) {
  switch (op) {
    case Op::eq: return lhs == rhs;
    case Op::ne: return lhs != rhs;
    case Op::lt: return lhs < rhs;
    case Op::le: return lhs <= rhs;
    case Op::gt: return lhs > rhs;
    case Op::ge: return lhs >= rhs;
  }
  return false;
}

}  // namespace filter_detail

inline std::vector<std::string> filter_columns(const std::string& expr) {
  std::vector<std::string> out;
  for (const auto& t : filter_detail::parse(expr)) out.push_back(t.column);
  return out;
}

inline Dataset apply_sample_filter(const Dataset& data, const std::string& expr) {
  using filter_detail::Op;
  const auto terms = filter_detail::parse(expr);

  struct Bound {
    const Column* col = nullptr;  // null: constant term (literal OP literal)
    Op op;
    double num = 0.0;
    int level = -1;     // categorical comparisons match a level code
    bool numeric = true;
    bool constant_value = true;
  };
  std::vector<Bound> bounds;
  for (const auto& t : terms) {
    Bound b;
    b.op = t.op;
    if (!data.has_column(t.column)) {
      // allow tautologies like 1==1: a numeric literal on the left folds
      // to a constant; anything else really is a missing column
      double lhs;
      if (!detail::parse_double(t.column, &lhs)) {
        throw std::invalid_argument("missing column '" + t.column + "'");
      }
      double rhs;
      if (!detail::parse_double(t.literal, &rhs)) {
        throw std::invalid_argument("filter: non-numeric literal '" + t.literal + "'");
      }
      b.constant_value = filter_detail::compare(lhs, t.op, rhs);
      bounds.push_back(b);
      continue;
    }
    b.col = &data.column(t.column);
    b.numeric = b.col->is_numeric();
    if (b.numeric) {
      if (!detail::parse_double(t.literal, &b.num)) {
        throw std::invalid_argument("filter: non-numeric literal '" + t.literal +
                                    "' for numeric column '" + t.column + "'");
      }
    } else {
      if (t.op != Op::eq && t.op != Op::ne) {
        throw std::invalid_argument("filter: only == and != apply to categorical column '" +
                                    t.column + "'");
      }
      b.level = -1;
      for (std::size_t l = 0; l < b.col->levels.size(); ++l) {
        if (b.col->levels[l] == t.literal) {
          b.level = static_cast<int>(l);
          break;
        }
      }
    }
    bounds.push_back(b);
  }

  std::vector<int> rows;
  const std::size_t n = data.n_rows();
  for (std::size_t r = 0; r < n; ++r) {
    bool keep = true;
    for (const auto& b : bounds) {
      if (!b.col) {
        if (!b.constant_value) { keep = false; break; }
      } else if (b.numeric) {
        if (!filter_detail::compare(b.col->values[r], b.op, b.num)) { keep = false; break; }
      } else {
        const bool match = b.col->codes[r] == b.level;
        if ((b.op == Op::eq) != match) { keep = false; break; }
      }
    }
    if (keep) rows.push_back(static_cast<int>(r));
  }
  return subset_rows(data, rows);
}

}  // namespace summclust
