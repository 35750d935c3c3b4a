#pragma once

// Canonical text form of expressions. Deterministic: terms follow the
// monomial order, factors are printed from the least to the greatest atom.
// The output is accepted by the expression parser.

#include <string>

#include "jetlax/expr.hpp"

namespace jetlax {

namespace detail {

inline std::string monomial_text(const Monomial& m) {
  std::string s;
  const auto& fs = m.factors();
  for (auto it = fs.rbegin(); it != fs.rend(); ++it) {
    if (!s.empty()) s += "*";
    s += it->atom.to_string();
    if (it->exp != 1) s += "^" + std::to_string(it->exp);
  }
  return s;
}

// Term without its sign.
inline std::string term_text(const Term& t) {
  Integer c = abs(t.coef);
  if (t.mono.is_one()) return c.get_str();
  if (c == 1) return monomial_text(t.mono);
  return c.get_str() + "*" + monomial_text(t.mono);
}

}  // namespace detail

inline std::string to_string(const Poly& p) {
  if (p.is_zero()) return "0";
  std::string s;
  bool first = true;
  for (const auto& t : p.terms()) {
    const bool neg = t.coef < 0;
    if (first) {
      s += neg ? "-" : "";
    } else {
      s += neg ? " - " : " + ";
    }
    s += detail::term_text(t);
    first = false;
  }
  return s;
}

/// True when the text of `p` can be used as an operand of * or / without
/// parentheses.
inline bool is_simple_product(const Poly& p) { return p.size() == 1; }

inline std::string to_string(const Expr& e) {
  if (e.den().is_one()) return to_string(e.num());
  std::string n = to_string(e.num());
  if (!is_simple_product(e.num())) n = "(" + n + ")";
  const Poly& d = e.den();
  std::string ds = to_string(d);
  const bool bare = d.size() == 1 && d.lead().coef == 1 && d.lead().mono.size() == 1;
  const bool bare_int = d.is_constant();
  if (!bare && !bare_int) ds = "(" + ds + ")";
  return n + "/" + ds;
}

/// Text suitable as a factor in a product: parenthesized unless it is a
/// single term.
inline std::string factor_text(const Expr& e) {
  std::string s = to_string(e);
  if (e.den().is_one() && is_simple_product(e.num())) return s;
  if (!e.den().is_one() && is_simple_product(e.num()) && is_simple_product(e.den())) return s;
  return "(" + s + ")";
}

}  // namespace jetlax
