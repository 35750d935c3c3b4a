#pragma once

// Canonical rational expressions over jet-space atoms.
//
// An Expr is num/den with num, den in Z[atoms], gcd(num, den) = 1 (including
// integer content) and a positive leading coefficient in den. Zero is 0/1.
// Under these rules structural equality coincides with equality of rational
// functions, so zero-testing is exact.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "jetlax/poly.hpp"

namespace jetlax {

class Expr {
 public:
  Expr() : den_(1) {}
  Expr(long c) : num_(c), den_(1) {}  // NOLINT(google-explicit-constructor)
  explicit Expr(Rational r) {
    r.canonicalize();
    num_ = Poly(Integer(r.get_num()));
    den_ = Poly(Integer(r.get_den()));
  }
  explicit Expr(const Atom& a, std::uint32_t e = 1) : num_(a, e), den_(1) {}
  explicit Expr(Poly p) : num_(std::move(p)), den_(1) {}

  /// Canonical form of n/d.
  static Expr fraction(const Poly& n, const Poly& d) {
    if (d.is_zero()) throw Error(ErrorKind::degenerate_input, "division by the zero expression");
    if (n.is_zero()) return Expr();
    if (d.is_one()) return Expr(n);
    const Poly g = gcd(n, d);
    Expr e;
    e.num_ = g.is_one() ? n : n.exact_div(g);
    e.den_ = g.is_one() ? d : d.exact_div(g);
    e.fix_sign();
    return e;
  }

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }

  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const { return den_.is_one(); }
  bool is_constant() const { return num_.is_constant() && den_.is_constant(); }
  bool is_one() const { return num_.is_one() && den_.is_one(); }

  /// Value of a constant expression.
  Rational constant_value() const {
    Rational r(num_.constant_value(), den_.constant_value());
    r.canonicalize();
    return r;
  }

  std::set<Atom> atoms() const {
    auto s = num_.atoms();
    auto d = den_.atoms();
    s.insert(d.begin(), d.end());
    return s;
  }

  bool contains(const Atom& a) const { return num_.contains(a) || den_.contains(a); }

  template <class Pred>
  bool contains_if(Pred&& pred) const {
    return num_.contains_if(pred) || den_.contains_if(pred);
  }

  bool contains_lin() const {
    return contains_if([](const Atom& a) { return a.is_lin(); });
  }

  /// Highest k with q_k present, or -1.
  int jet_order() const {
    int k = -1;
    for (const auto& a : atoms())
      if (a.is_jet()) k = std::max(k, int(a.index()));
    return k;
  }

  friend bool operator==(const Expr& a, const Expr& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend std::strong_ordering operator<=>(const Expr& a, const Expr& b) {
    if (auto c = a.num_ <=> b.num_; c != 0) return c;
    return a.den_ <=> b.den_;
  }

  Expr operator-() const {
    Expr r = *this;
    r.num_ = -r.num_;
    return r;
  }

  friend Expr operator+(const Expr& a, const Expr& b) { return add(a, b, false); }
  friend Expr operator-(const Expr& a, const Expr& b) { return add(a, b, true); }

  friend Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr();
    if (a.den_.is_one() && b.den_.is_one()) return Expr(a.num_ * b.num_);
    const Poly g1 = gcd(a.num_, b.den_);
    const Poly g2 = gcd(b.num_, a.den_);
    Expr r;
    r.num_ = (g1.is_one() ? a.num_ : a.num_.exact_div(g1)) * (g2.is_one() ? b.num_ : b.num_.exact_div(g2));
    r.den_ = (g2.is_one() ? a.den_ : a.den_.exact_div(g2)) * (g1.is_one() ? b.den_ : b.den_.exact_div(g1));
    r.fix_sign();
    return r;
  }

  Expr inverse() const {
    if (is_zero()) throw Error(ErrorKind::degenerate_input, "division by the zero expression");
    Expr r;
    r.num_ = den_;
    r.den_ = num_;
    r.fix_sign();
    return r;
  }

  friend Expr operator/(const Expr& a, const Expr& b) { return a * b.inverse(); }

  Expr& operator+=(const Expr& b) { return *this = *this + b; }
  Expr& operator-=(const Expr& b) { return *this = *this - b; }
  Expr& operator*=(const Expr& b) { return *this = *this * b; }
  Expr& operator/=(const Expr& b) { return *this = *this / b; }

  Expr pow(int e) const {
    if (e < 0) return inverse().pow(-e);
    Expr r;
    r.num_ = num_.pow(unsigned(e));
    r.den_ = den_.pow(unsigned(e));
    return r;
  }

 private:
  void fix_sign() {
    if (den_.lead_negative()) {
      num_ = -num_;
      den_ = -den_;
    }
  }

  static Expr add(const Expr& a, const Expr& b, bool subtract) {
    if (a.den_ == b.den_) {
      Poly n = subtract ? a.num_ - b.num_ : a.num_ + b.num_;
      if (a.den_.is_one()) return Expr(std::move(n));
      return fraction(n, a.den_);
    }
    const Poly g = gcd(a.den_, b.den_);
    if (g.is_one()) {
      Expr r;
      r.num_ = subtract ? a.num_ * b.den_ - b.num_ * a.den_ : a.num_ * b.den_ + b.num_ * a.den_;
      if (r.num_.is_zero()) return Expr();
      r.den_ = a.den_ * b.den_;
      return r;
    }
    const Poly da = a.den_.exact_div(g), db = b.den_.exact_div(g);
    Poly n = subtract ? a.num_ * db - b.num_ * da : a.num_ * db + b.num_ * da;
    if (n.is_zero()) return Expr();
    Poly d = a.den_ * db;
    const Poly g2 = gcd(n, g);
    Expr r;
    r.num_ = g2.is_one() ? std::move(n) : n.exact_div(g2);
    r.den_ = g2.is_one() ? std::move(d) : d.exact_div(g2);
    r.fix_sign();
    return r;
  }

  Poly num_;
  Poly den_;
};

inline Expr atom(const Atom& a) { return Expr(a); }
inline Expr rational(long n, long d = 1) { return Expr(Rational(n, d)); }

// --------------------------------------------------------------------------
// Raw expression trees and normalization.

struct Tree;
using TreePtr = std::shared_ptr<const Tree>;

/// Unnormalized expression tree, as produced by the parser or by tests.
struct Tree {
  enum class Op { number, atom, add, sub, mul, div, neg, pow };
  Op op = Op::number;
  Rational number;
  Atom leaf;
  int exponent = 0;
  TreePtr lhs, rhs;

  static TreePtr num(Rational v) {
    auto t = std::make_shared<Tree>();
    t->op = Op::number;
    t->number = std::move(v);
    return t;
  }
  static TreePtr var(const Atom& a) {
    auto t = std::make_shared<Tree>();
    t->op = Op::atom;
    t->leaf = a;
    return t;
  }
  static TreePtr binary(Op op, TreePtr a, TreePtr b) {
    auto t = std::make_shared<Tree>();
    t->op = op;
    t->lhs = std::move(a);
    t->rhs = std::move(b);
    return t;
  }
  static TreePtr neg(TreePtr a) {
    auto t = std::make_shared<Tree>();
    t->op = Op::neg;
    t->lhs = std::move(a);
    return t;
  }
  static TreePtr power(TreePtr a, int e) {
    auto t = std::make_shared<Tree>();
    t->op = Op::pow;
    t->lhs = std::move(a);
    t->exponent = e;
    return t;
  }
};

/// Canonical form of a tree. Throws degenerate_input on division by an
/// expression that normalizes to zero.
inline Expr normalize(const Tree& t) {
  switch (t.op) {
    case Tree::Op::number: return Expr(t.number);
    case Tree::Op::atom: return Expr(t.leaf);
    case Tree::Op::add: return normalize(*t.lhs) + normalize(*t.rhs);
    case Tree::Op::sub: return normalize(*t.lhs) - normalize(*t.rhs);
    case Tree::Op::mul: return normalize(*t.lhs) * normalize(*t.rhs);
    case Tree::Op::div: {
      const Expr d = normalize(*t.rhs);
      if (d.is_zero()) throw Error(ErrorKind::degenerate_input, "division by an expression equal to zero");
      return normalize(*t.lhs) / d;
    }
    case Tree::Op::neg: return -normalize(*t.lhs);
    case Tree::Op::pow: {
      const Expr b = normalize(*t.lhs);
      if (t.exponent < 0 && b.is_zero())
        throw Error(ErrorKind::degenerate_input, "negative power of an expression equal to zero");
      return b.pow(t.exponent);
    }
  }
  return Expr();
}

// --------------------------------------------------------------------------
// Derivations.

/// Applies the derivation determined by its action on atoms. `image(a)`
/// returns nullopt when the derivation annihilates `a`.
template <class ImageFn>
Expr apply_derivation(const Expr& e, ImageFn&& image) {
  auto derive_poly = [&](const Poly& p) {
    Poly poly_part;
    Expr rational_part;
    for (const auto& a : p.atoms()) {
      std::optional<Expr> img = image(a);
      if (!img || img->is_zero()) continue;
      Poly pd = p.partial(a);
      if (img->is_polynomial()) {
        poly_part += pd * img->num();
      } else {
        rational_part += Expr(std::move(pd)) * *img;
      }
    }
    return Expr(std::move(poly_part)) + rational_part;
  };
  const Expr dn = derive_poly(e.num());
  if (e.den().is_one()) return dn;
  const Expr dd = derive_poly(e.den());
  const Expr den = Expr(e.den());
  // (n/d)' = n'/d - (n/d) d'/d
  return (dn - e * dd) / den;
}

/// Partial derivative with respect to an atom. Function symbols that depend
/// on x, t or q pick up an incremented multi-index.
inline Expr partial_derivative(const Expr& e, const Atom& a) {
  std::optional<Dependency> dep;
  if (a.is_x()) dep = dep_x;
  if (a.is_t()) dep = dep_t;
  if (a.is_jet() && a.index() == 0) dep = dep_q;
  return apply_derivation(e, [&](const Atom& b) -> std::optional<Expr> {
    if (b == a) return Expr(1);
    if (dep && b.depends_on(*dep)) return Expr(b.differentiated(*dep));
    return std::nullopt;
  });
}

// --------------------------------------------------------------------------
// Substitution and coefficient extraction.

using Bindings = std::map<Atom, Expr>;

/// Simultaneous substitution of atoms, then normalization.
inline Expr substitute(const Expr& e, const Bindings& bindings) {
  if (bindings.empty()) return e;
  auto subst_poly = [&](const Poly& p) {
    // Group terms by the part of the monomial that is being replaced.
    std::map<Monomial, std::vector<Term>> groups;
    for (const auto& t : p.terms()) {
      Monomial bound, free;
      for (const auto& f : t.mono.factors()) {
        if (bindings.count(f.atom))
          bound = bound * Monomial(f.atom, f.exp);
        else
          free = free * Monomial(f.atom, f.exp);
      }
      groups[bound].push_back({free, t.coef});
    }
    Expr result;
    std::map<std::pair<Atom, std::uint32_t>, Expr> powers;
    for (auto& [bound, ts] : groups) {
      Expr factor(1);
      for (const auto& f : bound.factors()) {
        auto key = std::make_pair(f.atom, f.exp);
        auto it = powers.find(key);
        if (it == powers.end()) it = powers.emplace(key, bindings.at(f.atom).pow(int(f.exp))).first;
        factor *= it->second;
      }
      result += factor * Expr(Poly::from_terms(std::move(ts)));
    }
    return result;
  };
  const Expr n = subst_poly(e.num());
  if (e.den().is_one()) return n;
  const Expr d = subst_poly(e.den());
  if (d.is_zero()) throw Error(ErrorKind::degenerate_input, "substitution makes a denominator vanish");
  return n / d;
}

/// Coefficients of `e` as a polynomial in `vars`. Keys are monomials in
/// `vars` only; each value is free of `vars`.
inline std::map<Monomial, Expr> collect(const Expr& e, const std::vector<Atom>& vars) {
  std::set<Atom> vs(vars.begin(), vars.end());
  if (e.den().contains_if([&](const Atom& a) { return vs.count(a) > 0; }))
    throw Error(ErrorKind::not_polynomial, "denominator depends on a collected variable");
  std::map<Monomial, std::vector<Term>> groups;
  for (const auto& t : e.num().terms()) {
    Monomial key, rest;
    for (const auto& f : t.mono.factors()) {
      if (vs.count(f.atom))
        key = key * Monomial(f.atom, f.exp);
      else
        rest = rest * Monomial(f.atom, f.exp);
    }
    groups[key].push_back({rest, t.coef});
  }
  std::map<Monomial, Expr> out;
  for (auto& [k, ts] : groups) {
    Expr c = Expr::fraction(Poly::from_terms(std::move(ts)), e.den());
    if (!c.is_zero()) out.emplace(k, std::move(c));
  }
  return out;
}

/// Coefficient of a single atom to the first power in an expression linear
/// in the listed atoms.
inline Expr coefficient(const Expr& e, const Atom& a) {
  auto m = collect(e, {a});
  auto it = m.find(Monomial(a));
  return it == m.end() ? Expr() : it->second;
}

/// Reassembles a collected map.
inline Expr uncollect(const std::map<Monomial, Expr>& m) {
  Expr r;
  for (const auto& [k, c] : m) r += Expr(Poly(k, Integer(1))) * c;
  return r;
}

/// Maximum degree of any psi_k monomial; linearized quantities have degree <= 1.
inline unsigned lin_degree(const Expr& e) {
  unsigned d = 0;
  for (const auto* p : {&e.num(), &e.den()})
    for (const auto& t : p->terms()) {
      unsigned s = 0;
      for (const auto& f : t.mono.factors())
        if (f.atom.is_lin()) s += f.exp;
      d = std::max(d, s);
    }
  return d;
}

/// Replaces every derivative of the function symbol `name` by the matching
/// partial derivative of `replacement`.
inline Expr substitute_function(const Expr& e, const std::string& name, const Expr& replacement) {
  Bindings b;
  for (const auto& a : e.atoms()) {
    if (!a.is_func() || a.name() != name) continue;
    Expr r = replacement;
    for (unsigned i = 0; i < a.multi().q; ++i) r = partial_derivative(r, Atom::q(0));
    for (unsigned i = 0; i < a.multi().x; ++i) r = partial_derivative(r, Atom::x());
    for (unsigned i = 0; i < a.multi().t; ++i) r = partial_derivative(r, Atom::t());
    b.emplace(a, std::move(r));
  }
  return substitute(e, b);
}

/// True when a/b is a nonzero expression free of jet and psi atoms.
inline bool proportional(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
  const Expr ratio = a / b;
  return !ratio.contains_if([](const Atom& x) { return x.is_jet() || x.is_lin(); });
}

}  // namespace jetlax
