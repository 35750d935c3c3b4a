#pragma once

// Pseudo-differential operators  sum_i b_i D^i + sum_k f_k D^{-1} g_k  with
// jet-expression coefficients, and the local differential constraints
// H = D^N - sum_i A_i D^i.
//
// Composition uses the Leibniz rule for D and the integration-by-parts
// identity  D^{-1} h D = h - D^{-1} h_x  for D^{-1}. D^{-1} is the
// antiderivative with decaying data at -infinity, so it commutes with the
// total t-derivative on the equation manifold; that is an axiom here.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jetlax/jet.hpp"

namespace jetlax {

/// f * D^{-1} * g
struct NonlocalTerm {
  Expr f;
  Expr g;

  friend bool operator==(const NonlocalTerm&, const NonlocalTerm&) = default;
  friend auto operator<=>(const NonlocalTerm& a, const NonlocalTerm& b) {
    if (auto c = a.f <=> b.f; c != 0) return c;
    return a.g <=> b.g;
  }
};

class PseudoOperator {
 public:
  PseudoOperator() = default;
  PseudoOperator(std::vector<Expr> local, std::vector<NonlocalTerm> nonlocal = {})
      : local_(std::move(local)), nonlocal_(std::move(nonlocal)) {
    for (const auto& b : local_) check_coefficient(b);
    for (const auto& n : nonlocal_) {
      check_coefficient(n.f);
      check_coefficient(n.g);
    }
    canonicalize();
  }

  /// Multiplication by e.
  static PseudoOperator multiplication(const Expr& e) { return PseudoOperator({e}); }

  /// D^k
  static PseudoOperator derivative(unsigned k = 1) {
    std::vector<Expr> c(k + 1);
    c[k] = Expr(1);
    return PseudoOperator(std::move(c));
  }

  static PseudoOperator nonlocal(const Expr& f, const Expr& g) { return PseudoOperator({}, {{f, g}}); }

  static PseudoOperator from(const LinearOperator& l) { return PseudoOperator(l.coefficients); }

  const std::vector<Expr>& local() const { return local_; }
  const std::vector<NonlocalTerm>& nonlocal_terms() const { return nonlocal_; }
  bool is_local() const { return nonlocal_.empty(); }
  bool is_zero() const { return local_.empty() && nonlocal_.empty(); }

  /// Order of the local part; -1 for a purely nonlocal or zero operator.
  int order() const { return int(local_.size()) - 1; }

  /// Coefficient of D^i (zero beyond the order).
  Expr coefficient(unsigned i) const { return i < local_.size() ? local_[i] : Expr(); }

  friend bool operator==(const PseudoOperator&, const PseudoOperator&) = default;

  friend PseudoOperator operator+(const PseudoOperator& a, const PseudoOperator& b) {
    std::vector<Expr> c(std::max(a.local_.size(), b.local_.size()));
    for (std::size_t i = 0; i < a.local_.size(); ++i) c[i] += a.local_[i];
    for (std::size_t i = 0; i < b.local_.size(); ++i) c[i] += b.local_[i];
    std::vector<NonlocalTerm> n = a.nonlocal_;
    n.insert(n.end(), b.nonlocal_.begin(), b.nonlocal_.end());
    return PseudoOperator(std::move(c), std::move(n));
  }

  PseudoOperator operator-() const {
    PseudoOperator r = *this;
    for (auto& b : r.local_) b = -b;
    for (auto& n : r.nonlocal_) n.f = -n.f;
    r.canonicalize();
    return r;
  }

  friend PseudoOperator operator-(const PseudoOperator& a, const PseudoOperator& b) { return a + (-b); }

  /// Left multiplication by an expression: e * L.
  PseudoOperator scaled(const Expr& e) const {
    std::vector<Expr> c = local_;
    for (auto& b : c) b *= e;
    std::vector<NonlocalTerm> n = nonlocal_;
    for (auto& t : n) t.f *= e;
    return PseudoOperator(std::move(c), std::move(n));
  }

  /// Applies `fn` to every coefficient, including both sides of nonlocal
  /// terms, and re-canonicalizes.
  template <class Fn>
  PseudoOperator map_coefficients(Fn&& fn) const {
    std::vector<Expr> c;
    for (const auto& b : local_) c.push_back(fn(b));
    std::vector<NonlocalTerm> n;
    for (const auto& t : nonlocal_) n.push_back({fn(t.f), fn(t.g)});
    return PseudoOperator(std::move(c), std::move(n));
  }

 private:
  static void check_coefficient(const Expr& e) {
    if (e.contains_lin()) throw Error(ErrorKind::contract, "operator coefficient contains psi");
  }

  // A multiplier commutes with D^{-1} when it is free of x and the jet.
  static bool commutes_with_dinv(const Expr& c) {
    return !c.contains_if([](const Atom& a) {
      return a.is_x() || a.is_jet() || a.depends_on(dep_x) || a.depends_on(dep_q);
    });
  }

  // Factor of p built from atoms that commute with D^{-1}: the gcd of its
  // coefficients once p is grouped by the remaining atoms.
  static Poly commuting_content(const Poly& p) {
    auto commutes = [](const Atom& a) { return commutes_with_dinv(Expr(a)); };
    std::map<Monomial, std::vector<Term>> groups;
    for (const auto& t : p.terms()) {
      Monomial key, rest;
      for (const auto& f : t.mono.factors()) {
        Monomial& side = commutes(f.atom) ? rest : key;
        side = side * Monomial(f.atom, f.exp);
      }
      groups[key].push_back({rest, t.coef});
    }
    Poly g;
    for (auto& [key, ts] : groups) {
      Poly c = Poly::from_terms(std::move(ts));
      g = g.is_zero() ? c.with_positive_lead() : gcd(g, c);
      if (g.is_one()) break;
    }
    return g;
  }

  // Moves every D^{-1}-commuting factor of g into f, leaving g with a
  // positive leading coefficient.
  static void split_factors(NonlocalTerm& t) {
    Expr c = Expr::fraction(commuting_content(t.g.num()), commuting_content(t.g.den()));
    if (t.g.num().lead_negative()) c = -c;
    if (c.is_one()) return;
    t.f *= c;
    t.g /= c;
  }

  // Merges nonlocal terms that share f, then those that share g, then those
  // whose f (or g) differ by a factor commuting with D^{-1}. Drops zeros and
  // sorts.
  void canonicalize() {
    while (!local_.empty() && local_.back().is_zero()) local_.pop_back();
    auto drop_zero = [&] {
      std::erase_if(nonlocal_, [](const NonlocalTerm& t) { return t.f.is_zero() || t.g.is_zero(); });
    };
    drop_zero();
    for (bool changed = true; changed;) {
      changed = false;
      for (auto& t : nonlocal_) split_factors(t);
      for (std::size_t i = 0; i < nonlocal_.size() && !changed; ++i) {
        for (std::size_t j = i + 1; j < nonlocal_.size() && !changed; ++j) {
          NonlocalTerm& a = nonlocal_[i];
          const NonlocalTerm& b = nonlocal_[j];
          if (a.f == b.f) {
            a.g += b.g;
          } else if (a.g == b.g) {
            a.f += b.f;
          } else if (Expr r = b.f / a.f; commutes_with_dinv(r)) {
            a.g += r * b.g;
          } else if (Expr s = b.g / a.g; commutes_with_dinv(s)) {
            a.f += s * b.f;
          } else {
            continue;
          }
          nonlocal_.erase(nonlocal_.begin() + long(j));
          changed = true;
        }
      }
      drop_zero();
    }
    std::sort(nonlocal_.begin(), nonlocal_.end());
  }

  std::vector<Expr> local_;
  std::vector<NonlocalTerm> nonlocal_;
};

/// Psi_N = sum_i A_i Psi_i, stored as [A_0, ..., A_{N-1}].
class DifferentialConstraint {
 public:
  explicit DifferentialConstraint(std::vector<Expr> a) : a_(std::move(a)) {
    if (a_.empty()) throw Error(ErrorKind::contract, "a differential constraint needs order at least 1");
    for (const auto& c : a_)
      if (c.contains_lin()) throw Error(ErrorKind::contract, "constraint coefficient contains psi");
  }

  unsigned order() const { return unsigned(a_.size()); }
  const std::vector<Expr>& coefficients() const { return a_; }
  const Expr& operator[](unsigned i) const { return a_[i]; }

  /// H = D^N - sum_i A_i D^i.
  PseudoOperator as_operator() const {
    std::vector<Expr> c(a_.size() + 1);
    for (std::size_t i = 0; i < a_.size(); ++i) c[i] = -a_[i];
    c.back() = Expr(1);
    return PseudoOperator(std::move(c));
  }

  /// sum_i A_i Psi_i
  Expr on_psi() const {
    Expr r;
    for (std::size_t i = 0; i < a_.size(); ++i) r += a_[i] * Expr(Atom::psi(unsigned(i)));
    return r;
  }

  friend bool operator==(const DifferentialConstraint&, const DifferentialConstraint&) = default;

 private:
  std::vector<Expr> a_;
};

namespace detail {

inline Integer binomial(unsigned n, unsigned k) {
  Integer r;
  mpz_bin_uiui(r.get_mpz_t(), n, k);
  return r;
}

// Successive total x-derivatives of e, computed on demand.
class DerivativeTable {
 public:
  explicit DerivativeTable(Expr e) { d_.push_back(std::move(e)); }
  const Expr& operator[](unsigned k) {
    while (d_.size() <= k) d_.push_back(total_derivative_x(d_.back()));
    return d_[k];
  }

 private:
  std::vector<Expr> d_;
};

inline void add_at(std::vector<Expr>& v, std::size_t i, const Expr& e) {
  if (v.size() <= i) v.resize(i + 1);
  v[i] += e;
}

// D^i o (multiplication by c) as local coefficients: sum_k C(i,k) c^{(k)} D^{i-k}.
inline void leibniz(std::vector<Expr>& out, const Expr& scale, unsigned i, DerivativeTable& c, unsigned shift = 0) {
  for (unsigned k = 0; k <= i; ++k) {
    const Expr& ck = c[k];
    if (ck.is_zero()) continue;
    add_at(out, i - k + shift, scale * Expr(Poly(binomial(i, k))) * ck);
  }
}

}  // namespace detail

/// L o M. Throws unsupported_composition for D^{-1}-terms on both sides.
inline PseudoOperator compose(const PseudoOperator& l, const PseudoOperator& m) {
  if (!l.is_local() && !m.is_local())
    throw Error(ErrorKind::unsupported_composition, "composition of two nonlocal operators");
  std::vector<Expr> local;
  std::vector<NonlocalTerm> nonlocal;

  // Local part of L against all of M.
  for (unsigned i = 0; i < l.local().size(); ++i) {
    const Expr& b = l.local()[i];
    if (b.is_zero()) continue;
    for (unsigned j = 0; j < m.local().size(); ++j) {
      if (m.local()[j].is_zero()) continue;
      detail::DerivativeTable c(m.local()[j]);
      detail::leibniz(local, b, i, c, j);
    }
    // D^i o (f D^{-1} g) = f^{(i)} D^{-1} g + sum_{k=1}^{i} C(i,k) f^{(i-k)} D^{k-1} o g
    for (const auto& t : m.nonlocal_terms()) {
      detail::DerivativeTable f(t.f);
      nonlocal.push_back({b * f[i], t.g});
      detail::DerivativeTable g(t.g);
      for (unsigned k = 1; k <= i; ++k) {
        const Expr scale = b * Expr(Poly(detail::binomial(i, k))) * f[i - k];
        detail::leibniz(local, scale, k - 1, g);
      }
    }
  }

  // f D^{-1} g o M with M local: D^{-1} o h D^j expands to
  // sum_{k<j} (-1)^k h^{(k)} D^{j-1-k} + (-1)^j D^{-1} o h^{(j)}.
  for (const auto& t : l.nonlocal_terms()) {
    Expr tail;
    for (unsigned j = 0; j < m.local().size(); ++j) {
      if (m.local()[j].is_zero()) continue;
      detail::DerivativeTable h(t.g * m.local()[j]);
      for (unsigned k = 0; k < j; ++k) {
        const Expr term = t.f * h[k];
        detail::add_at(local, j - 1 - k, k % 2 == 0 ? term : -term);
      }
      tail += j % 2 == 0 ? h[j] : -h[j];
    }
    nonlocal.push_back({t.f, tail});
  }
  return PseudoOperator(std::move(local), std::move(nonlocal));
}

inline PseudoOperator commutator(const PseudoOperator& l, const PseudoOperator& m) {
  return compose(l, m) - compose(m, l);
}

/// Result of applying an operator to a jet expression.
struct Application {
  std::optional<Expr> value;
  Expr euler_residual;
  std::string diagnostic;

  bool ok() const { return value.has_value(); }
};

inline Application try_apply(const PseudoOperator& l, const Expr& e) {
  if (e.contains_lin()) throw Error(ErrorKind::contract, "operator applied to an expression containing psi");
  Application out;
  Expr r;
  detail::DerivativeTable d(e);
  for (unsigned i = 0; i < l.local().size(); ++i)
    if (!l.local()[i].is_zero()) r += l.local()[i] * d[i];
  for (const auto& t : l.nonlocal_terms()) {
    Antiderivative a = invert_total_derivative(t.g * e);
    if (!a.ok()) {
      out.euler_residual = a.euler_residual;
      out.diagnostic = a.diagnostic;
      return out;
    }
    r += t.f * *a.value;
  }
  out.value = r;
  return out;
}

/// L(e); throws nonlocality when a D^{-1} integrand is not a total derivative.
inline Expr apply(const PseudoOperator& l, const Expr& e) {
  Application a = try_apply(l, e);
  if (!a.ok()) throw Error(ErrorKind::nonlocality, a.diagnostic);
  return *a.value;
}

/// Coefficient-wise total t-derivative; f D^{-1} g becomes
/// f_t D^{-1} g + f D^{-1} g_t.
inline PseudoOperator operator_time_derivative(const PseudoOperator& l, const EvolutionEquation& eq) {
  FluxCache flux(eq);
  std::vector<Expr> c;
  for (const auto& b : l.local()) c.push_back(total_derivative_t(b, flux));
  std::vector<NonlocalTerm> n;
  for (const auto& t : l.nonlocal_terms()) {
    n.push_back({total_derivative_t(t.f, flux), t.g});
    n.push_back({t.f, total_derivative_t(t.g, flux)});
  }
  return PseudoOperator(std::move(c), std::move(n));
}

/// Remainder of right division by a local operator with leading coefficient
/// one: L = Q o H + R with ord R < ord H. Local operands only.
inline PseudoOperator right_remainder(PseudoOperator l, const PseudoOperator& h) {
  if (!l.is_local() || !h.is_local()) throw Error(ErrorKind::contract, "right division needs local operators");
  if (h.order() < 0 || !h.local().back().is_one())
    throw Error(ErrorKind::contract, "right division needs a divisor with leading coefficient one");
  const int n = h.order();
  while (l.order() >= n) {
    const unsigned shift = unsigned(l.order() - n);
    const Expr c = l.local().back();
    l = l - compose(PseudoOperator::derivative(shift).scaled(c), h);
  }
  return l;
}

/// Adjoint of a local operator: sum_i (-D)^i o b_i.
inline PseudoOperator adjoint(const PseudoOperator& l) {
  if (!l.is_local()) throw Error(ErrorKind::contract, "adjoint of a nonlocal operator");
  PseudoOperator r;
  for (unsigned i = 0; i < l.local().size(); ++i) {
    PseudoOperator term = compose(PseudoOperator::derivative(i), PseudoOperator::multiplication(l.local()[i]));
    r = i % 2 == 0 ? r + term : r - term;
  }
  return r;
}

}  // namespace jetlax
