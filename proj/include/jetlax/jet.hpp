#pragma once

// Calculus on the jet space: total derivatives in x and t, the Frechet
// derivative of an evolution equation, the Euler operator and inversion of
// the total x-derivative.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jetlax/expr.hpp"
#include "jetlax/text.hpp"

namespace jetlax {

/// q_t = rhs, with rhs of exact order `order` and free of psi.
class EvolutionEquation {
 public:
  EvolutionEquation(Expr rhs, unsigned order) : rhs_(std::move(rhs)), order_(order) {
    if (rhs_.contains_lin()) throw Error(ErrorKind::contract, "evolution right-hand side contains psi");
    if (int(order_) < rhs_.jet_order())
      throw Error(ErrorKind::order_mismatch, "declared order " + std::to_string(order_) +
                                                 " is below the jet order of the right-hand side");
    if (!rhs_.contains(Atom::q(order_)))
      throw Error(ErrorKind::order_mismatch, "right-hand side does not depend on q_" + std::to_string(order_));
  }

  /// Infers the order from the highest jet variable present.
  static EvolutionEquation of(Expr rhs) {
    const int k = rhs.jet_order();
    if (k < 0) throw Error(ErrorKind::order_mismatch, "right-hand side has no jet variable");
    return EvolutionEquation(std::move(rhs), unsigned(k));
  }

  const Expr& rhs() const { return rhs_; }
  unsigned order() const { return order_; }

 private:
  Expr rhs_;
  unsigned order_;
};

/// sum_i coefficients[i] * D^i, with a nonzero leading coefficient.
struct LinearOperator {
  std::vector<Expr> coefficients;

  unsigned order() const { return unsigned(coefficients.size()) - 1; }

  /// Application to psi: sum_i P_i psi_i.
  Expr on_psi() const {
    Expr r;
    for (std::size_t i = 0; i < coefficients.size(); ++i) r += coefficients[i] * Expr(Atom::psi(unsigned(i)));
    return r;
  }
};

/// Total x-derivative. Function symbols follow the chain rule
/// D_x f = f_x + f_q q_1.
inline Expr total_derivative_x(const Expr& e) {
  return apply_derivation(e, [](const Atom& a) -> std::optional<Expr> {
    switch (a.kind()) {
      case AtomKind::indep:
        if (a.is_x()) return Expr(1);
        return std::nullopt;
      case AtomKind::param:
        return std::nullopt;
      case AtomKind::func: {
        Expr r;
        if (a.deps() & dep_x) r += Expr(a.differentiated(dep_x));
        if (a.deps() & dep_q) r += Expr(a.differentiated(dep_q)) * Expr(Atom::q(1));
        return r;
      }
      case AtomKind::jet:
        return Expr(Atom::q(a.index() + 1));
      case AtomKind::lin:
        return Expr(Atom::psi(a.index() + 1));
    }
    return std::nullopt;
  });
}

inline Expr total_derivative_x(const Expr& e, unsigned n) {
  Expr r = e;
  for (unsigned i = 0; i < n; ++i) r = total_derivative_x(r);
  return r;
}

/// Caches D_x^k P for repeated time derivatives under one equation.
class FluxCache {
 public:
  explicit FluxCache(const EvolutionEquation& eq) { flux_.push_back(eq.rhs()); }
  const Expr& operator[](unsigned k) {
    while (flux_.size() <= k) flux_.push_back(total_derivative_x(flux_.back()));
    return flux_[k];
  }

 private:
  std::vector<Expr> flux_;
};

/// Total t-derivative on the equation manifold: q_k evolves as D_x^k P.
inline Expr total_derivative_t(const Expr& e, FluxCache& flux) {
  if (e.contains_lin())
    throw Error(ErrorKind::contract, "total t-derivative of an expression containing psi");
  return apply_derivation(e, [&](const Atom& a) -> std::optional<Expr> {
    switch (a.kind()) {
      case AtomKind::indep:
        if (a.is_t()) return Expr(1);
        return std::nullopt;
      case AtomKind::param:
        return std::nullopt;
      case AtomKind::func: {
        Expr r;
        if (a.deps() & dep_t) r += Expr(a.differentiated(dep_t));
        if (a.deps() & dep_q) r += Expr(a.differentiated(dep_q)) * flux[0];
        return r;
      }
      case AtomKind::jet:
        return flux[a.index()];
      case AtomKind::lin:
        return std::nullopt;
    }
    return std::nullopt;
  });
}

inline Expr total_derivative_t(const Expr& e, const EvolutionEquation& eq) {
  FluxCache flux(eq);
  return total_derivative_t(e, flux);
}

/// Frechet derivative [dP/dq_0, ..., dP/dq_N].
inline LinearOperator frechet_derivative(const EvolutionEquation& eq) {
  LinearOperator op;
  for (unsigned i = 0; i <= eq.order(); ++i) op.coefficients.push_back(partial_derivative(eq.rhs(), Atom::q(i)));
  return op;
}

/// Euler operator sum_k (-1)^k D_x^k (dE/dq_k).
inline Expr euler_operator(const Expr& e) {
  const int n = e.jet_order();
  Expr r;
  for (int k = 0; k <= std::max(n, 0); ++k) {
    Expr d = partial_derivative(e, Atom::q(unsigned(k)));
    if (d.is_zero()) continue;
    d = total_derivative_x(d, unsigned(k));
    r = (k % 2 == 0) ? r + d : r - d;
  }
  return r;
}

/// Outcome of inverting D_x: either an antiderivative or a diagnostic.
struct Antiderivative {
  std::optional<Expr> value;
  Expr euler_residual;   // nonzero when the integrand is not a total derivative
  std::string diagnostic;

  bool ok() const { return value.has_value(); }
};

namespace detail {

// Univariate polynomials in one atom with rational-expression coefficients;
// c[k] multiplies v^k.
using EPoly = std::vector<Expr>;

inline void etrim(EPoly& p) {
  while (!p.empty() && p.back().is_zero()) p.pop_back();
}

inline EPoly to_epoly(const Poly& p, const Atom& v) {
  EPoly r;
  for (auto& c : p.coefficients_in(v)) r.push_back(Expr(std::move(c)));
  etrim(r);
  return r;
}

inline EPoly emul(const EPoly& a, const EPoly& b) {
  if (a.empty() || b.empty()) return {};
  EPoly r(a.size() + b.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  etrim(r);
  return r;
}

inline EPoly esub(EPoly a, const EPoly& b) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] -= b[i];
  etrim(a);
  return a;
}

inline EPoly ederiv(const EPoly& a) {
  EPoly r;
  for (std::size_t i = 1; i < a.size(); ++i) r.push_back(a[i] * Expr(long(i)));
  etrim(r);
  return r;
}

// a = q*b + r
inline std::pair<EPoly, EPoly> edivmod(EPoly a, const EPoly& b) {
  EPoly q;
  if (a.size() >= b.size()) q.resize(a.size() - b.size() + 1);
  while (!a.empty() && a.size() >= b.size()) {
    const std::size_t shift = a.size() - b.size();
    const Expr c = a.back() / b.back();
    q[shift] = c;
    for (std::size_t i = 0; i < b.size(); ++i) a[i + shift] -= c * b[i];
    a.pop_back();
    etrim(a);
  }
  etrim(q);
  return {q, a};
}

inline EPoly egcd(EPoly a, EPoly b) {
  while (!b.empty()) {
    auto [q, r] = edivmod(a, b);
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty()) {
    const Expr lc = a.back();
    for (auto& c : a) c /= lc;
  }
  return a;
}

inline Expr eval_epoly(const EPoly& p, const Atom& v) {
  Expr r;
  for (std::size_t i = p.size(); i-- > 0;) r = r * Expr(v) + p[i];
  return r;
}

// Solves the square system M x = rhs over rational expressions; nullopt when
// singular.
inline std::optional<std::vector<Expr>> solve_linear(std::vector<std::vector<Expr>> m, std::vector<Expr> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && m[piv][col].is_zero()) ++piv;
    if (piv == n) return std::nullopt;
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    const Expr inv = m[col][col].inverse();
    for (std::size_t j = col; j < n; ++j) m[col][j] *= inv;
    rhs[col] *= inv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col || m[i][col].is_zero()) continue;
      const Expr f = m[i][col];
      for (std::size_t j = col; j < n; ++j) m[i][j] -= f * m[col][j];
      rhs[i] -= f * rhs[col];
    }
  }
  return rhs;
}

// Rational antiderivative of e with respect to the plain variable v (no
// chain rule), or nullopt when a logarithmic part is required.
// Horowitz-Ostrogradsky: int N/D = P1/D1 + int P2/D2, D1 = gcd(D, D'),
// D2 = D/D1; the integral is rational iff P2 = 0.
inline std::optional<Expr> integrate_plain(const Expr& e, const Atom& v) {
  if (e.is_zero()) return Expr();
  const EPoly num = to_epoly(e.num(), v);
  const EPoly den = to_epoly(e.den(), v);
  // Normalize the denominator to be monic in v.
  const Expr lc = den.back();
  EPoly D = den, N = num;
  for (auto& c : D) c /= lc;
  for (auto& c : N) c /= lc;
  auto [quot, rem] = edivmod(N, D);
  Expr result;
  for (std::size_t k = 0; k < quot.size(); ++k)
    result += quot[k] * Expr(v, std::uint32_t(k + 1)) / Expr(long(k + 1));
  if (rem.empty()) return result;
  if (D.size() <= 1) return std::nullopt;
  EPoly D1 = egcd(D, ederiv(D));
  EPoly D2 = edivmod(D, D1).first;
  const std::size_t n1 = D1.size() - 1, n2 = D2.size() - 1;
  if (n1 == 0) return std::nullopt;  // squarefree denominator: purely logarithmic
  // rem = P1' D2 - P1 (D2 D1'/D1) + P2 D1
  const EPoly H = edivmod(emul(D2, ederiv(D1)), D1).first;
  const std::size_t n = n1 + n2;
  std::vector<std::vector<Expr>> m(n, std::vector<Expr>(n));
  auto add_column = [&](std::size_t col, const EPoly& contribution) {
    for (std::size_t r = 0; r < contribution.size() && r < n; ++r) m[r][col] += contribution[r];
  };
  for (std::size_t j = 0; j < n1; ++j) {
    EPoly basis(j + 1);
    basis[j] = Expr(1);
    add_column(j, esub(emul(ederiv(basis), D2), emul(basis, H)));
  }
  for (std::size_t j = 0; j < n2; ++j) {
    EPoly basis(j + 1);
    basis[j] = Expr(1);
    add_column(n1 + j, emul(basis, D1));
  }
  std::vector<Expr> rhs(n);
  for (std::size_t r = 0; r < rem.size() && r < n; ++r) rhs[r] = rem[r];
  auto sol = solve_linear(std::move(m), std::move(rhs));
  if (!sol) return std::nullopt;
  for (std::size_t j = 0; j < n2; ++j)
    if (!(*sol)[n1 + j].is_zero()) return std::nullopt;
  EPoly P1(sol->begin(), sol->begin() + long(n1));
  etrim(P1);
  return result + eval_epoly(P1, v) / eval_epoly(D1, v);
}

// Function-symbol atoms that depend on `dep`, with their order in that
// direction.
inline unsigned chain_order(const Atom& a, Dependency dep) { return a.multi().at(dep); }

// Antiderivative with respect to the partial derivation along `dep` (x or q),
// where function symbols depending on `dep` form derivative chains. Peels
// the highest-ranked chain atom first.
inline std::optional<Expr> integrate_partial(Expr e, Dependency dep) {
  const Atom base = dep == dep_x ? Atom::x() : Atom::q(0);
  Expr acc;
  for (int guard = 0; guard < 64 && !e.is_zero(); ++guard) {
    std::optional<Atom> top;
    for (const auto& a : e.atoms()) {
      if (!a.depends_on(dep)) continue;
      if (!top || chain_order(a, dep) > chain_order(*top, dep) ||
          (chain_order(a, dep) == chain_order(*top, dep) && a > *top))
        top = a;
    }
    if (!top) {
      auto r = integrate_plain(e, base);
      if (!r) return std::nullopt;
      return acc + *r;
    }
    if (chain_order(*top, dep) == 0) return std::nullopt;  // bare f, no antiderivative in the chain
    if (e.den().contains(*top)) return std::nullopt;
    auto parts = collect(e, {*top});
    for (const auto& [m, c] : parts)
      if (m.degree(*top) > 1) return std::nullopt;
    auto it = parts.find(Monomial(*top));
    if (it == parts.end()) return std::nullopt;
    MultiIndex lower = top->multi();
    --lower.at(dep);
    const Atom prev = top->with_multi(lower);
    auto piece = integrate_plain(it->second, prev);
    if (!piece) return std::nullopt;
    acc += *piece;
    e -= partial_derivative(*piece, base);
  }
  if (!e.is_zero()) return std::nullopt;
  return acc;
}

inline bool is_x_constant_atom(const Atom& a) {
  return !(a.is_x() || a.is_jet() || a.is_lin() || a.depends_on(dep_x) || a.depends_on(dep_q));
}

// Drops additive terms free of x and of the jet (the integration constant).
inline Expr drop_constant(const Expr& f) {
  if (f.den().contains_if([](const Atom& a) { return !is_x_constant_atom(a); })) return f;
  std::vector<Term> keep;
  for (const auto& t : f.num().terms()) {
    bool varying = false;
    for (const auto& fa : t.mono.factors())
      if (!is_x_constant_atom(fa.atom)) varying = true;
    if (varying) keep.push_back(t);
  }
  return Expr::fraction(Poly::from_terms(std::move(keep)), f.den());
}

}  // namespace detail

/// Inverse of the total x-derivative: F with D_x F = e and no additive part
/// free of x and the jet. Fails with the Euler residual when e is not a total
/// derivative, and with a diagnostic when the antiderivative is not a
/// rational jet expression (logarithms, bare polynomial x).
inline Antiderivative invert_total_derivative(const Expr& e) {
  Antiderivative out;
  if (e.is_zero()) {
    out.value = Expr();
    return out;
  }
  if (e.contains_lin()) throw Error(ErrorKind::contract, "cannot integrate an expression containing psi");
  out.euler_residual = euler_operator(e);
  if (!out.euler_residual.is_zero()) {
    out.diagnostic = "not a total derivative; Euler residual " + to_string(out.euler_residual);
    return out;
  }
  Expr rest = e;
  Expr acc;
  for (int guard = 0; guard < 64 && !rest.is_zero(); ++guard) {
    const int n = rest.jet_order();
    if (n >= 1) {
      const Atom top = Atom::q(unsigned(n));
      if (rest.den().contains(top)) {
        out.diagnostic = "integrand has q_" + std::to_string(n) + " in its denominator";
        return out;
      }
      auto parts = collect(rest, {top});
      Expr a;
      for (const auto& [m, c] : parts) {
        if (m.degree(top) > 1) {
          out.diagnostic = "integrand is nonlinear in its highest jet variable";
          return out;
        }
        if (m.degree(top) == 1) a = c;
      }
      std::optional<Expr> piece = n - 1 == 0 ? detail::integrate_partial(a, dep_q)
                                             : detail::integrate_plain(a, Atom::q(unsigned(n - 1)));
      if (!piece) {
        out.diagnostic = "antiderivative is not a rational jet expression";
        return out;
      }
      acc += *piece;
      rest -= total_derivative_x(*piece);
      continue;
    }
    // Order zero: rest must be an explicit x-derivative of a function of x, t.
    if (rest.contains_if([](const Atom& a) { return a.is_jet() || a.depends_on(dep_q); })) {
      out.diagnostic = "order-zero remainder depends on q";
      return out;
    }
    const bool via_functions = rest.contains_if([](const Atom& a) { return a.depends_on(dep_x); });
    if (!via_functions) {
      out.diagnostic = "integrand has explicit x-dependence outside function symbols";
      return out;
    }
    auto piece = detail::integrate_partial(rest, dep_x);
    if (!piece) {
      out.diagnostic = "x-antiderivative is not expressible with the declared function symbols";
      return out;
    }
    acc += *piece;
    rest -= total_derivative_x(*piece);
  }
  if (!rest.is_zero()) {
    out.diagnostic = "integration did not terminate";
    return out;
  }
  out.value = detail::drop_constant(acc);
  return out;
}

}  // namespace jetlax
