#pragma once

// Compatibility of a differential constraint with the linearized equation,
// its integration into a recursion operator, and the Lax-type check.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "jetlax/operator.hpp"
#include "jetlax/relations.hpp"

namespace jetlax {

/// How the time derivatives of the constraint coefficients are formed.
/// concrete: total t-derivative on the equation manifold.
/// symbolic: every coefficient must be a bare function symbol A, and its
/// time derivative is the atom A_t, an unknown.
enum class CoefficientMode { concrete, symbolic };

/// W_0 .. W_{N-1}.
struct ResidualSystem {
  std::vector<Expr> residuals;
};

namespace detail {

inline Expr coefficient_time_derivative(const Expr& a, FluxCache& flux, CoefficientMode mode) {
  if (mode == CoefficientMode::concrete) return total_derivative_t(a, flux);
  const auto atoms = a.atoms();
  if (!(a.is_polynomial() && a.num().is_monomial() && a.num().lead().coef == 1 && atoms.size() == 1 &&
        atoms.begin()->is_func() && a.num().lead().mono.total_degree() == 1))
    throw Error(ErrorKind::contract, "symbolic mode needs bare function symbols as constraint coefficients");
  const Atom f = *atoms.begin();
  if (!(f.deps() & dep_t)) throw Error(ErrorKind::undeclared, "coefficient " + f.to_string() + " does not depend on t");
  return Expr(f.differentiated(dep_t));
}

// Psi_j rewritten in terms of Psi_0 .. Psi_{N-1} using the constraint and
// its x-prolongations.
class PsiReducer {
 public:
  explicit PsiReducer(const DifferentialConstraint& h) : n_(h.order()) {
    for (unsigned j = 0; j < n_; ++j) red_.push_back(Expr(Atom::psi(j)));
    red_.push_back(h.on_psi());
    top_ = h.on_psi();
  }

  const Expr& operator[](unsigned j) {
    while (red_.size() <= j) {
      Expr next = total_derivative_x(red_.back());
      red_.push_back(substitute(next, {{Atom::psi(n_), top_}}));
    }
    return red_[j];
  }

  Expr reduce(const Expr& e) {
    Bindings b;
    for (const auto& a : e.atoms())
      if (a.is_lin() && a.index() >= n_) b.emplace(a, (*this)[a.index()]);
    return b.empty() ? e : substitute(e, b);
  }

 private:
  unsigned n_;
  std::vector<Expr> red_;
  Expr top_;
};

}  // namespace detail

/// Coefficients of Psi_i in D_t(sum A_i Psi_i) - D_x^N(D_P Psi) after
/// eliminating Psi_N and higher through the constraint.
inline ResidualSystem constraint_residuals(const LinearOperator& dp, const DifferentialConstraint& h,
                                           const EvolutionEquation& eq,
                                           CoefficientMode mode = CoefficientMode::concrete) {
  const unsigned n = h.order();
  if (dp.order() != n)
    throw Error(ErrorKind::order_mismatch, "constraint of order " + std::to_string(n) +
                                               " against a linearization of order " + std::to_string(dp.order()));
  FluxCache flux(eq);
  detail::PsiReducer psi(h);
  std::vector<Expr> dpsi_t;  // D_x^k (D_P Psi)
  dpsi_t.push_back(dp.on_psi());
  for (unsigned k = 1; k <= n; ++k) dpsi_t.push_back(total_derivative_x(dpsi_t.back()));

  Expr w;
  for (unsigned i = 0; i < n; ++i) {
    w += detail::coefficient_time_derivative(h[i], flux, mode) * Expr(Atom::psi(i));
    w += h[i] * dpsi_t[i];
  }
  w -= dpsi_t[n];
  w = psi.reduce(w);

  std::vector<Atom> vars;
  for (unsigned i = 0; i < n; ++i) vars.push_back(Atom::psi(i));
  auto parts = collect(w, vars);
  ResidualSystem out;
  out.residuals.resize(n);
  for (auto& [m, c] : parts) {
    if (m.total_degree() != 1) throw Error(ErrorKind::contract, "residual is not linear in psi");
    out.residuals[m.factors().front().atom.index()] = c;
  }
  return out;
}

/// The same residuals read off the remainder of H_t + [H, D_P] on right
/// division by H: W_i = -(coefficient of D^i).
inline ResidualSystem operator_residuals(const LinearOperator& dp, const DifferentialConstraint& h,
                                         const EvolutionEquation& eq,
                                         CoefficientMode mode = CoefficientMode::concrete) {
  if (dp.order() != h.order()) throw Error(ErrorKind::order_mismatch, "constraint and linearization orders differ");
  const PseudoOperator hop = h.as_operator();
  FluxCache flux(eq);
  std::vector<Expr> ht(h.order());
  for (unsigned i = 0; i < h.order(); ++i) ht[i] = -detail::coefficient_time_derivative(h[i], flux, mode);
  const PseudoOperator k = PseudoOperator(ht) + commutator(hop, PseudoOperator::from(dp));
  const PseudoOperator r = right_remainder(k, hop);
  ResidualSystem out;
  for (unsigned i = 0; i < h.order(); ++i) out.residuals.push_back(-r.coefficient(i));
  return out;
}

/// Solves W_i = 0 for the unknown A_{i,t} (symbolic mode): returns the
/// right-hand sides of A_{i,t} = ... in order.
inline std::vector<Expr> solve_time_derivatives(const ResidualSystem& w, const DifferentialConstraint& h) {
  std::vector<Expr> out;
  for (unsigned i = 0; i < h.order(); ++i) {
    const Atom a = *h[i].atoms().begin();
    const Atom at = a.differentiated(dep_t);
    const Expr c = coefficient(w.residuals[i], at);
    if (!c.is_one())
      throw Error(ErrorKind::contract, "residual " + std::to_string(i) + " is not solvable for " + at.to_string());
    out.push_back(Expr(at) - w.residuals[i]);
  }
  return out;
}

struct ResidualVerdict {
  unsigned index = 0;
  Expr raw;
  Expr reduced;
  bool zero() const { return reduced.is_zero(); }
};

struct CompatibilityReport {
  std::vector<ResidualVerdict> residuals;
  std::vector<Expr> operator_route;  // reduced W_i from the operator form
  std::vector<SideRelation> derived_relations;
  bool operator_route_zero = false;

  bool compatible() const {
    return std::all_of(residuals.begin(), residuals.end(), [](const ResidualVerdict& v) { return v.zero(); });
  }
  bool routes_agree() const { return compatible() == operator_route_zero; }
};

/// Completes a copy of `relations` and returns it with the derived rules.
inline RelationSet completed(const RelationSet& relations, std::vector<SideRelation>* derived = nullptr) {
  RelationSet r = relations;
  auto added = r.complete();
  if (derived) *derived = std::move(added);
  return r;
}

inline CompatibilityReport check_compatibility(const EvolutionEquation& eq, const DifferentialConstraint& h,
                                               const RelationSet& relations,
                                               CoefficientMode mode = CoefficientMode::concrete) {
  CompatibilityReport rep;
  const RelationSet rel = completed(relations, &rep.derived_relations);
  const LinearOperator dp = frechet_derivative(eq);
  const ResidualSystem w = constraint_residuals(dp, h, eq, mode);
  for (unsigned i = 0; i < w.residuals.size(); ++i) rep.residuals.push_back({i, w.residuals[i], rel.reduce(w.residuals[i])});
  const ResidualSystem o = operator_residuals(dp, h, eq, mode);
  rep.operator_route_zero = true;
  for (const auto& r : o.residuals) {
    rep.operator_route.push_back(rel.reduce(r));
    if (!rep.operator_route.back().is_zero()) rep.operator_route_zero = false;
  }
  return rep;
}

/// Reduces every coefficient of an operator, nonlocal parts included.
inline PseudoOperator reduce_operator(const PseudoOperator& l, const RelationSet& relations) {
  return l.map_coefficients([&](const Expr& e) { return relations.reduce(e); });
}

struct Integration {
  PseudoOperator phi;
  Expr mu;
  bool round_trip = false;
  std::vector<std::string> candidates_tried;
};

namespace detail {

struct IntegrationCandidate {
  PseudoOperator phi;
  Expr w;
  int jet_order = 0;
  std::size_t nonlocal = 0;
  std::size_t size = 0;

  auto key() const { return std::make_tuple(jet_order, nonlocal, size); }
};

inline IntegrationCandidate integrate_with(const DifferentialConstraint& h, const Expr& w) {
  const unsigned n = h.order();
  const Expr v = total_derivative_x(w) / w;
  std::vector<Expr> b(n);
  b[n - 1] = Expr(1);
  for (unsigned i = n - 1; i >= 1; --i) b[i - 1] = -h[i] - total_derivative_x(b[i]) + v * b[i];
  const Expr r = -h[0] - total_derivative_x(b[0]) + v * b[0];
  std::vector<NonlocalTerm> nl;
  if (!r.is_zero()) nl.push_back({w, r / w});
  IntegrationCandidate c{PseudoOperator(b, nl), w};
  c.jet_order = r.jet_order();
  c.size = to_string(r).size();
  for (const auto& e : b) {
    c.jet_order = std::max(c.jet_order, e.jet_order());
    c.size += to_string(e).size();
  }
  c.nonlocal = c.phi.nonlocal_terms().size();
  return c;
}

inline std::vector<Expr> integrating_candidates(const Expr& top) {
  std::vector<Poly> bases;
  auto add_base = [&](Poly p) {
    p = p.with_positive_lead();
    if (p.is_constant()) return;
    p = p.div_integer(p.content());
    if (std::find(bases.begin(), bases.end(), p) == bases.end()) bases.push_back(std::move(p));
  };
  const Poly& d = top.den();
  add_base(d);
  const Monomial mc = d.monomial_content();
  for (const auto& f : mc.factors()) add_base(Poly(f.atom));
  add_base(d.div_monomial(mc));
  std::vector<Expr> out{Expr(1)};
  for (const auto& p : bases)
    for (int k : {1, -1, 2, -2}) out.push_back(Expr(p).pow(k));
  return out;
}

}  // namespace detail

/// Writes H = mu^{-1} D o (mu Phi) with Phi of order N-1. Every integrating
/// factor satisfies the identity; the choice prefers the lowest jet order in
/// the coefficients of Phi, then the fewest nonlocal terms.
inline Integration integrate_constraint(const DifferentialConstraint& h) {
  std::optional<detail::IntegrationCandidate> best;
  Integration out;
  for (const Expr& w : detail::integrating_candidates(h[h.order() - 1])) {
    auto c = detail::integrate_with(h, w);
    out.candidates_tried.push_back(to_string(w));
    if (!best || c.key() < best->key()) best = std::move(c);
  }
  out.phi = best->phi;
  out.mu = best->w.inverse();
  const PseudoOperator back = compose(PseudoOperator::derivative(1), out.phi.scaled(out.mu)).scaled(best->w);
  out.round_trip = back == h.as_operator();
  if (!out.round_trip) throw Error(ErrorKind::contract, "integration round trip failed");
  return out;
}

/// Checks mu^{-1} D o (mu Phi) = H exactly.
inline bool integration_round_trip(const PseudoOperator& phi, const Expr& mu, const DifferentialConstraint& h) {
  return compose(PseudoOperator::derivative(1), phi.scaled(mu)).scaled(mu.inverse()) == h.as_operator();
}

struct LaxReport {
  PseudoOperator raw;      // Phi_t + [Phi, D_P]
  PseudoOperator reduced;  // modulo the relations
  bool zero() const { return reduced.is_zero(); }
};

inline LaxReport verify_lax(const PseudoOperator& phi, const EvolutionEquation& eq, const RelationSet& relations) {
  const RelationSet rel = completed(relations);
  LaxReport rep;
  rep.raw = operator_time_derivative(phi, eq) + commutator(phi, PseudoOperator::from(frechet_derivative(eq)));
  rep.reduced = reduce_operator(rep.raw, rel);
  return rep;
}

/// D_t sigma - D_P sigma, reduced.
inline Expr symmetry_residual(const Expr& sigma, const EvolutionEquation& eq, const RelationSet& relations) {
  const LinearOperator dp = frechet_derivative(eq);
  Expr r = total_derivative_t(sigma, eq);
  detail::DerivativeTable d(sigma);
  for (unsigned i = 0; i <= dp.order(); ++i)
    if (!dp.coefficients[i].is_zero()) r -= dp.coefficients[i] * d[i];
  return relations.reduce(r);
}

struct Hierarchy {
  std::vector<Expr> members;  // sigma_1 .. sigma_k, each verified
  std::string diagnostic;     // set when generation stopped early
};

/// sigma_{k+1} = Phi(sigma_k), each member checked against the symmetry
/// condition before it is kept.
inline Hierarchy generate_hierarchy(const PseudoOperator& phi, const Expr& seed, const EvolutionEquation& eq,
                                    unsigned depth, const RelationSet& relations) {
  if (depth < 1) throw Error(ErrorKind::contract, "hierarchy depth must be at least 1");
  const RelationSet rel = completed(relations);
  const Expr s0 = symmetry_residual(seed, eq, rel);
  if (!s0.is_zero())
    throw Error(ErrorKind::not_a_symmetry, "seed " + to_string(seed) + " is not a symmetry; residual " + to_string(s0));
  Hierarchy out;
  Expr sigma = seed;
  for (unsigned k = 0; k < depth; ++k) {
    Application a = try_apply(phi, sigma);
    if (!a.ok()) {
      out.diagnostic = "stopped at member " + std::to_string(k + 1) + ": " + a.diagnostic;
      return out;
    }
    sigma = rel.reduce(*a.value);
    const Expr res = symmetry_residual(sigma, eq, rel);
    if (!res.is_zero()) {
      out.diagnostic = "member " + std::to_string(k + 1) + " fails the symmetry condition; residual " + to_string(res);
      return out;
    }
    out.members.push_back(sigma);
  }
  return out;
}

}  // namespace jetlax
