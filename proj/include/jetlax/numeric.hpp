#pragma once

// Numerical cross-checks of symbolic results: zero tests by evaluation at
// random points and a finite-difference check of the Frechet derivative.
//
// Relation-free expressions are evaluated exactly over the rationals with
// every atom an independent random value, so a zero verdict has tolerance
// zero. Under side relations the function symbols need concrete stand-ins
// that satisfy the relations; evaluation is then in double precision.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "jetlax/dsl.hpp"

namespace jetlax {

enum class NumericStatus { consistent_zero, nonzero, skipped, pass, fail };

inline const char* to_string(NumericStatus s) {
  switch (s) {
    case NumericStatus::consistent_zero: return "consistent-zero";
    case NumericStatus::nonzero: return "nonzero";
    case NumericStatus::skipped: return "skipped";
    case NumericStatus::pass: return "pass";
    case NumericStatus::fail: return "fail";
  }
  return "?";
}

struct NumericVerdict {
  NumericStatus status = NumericStatus::skipped;
  std::string reason;
  unsigned trials = 0;
  double worst = 0;  // largest |value| / scale seen
};

/// Seed used by tests and the CLI unless a fresh one is requested.
inline constexpr std::uint64_t default_seed = 20240917;

/// Values of a function symbol's derivatives at (x, t, q).
using FunctionValue = std::function<double(const MultiIndex&, double x, double t, double q)>;

/// A point of the jet space together with function stand-ins.
struct SamplePoint {
  std::map<Atom, double> values;  // x, t, q_k, psi_k, parameters
  std::map<std::string, FunctionValue> functions;

  double x() const { return get(Atom::x()); }
  double t() const { return get(Atom::t()); }
  double q0() const { return get(Atom::q(0)); }

  double get(const Atom& a) const {
    auto it = values.find(a);
    if (it == values.end()) throw Error(ErrorKind::contract, "no value for " + a.to_string());
    return it->second;
  }

  double atom_value(const Atom& a) const {
    if (a.is_func()) {
      auto it = functions.find(a.name());
      if (it == functions.end()) throw Error(ErrorKind::contract, "no stand-in for " + a.name());
      const double x = values.count(Atom::x()) ? get(Atom::x()) : 0;
      const double t = values.count(Atom::t()) ? get(Atom::t()) : 0;
      const double q = values.count(Atom::q(0)) ? get(Atom::q(0)) : 0;
      return it->second(a.multi(), x, t, q);
    }
    return get(a);
  }
};

namespace detail {

struct DoubleValue {
  double value = 0;
  double scale = 0;  // largest term magnitude
};

template <class AtomValue>
DoubleValue eval_poly(const Poly& p, AtomValue&& atom_value) {
  DoubleValue r;
  std::map<Atom, double> cache;
  for (const auto& t : p.terms()) {
    double v = t.coef.get_d();
    for (const auto& f : t.mono.factors()) {
      auto it = cache.find(f.atom);
      if (it == cache.end()) it = cache.emplace(f.atom, atom_value(f.atom)).first;
      v *= std::pow(it->second, double(f.exp));
    }
    r.value += v;
    r.scale = std::max(r.scale, std::abs(v));
  }
  return r;
}

inline Rational eval_poly_exact(const Poly& p, const std::map<Atom, Rational>& values) {
  Rational r = 0;
  for (const auto& t : p.terms()) {
    Rational v(t.coef);
    for (const auto& f : t.mono.factors()) {
      const Rational& b = values.at(f.atom);
      for (std::uint32_t k = 0; k < f.exp; ++k) v *= b;
    }
    r += v;
  }
  return r;
}

inline Rational random_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-12, 12), den(1, 7);
  int n = 0;
  while (n == 0) n = num(rng);
  Rational r(n, den(rng));
  r.canonicalize();
  return r;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Sum of three exponentials in the declared dependencies.
inline FunctionValue exponential_standin(std::uint8_t deps, std::mt19937_64& rng) {
  struct Wave {
    double w, a, b, c;
  };
  std::vector<Wave> waves;
  for (int j = 0; j < 3; ++j)
    waves.push_back({uniform(rng, 0.5, 1.5) * (j % 2 ? -1 : 1), (deps & dep_x) ? uniform(rng, -1, 1) : 0,
                     (deps & dep_t) ? uniform(rng, -1, 1) : 0, (deps & dep_q) ? uniform(rng, -1, 1) : 0});
  return [waves](const MultiIndex& m, double x, double t, double q) {
    double s = 0;
    for (const auto& w : waves)
      s += w.w * std::pow(w.a, m.x) * std::pow(w.b, m.t) * std::pow(w.c, m.q) * std::exp(w.a * x + w.b * t + w.c * q);
    return s;
  };
}

}  // namespace detail

/// Double evaluation of a rational expression: value and magnitude scale.
inline detail::DoubleValue evaluate(const Expr& e, const SamplePoint& p) {
  auto av = [&](const Atom& a) { return p.atom_value(a); };
  auto n = detail::eval_poly(e.num(), av);
  auto d = detail::eval_poly(e.den(), av);
  return {n.value / d.value, n.scale / std::abs(d.value)};
}

/// Exact evaluation with every atom given a rational value.
inline Rational evaluate_exact(const Expr& e, const std::map<Atom, Rational>& values) {
  return detail::eval_poly_exact(e.num(), values) / detail::eval_poly_exact(e.den(), values);
}

/// Exact evaluation of an unnormalized tree, bypassing the canonical form.
/// Returns nullopt when some division or negative power hits zero.
inline std::optional<Rational> evaluate_tree_exact(const Tree& t, const std::map<Atom, Rational>& values) {
  using Op = Tree::Op;
  switch (t.op) {
    case Op::number: return t.number;
    case Op::atom: return values.at(t.leaf);
    case Op::neg: {
      auto a = evaluate_tree_exact(*t.lhs, values);
      if (!a) return std::nullopt;
      return Rational(-*a);
    }
    case Op::pow: {
      auto a = evaluate_tree_exact(*t.lhs, values);
      if (!a || (t.exponent < 0 && *a == 0)) return std::nullopt;
      Rational r = 1;
      for (int k = 0; k < std::abs(t.exponent); ++k) r *= *a;
      if (t.exponent < 0) return Rational(1 / r);
      return r;
    }
    default: break;
  }
  auto a = evaluate_tree_exact(*t.lhs, values);
  auto b = evaluate_tree_exact(*t.rhs, values);
  if (!a || !b) return std::nullopt;
  switch (t.op) {
    case Op::add: return Rational(*a + *b);
    case Op::sub: return Rational(*a - *b);
    case Op::mul: return Rational(*a * *b);
    case Op::div:
      if (*b == 0) return std::nullopt;
      return Rational(*a / *b);
    default: return std::nullopt;
  }
}

/// Builds stand-ins for function symbols: from the problem's explicit
/// stand-ins, from an ODE-in-q relation pattern, or as free exponential sums
/// for symbols that no relation mentions.
class StandinFactory {
 public:
  StandinFactory(const RelationSet& relations, const SymbolTable& symbols, std::optional<StandinSpec> spec = {})
      : relations_(relations), symbols_(symbols), spec_(std::move(spec)) {}

  /// Checks that explicit stand-ins satisfy every relation symbolically.
  /// Returns a diagnostic, or an empty string when they do.
  std::string verify_spec() const {
    if (!spec_) return "no stand-ins given";
    SymbolTable st = standin_symbols();
    std::map<std::string, Expr> fs;
    for (const auto& [name, text] : spec_->functions) fs[name] = parse_expression(text, st);
    for (const auto& r : relations_.rules()) {
      if (!fs.count(r.lhs.name())) return "no stand-in for " + r.lhs.name();
      Expr d = Expr(r.lhs) - r.rhs;
      for (const auto& [name, e] : fs) d = substitute_function(d, name, e);
      if (!d.is_zero()) return "stand-ins violate " + r.to_string() + ": residual " + to_string(d);
    }
    return "";
  }

  /// Fills the parameter values and function stand-ins of a sample point.
  /// Returns a reason when some symbol cannot be instantiated.
  std::optional<std::string> instantiate(SamplePoint& p, std::mt19937_64& rng) const {
    for (const auto& name : symbols_.parameters) p.values[Atom::param(name)] = detail::uniform(rng, 0.5, 1.5);
    std::set<std::string> constrained;
    for (const auto& r : relations_.rules()) constrained.insert(r.lhs.name());
    bool use_spec = false;
    for (const auto& name : constrained) {
      if (auto f = ode_standin(name, p, rng)) {
        p.functions[name] = *f;
      } else if (spec_ && spec_->functions.count(name)) {
        use_spec = true;
      } else {
        return "no stand-in satisfying the relations for '" + name + "'";
      }
    }
    if (use_spec) {
      if (std::string d = verify_spec(); !d.empty()) return d;
      SymbolTable st = standin_symbols();
      std::map<Atom, double> pv;
      for (const auto& name : st.parameters) {
        const std::string v = spec_->parameters.count(name) ? spec_->parameters.at(name) : "random";
        pv[Atom::param(name)] = v == "random" ? detail::uniform(rng, 0.5, 1.5) : std::stod(v);
      }
      for (const auto& [name, text] : spec_->functions) {
        auto cache = std::make_shared<std::map<MultiIndex, Expr>>();
        (*cache)[MultiIndex{}] = parse_expression(text, st);
        p.functions[name] = [cache, pv](const MultiIndex& m, double x, double t, double q) {
          auto it = cache->find(m);
          if (it == cache->end()) {
            Expr e = cache->at(MultiIndex{});
            for (int i = 0; i < m.q; ++i) e = partial_derivative(e, Atom::q(0));
            for (int i = 0; i < m.x; ++i) e = partial_derivative(e, Atom::x());
            for (int i = 0; i < m.t; ++i) e = partial_derivative(e, Atom::t());
            it = cache->emplace(m, e).first;
          }
          SamplePoint sp;
          sp.values = pv;
          sp.values[Atom::x()] = x;
          sp.values[Atom::t()] = t;
          sp.values[Atom::q(0)] = q;
          return evaluate(it->second, sp).value;
        };
      }
    }
    for (const auto& [name, deps] : symbols_.functions)
      if (!p.functions.count(name)) p.functions[name] = detail::exponential_standin(deps, rng);
    return std::nullopt;
  }

 private:
  SymbolTable standin_symbols() const {
    SymbolTable st;
    if (spec_)
      for (const auto& [name, v] : spec_->parameters) st.declare_parameter(name);
    return st;
  }

  // f(q) with a single rule f_{q^n} := sum_k c_k f_{q^k}, constant c_k:
  // f = e_1^T exp(C q) y0 for the companion matrix C.
  std::optional<FunctionValue> ode_standin(const std::string& name, const SamplePoint& p, std::mt19937_64& rng) const {
    const SideRelation* rule = nullptr;
    for (const auto& r : relations_.rules()) {
      if (r.lhs.name() != name) continue;
      if (rule) return std::nullopt;
      rule = &r;
    }
    if (!rule || rule->lhs.deps() != dep_q) return std::nullopt;
    const unsigned n = rule->lhs.multi().q;
    if (n == 0) return std::nullopt;
    std::vector<double> c(n, 0.0);
    auto parts = [&]() -> std::optional<std::map<Monomial, Expr>> {
      std::vector<Atom> vars;
      for (unsigned k = 0; k < n; ++k) vars.push_back(rule->lhs.with_multi(MultiIndex{std::uint8_t(k), 0, 0}));
      try {
        return collect(rule->rhs, vars);
      } catch (const Error&) {
        return std::nullopt;
      }
    }();
    if (!parts) return std::nullopt;
    for (const auto& [m, coef] : *parts) {
      if (m.total_degree() != 1) return std::nullopt;
      if (coef.contains_if([](const Atom& a) { return !a.is_param(); })) return std::nullopt;
      c[m.factors().front().atom.multi().q] = evaluate(coef, p).value;
    }
    Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(n, n);
    for (unsigned i = 0; i + 1 < n; ++i) cm(i, i + 1) = 1;
    for (unsigned k = 0; k < n; ++k) cm(n - 1, k) = c[k];
    Eigen::VectorXd y0(n);
    for (unsigned i = 0; i < n; ++i) y0(i) = detail::uniform(rng, -1, 1);
    return [cm, y0](const MultiIndex& m, double, double, double q) {
      Eigen::MatrixXd e = (cm * q).exp();
      Eigen::VectorXd y = e * y0;
      for (int k = 0; k < m.q; ++k) y = cm * y;
      return y(0);
    };
  }

  const RelationSet& relations_;
  const SymbolTable& symbols_;
  std::optional<StandinSpec> spec_;
};

namespace detail {

inline void random_jets(SamplePoint& p, unsigned order, std::mt19937_64& rng) {
  p.values[Atom::x()] = uniform(rng, -0.5, 0.5);
  p.values[Atom::t()] = uniform(rng, -0.5, 0.5);
  for (unsigned k = 0; k <= order; ++k) {
    p.values[Atom::q(k)] = uniform(rng, -1, 1);
    p.values[Atom::psi(k)] = uniform(rng, -1, 1);
  }
}

inline unsigned max_index(const Expr& e) {
  unsigned m = 0;
  for (const auto& a : e.atoms())
    if (a.is_jet() || a.is_lin()) m = std::max(m, a.index());
  return m;
}

}  // namespace detail

/// Exact zero test for relation-free expressions: every atom independent.
inline NumericVerdict exact_zero_check(const Expr& e, unsigned trials, std::uint64_t seed = default_seed) {
  if (trials < 1) throw Error(ErrorKind::contract, "at least one trial is required");
  NumericVerdict v;
  std::mt19937_64 rng(seed);
  for (unsigned i = 0; i < trials; ++i) {
    std::map<Atom, Rational> values;
    Rational den = 0;
    for (int attempt = 0; attempt < 20 && den == 0; ++attempt) {
      for (const auto& a : e.atoms()) values[a] = detail::random_rational(rng);
      den = detail::eval_poly_exact(e.den(), values);
    }
    if (den == 0) {
      v.status = NumericStatus::skipped;
      v.reason = "denominator vanished at every sample";
      return v;
    }
    ++v.trials;
    if (detail::eval_poly_exact(e.num(), values) != 0) {
      v.status = NumericStatus::nonzero;
      v.worst = 1;
      return v;
    }
  }
  v.status = NumericStatus::consistent_zero;
  return v;
}

/// Zero test modulo side relations. Relation-free input goes to the exact
/// check; otherwise function symbols are replaced by stand-ins satisfying
/// the relations, and the verdict is skipped when none can be built.
inline NumericVerdict numeric_zero_check(const Expr& e, const RelationSet& relations, unsigned trials,
                                         const SymbolTable& symbols = {}, const std::optional<StandinSpec>& spec = {},
                                         std::uint64_t seed = default_seed) {
  if (trials < 1) throw Error(ErrorKind::contract, "at least one trial is required");
  if (relations.empty()) return exact_zero_check(e, trials, seed);
  NumericVerdict v;
  std::mt19937_64 rng(seed);
  SymbolTable st = symbols;
  for (const auto& a : e.atoms())
    if (a.is_func() && !st.functions.count(a.name())) st.functions[a.name()] = a.deps();
    else if (a.is_param() && !st.parameters.count(a.name())) st.parameters.insert(a.name());
  for (const auto& r : relations.rules())
    for (const auto& a : r.rhs.atoms())
      if (a.is_func() && !st.functions.count(a.name())) st.functions[a.name()] = a.deps();
      else if (a.is_param() && !st.parameters.count(a.name())) st.parameters.insert(a.name());
  StandinFactory factory(relations, st, spec);
  const unsigned order = detail::max_index(e);
  for (unsigned i = 0; i < trials; ++i) {
    SamplePoint p;
    if (auto why = factory.instantiate(p, rng)) {
      v.status = NumericStatus::skipped;
      v.reason = *why;
      return v;
    }
    detail::DoubleValue d{};
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      detail::random_jets(p, order, rng);
      auto den = detail::eval_poly(e.den(), [&](const Atom& a) { return p.atom_value(a); });
      if (std::abs(den.value) < 1e-6 || !std::isfinite(den.value)) continue;
      d = evaluate(e, p);
      ok = std::isfinite(d.value);
    }
    if (!ok) {
      v.status = NumericStatus::skipped;
      v.reason = "no sample point with a denominator bounded away from zero";
      return v;
    }
    ++v.trials;
    const double scale = std::max(d.scale, 1e-300);
    v.worst = std::max(v.worst, std::abs(d.value) / scale);
    if (std::abs(d.value) > 1e-9 * d.scale || (d.scale == 0 && d.value != 0)) {
      v.status = NumericStatus::nonzero;
      return v;
    }
  }
  v.status = NumericStatus::consistent_zero;
  return v;
}

/// Compares sum_i P_i psi_i with the centered difference
/// (P[q + eps psi] - P[q - eps psi]) / (2 eps) at eps = 1e-6.
inline NumericVerdict numeric_frechet_check(const EvolutionEquation& eq, const LinearOperator& dp, unsigned trials,
                                            std::uint64_t seed = default_seed) {
  if (trials < 1) throw Error(ErrorKind::contract, "at least one trial is required");
  constexpr double eps = 1e-6;
  constexpr double tol = 1e-6;
  NumericVerdict v;
  std::mt19937_64 rng(seed);
  std::map<std::string, std::uint8_t> funcs;
  std::set<std::string> params;
  for (const auto& a : eq.rhs().atoms()) {
    if (a.is_func()) funcs[a.name()] = a.deps();
    if (a.is_param()) params.insert(a.name());
  }
  const Expr sym = dp.on_psi();
  for (unsigned i = 0; i < trials; ++i) {
    SamplePoint p;
    for (const auto& n : params) p.values[Atom::param(n)] = detail::uniform(rng, 0.5, 1.5);
    for (const auto& [n, d] : funcs) p.functions[n] = detail::exponential_standin(d, rng);
    detail::DoubleValue s{};
    double fd = 0, scale = 0;
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      detail::random_jets(p, eq.order(), rng);
      s = evaluate(sym, p);
      SamplePoint plus = p, minus = p;
      for (unsigned k = 0; k <= eq.order(); ++k) {
        plus.values[Atom::q(k)] += eps * p.get(Atom::psi(k));
        minus.values[Atom::q(k)] -= eps * p.get(Atom::psi(k));
      }
      auto fp = evaluate(eq.rhs(), plus);
      auto fm = evaluate(eq.rhs(), minus);
      fd = (fp.value - fm.value) / (2 * eps);
      scale = std::max({1.0, std::abs(s.value), fp.scale});
      ok = std::isfinite(fd) && std::isfinite(s.value) && std::isfinite(scale) && scale < 1e8;
    }
    if (!ok) {
      v.status = NumericStatus::skipped;
      v.reason = "no well-conditioned sample point";
      return v;
    }
    ++v.trials;
    const double rel = std::abs(fd - s.value) / scale;
    v.worst = std::max(v.worst, rel);
    if (rel > tol) {
      v.status = NumericStatus::fail;
      return v;
    }
  }
  v.status = NumericStatus::pass;
  return v;
}

inline NumericVerdict numeric_frechet_check(const EvolutionEquation& eq, unsigned trials,
                                            std::uint64_t seed = default_seed) {
  return numeric_frechet_check(eq, frechet_derivative(eq), trials, seed);
}

}  // namespace jetlax
