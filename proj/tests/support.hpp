#pragma once

#include <random>
#include <string>

#include "jetlax/catalog.hpp"
#include "jetlax/numeric.hpp"

namespace jetlax {

// Readable gtest failure messages.
inline void PrintTo(const Expr& e, std::ostream* os) { *os << to_string(e); }
inline void PrintTo(const PseudoOperator& l, std::ostream* os) { *os << to_string(l); }

}  // namespace jetlax

namespace testing_support {

using namespace jetlax;

inline std::string catalog_file(const std::string& stem) { return std::string(JETLAX_CATALOG_DIR) + "/" + stem + ".json"; }

inline ProblemFile catalog_problem(const std::string& stem) { return load_problem(catalog_file(stem)); }

inline Expr E(const std::string& text, const SymbolTable& st = {}) { return parse_expression(text, st); }

/// Symbol table for the usual suspects: r(x,t,q), eta(x,t), eta1(x,t),
/// rho(q), a(q), eps(t) and parameters lambda1..6, eps1..3, rho1, k.
inline SymbolTable standard_symbols() {
  SymbolTable st;
  st.declare_function("r", dep_x | dep_t | dep_q);
  st.declare_function("eta", dep_x | dep_t);
  st.declare_function("eta1", dep_x | dep_t);
  st.declare_function("rho", dep_q);
  st.declare_function("a", dep_q);
  st.declare_function("eps", dep_t);
  for (int i = 1; i <= 6; ++i) st.declare_parameter("lambda" + std::to_string(i));
  for (int i = 1; i <= 3; ++i) st.declare_parameter("eps" + std::to_string(i));
  st.declare_parameter("rho1");
  st.declare_parameter("k");
  return st;
}

/// Random unnormalized trees over a small atom pool.
class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed, bool with_division = true) : rng_(seed), division_(with_division) {
    pool_ = {Atom::x(),       Atom::t(),      Atom::param("k"), Atom::func("rho", dep_q, {1, 0, 0}),
             Atom::func("eta", dep_x | dep_t), Atom::q(0),     Atom::q(1),       Atom::q(2),
             Atom::q(3),      Atom::psi(0),   Atom::psi(1)};
  }

  const std::vector<Atom>& pool() const { return pool_; }

  TreePtr tree(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 7);
    switch (pick(rng_)) {
      case 0: return Tree::num(small_rational());
      case 1: return Tree::var(pool_[std::uniform_int_distribution<std::size_t>(0, pool_.size() - 1)(rng_)]);
      case 2: return Tree::binary(Tree::Op::add, tree(depth - 1), tree(depth - 1));
      case 3: return Tree::binary(Tree::Op::sub, tree(depth - 1), tree(depth - 1));
      case 4: return Tree::binary(Tree::Op::mul, tree(depth - 1), tree(depth - 1));
      case 5:
        if (division_) return Tree::binary(Tree::Op::div, tree(depth - 1), tree(depth - 1));
        return Tree::binary(Tree::Op::mul, tree(depth - 1), tree(depth - 1));
      case 6: return Tree::neg(tree(depth - 1));
      default: {
        int e = std::uniform_int_distribution<int>(division_ ? -2 : 0, 3)(rng_);
        return Tree::power(tree(depth - 1), e);
      }
    }
  }

  Rational small_rational() {
    Rational r(std::uniform_int_distribution<int>(-5, 5)(rng_), std::uniform_int_distribution<int>(1, 4)(rng_));
    r.canonicalize();
    return r;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  bool division_;
  std::vector<Atom> pool_;
};

/// Random polynomial in q_0..q_max with small integer coefficients and an
/// occasional rho(q) factor.
inline Expr random_jet_polynomial(std::mt19937_64& rng, unsigned max_order = 3, bool with_functions = true) {
  std::uniform_int_distribution<int> nterms(1, 4), coef(-4, 4), order(0, int(max_order)), deg(1, 2), coin(0, 3);
  Expr e;
  const int n = nterms(rng);
  for (int i = 0; i < n; ++i) {
    int c = coef(rng);
    if (c == 0) c = 1;
    Expr term(c);
    const int factors = deg(rng);
    for (int j = 0; j < factors; ++j) term *= Expr(Atom::q(unsigned(order(rng))));
    if (with_functions && coin(rng) == 0) term *= Expr(Atom::func("rho", dep_q));
    e += term;
  }
  return e;
}

inline std::map<Atom, Rational> random_values(const std::vector<Atom>& atoms, std::mt19937_64& rng) {
  std::map<Atom, Rational> v;
  for (const auto& a : atoms) v[a] = detail::random_rational(rng);
  return v;
}

}  // namespace testing_support
