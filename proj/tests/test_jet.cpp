#include <gtest/gtest.h>

#include "support.hpp"

using namespace jetlax;
using namespace testing_support;

namespace {

const SymbolTable st = standard_symbols();

std::vector<Expr> printed_linearization(const ProblemFile& p) {
  std::vector<Expr> out;
  for (const auto& s : p.printed.at("linearization")) out.push_back(parse_expression(s.get<std::string>(), p.symbols));
  return out;
}

}  // namespace

TEST(TotalDerivativeX, Basics) {
  EXPECT_EQ(total_derivative_x(E("q")), E("q_x"));
  EXPECT_EQ(total_derivative_x(E("q_x^2/2")), E("q_x*q_xx"));
  EXPECT_EQ(total_derivative_x(E("x*q")), E("q + x*q_x"));
  EXPECT_EQ(total_derivative_x(E("psi*q")), E("psi_x*q + psi*q_x"));
}

TEST(TotalDerivativeX, ChainRuleThroughFunctionSymbol) {
  EXPECT_EQ(total_derivative_x(E("r", st)), E("r_q*q_x + r_x", st));
  EXPECT_EQ(total_derivative_x(E("rho", st)), E("rho_q*q_x", st));
  EXPECT_EQ(total_derivative_x(E("eps", st)), Expr());
}

TEST(TotalDerivativeX, Iterated) { EXPECT_EQ(total_derivative_x(E("q"), 4), E("q_xxxx")); }

TEST(TotalDerivativeT, OnTheEquation) {
  const auto eq = EvolutionEquation(E("q_xxx"), 3);
  EXPECT_EQ(total_derivative_t(E("q"), eq), E("q_xxx"));
  const auto burgers = EvolutionEquation(E("q_xx + 2*q*q_x"), 2);
  EXPECT_EQ(total_derivative_t(E("q_x"), burgers), total_derivative_x(burgers.rhs()));
}

TEST(TotalDerivativeT, ChainRuleThroughFunctionSymbol) {
  const auto eq = EvolutionEquation(E("q_xx"), 2);
  EXPECT_EQ(total_derivative_t(E("r", st), eq), E("r_q*q_xx + r_t", st));
}

TEST(TotalDerivativeT, PsiIsACallerContractViolation) {
  const auto eq = EvolutionEquation(E("q_xx"), 2);
  try {
    total_derivative_t(E("psi_x*q"), eq);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
}

TEST(TotalDerivatives, CommuteOnEveryCatalogEquation) {
  std::mt19937_64 rng(8);
  for (const auto& e : list_entries(JETLAX_CATALOG_DIR)) {
    const ProblemFile p = load_problem(e.path.string());
    for (int i = 0; i < 5; ++i) {
      Expr f = random_jet_polynomial(rng, 3);
      for (const auto& [name, deps] : p.symbols.functions) f += Expr(Atom::func(name, deps)) * Expr(Atom::q(unsigned(i % 3)));
      const Expr a = total_derivative_t(total_derivative_x(f), *p.evolution);
      const Expr b = total_derivative_x(total_derivative_t(f, *p.evolution));
      EXPECT_EQ(a, b) << p.id << ": " << to_string(f);
    }
  }
}

TEST(EvolutionEquation, OrderMustBeExact) {
  EXPECT_THROW(EvolutionEquation(E("q_xx"), 3), Error);
  EXPECT_THROW(EvolutionEquation(E("q_xxx"), 2), Error);
  EXPECT_THROW(EvolutionEquation(E("q_xx*psi"), 2), Error);
  EXPECT_EQ(EvolutionEquation::of(E("q_xxxx + q")).order(), 4u);
}

TEST(Frechet, SecondOrderFamilyGivesPrintedLinearization) {
  const ProblemFile p = catalog_problem("second_order_family");
  EXPECT_EQ(frechet_derivative(*p.evolution).coefficients, printed_linearization(p));
}

TEST(Frechet, LinearThirdOrder) {
  const auto dp = frechet_derivative(EvolutionEquation(E("q_xxx"), 3));
  EXPECT_EQ(dp.coefficients, (std::vector<Expr>{Expr(), Expr(), Expr(), Expr(1)}));
}

TEST(Frechet, FirstThirdOrderClassGivesPrintedLinearization) {
  const ProblemFile p = catalog_problem("third_order_class1");
  EXPECT_EQ(frechet_derivative(*p.evolution).coefficients, printed_linearization(p));
}

// d/d(epsilon) P[q + epsilon psi] at epsilon = 0, computed by substitution.
TEST(Frechet, MatchesEpsilonExpansionOracle) {
  const Atom eps = Atom::param("epsilon");
  for (const char* stem : {"third_order_class2", "third_order_class3"}) {
    const ProblemFile p = catalog_problem(stem);
    Bindings b;
    for (unsigned k = 0; k <= p.order; ++k) b.emplace(Atom::q(k), Expr(Atom::q(k)) + Expr(eps) * Expr(Atom::psi(k)));
    const Expr shifted = substitute(p.evolution->rhs(), b);
    const Expr oracle = substitute(partial_derivative(shifted, eps), {{eps, Expr()}});
    EXPECT_EQ(frechet_derivative(*p.evolution).on_psi(), oracle) << stem;
  }
}

TEST(Euler, Examples) {
  EXPECT_TRUE(euler_operator(E("q_x*q_xx")).is_zero());
  EXPECT_EQ(euler_operator(E("q_x^2")), E("-2*q_xx"));
  EXPECT_EQ(euler_operator(E("q^2/2")), E("q"));
}

TEST(Euler, AnnihilatesTotalDerivativesOnFiftyRandomCases) {
  std::mt19937_64 rng(50);
  for (int i = 0; i < 50; ++i) {
    Expr f = random_jet_polynomial(rng, 3);
    if (i % 5 == 0) f = f / (Expr(Atom::q(0)) + Expr(2));
    EXPECT_TRUE(euler_operator(total_derivative_x(f)).is_zero()) << to_string(f);
  }
}

TEST(Invert, Examples) {
  EXPECT_EQ(invert_total_derivative(E("q_x*q_xx")).value, E("q_x^2/2"));
  EXPECT_EQ(invert_total_derivative(E("q_xx")).value, E("q_x"));
  EXPECT_EQ(invert_total_derivative(E("rho_q*q_x", st)).value, E("rho", st));
  EXPECT_EQ(invert_total_derivative(Expr()).value, Expr());
}

TEST(Invert, NonTotalDerivativeFailsWithEulerResidual) {
  const Antiderivative a = invert_total_derivative(E("q_x^2"));
  EXPECT_FALSE(a.ok());
  EXPECT_EQ(a.euler_residual, E("-2*q_xx"));
  EXPECT_FALSE(a.diagnostic.empty());
}

TEST(Invert, BareXIsRejected) {
  const Antiderivative a = invert_total_derivative(E("x"));
  EXPECT_FALSE(a.ok());
}

TEST(Invert, ExplicitXThroughFunctionSymbols) {
  const Antiderivative a = invert_total_derivative(E("eta_x", st));
  ASSERT_TRUE(a.ok()) << a.diagnostic;
  EXPECT_EQ(*a.value, E("eta", st));
}

TEST(Invert, InvertsTotalDerivativeOnHundredRandomPolynomials) {
  std::mt19937_64 rng(100);
  for (int i = 0; i < 100; ++i) {
    const Expr f = detail::drop_constant(random_jet_polynomial(rng, 3));
    if (f.is_zero()) continue;
    const Antiderivative a = invert_total_derivative(total_derivative_x(f));
    ASSERT_TRUE(a.ok()) << to_string(f) << ": " << a.diagnostic;
    EXPECT_EQ(*a.value, f);
  }
}

TEST(Invert, EulerZeroImpliesSuccess) {
  std::mt19937_64 rng(7);
  int zero = 0;
  for (int i = 0; i < 200; ++i) {
    const Expr e = random_jet_polynomial(rng, 2, false);
    if (!euler_operator(e).is_zero()) continue;
    ++zero;
    const Antiderivative a = invert_total_derivative(e);
    ASSERT_TRUE(a.ok()) << to_string(e);
    EXPECT_EQ(total_derivative_x(*a.value), e);
  }
  EXPECT_GT(zero, 0);
}
