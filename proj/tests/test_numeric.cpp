#include <gtest/gtest.h>

#include "support.hpp"

using namespace jetlax;
using namespace testing_support;

namespace {

NumericVerdict zero_check(const ProblemFile& p, const Expr& e, unsigned trials = 20, std::uint64_t seed = default_seed) {
  return numeric_zero_check(e, p.relations, trials, p.symbols, p.standins, seed);
}

ResidualSystem raw_residuals(const ProblemFile& p, const DifferentialConstraint& h) {
  return constraint_residuals(frechet_derivative(*p.evolution), h, *p.evolution, p.mode);
}

}  // namespace

TEST(NumericZeroCheck, TrivialZeros) {
  EXPECT_EQ(numeric_zero_check(Expr(), {}, 5).status, NumericStatus::consistent_zero);
  EXPECT_EQ(numeric_zero_check(E("q_xx") - E("q_xx"), {}, 5).status, NumericStatus::consistent_zero);
  EXPECT_EQ(numeric_zero_check(E("q_xx/q_x"), {}, 5).status, NumericStatus::nonzero);
}

TEST(NumericZeroCheck, TrialsMustBePositive) { EXPECT_THROW(numeric_zero_check(Expr(), {}, 0), Error); }

TEST(NumericZeroCheck, RawResidualsOfConcreteFamiliesVanishOnStandins) {
  for (const char* stem : {"second_order_family", "third_order_class1", "third_order_class2", "third_order_class3"}) {
    const ProblemFile p = catalog_problem(stem);
    for (const auto& w : raw_residuals(p, *p.constraint).residuals) {
      const NumericVerdict v = zero_check(p, w);
      EXPECT_EQ(v.status, NumericStatus::consistent_zero) << stem << ": " << v.reason << " worst " << v.worst;
    }
  }
}

TEST(NumericZeroCheck, MutatedFirstClassResidualIsNonzero) {
  const ProblemFile p = catalog_problem("third_order_class1");
  std::vector<Expr> a;
  for (unsigned i = 0; i < 3; ++i)
    a.push_back(substitute_function((*p.constraint)[i], "rho", parse_expression("2*rho", p.symbols)));
  bool flagged = false;
  for (const auto& w : raw_residuals(p, DifferentialConstraint(a)).residuals) {
    const NumericVerdict v = zero_check(p, w);
    ASSERT_NE(v.status, NumericStatus::skipped) << v.reason;
    flagged = flagged || v.status == NumericStatus::nonzero;
  }
  EXPECT_TRUE(flagged);
}

TEST(NumericZeroCheck, GenericResidualsAreNonzero) {
  const ProblemFile p = catalog_problem("generic_order2_system");
  for (const auto& w : raw_residuals(p, *p.constraint).residuals)
    EXPECT_EQ(numeric_zero_check(w, {}, 5).status, NumericStatus::nonzero);
}

TEST(NumericZeroCheck, UninstantiableRelationIsSkippedWithReason) {
  SymbolTable s;
  s.declare_function("f", dep_x | dep_t);
  RelationSet rel({parse_relation("f_x := f^2 + x*f_t", s)});
  const NumericVerdict v = numeric_zero_check(parse_expression("f_x - f^2", s) * E("q_x"), rel, 5, s);
  EXPECT_EQ(v.status, NumericStatus::skipped);
  EXPECT_FALSE(v.reason.empty());
}

// Expressions that vanish only modulo rho_qqq := -(4 rho1/(3 eta)) rho_q,
// built by multiplying the rule by random jet polynomials.
TEST(NumericZeroCheck, NoFalseAlarmsOnThousandRelationZeroCases) {
  const ProblemFile p = catalog_problem("third_order_class1");
  const Expr rule = parse_expression("rho_qqq + (4*rho1/(3*eta))*rho_q", p.symbols);
  std::mt19937_64 rng(1000);
  for (int i = 0; i < 1000;) {
    Expr f = random_jet_polynomial(rng, 3);
    if (i % 3 == 0) f = f / (Expr(Atom::q(1)) + Expr(Atom::func("rho", dep_q, {1, 0, 0})));
    if (i % 4 == 0) f += random_jet_polynomial(rng, 2) * Expr(Atom::func("rho", dep_q, {2, 0, 0}));
    const Expr e = f * rule;
    if (e.is_zero()) continue;
    ++i;
    const NumericVerdict v = zero_check(p, e, 3, std::uint64_t(i));
    ASSERT_EQ(v.status, NumericStatus::consistent_zero) << to_string(e) << " worst " << v.worst << " " << v.reason;
  }
}

TEST(NumericZeroCheck, FlagsRelativePerturbationOfOneInAThousand) {
  const ProblemFile p = catalog_problem("third_order_class1");
  const Expr rho_qqq = parse_expression("rho_qqq", p.symbols);
  const Expr image = parse_expression("-(4*rho1/(3*eta))*rho_q", p.symbols);
  std::mt19937_64 rng(99);
  int detected = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const Expr f = random_jet_polynomial(rng, 3);
    const Expr e = f * rho_qqq - Expr(Rational(999, 1000)) * f * image;
    if (zero_check(p, e, 20, std::uint64_t(seed)).status == NumericStatus::nonzero) ++detected;
  }
  EXPECT_GE(detected, 99);
}

TEST(NumericFrechetCheck, LinearThirdOrderPasses) {
  EXPECT_EQ(numeric_frechet_check(EvolutionEquation(E("q_xxx"), 3), 10).status, NumericStatus::pass);
}

TEST(NumericFrechetCheck, SecondClassWithUnitParametersPasses) {
  const ProblemFile p = catalog_problem("third_order_class2");
  Bindings ones;
  for (const char* n : {"eps1", "eps2", "eps3", "eta"}) ones.emplace(Atom::param(n), Expr(1));
  const EvolutionEquation eq(substitute(p.evolution->rhs(), ones), 3);
  const NumericVerdict v = numeric_frechet_check(eq, 20);
  EXPECT_EQ(v.status, NumericStatus::pass) << v.worst;
  EXPECT_LT(v.worst, 1e-6);
}

TEST(NumericFrechetCheck, EveryCatalogEquationPasses) {
  for (const auto& e : list_entries(JETLAX_CATALOG_DIR)) {
    const ProblemFile p = load_problem(e.path.string());
    const NumericVerdict v = numeric_frechet_check(*p.evolution, 20);
    EXPECT_EQ(v.status, NumericStatus::pass) << e.id << " worst " << v.worst << " " << v.reason;
  }
}

TEST(NumericFrechetCheck, DroppingACoefficientFails) {
  for (const char* stem : {"third_order_class1", "third_order_class2", "second_order_family"}) {
    const ProblemFile p = catalog_problem(stem);
    const LinearOperator dp = frechet_derivative(*p.evolution);
    for (std::size_t i = 0; i < dp.coefficients.size(); ++i) {
      if (dp.coefficients[i].is_zero()) continue;
      LinearOperator bad = dp;
      bad.coefficients[i] = Expr();
      EXPECT_EQ(numeric_frechet_check(*p.evolution, bad, 20).status, NumericStatus::fail) << stem << " slot " << i;
    }
  }
}

TEST(NumericFrechetCheck, PrintedSecondClassLinearizationFails) {
  const ProblemFile p = catalog_problem("third_order_class2");
  LinearOperator printed;
  for (const auto& s : p.printed["linearization"]) printed.coefficients.push_back(parse_expression(s.get<std::string>(), p.symbols));
  EXPECT_EQ(numeric_frechet_check(*p.evolution, printed, 20).status, NumericStatus::fail);
}

TEST(NumericFrechetCheck, SeedsAreReproducible) {
  const ProblemFile p = catalog_problem("third_order_class1");
  const auto a = numeric_frechet_check(*p.evolution, 5, 42), b = numeric_frechet_check(*p.evolution, 5, 42);
  EXPECT_EQ(a.worst, b.worst);
}
