#include <gtest/gtest.h>

#include "support.hpp"

using namespace jetlax;
using namespace testing_support;

namespace {

const SymbolTable st = standard_symbols();

PseudoOperator D(unsigned k = 1) { return PseudoOperator::derivative(k); }
PseudoOperator mul(const Expr& e) { return PseudoOperator::multiplication(e); }

PseudoOperator random_local(std::mt19937_64& rng, unsigned max_order) {
  std::vector<Expr> c;
  const unsigned n = std::uniform_int_distribution<unsigned>(0, max_order)(rng);
  for (unsigned i = 0; i <= n; ++i) c.push_back(random_jet_polynomial(rng, 2));
  return PseudoOperator(c);
}

}  // namespace

TEST(Compose, DerivativeAfterInverse) {
  const Expr g = E("q_x*rho", st);
  EXPECT_EQ(compose(D(), PseudoOperator::nonlocal(Expr(1), g)), mul(g));
}

TEST(Compose, Leibniz) {
  const Expr b = E("eta*q", st);
  EXPECT_EQ(compose(D(), mul(b)), PseudoOperator({total_derivative_x(b), b}));
}

TEST(Compose, InverseAfterDerivativeIsIdentityOnLocalPart) {
  // D^{-1} o h o D = h - D^{-1} o h_x
  const Expr h = E("q_x^2");
  const PseudoOperator got = compose(PseudoOperator::nonlocal(Expr(1), Expr(1)), compose(mul(h), D()));
  EXPECT_EQ(got, mul(h) - PseudoOperator::nonlocal(Expr(1), total_derivative_x(h)));
}

TEST(Compose, NonlocalTimesNonlocalIsUnsupported) {
  const auto n = PseudoOperator::nonlocal(E("q"), E("q_x"));
  try {
    compose(n, n);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported_composition);
  }
}

TEST(Compose, ConstraintOperatorOfThirdClassClosesLocally) {
  const ProblemFile p = catalog_problem("third_order_class3");
  const PseudoOperator h = p.constraint->as_operator();
  EXPECT_TRUE(compose(h, *p.op).is_local());
  EXPECT_TRUE(compose(h, PseudoOperator::from(frechet_derivative(*p.evolution))).is_local());
}

TEST(Commutator, Examples) {
  EXPECT_TRUE(commutator(D(), D()).is_zero());
  const Expr b = E("rho*q_x", st);
  EXPECT_EQ(commutator(D(2), mul(b)), PseudoOperator({total_derivative_x(b, 2), Expr(2) * total_derivative_x(b)}));
}

TEST(Commutator, ConstantCoefficientOperatorCommutesWithItsLinearization) {
  const ProblemFile p = catalog_problem("third_order_class3");
  EXPECT_TRUE(commutator(*p.op, PseudoOperator::from(frechet_derivative(*p.evolution))).is_zero());
}

TEST(Commutator, AntisymmetryAndJacobi) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_local(rng, 2), b = random_local(rng, 2), c = random_local(rng, 1);
    EXPECT_TRUE((commutator(a, b) + commutator(b, a)).is_zero());
    const auto jacobi = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b));
    EXPECT_TRUE(jacobi.is_zero());
  }
}

TEST(Apply, Examples) {
  EXPECT_EQ(apply(D(), E("q")), E("q_x"));
  EXPECT_EQ(apply(PseudoOperator::nonlocal(E("q"), E("q_x")), E("q_xx")), E("q*q_x^2/2"));
}

TEST(Apply, SecondThirdOrderClassOperatorOnQx) {
  const ProblemFile p = catalog_problem("third_order_class2");
  const Application a = try_apply(*p.op, E("q_x"));
  ASSERT_TRUE(a.ok()) << a.diagnostic;
  EXPECT_EQ(a.value->jet_order(), 3);
  EXPECT_TRUE(symmetry_residual(*a.value, *p.evolution, {}).is_zero());
}

TEST(Apply, NonTotalDerivativeIntegrandFails) {
  const Application a = try_apply(PseudoOperator::nonlocal(E("q"), E("q_x")), E("q_x"));
  EXPECT_FALSE(a.ok());
  EXPECT_EQ(a.euler_residual, E("-2*q_xx"));
  try {
    apply(PseudoOperator::nonlocal(E("q"), E("q_x")), E("q_x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::nonlocality);
  }
}

TEST(Apply, PsiArgumentIsOutOfContract) { EXPECT_THROW(apply(D(), E("psi")), Error); }

TEST(Apply, ComposeIsApplyAfterApply) {
  std::mt19937_64 rng(50);
  for (int i = 0; i < 50; ++i) {
    const auto l = random_local(rng, 2), m = random_local(rng, 2);
    const Expr e = random_jet_polynomial(rng, 2);
    EXPECT_EQ(apply(compose(l, m), e), apply(l, apply(m, e)));
  }
}

TEST(Apply, ComposeWithNonlocalRightFactor) {
  // (D o f D^{-1} g)(e) = D(f D^{-1}(g e)) whenever g e integrates.
  const auto n = PseudoOperator::nonlocal(E("q"), E("q_x"));
  const Expr e = E("q_xx");
  EXPECT_EQ(apply(compose(D(), n), e), total_derivative_x(apply(n, e)));
}

TEST(Apply, UnchangedByNonlocalMerge) {
  const Expr f = E("q_x"), g1 = E("q_x"), g2 = E("rho_q*q_x", st);
  const auto merged = PseudoOperator::nonlocal(f, g1) + PseudoOperator::nonlocal(f, g2);
  ASSERT_EQ(merged.nonlocal_terms().size(), 1u);
  EXPECT_EQ(merged.nonlocal_terms()[0].g, g1 + g2);
  for (const char* e : {"1", "q_xx", "q_x*rho", "q"}) {
    const Application m = try_apply(merged, E(e, st));
    const Application a = try_apply(PseudoOperator::nonlocal(f, g1), E(e, st));
    const Application b = try_apply(PseudoOperator::nonlocal(f, g2), E(e, st));
    if (a.ok() && b.ok()) {
      ASSERT_TRUE(m.ok()) << e;
      EXPECT_EQ(*m.value, *a.value + *b.value) << e;
    }
  }
}

TEST(Apply, InverseCommutationIsSoundPointwise) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 30; ++i) {
    const Expr h = random_jet_polynomial(rng, 2);
    const auto lhs_op = compose(PseudoOperator::nonlocal(Expr(1), Expr(1)), compose(mul(h), D()));
    for (const Expr& e : {Expr(1), h, h * h}) {
      const Application lhs = try_apply(lhs_op, e);
      ASSERT_TRUE(lhs.ok()) << to_string(h) << " on " << to_string(e);
      const Expr rhs = h * e - apply(PseudoOperator::nonlocal(Expr(1), total_derivative_x(h)), e);
      EXPECT_EQ(*lhs.value, rhs);
    }
  }
}

TEST(OperatorTimeDerivative, Examples) {
  const auto eq = EvolutionEquation(E("q_xxx + q*q_x"), 3);
  EXPECT_TRUE(operator_time_derivative(PseudoOperator({E("lambda1", st), Expr(), Expr(1)}), eq).is_zero());
  EXPECT_EQ(operator_time_derivative(mul(E("q")), eq), mul(eq.rhs()));
}

TEST(OperatorTimeDerivative, NonlocalTermsDifferentiateBothFactors) {
  const auto eq = EvolutionEquation(E("q_xx"), 2);
  const auto got = operator_time_derivative(PseudoOperator::nonlocal(E("q"), E("q")), eq);
  EXPECT_EQ(got, PseudoOperator::nonlocal(E("q_xx"), E("q")) + PseudoOperator::nonlocal(E("q"), E("q_xx")));
}

TEST(PseudoOperator, CoefficientsMustBePsiFree) {
  try {
    mul(E("psi"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
}

TEST(PseudoOperator, ZeroTermsAreDropped) {
  EXPECT_TRUE(PseudoOperator::nonlocal(Expr(), E("q")).is_zero());
  EXPECT_TRUE((D(2) - D(2)).is_zero());
  EXPECT_EQ((D(2) - D(2)).order(), -1);
}

TEST(PseudoOperator, TextRoundTrip) {
  for (const char* stem : {"second_order_family", "third_order_class1", "third_order_class2", "third_order_class3"}) {
    const ProblemFile p = catalog_problem(stem);
    ASSERT_TRUE(p.op.has_value()) << stem;
    EXPECT_EQ(parse_operator(to_string(*p.op), p.symbols), *p.op) << stem;
  }
}

TEST(Adjoint, OfDerivativeIsMinusDerivative) {
  EXPECT_EQ(adjoint(D()), PseudoOperator({Expr(), Expr(-1)}));
  const Expr b = E("q_x");
  EXPECT_EQ(adjoint(adjoint(PseudoOperator({b, b, Expr(1)}))), PseudoOperator({b, b, Expr(1)}));
}

TEST(RightRemainder, DividesExactly) {
  std::mt19937_64 rng(4);
  const PseudoOperator h({E("q"), E("q_x"), Expr(1)});
  for (int i = 0; i < 10; ++i) {
    const auto q = random_local(rng, 2), r = random_local(rng, 1);
    EXPECT_EQ(right_remainder(compose(q, h) + r, h), r);
  }
}
