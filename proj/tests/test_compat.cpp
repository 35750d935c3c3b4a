#include <gtest/gtest.h>

#include "jetlax/adjudicate.hpp"
#include "support.hpp"

using namespace jetlax;
using namespace testing_support;

namespace {

CompatibilityReport compat_of(const ProblemFile& p, const RelationSet& extra = {}) {
  RelationSet rel = p.relations;
  for (const auto& r : extra.rules()) rel.add(r);
  return check_compatibility(*p.evolution, *p.constraint, rel, p.mode);
}

std::string residual_text(const CompatibilityReport& r) {
  std::string s;
  for (const auto& w : r.residuals) s += "W" + std::to_string(w.index) + " = " + to_string(w.reduced) + "\n";
  return s;
}

const std::vector<std::string> concrete_families = {"second_order_family", "second_order_svinolupov_limit",
                                                    "third_order_class1", "third_order_class2",
                                                    "third_order_class3"};

}  // namespace

TEST(ConstraintResiduals, GenericOrderTwoSolvedFormMatchesPrintedSystem) {
  const ProblemFile p = catalog_problem("generic_order2_system");
  const LinearOperator dp = frechet_derivative(*p.evolution);
  const auto w = constraint_residuals(dp, *p.constraint, *p.evolution, p.mode);
  ASSERT_EQ(w.residuals.size(), 2u);
  const auto solved = solve_time_derivatives(w, *p.constraint);
  ASSERT_EQ(solved.size(), 2u);
  // constraint = [B, A]: slot 0 is B, slot 1 is A.
  EXPECT_EQ(solved[1], parse_expression(p.printed["solved"]["A_t"].get<std::string>(), p.symbols));
  EXPECT_EQ(solved[0], parse_expression(p.printed["solved"]["B_t"].get<std::string>(), p.symbols));
}

TEST(ConstraintResiduals, FlatCaseLeavesOnlyTimeDerivatives) {
  SymbolTable s;
  for (const char* n : {"c0", "c1", "c2"}) s.declare_parameter(n);
  s.declare_function("A", dep_t);
  s.declare_function("B", dep_t);
  const auto eq = EvolutionEquation(parse_expression("c2*q_xx + c1*q_x + c0*q", s), 2);
  const DifferentialConstraint h({parse_expression("B", s), parse_expression("A", s)});
  const auto w = constraint_residuals(frechet_derivative(eq), h, eq, CoefficientMode::symbolic);
  EXPECT_TRUE(proportional(w.residuals[0], parse_expression("B_t", s)));
  EXPECT_TRUE(proportional(w.residuals[1], parse_expression("A_t", s)));
}

TEST(ConstraintResiduals, OrderMismatchIsReported) {
  const auto eq = EvolutionEquation(E("q_xxx"), 3);
  const DifferentialConstraint h({Expr(), Expr()});
  try {
    constraint_residuals(frechet_derivative(eq), h, eq, CoefficientMode::concrete);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::order_mismatch);
  }
}

TEST(CheckCompatibility, SecondOrderFamilyBothRoutesVanish) {
  const auto r = compat_of(catalog_problem("second_order_family"));
  EXPECT_TRUE(r.compatible()) << residual_text(r);
  EXPECT_TRUE(r.operator_route_zero);
  EXPECT_TRUE(r.routes_agree());
  for (const auto& w : r.residuals) EXPECT_FALSE(w.raw.is_zero()) << "raw residual should need the relations";
}

TEST(CheckCompatibility, LiteralRelationsCompleteToTheSameVerdict) {
  const ProblemFile p = load_problem(std::string(JETLAX_TEST_DATA) + "/second_order_literal_relations.json");
  const auto r = compat_of(p);
  EXPECT_TRUE(r.compatible()) << residual_text(r);
  EXPECT_TRUE(r.routes_agree());
  EXPECT_FALSE(r.derived_relations.empty());
}

TEST(CheckCompatibility, EveryConcreteFamilyIsCompatibleAndRoutesAgree) {
  for (const auto& stem : concrete_families) {
    const auto r = compat_of(catalog_problem(stem));
    EXPECT_TRUE(r.compatible()) << stem << "\n" << residual_text(r);
    EXPECT_TRUE(r.routes_agree()) << stem;
  }
}

TEST(CheckCompatibility, RoutesAgreeOnGenericSystems) {
  for (const char* stem : {"generic_order2_system", "generic_order3_system"}) {
    const auto r = compat_of(catalog_problem(stem));
    EXPECT_FALSE(r.compatible()) << stem;
    EXPECT_TRUE(r.routes_agree()) << stem;
  }
}

namespace {

CompatibilityReport with_rho(const ProblemFile& p, const std::string& replacement) {
  const Expr repl = parse_expression(replacement, p.symbols);
  std::vector<Expr> a;
  for (unsigned i = 0; i < p.constraint->order(); ++i) a.push_back(substitute_function((*p.constraint)[i], "rho", repl));
  return check_compatibility(*p.evolution, DifferentialConstraint(a), p.relations, p.mode);
}

}  // namespace

TEST(CheckCompatibility, FirstClassWithScaledRhoInConstraintBreaks) {
  const auto r = with_rho(catalog_problem("third_order_class1"), "2*rho");
  EXPECT_FALSE(r.compatible());
  EXPECT_TRUE(r.routes_agree());
}

// Adding c*q_x to the evolution leaves H_t + [H, D_P] unchanged, so shifting
// rho by a constant in the constraint alone pairs it with an equivalent
// compatible equation.
TEST(CheckCompatibility, FirstClassWithShiftedRhoInConstraintStaysCompatible) {
  const ProblemFile p = catalog_problem("third_order_class1");
  EXPECT_TRUE(with_rho(p, "rho + 1").compatible());
  const Expr shifted = p.evolution->rhs() + Expr(Atom::q(1));
  EXPECT_TRUE(check_compatibility(EvolutionEquation(shifted, 3), *p.constraint, p.relations, p.mode).compatible());
}

// Every single-coefficient perturbation of a constraint must break a residual.
TEST(Mutation, EachConstraintCoefficientShiftBreaksCompatibility) {
  for (const auto& stem : concrete_families) {
    const ProblemFile p = catalog_problem(stem);
    for (unsigned i = 0; i < p.constraint->order(); ++i) {
      for (const Expr& delta : {Expr(1), Expr(Atom::q(1))}) {
        std::vector<Expr> a;
        for (unsigned j = 0; j < p.constraint->order(); ++j) a.push_back((*p.constraint)[j]);
        a[i] += delta;
        const auto r = check_compatibility(*p.evolution, DifferentialConstraint(a), p.relations, p.mode);
        EXPECT_FALSE(r.compatible()) << stem << " A" << i << " + " << to_string(delta);
      }
    }
  }
}

TEST(Mutation, NonlinearEvolutionTermBreaksCompatibility) {
  for (const auto& stem : concrete_families) {
    const ProblemFile p = catalog_problem(stem);
    const Expr bumped = p.evolution->rhs() + E("q_x^2");
    EXPECT_FALSE(check_compatibility(EvolutionEquation(bumped, p.order), *p.constraint, p.relations, p.mode).compatible())
        << stem;
  }
  const ProblemFile c2 = catalog_problem("third_order_class2");
  const Expr bumped = c2.evolution->rhs() + parse_expression("eps1*q_x^3/6", c2.symbols);
  EXPECT_FALSE(check_compatibility(EvolutionEquation(bumped, 3), *c2.constraint, c2.relations, c2.mode).compatible());
}

TEST(Mutation, DoublingTheLeadingTermBreaksNonlinearFamilies) {
  for (const auto& stem : concrete_families) {
    if (stem == "third_order_class3") continue;
    const ProblemFile p = catalog_problem(stem);
    const Expr rhs = p.evolution->rhs();
    const Expr doubled = rhs + coefficient(rhs, Atom::q(p.order)) * Expr(Atom::q(p.order));
    EXPECT_FALSE(check_compatibility(EvolutionEquation(doubled, p.order), *p.constraint, p.relations, p.mode).compatible())
        << stem;
  }
}

// D^2 + lambda3*D + lambda4 commutes with every constant-coefficient linear
// operator, so the third class constraint fits any such equation.
TEST(Mutation, LinearFamilyConstraintIgnoresConstantCoefficientChanges) {
  const ProblemFile p = catalog_problem("third_order_class3");
  for (const char* extra : {"lambda5*q_xxx", "q_xx", "7*q"}) {
    const Expr rhs = p.evolution->rhs() + parse_expression(extra, p.symbols);
    EXPECT_TRUE(check_compatibility(EvolutionEquation(rhs, 3), *p.constraint, p.relations, p.mode).compatible()) << extra;
  }
}

TEST(IntegrateConstraint, SecondOrderFamily) {
  const ProblemFile p = catalog_problem("second_order_family");
  const Integration in = integrate_constraint(*p.constraint);
  EXPECT_EQ(in.mu, E("1/q_x"));
  EXPECT_TRUE(in.round_trip);
  EXPECT_EQ(in.phi, *p.op);
  EXPECT_TRUE(integration_round_trip(in.phi, in.mu, *p.constraint));
  const PseudoOperator printed = parse_operator(p.printed["operator"].get<std::string>(), p.symbols);
  const RelationSet rel = completed(p.relations);
  EXPECT_TRUE(reduce_operator(in.phi - printed, rel).is_zero());
}

TEST(IntegrateConstraint, ThirdClassHasEmptyNonlocalPart) {
  const ProblemFile p = catalog_problem("third_order_class3");
  const Integration in = integrate_constraint(*p.constraint);
  EXPECT_EQ(in.mu, parse_expression("1/(q_xx + lambda1*q_x + lambda2*q)", p.symbols));
  EXPECT_EQ(in.phi, parse_operator("D^2 + lambda3*D + lambda4", p.symbols));
  EXPECT_TRUE(in.phi.nonlocal_terms().empty());
}

TEST(IntegrateConstraint, SecondDerivativeVanishing) {
  const Integration in = integrate_constraint(DifferentialConstraint({Expr(), Expr()}));
  EXPECT_TRUE(in.mu.is_one());
  EXPECT_EQ(in.phi, PseudoOperator::derivative(1));
}

TEST(IntegrateConstraint, RoundTripHoldsForEveryCatalogConstraint) {
  for (const auto& stem : concrete_families) {
    const ProblemFile p = catalog_problem(stem);
    const Integration in = integrate_constraint(*p.constraint);
    EXPECT_TRUE(integration_round_trip(in.phi, in.mu, *p.constraint)) << stem;
    EXPECT_EQ(in.phi.order(), int(p.order) - 1) << stem;
  }
}

TEST(IntegrateConstraint, RoundTripRejectsAPerturbedOperator) {
  const ProblemFile p = catalog_problem("third_order_class2");
  const Integration in = integrate_constraint(*p.constraint);
  const PseudoOperator printed = parse_operator(p.printed["operator"].get<std::string>(), p.symbols);
  EXPECT_FALSE(integration_round_trip(printed, in.mu, *p.constraint));
  EXPECT_EQ(in.phi, *p.op);
}

TEST(VerifyLax, Examples) {
  EXPECT_TRUE(verify_lax(PseudoOperator::derivative(1), EvolutionEquation(E("q_xxx"), 3), {}).zero());
  for (const char* stem : {"third_order_class1", "third_order_class2", "third_order_class3"}) {
    const ProblemFile p = catalog_problem(stem);
    EXPECT_TRUE(verify_lax(*p.op, *p.evolution, p.relations).zero()) << stem;
  }
}

TEST(VerifyLax, PrintedFirstClassOperatorFails) {
  const ProblemFile p = catalog_problem("third_order_class1");
  const PseudoOperator printed = parse_operator(p.printed["operator"].get<std::string>(), p.symbols);
  const LaxReport r = verify_lax(printed, *p.evolution, p.relations);
  EXPECT_FALSE(r.zero());
}

TEST(VerifyLax, RelationsAreNeededForTheFirstClass) {
  const ProblemFile p = catalog_problem("third_order_class1");
  const LaxReport r = verify_lax(*p.op, *p.evolution, {});
  EXPECT_FALSE(r.zero());
}

TEST(Hierarchy, DerivativeOperatorOnLinearThirdOrder) {
  const auto h = generate_hierarchy(PseudoOperator::derivative(1), E("q_x"), EvolutionEquation(E("q_xxx"), 3), 3, {});
  EXPECT_EQ(h.members, (std::vector<Expr>{E("q_xx"), E("q_xxx"), E("q_xxxx")}));
  EXPECT_TRUE(h.diagnostic.empty());
}

TEST(Hierarchy, SecondClassProducesVerifiedThirdOrderSymmetry) {
  const ProblemFile p = catalog_problem("third_order_class2");
  const auto h = generate_hierarchy(*p.op, E("q_x"), *p.evolution, 1, p.relations);
  ASSERT_EQ(h.members.size(), 1u);
  EXPECT_EQ(h.members[0].jet_order(), 3);
  EXPECT_TRUE(symmetry_residual(h.members[0], *p.evolution, p.relations).is_zero());
  EXPECT_EQ(h.members[0], apply(*p.op, E("q_x")));
}

TEST(Hierarchy, MembersPassTheSymmetryConditionIndependently) {
  for (const char* stem : {"third_order_class1", "third_order_class3"}) {
    const ProblemFile p = catalog_problem(stem);
    const auto h = generate_hierarchy(*p.op, E("q_x"), *p.evolution, 2, p.relations);
    EXPECT_FALSE(h.members.empty()) << stem;
    const RelationSet rel = completed(p.relations);
    for (const auto& s : h.members) {
      // D_t sigma against D_P sigma, written out separately from symmetry_residual.
      const LinearOperator dp = frechet_derivative(*p.evolution);
      Expr rhs;
      for (unsigned i = 0; i <= dp.order(); ++i) rhs += dp.coefficients[i] * total_derivative_x(s, i);
      EXPECT_TRUE(rel.reduce(total_derivative_t(s, *p.evolution) - rhs).is_zero()) << stem;
    }
  }
}

TEST(Hierarchy, NonSymmetrySeedIsRejected) {
  const ProblemFile p = catalog_problem("third_order_class2");
  try {
    generate_hierarchy(*p.op, E("q"), *p.evolution, 1, p.relations);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_a_symmetry);
  }
}

TEST(Hierarchy, NonlocalObstructionStopsWithDiagnostic) {
  const PseudoOperator phi = PseudoOperator::derivative(1) + PseudoOperator::nonlocal(E("q"), Expr(1));
  const auto h = generate_hierarchy(phi, E("q_x"), EvolutionEquation(E("q_xxx"), 3), 3, {});
  EXPECT_LT(h.members.size(), 3u);
  EXPECT_FALSE(h.diagnostic.empty());
}

TEST(Limits, SvinolupovRestrictionStaysCompatible) {
  const ProblemFile base = catalog_problem("second_order_family");
  RelationSet extra;
  extra.add(parse_relation("r_x := 0", base.symbols));
  const auto r = compat_of(base, extra);
  EXPECT_TRUE(r.compatible()) << residual_text(r);
}

TEST(Limits, ShapeAndSubstitutionChecks) {
  const LimitReport l = check_limits(catalog_problem("second_order_svinolupov_limit"));
  EXPECT_TRUE(l.compatible);
  EXPECT_TRUE(l.shape) << l.shape_difference;
  EXPECT_TRUE(l.substitution) << l.substituted;
}

TEST(Adjudication, LinearizationOfSecondClass) {
  const auto f = adjudicate_linearization(catalog_problem("third_order_class2"));
  EXPECT_NE(f.verdict.find("differs"), std::string::npos);
  EXPECT_NE(f.verdict.find("2 times"), std::string::npos) << f.verdict;
}

TEST(Adjudication, OperatorOfSecondClassFavoursTheIntegratedForm) {
  const auto f = adjudicate_operator(catalog_problem("third_order_class2"));
  EXPECT_TRUE(f.engine_consistent);
  EXPECT_FALSE(f.evidence["printed"]["round_trip"].get<bool>());
  EXPECT_TRUE(f.evidence["adjudicated"]["round_trip"].get<bool>());
  EXPECT_FALSE(f.evidence["printed"]["lax"]["zero"].get<bool>());
  EXPECT_TRUE(f.evidence["adjudicated"]["lax"]["zero"].get<bool>());
}

TEST(Adjudication, SymbolAssignmentSearchFindsNoIdentity) {
  const auto f = adjudicate_symbol_assignment(catalog_problem("generic_order3_system"));
  EXPECT_NE(f.verdict.find("no assignment"), std::string::npos) << f.verdict;
  EXPECT_NE(f.verdict.find("eps_t"), std::string::npos) << f.verdict;
}

TEST(Adjudication, FindingsCoverEveryPrintedDiscrepancy) {
  std::set<std::string> ids;
  for (const auto& e : list_entries(JETLAX_CATALOG_DIR))
    for (const auto& f : adjudicate(load_problem(e.path.string()))) ids.insert(f.id);
  for (const char* id : {"third-order-class2/linearization", "third-order-class2/operator",
                         "generic-order3-system/symbol-assignment", "third-order-class1/operator"})
    EXPECT_TRUE(ids.count(id)) << id;
}
