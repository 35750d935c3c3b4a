#include <CLI11.hpp>

#include <iostream>
#include <random>

#include "jetlax/catalog.hpp"
#include "jetlax/numeric.hpp"

using namespace jetlax;
using nlohmann::json;

namespace {

struct Common {
  bool json_out = false;
  std::vector<std::string> relations;
  std::string catalog_root;
  std::uint64_t seed = default_seed;
  bool fresh_seed = false;
};

struct Outcome {
  json report;
  std::string text;
  bool all_zero = true;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_flag("--json", c.json_out, "Print the report as JSON");
  sub->add_option("--relations", c.relations, "Extra side relation 'lhs := rhs' (repeatable)");
  sub->add_option("--catalog-root", c.catalog_root, std::string("Catalog directory (overrides ") + catalog_env + ")");
  auto* s = sub->add_option("--seed", c.seed, "Seed for numeric checks");
  auto* f = sub->add_flag("--fresh-seed", c.fresh_seed, "Draw a nondeterministic seed for numeric checks");
  s->excludes(f);
}

std::uint64_t seed_of(const Common& c) {
  if (!c.fresh_seed) return c.seed;
  const std::uint64_t s = std::random_device{}();
  std::cerr << "seed " << s << "\n";
  return s;
}

ProblemFile load(const std::string& path, const Common& c) {
  ProblemFile p = load_problem(path);
  for (const auto& r : c.relations) p.relations.add(parse_relation(r, p.symbols));
  return p;
}

const DifferentialConstraint& need_constraint(const ProblemFile& p) {
  if (!p.constraint) throw Error(ErrorKind::schema, "problem '" + p.id + "' has no constraint");
  return *p.constraint;
}

// The operator to verify: --operator, then the problem's operator, then
// the integrated constraint.
PseudoOperator choose_operator(const ProblemFile& p, const std::string& text) {
  if (!text.empty()) return parse_operator(text, p.symbols);
  if (p.op) return *p.op;
  return integrate_constraint(need_constraint(p)).phi;
}

Outcome run_frechet(const ProblemFile& p, unsigned numeric, std::uint64_t seed) {
  Outcome o;
  const LinearOperator dp = frechet_derivative(*p.evolution);
  const std::string op = to_string(PseudoOperator::from(dp));
  o.report = {{"problem", p.id}, {"linearization", to_strings(dp.coefficients)}, {"operator", op}};
  o.text = "D_P = " + op + "\n";
  if (numeric) {
    const NumericVerdict v = numeric_frechet_check(*p.evolution, dp, numeric, seed);
    o.report["numeric"] = {{"status", to_string(v.status)}, {"trials", v.trials}, {"worst", v.worst}, {"reason", v.reason}};
    o.text += std::string("finite-difference check: ") + to_string(v.status) + " (" + std::to_string(v.trials) + " trials)\n";
    o.all_zero = v.status == NumericStatus::pass;
  }
  return o;
}

Outcome run_compat(const ProblemFile& p, unsigned numeric, std::uint64_t seed) {
  Outcome o;
  const auto rep = check_compatibility(*p.evolution, need_constraint(p), p.relations, p.mode);
  o.report = {{"problem", p.id}, {"per_residual", detail::residual_json(rep)}};
  json derived = json::array();
  for (const auto& r : rep.derived_relations) derived.push_back(r.to_string());
  o.report["compat"] = {{"compatible", rep.compatible()},
                        {"operator_route_zero", rep.operator_route_zero},
                        {"routes_agree", rep.routes_agree()},
                        {"derived_relations", derived}};
  for (const auto& r : rep.derived_relations) o.text += "derived relation " + r.to_string() + "\n";
  for (const auto& v : rep.residuals)
    o.text += "W" + std::to_string(v.index) + ": " + (v.zero() ? "zero" : "nonzero: " + to_string(v.reduced)) + "\n";
  o.text += std::string("operator route: ") + (rep.operator_route_zero ? "zero" : "nonzero") + "\n";
  if (p.mode == CoefficientMode::symbolic) {
    const ResidualSystem w = constraint_residuals(frechet_derivative(*p.evolution), *p.constraint, *p.evolution, p.mode);
    const auto s = solve_time_derivatives(w, *p.constraint);
    json solved = json::object();
    for (unsigned i = 0; i < s.size(); ++i) {
      const std::string name = to_string(p.constraint->coefficients()[i]) + "_t";
      solved[name] = to_string(s[i]);
      o.text += name + " = " + to_string(s[i]) + "\n";
    }
    o.report["solved_time_derivatives"] = solved;
  }
  o.all_zero = rep.compatible() && rep.operator_route_zero;
  if (numeric) {
    json nv = json::array();
    for (const auto& v : rep.residuals) {
      const NumericVerdict n = numeric_zero_check(v.raw, p.relations, numeric, p.symbols, p.standins, seed);
      nv.push_back({{"index", v.index}, {"status", to_string(n.status)}, {"trials", n.trials}, {"reason", n.reason}});
      o.text += "W" + std::to_string(v.index) + " numeric: " + to_string(n.status) +
                (n.reason.empty() ? "" : " (" + n.reason + ")") + "\n";
      // A numeric verdict that contradicts the symbolic one is a failure.
      if (n.status != NumericStatus::skipped && (n.status == NumericStatus::consistent_zero) != v.zero()) o.all_zero = false;
    }
    o.report["numeric"] = nv;
  }
  return o;
}

Outcome run_integrate(const ProblemFile& p) {
  Outcome o;
  const Integration integ = integrate_constraint(need_constraint(p));
  o.report = {{"problem", p.id},
              {"operator", {{"mu", to_string(integ.mu)}, {"phi", to_string(integ.phi)}, {"round_trip", integ.round_trip}}}};
  o.text = "mu = " + to_string(integ.mu) + "\nPhi = " + to_string(integ.phi) + "\n";
  o.all_zero = integ.round_trip;
  return o;
}

Outcome run_lax(const ProblemFile& p, const std::string& op_text) {
  Outcome o;
  const PseudoOperator phi = choose_operator(p, op_text);
  const LaxReport lax = verify_lax(phi, *p.evolution, p.relations);
  o.report = {{"problem", p.id},
              {"lax", {{"operator", to_string(phi)}, {"verdict", lax.zero() ? "zero" : "nonzero"},
                       {"residual_text", to_string(lax.reduced)}}}};
  o.text = "Phi = " + to_string(phi) + "\nLax condition: " + (lax.zero() ? "zero" : "nonzero: " + to_string(lax.reduced)) + "\n";
  o.all_zero = lax.zero();
  return o;
}

Outcome run_hierarchy(const ProblemFile& p, const std::string& op_text, const std::string& from, unsigned depth) {
  Outcome o;
  const PseudoOperator phi = choose_operator(p, op_text);
  Expr seed = parse_expression("q_x", p.symbols);
  if (!from.empty()) seed = parse_expression(from, p.symbols);
  else if (p.hierarchy) seed = p.hierarchy->seed;
  if (depth == 0) depth = p.hierarchy ? p.hierarchy->depth : 1;
  const Hierarchy h = generate_hierarchy(phi, seed, *p.evolution, depth, p.relations);
  o.report = {{"problem", p.id},
              {"hierarchy", {{"operator", to_string(phi)}, {"seed", to_string(seed)}, {"depth", depth},
                             {"members", to_strings(h.members)}, {"diagnostic", h.diagnostic}}}};
  for (std::size_t i = 0; i < h.members.size(); ++i)
    o.text += "sigma" + std::to_string(i + 1) + " = " + to_string(h.members[i]) + "\n";
  if (!h.diagnostic.empty()) std::cerr << h.diagnostic << "\n";
  o.all_zero = h.diagnostic.empty();
  return o;
}

Outcome run_adjudicate(const std::vector<std::string>& files, const Common& c) {
  Outcome o;
  std::vector<std::string> paths = files;
  if (paths.empty())
    for (const auto& e : list_entries(catalog_root(c.catalog_root)))
      if (!e.id.empty()) paths.push_back(e.path.string());
  json findings = json::array(), limits = json::array();
  for (const auto& path : paths) {
    const ProblemFile p = load(path, c);
    for (const auto& f : adjudicate(p)) {
      findings.push_back(to_json(f));
      o.text += f.id + ": " + f.verdict + "\n";
      o.all_zero = o.all_zero && f.engine_consistent;
    }
    if (p.printed.contains("substitution") && p.constraint) {
      const LimitReport l = check_limits(p);
      limits.push_back({{"problem", p.id}, {"compatible", l.compatible}, {"shape", l.shape},
                        {"shape_difference", l.shape_difference}, {"substitution", l.substitution},
                        {"substituted", l.substituted}});
      o.text += p.id + "/limits: compatible " + (l.compatible ? "yes" : "no") + ", reduced equation shape " +
                (l.shape ? "matches" : "differs") + ", substitution " + (l.substitution ? "proportional" : "not proportional") +
                " to the printed relation\n";
      o.all_zero = o.all_zero && l.compatible && l.shape && l.substitution;
    }
  }
  o.report = {{"findings", findings}, {"limits", limits}};
  return o;
}

Outcome run_catalog(const std::string& id, bool all, bool regen, bool list, const Common& c) {
  Outcome o;
  const fs::path root = catalog_root(c.catalog_root);
  if (list) {
    json entries = json::array();
    for (const auto& e : list_entries(root)) {
      entries.push_back({{"id", e.id}, {"description", e.description}, {"path", e.path.filename().string()}});
      o.text += (e.id.empty() ? "(invalid) " + e.path.filename().string() : e.id) + "  " + e.description + "\n";
    }
    o.report = {{"entries", entries}};
    return o;
  }
  if (all == !id.empty()) throw CLI::ValidationError("catalog", "give exactly one of an entry id or --all");
  std::vector<EntryInfo> targets;
  if (all) {
    for (const auto& e : list_entries(root))
      if (!e.id.empty()) targets.push_back(e);
  } else {
    targets.push_back(find_entry(root, id));
  }
  if (regen) {
    json done = json::array();
    for (const auto& e : targets) {
      regenerate(e);
      done.push_back(e.id);
      o.text += "regenerated " + golden_path(e.path).filename().string() + "\n";
    }
    o.report = {{"regenerated", done}};
    return o;
  }
  std::vector<EntryReport> reports;
  if (all) reports = run_all(root);
  else reports.push_back(run_entry_file(targets.front()));
  json entries = json::array();
  for (const auto& r : reports) {
    entries.push_back(to_json(r));
    o.text += r.id + ": " + (r.pass ? "pass" : "fail");
    if (!r.error.empty()) o.text += " (" + r.error + ")";
    if (r.divergence)
      o.text += " at " + r.divergence->path + ": expected " + r.divergence->expected + ", got " + r.divergence->actual;
    o.text += "\n";
    o.all_zero = o.all_zero && r.pass;
  }
  o.report = {{"entries", entries}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential-constraint integrability workbench"};
  app.require_subcommand(1);
  Common c;
  std::string file, op_text, from, id;
  std::vector<std::string> files;
  unsigned numeric = 0, depth = 0;
  bool all = false, regen = false, list = false;

  auto* frechet = app.add_subcommand("frechet", "Print the Frechet derivative D_P of the equation");
  frechet->add_option("file", file, "Problem file")->required()->check(CLI::ExistingFile);
  frechet->add_option("--numeric", numeric, "Finite-difference check with this many sample points");
  auto* compat = app.add_subcommand("compat", "Compatibility residuals of the constraint");
  compat->add_option("file", file, "Problem file")->required()->check(CLI::ExistingFile);
  compat->add_option("--numeric", numeric, "Cross-check raw residuals numerically at this many points");
  auto* integ = app.add_subcommand("integrate", "Integrate the constraint into a recursion operator");
  integ->add_option("file", file, "Problem file")->required()->check(CLI::ExistingFile);
  auto* lax = app.add_subcommand("verify-lax", "Check Phi_t + [Phi, D_P] = 0");
  lax->add_option("file", file, "Problem file")->required()->check(CLI::ExistingFile);
  lax->add_option("--operator", op_text, "Operator to verify instead of the problem's");
  auto* hier = app.add_subcommand("hierarchy", "Generate symmetries by repeated application of Phi");
  hier->add_option("file", file, "Problem file")->required()->check(CLI::ExistingFile);
  hier->add_option("--depth", depth, "Number of members")->check(CLI::PositiveNumber);
  hier->add_option("--operator", op_text, "Operator to apply instead of the problem's");
  hier->add_option("--from", from, "Seed symmetry (default: the problem's, else q_x)");
  auto* cat = app.add_subcommand("catalog", "Run catalog entries against their golden outputs");
  cat->add_option("id", id, "Entry id");
  cat->add_flag("--all", all, "Run every entry");
  cat->add_flag("--regenerate", regen, "Rewrite golden outputs from the engine");
  cat->add_flag("--list", list, "List entries");
  auto* adj = app.add_subcommand("adjudicate", "Compare printed formulas with engine-derived ones");
  adj->add_option("files", files, "Problem files (default: every catalog entry)")->check(CLI::ExistingFile);
  for (auto* s : {frechet, compat, integ, lax, hier, cat, adj}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  try {
    Outcome o;
    if (*frechet) o = run_frechet(load(file, c), numeric, seed_of(c));
    else if (*compat) o = run_compat(load(file, c), numeric, seed_of(c));
    else if (*integ) o = run_integrate(load(file, c));
    else if (*lax) o = run_lax(load(file, c), op_text);
    else if (*hier) o = run_hierarchy(load(file, c), op_text, from, depth);
    else if (*cat) o = run_catalog(id, all, regen, list, c);
    else o = run_adjudicate(files, c);
    if (c.json_out) std::cout << o.report.dump(2) << "\n";
    else std::cout << o.text;
    return o.all_zero ? 0 : 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::syntax:
      case ErrorKind::undeclared:
      case ErrorKind::schema:
      case ErrorKind::not_found:
      case ErrorKind::order_mismatch:
      case ErrorKind::degenerate_input: return 2;
      default: return 1;
    }
  }
}
