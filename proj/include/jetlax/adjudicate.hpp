#pragma once

// Machine-checked comparisons between printed formulas stored in a problem
// file's "printed" block and the forms the engine derives. Each check yields
// a Finding: a one-line verdict plus structured evidence carrying both forms.

#include <nlohmann/json.hpp>

#include <numeric>

#include "jetlax/compat.hpp"
#include "jetlax/dsl.hpp"

namespace jetlax {

struct Finding {
  std::string id;
  std::string subject;
  std::string verdict;
  bool engine_consistent = false;  // the engine-derived form passes its own checks
  nlohmann::json evidence = nlohmann::json::object();
};

namespace detail {

inline std::string printed_string(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorKind::schema, "printed." + key + " must be a string");
  return j[key].get<std::string>();
}

inline bool is_constant_ratio(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return false;
  return (a / b).atoms().empty();
}

// Per-monomial comparison of two expressions collected in the jet atoms.
inline nlohmann::json monomial_differences(const Expr& printed, const Expr& derived) {
  std::vector<Atom> jets;
  for (const auto& a : (printed - derived).atoms())
    if (a.is_jet()) jets.push_back(a);
  nlohmann::json out = nlohmann::json::array();
  if (jets.empty()) {
    out.push_back({{"monomial", "1"}, {"printed", to_string(printed)}, {"derived", to_string(derived)}});
    return out;
  }
  auto pc = collect(printed, jets);
  auto dc = collect(derived, jets);
  std::set<Monomial> keys;
  for (const auto& [m, c] : pc) keys.insert(m);
  for (const auto& [m, c] : dc) keys.insert(m);
  for (const auto& m : keys) {
    const Expr p = pc.count(m) ? pc.at(m) : Expr();
    const Expr d = dc.count(m) ? dc.at(m) : Expr();
    if (p == d) continue;
    out.push_back({{"monomial", to_string(Poly(m, Integer(1)))}, {"printed", to_string(p)}, {"derived", to_string(d)}});
  }
  return out;
}

inline nlohmann::json lax_json(const LaxReport& l) {
  return {{"zero", l.zero()}, {"reduced", to_string(l.reduced)}};
}

}  // namespace detail

/// Printed linearization coefficients (psi, psi_x, ...) against the Frechet
/// derivative. A printed coefficient that equals a constant multiple of a
/// derived coefficient in another slot is reported as misplaced.
inline Finding adjudicate_linearization(const ProblemFile& p) {
  Finding f{"linearization", "printed linearization of " + p.id + " against the Frechet derivative", "", false, {}};
  if (!p.printed.contains("linearization")) throw Error(ErrorKind::schema, "printed.linearization is missing");
  std::vector<Expr> printed;
  for (const auto& s : p.printed["linearization"]) printed.push_back(parse_expression(s.get<std::string>(), p.symbols));
  const LinearOperator dp = frechet_derivative(*p.evolution);
  std::vector<Expr> derived = dp.coefficients;
  derived.resize(std::max(derived.size(), printed.size()));
  printed.resize(derived.size());

  nlohmann::json slots = nlohmann::json::array();
  std::vector<std::string> notes;
  for (unsigned i = 0; i < derived.size(); ++i) {
    slots.push_back({{"slot", i}, {"printed", to_string(printed[i])}, {"derived", to_string(derived[i])},
                     {"equal", printed[i] == derived[i]}});
    if (printed[i] == derived[i]) continue;
    for (unsigned j = 0; j < derived.size(); ++j) {
      if (j == i || !detail::is_constant_ratio(printed[i], derived[j])) continue;
      const Expr ratio = printed[i] / derived[j];
      notes.push_back("printed slot " + std::to_string(i) + " is " + to_string(ratio) + " times the derived slot " +
                      std::to_string(j) + " coefficient");
    }
  }
  f.evidence["slots"] = slots;
  f.evidence["misplacements"] = notes;

  // The printed coefficients used as D_P: do they keep the constraint compatible?
  if (p.constraint) {
    LinearOperator printed_dp{printed};
    const ResidualSystem w = constraint_residuals(printed_dp, *p.constraint, *p.evolution, p.mode);
    const RelationSet rel = completed(p.relations);
    bool zero = true;
    for (const auto& r : w.residuals) zero = zero && rel.reduce(r).is_zero();
    f.evidence["printed_compatible"] = zero;
    f.evidence["derived_compatible"] = check_compatibility(*p.evolution, *p.constraint, p.relations, p.mode).compatible();
    f.engine_consistent = f.evidence["derived_compatible"].get<bool>();
  } else {
    f.engine_consistent = true;
  }

  const bool all_equal = std::all_of(slots.begin(), slots.end(), [](const auto& s) { return s["equal"].template get<bool>(); });
  if (all_equal) {
    f.verdict = "printed linearization equals the Frechet derivative";
  } else if (!notes.empty()) {
    f.verdict = "printed linearization differs from the Frechet derivative: " + notes.front();
    for (std::size_t k = 1; k < notes.size(); ++k) f.verdict += "; " + notes[k];
  } else {
    f.verdict = "printed linearization differs from the Frechet derivative";
  }
  return f;
}

/// Printed recursion operator against the integrated constraint: exact and
/// modulo-relation differences, the integration round trip of each form
/// with the engine's integrating factor, and the Lax-type condition.
inline Finding adjudicate_operator(const ProblemFile& p) {
  Finding f{"operator", "printed recursion operator of " + p.id + " against integrate_constraint", "", false, {}};
  if (!p.constraint) throw Error(ErrorKind::schema, "a constraint is needed to integrate");
  const PseudoOperator printed = parse_operator(detail::printed_string(p.printed, "operator"), p.symbols);
  const Integration integ = integrate_constraint(*p.constraint);
  const RelationSet rel = completed(p.relations);

  auto describe = [&](const PseudoOperator& l) {
    const PseudoOperator diff = l - integ.phi;
    const PseudoOperator reduced = reduce_operator(diff, rel);
    nlohmann::json j = {{"operator", to_string(l)},
                        {"difference", to_string(diff)},
                        {"difference_modulo_relations", to_string(reduced)},
                        {"equal", diff.is_zero()},
                        {"equal_modulo_relations", reduced.is_zero()},
                        {"round_trip", integration_round_trip(l, integ.mu, *p.constraint)},
                        {"lax", detail::lax_json(verify_lax(l, *p.evolution, p.relations))}};
    nlohmann::json coeffs = nlohmann::json::array();
    for (int i = 0; i <= std::max(l.order(), integ.phi.order()); ++i) {
      const Expr a = l.coefficient(unsigned(i)), b = integ.phi.coefficient(unsigned(i));
      if (rel.reduce(a - b).is_zero()) continue;
      coeffs.push_back({{"power", i}, {"monomials", detail::monomial_differences(a, b)}});
    }
    j["local_differences"] = coeffs;
    return j;
  };

  const LaxReport engine_lax = verify_lax(integ.phi, *p.evolution, p.relations);
  f.evidence["mu"] = to_string(integ.mu);
  f.evidence["derived"] = {{"operator", to_string(integ.phi)}, {"round_trip", integ.round_trip},
                           {"lax", detail::lax_json(engine_lax)}};
  f.evidence["printed"] = describe(printed);
  if (p.op && !(*p.op == printed)) f.evidence["adjudicated"] = describe(*p.op);
  f.engine_consistent = integ.round_trip;

  const auto& pe = f.evidence["printed"];
  if (pe["equal"].get<bool>()) {
    f.verdict = "printed operator equals the integrated operator";
  } else if (pe["equal_modulo_relations"].get<bool>()) {
    f.verdict = "printed operator equals the integrated operator modulo the side relations";
  } else {
    f.verdict = "printed operator differs from the integrated operator by " + pe["difference_modulo_relations"].get<std::string>();
    if (!pe["round_trip"].get<bool>()) f.verdict += "; it fails the integration round trip";
  }
  f.verdict += std::string("; Lax condition ") + (engine_lax.zero() ? "holds" : "fails") + " for the integrated operator";
  if (!pe["equal"].get<bool>())
    f.verdict += std::string(" and ") + (pe["lax"]["zero"].get<bool>() ? "holds" : "fails") + " for the printed one";
  if (f.evidence.contains("adjudicated")) {
    const auto& ae = f.evidence["adjudicated"];
    f.verdict += std::string("; the catalog's adjudicated operator ") +
                 (ae["equal_modulo_relations"].get<bool>() ? "matches" : "does not match") + " the integrated one";
  }
  return f;
}

/// Specializes the printed and the integrated operators by substitution and
/// checks the Lax-type condition against a known equation.
inline Finding adjudicate_specialization(const ProblemFile& p) {
  Finding f{"specialization", "printed and integrated operators of " + p.id + " on a known special case", "", false, {}};
  const auto& s = p.printed.at("specialization");
  SymbolTable st = p.symbols;
  std::map<Atom, Expr> params;
  std::map<std::string, Expr> funcs;
  for (const auto& [name, v] : s.at("substitute").items()) {
    const Expr e = parse_expression(v.get<std::string>(), st);
    if (st.parameters.count(name)) params[Atom::param(name)] = e;
    else if (st.functions.count(name)) funcs[name] = e;
    else throw Error(ErrorKind::schema, "printed.specialization substitutes unknown symbol '" + name + "'");
  }
  auto specialize = [&](const Expr& e) {
    Expr r = e;
    for (const auto& [name, v] : funcs) r = substitute_function(r, name, v);
    Bindings b;
    for (const auto& [a, v] : params) b.emplace(a, v);
    return substitute(r, b);
  };
  const EvolutionEquation eq(parse_expression(s.at("evolution").get<std::string>(), st), p.order);
  const Integration integ = integrate_constraint(*p.constraint);
  const PseudoOperator printed = parse_operator(detail::printed_string(p.printed, "operator"), p.symbols);
  const PseudoOperator ds = integ.phi.map_coefficients(specialize);
  const PseudoOperator ps = printed.map_coefficients(specialize);
  const LaxReport dl = verify_lax(ds, eq, {}), pl = verify_lax(ps, eq, {});
  f.evidence["evolution"] = to_string(eq.rhs());
  f.evidence["derived"] = {{"operator", to_string(ds)}, {"lax", detail::lax_json(dl)}};
  f.evidence["printed"] = {{"operator", to_string(ps)}, {"lax", detail::lax_json(pl)}};
  f.engine_consistent = dl.zero();
  f.verdict = std::string("special case q_t = ") + to_string(eq.rhs()) + ": integrated operator " + to_string(ds) +
              (dl.zero() ? " satisfies" : " fails") + " the Lax condition; printed operator " + to_string(ps) +
              (pl.zero() ? " satisfies" : " fails") + " it";
  return f;
}

/// Searches the injective assignments of the printed symbols to the
/// linearization slots (the spare slot zero or a fresh function) under
/// which the printed algebraic and evolution equations make every raw
/// compatibility residual vanish.
inline Finding adjudicate_symbol_assignment(const ProblemFile& p) {
  Finding f{"symbol-assignment", "printed residual system of " + p.id + " against the raw residuals", "", true, {}};
  const auto& pr = p.printed;
  const auto& as = pr.at("assign");
  SymbolTable st;
  const auto& syms = pr.at("symbols");
  const nlohmann::json params = syms.value("parameters", nlohmann::json::array());
  const nlohmann::json funcs = syms.value("functions", nlohmann::json::object());
  for (const auto& n : params) st.declare_parameter(n.get<std::string>());
  for (const auto& [name, deps] : funcs.items()) {
    std::uint8_t d = 0;
    for (const auto& x : deps) d |= x == "x" ? dep_x : x == "t" ? dep_t : dep_q;
    st.declare_function(name, d);
  }
  std::string spare = "delta";
  while (st.functions.count(spare) || st.parameters.count(spare)) spare += "0";
  st.declare_function(spare, dep_x | dep_t);

  std::vector<Expr> constraint;
  for (const auto& n : as.at("constraint")) {
    const std::string name = n.get<std::string>();
    const auto& alg = pr.at("algebraic");
    constraint.push_back(parse_expression(alg.contains(name) ? alg[name].get<std::string>() : name, st));
  }
  const DifferentialConstraint h(constraint);
  RelationSet rel;
  for (const auto& [lhs, rhs] : pr.at("evolution").items()) rel.add(parse_relation(lhs + " := " + rhs.get<std::string>(), st));

  std::vector<std::string> names;
  for (const auto& n : as.at("symbols")) names.push_back(n.get<std::string>());
  const unsigned slots = unsigned(as.at("slots").size());
  if (names.size() + 1 != slots) throw Error(ErrorKind::schema, "printed.assign needs one slot more than symbols");

  struct Trial {
    std::string label;
    std::vector<Expr> residuals;
    unsigned zeros = 0;
    std::size_t size = 0;
  };
  std::vector<Trial> trials;
  std::vector<unsigned> perm(slots);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    // perm[k] is the slot of names[k]; perm.back() is the spare slot.
    for (int fill = 0; fill < 2; ++fill) {
      std::vector<Expr> c(slots);
      std::string label;
      for (unsigned k = 0; k < names.size(); ++k) {
        c[perm[k]] = parse_expression(names[k], st);
        label += names[k] + "->" + as["slots"][perm[k]].get<std::string>() + " ";
      }
      c[perm.back()] = fill ? parse_expression(spare, st) : Expr();
      label += as["slots"][perm.back()].get<std::string>() + "=" + (fill ? spare : "0");
      // Slot k holds the coefficient of q_k after reversal of the printed order.
      Expr rhs;
      for (unsigned k = 0; k < slots; ++k) rhs += c[slots - 1 - k] * Expr(Atom::q(k));
      if (c[0].is_zero()) continue;
      const auto rep = check_compatibility(EvolutionEquation(rhs, slots - 1), h, rel);
      Trial t{label, {}, 0, 0};
      for (const auto& v : rep.residuals) {
        t.residuals.push_back(v.reduced);
        t.zeros += v.zero();
        t.size += to_string(v.reduced).size();
      }
      trials.push_back(std::move(t));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::stable_sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
    return a.zeros != b.zeros ? a.zeros > b.zeros : a.size < b.size;
  });
  nlohmann::json all = nlohmann::json::array();
  for (const auto& t : trials) {
    std::string v;
    for (const auto& r : t.residuals) v += r.is_zero() ? "0" : "X";
    all.push_back({{"assignment", t.label}, {"residuals", v}});
  }
  f.evidence["assignments"] = all;
  const Trial& best = trials.front();
  f.evidence["best"] = {{"assignment", best.label}, {"residuals", to_strings(best.residuals)}};
  if (best.zeros == best.residuals.size()) {
    f.verdict = "assignment " + best.label + " makes the printed system an identity of the raw residuals";
    return f;
  }
  f.verdict = "no assignment among " + std::to_string(trials.size()) +
              " makes the printed system an identity of the raw residuals; closest is " + best.label;

  // Single function-derivative atoms whose vanishing closes the best trial.
  std::set<Atom> common;
  bool first = true;
  for (const auto& r : best.residuals) {
    if (r.is_zero()) continue;
    std::set<Atom> here;
    for (const auto& a : r.atoms())
      if (a.is_func()) here.insert(a);
    if (first) common = here;
    else {
      std::set<Atom> keep;
      std::set_intersection(common.begin(), common.end(), here.begin(), here.end(), std::inserter(keep, keep.begin()));
      common = keep;
    }
    first = false;
  }
  nlohmann::json closers = nlohmann::json::array();
  for (const auto& a : common) {
    Bindings b{{a, Expr()}};
    bool closes = true;
    for (const auto& r : best.residuals) closes = closes && substitute(r, b).is_zero();
    if (closes) closers.push_back(a.to_string() + " = 0");
  }
  f.evidence["closing_conditions"] = closers;
  if (!closers.empty()) {
    f.verdict += ", whose residuals vanish exactly when";
    for (std::size_t k = 0; k < closers.size(); ++k) f.verdict += (k ? " or " : " ") + closers[k].get<std::string>();
  }
  return f;
}

/// All findings for which the problem carries printed data.
inline std::vector<Finding> adjudicate(const ProblemFile& p) {
  std::vector<Finding> out;
  auto tag = [&](Finding f) {
    f.id = p.id + "/" + f.id;
    out.push_back(std::move(f));
  };
  if (p.printed.contains("linearization") && p.printed.contains("operator")) {
    // The linearization finding only matters when it disagrees.
    Finding l = adjudicate_linearization(p);
    const bool agrees = std::all_of(l.evidence["slots"].begin(), l.evidence["slots"].end(),
                                    [](const auto& s) { return s["equal"].template get<bool>(); });
    if (!agrees) tag(std::move(l));
  }
  if (p.printed.contains("operator")) tag(adjudicate_operator(p));
  if (p.printed.contains("specialization")) tag(adjudicate_specialization(p));
  if (p.printed.contains("assign")) tag(adjudicate_symbol_assignment(p));
  return out;
}

inline nlohmann::json to_json(const Finding& f) {
  return {{"id", f.id},
          {"subject", f.subject},
          {"verdict", f.verdict},
          {"engine_consistent", f.engine_consistent},
          {"evidence", f.evidence}};
}

struct LimitReport {
  bool compatible = false;
  std::vector<SideRelation> derived_relations;
  bool shape = false;             // the reduced equation matches the printed one up to an x-free q_x term
  std::string shape_difference;   // reduced difference of the right-hand sides
  bool substitution = false;      // proportional to the printed reduced relation
  std::string substituted;
};

/// Limit checks on an entry with printed "evolution", "substitution" and
/// "reduced" data.
inline LimitReport check_limits(const ProblemFile& p) {
  LimitReport out;
  const auto rep = check_compatibility(*p.evolution, *p.constraint, p.relations, p.mode);
  out.compatible = rep.compatible() && rep.operator_route_zero;
  out.derived_relations = rep.derived_relations;
  const RelationSet rel = completed(p.relations);

  if (p.printed.contains("evolution")) {
    const Expr target = parse_expression(detail::printed_string(p.printed, "evolution"), p.symbols);
    const Expr d = rel.reduce(p.evolution->rhs() - target);
    out.shape_difference = to_string(d);
    const Expr c = coefficient(d, Atom::q(1));
    const bool only_qx = (d - c * Expr(Atom::q(1))).is_zero() &&
                         !c.contains_if([](const Atom& a) { return a.is_jet() || a.is_lin(); });
    out.shape = only_qx && rel.reduce(partial_derivative(c, Atom::x())).is_zero();
  }
  if (p.printed.contains("substitution")) {
    const SideRelation s = parse_relation(detail::printed_string(p.printed, "substitution"), p.symbols);
    const Expr expected = parse_expression(detail::printed_string(p.printed, "reduced"), p.symbols);
    const std::string target = p.printed.value("substitution_target", std::string("r_t"));
    for (const auto& r : p.relations.rules()) {
      if (r.lhs.to_string() != target) continue;
      Expr e = substitute_function(Expr(r.lhs) - r.rhs, s.lhs.name(), s.rhs);
      out.substituted = to_string(Expr(e.num()));
      out.substitution = proportional(Expr(e.num()), expected);
    }
  }
  return out;
}

}  // namespace jetlax
