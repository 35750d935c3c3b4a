#pragma once

// Catalog of problem files with golden outputs. An entry is a file
// <stem>.json in the catalog root; its expected outputs live in the sibling
// <stem>.golden.json and are only ever written by regenerate().

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "jetlax/adjudicate.hpp"

namespace jetlax {

namespace fs = std::filesystem;

/// Environment variable naming the catalog root.
inline constexpr const char* catalog_env = "JETLAX_CATALOG";

/// The flag value wins over the environment, which wins over ./catalog.
inline fs::path catalog_root(const std::optional<std::string>& flag = {}) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(catalog_env); env && *env) return env;
  return "catalog";
}

struct EntryInfo {
  std::string id;
  std::string description;
  fs::path path;
};

inline bool is_golden(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > 12 && name.substr(name.size() - 12) == ".golden.json";
}

inline fs::path golden_path(const fs::path& problem) {
  fs::path g = problem;
  g.replace_extension(".golden.json");
  return g;
}

/// Problem files under `root`, sorted by id. Unreadable files are listed
/// with the parse diagnostic as their description and an empty id.
inline std::vector<EntryInfo> list_entries(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::not_found, "catalog root " + root.string() + " is not a directory");
  std::vector<EntryInfo> out;
  for (const auto& de : fs::directory_iterator(root)) {
    const fs::path& p = de.path();
    if (!de.is_regular_file() || p.extension() != ".json" || is_golden(p)) continue;
    try {
      ProblemFile pf = load_problem(p.string());
      out.push_back({pf.id.empty() ? p.stem().string() : pf.id, pf.description, p});
    } catch (const Error& e) {
      out.push_back({"", e.what(), p});
    }
  }
  std::sort(out.begin(), out.end(), [](const EntryInfo& a, const EntryInfo& b) {
    return std::tie(a.id, a.path) < std::tie(b.id, b.path);
  });
  return out;
}

inline EntryInfo find_entry(const fs::path& root, const std::string& id) {
  if (id.empty()) throw Error(ErrorKind::not_found, "empty catalog id");
  for (auto& e : list_entries(root))
    if (e.id == id) return e;
  throw Error(ErrorKind::not_found, "no catalog entry with id '" + id + "' under " + root.string());
}

namespace detail {

inline nlohmann::json residual_json(const CompatibilityReport& rep) {
  nlohmann::json r = nlohmann::json::array();
  for (const auto& v : rep.residuals)
    r.push_back({{"index", v.index}, {"verdict", v.zero() ? "zero" : "nonzero"}, {"residual_text", to_string(v.reduced)}});
  return r;
}

}  // namespace detail

/// Runs frechet, compat, integrate, lax, hierarchy and the adjudication
/// checks on a problem and serializes every output deterministically.
inline nlohmann::json compute_outputs(const ProblemFile& p) {
  nlohmann::json out;
  out["problem"] = p.id;
  const LinearOperator dp = frechet_derivative(*p.evolution);
  out["linearization"] = to_strings(dp.coefficients);

  if (p.constraint) {
    const auto rep = check_compatibility(*p.evolution, *p.constraint, p.relations, p.mode);
    out["per_residual"] = detail::residual_json(rep);
    nlohmann::json derived = nlohmann::json::array();
    for (const auto& r : rep.derived_relations) derived.push_back(r.to_string());
    out["compat"] = {{"compatible", rep.compatible()},
                     {"operator_route_zero", rep.operator_route_zero},
                     {"routes_agree", rep.routes_agree()},
                     {"derived_relations", derived}};
    if (p.mode == CoefficientMode::symbolic) {
      const ResidualSystem w = constraint_residuals(dp, *p.constraint, *p.evolution, p.mode);
      nlohmann::json solved = nlohmann::json::object();
      const auto s = solve_time_derivatives(w, *p.constraint);
      for (unsigned i = 0; i < s.size(); ++i) solved["A" + std::to_string(i) + "_t"] = to_string(s[i]);
      out["solved_time_derivatives"] = solved;
    }
    const Integration integ = integrate_constraint(*p.constraint);
    out["operator"] = {{"mu", to_string(integ.mu)}, {"phi", to_string(integ.phi)}, {"round_trip", integ.round_trip}};
  }

  if (p.mode == CoefficientMode::concrete && (p.op || p.constraint)) {
    const PseudoOperator phi = p.op ? *p.op : integrate_constraint(*p.constraint).phi;
    const LaxReport lax = verify_lax(phi, *p.evolution, p.relations);
    out["lax"] = {{"operator", to_string(phi)}, {"verdict", lax.zero() ? "zero" : "nonzero"},
                  {"residual_text", to_string(lax.reduced)}};
    if (p.hierarchy) {
      nlohmann::json h = {{"seed", to_string(p.hierarchy->seed)}, {"depth", p.hierarchy->depth}};
      try {
        const Hierarchy hy = generate_hierarchy(phi, p.hierarchy->seed, *p.evolution, p.hierarchy->depth, p.relations);
        h["members"] = to_strings(hy.members);
        h["diagnostic"] = hy.diagnostic;
      } catch (const Error& e) {
        h["members"] = nlohmann::json::array();
        h["diagnostic"] = std::string(to_string(e.kind())) + ": " + e.what();
      }
      out["hierarchy"] = h;
    }
  }

  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : adjudicate(p))
    findings.push_back({{"id", f.id}, {"verdict", f.verdict}, {"engine_consistent", f.engine_consistent}});
  if (!findings.empty()) out["adjudication"] = findings;
  if (p.printed.contains("substitution") || p.printed.contains("evolution")) {
    if (p.constraint && p.mode == CoefficientMode::concrete) {
      const LimitReport l = check_limits(p);
      out["limits"] = {{"compatible", l.compatible},
                       {"shape", l.shape},
                       {"shape_difference", l.shape_difference},
                       {"substitution", l.substitution},
                       {"substituted", l.substituted}};
    }
  }
  return out;
}

struct Divergence {
  std::string path;  // JSON pointer
  std::string expected;
  std::string actual;
};

/// First point where two JSON values differ, in document order.
inline std::optional<Divergence> first_divergence(const nlohmann::json& expected, const nlohmann::json& actual,
                                                  const std::string& path = "") {
  if (expected.type() != actual.type()) return Divergence{path.empty() ? "/" : path, expected.dump(), actual.dump()};
  if (expected.is_object()) {
    std::set<std::string> keys;
    for (const auto& [k, v] : expected.items()) keys.insert(k);
    for (const auto& [k, v] : actual.items()) keys.insert(k);
    for (const auto& k : keys) {
      const std::string sub = path + "/" + k;
      if (!expected.contains(k)) return Divergence{sub, "(absent)", actual[k].dump()};
      if (!actual.contains(k)) return Divergence{sub, expected[k].dump(), "(absent)"};
      if (auto d = first_divergence(expected[k], actual[k], sub)) return d;
    }
    return std::nullopt;
  }
  if (expected.is_array()) {
    const std::size_t n = std::max(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::string sub = path + "/" + std::to_string(i);
      if (i >= expected.size()) return Divergence{sub, "(absent)", actual[i].dump()};
      if (i >= actual.size()) return Divergence{sub, expected[i].dump(), "(absent)"};
      if (auto d = first_divergence(expected[i], actual[i], sub)) return d;
    }
    return std::nullopt;
  }
  if (expected != actual) return Divergence{path.empty() ? "/" : path, expected.dump(), actual.dump()};
  return std::nullopt;
}

struct EntryReport {
  std::string id;
  bool pass = false;
  std::string error;  // set when the entry could not be run
  std::optional<Divergence> divergence;
  nlohmann::json outputs;
};

inline nlohmann::json to_json(const EntryReport& r) {
  nlohmann::json j = {{"id", r.id}, {"status", r.pass ? "pass" : "fail"}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.divergence)
    j["first_divergence"] = {{"path", r.divergence->path}, {"expected", r.divergence->expected},
                             {"actual", r.divergence->actual}};
  j["outputs"] = r.outputs;
  return j;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::not_found, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string golden_text(const nlohmann::json& outputs) { return outputs.dump(2) + "\n"; }

inline EntryReport run_entry_file(const EntryInfo& e) {
  EntryReport r;
  r.id = e.id;
  try {
    r.outputs = compute_outputs(load_problem(e.path.string()));
  } catch (const Error& err) {
    r.error = std::string(to_string(err.kind())) + ": " + err.what();
    return r;
  }
  const fs::path g = golden_path(e.path);
  if (!fs::exists(g)) {
    r.error = "no golden file " + g.filename().string();
    return r;
  }
  nlohmann::json expected;
  try {
    expected = nlohmann::json::parse(read_text(g));
  } catch (const nlohmann::json::parse_error& err) {
    r.error = "golden file " + g.filename().string() + " is not valid JSON: " + err.what();
    return r;
  }
  r.divergence = first_divergence(expected, r.outputs);
  r.pass = !r.divergence;
  return r;
}

inline EntryReport run_entry(const fs::path& root, const std::string& id) { return run_entry_file(find_entry(root, id)); }

/// Runs every entry concurrently; the result order is the listing order.
inline std::vector<EntryReport> run_all(const fs::path& root) {
  std::vector<std::future<EntryReport>> jobs;
  for (const auto& e : list_entries(root)) {
    if (e.id.empty()) {
      std::promise<EntryReport> p;
      p.set_value(EntryReport{e.path.filename().string(), false, e.description, std::nullopt, nullptr});
      jobs.push_back(p.get_future());
      continue;
    }
    jobs.push_back(std::async(std::launch::async, [e] { return run_entry_file(e); }));
  }
  std::vector<EntryReport> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

/// Rewrites the golden file of an entry from the engine's current outputs.
inline void regenerate(const EntryInfo& e) {
  const nlohmann::json outputs = compute_outputs(load_problem(e.path.string()));
  std::ofstream out(golden_path(e.path), std::ios::binary);
  if (!out) throw Error(ErrorKind::not_found, "cannot write " + golden_path(e.path).string());
  out << golden_text(outputs);
}

}  // namespace jetlax
