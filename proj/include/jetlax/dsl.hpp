#pragma once

// Text grammar for expressions, operators and relations, plus the JSON
// problem-file format.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= '-'? integer ('^' exponent)?   right-associative
//   primary := integer | ident | '(' expr ')' | 'Dinv' '[' expr ']'
//
// Identifiers: x, t; q, q_x, q_xx, ... or q1, q2, ...; psi likewise; a
// declared parameter; a declared function with an optional derivative
// suffix whose letters (q, x, t) may come in any order: r_qx = r_xq.
// In operator mode, D is the total x-derivative, Dinv[g] is D^{-1} o g and
// '*' is composition.

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jetlax/compat.hpp"

namespace jetlax {

/// Declared names. Function names map to their dependency bits.
struct SymbolTable {
  std::map<std::string, std::uint8_t> functions;
  std::set<std::string> parameters;

  static bool reserved(std::string_view n) {
    if (n == "x" || n == "t" || n == "q" || n == "psi" || n == "D" || n == "Dinv") return true;
    auto digits_after = [&](std::string_view prefix) {
      return n.size() > prefix.size() && n.substr(0, prefix.size()) == prefix &&
             std::all_of(n.begin() + long(prefix.size()), n.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    return digits_after("q") || digits_after("psi");
  }

  static bool valid_name(std::string_view n) {
    if (n.empty() || !std::isalpha(static_cast<unsigned char>(n[0]))) return false;
    return std::all_of(n.begin(), n.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
  }

  void declare_function(const std::string& name, std::uint8_t deps) {
    check_new(name);
    functions.emplace(name, deps);
  }

  void declare_parameter(const std::string& name) {
    check_new(name);
    parameters.insert(name);
  }

  Atom function(const std::string& name, MultiIndex m = {}) const {
    auto it = functions.find(name);
    if (it == functions.end()) throw Error(ErrorKind::undeclared, "undeclared function '" + name + "'");
    return Atom::func(name, it->second, m);
  }

 private:
  void check_new(const std::string& name) const {
    if (!valid_name(name)) throw Error(ErrorKind::schema, "invalid symbol name '" + name + "'");
    if (reserved(name)) throw Error(ErrorKind::schema, "'" + name + "' is a built-in name");
    if (functions.count(name) || parameters.count(name))
      throw Error(ErrorKind::schema, "'" + name + "' is declared twice");
  }
};

namespace detail {

struct Token {
  enum Kind { number, ident, op, end } kind = end;
  std::string text;
  int line = 1;
  int column = 1;
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::syntax, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  };
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++col;
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    const std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i < s.size() && (std::isalpha(static_cast<unsigned char>(s[i])) || s[i] == '.'))
        fail("malformed number");
      t.kind = Token::number;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      t.kind = Token::ident;
    } else if (c == ':' && i + 1 < s.size() && s[i + 1] == '=') {
      i += 2;
      t.kind = Token::op;
    } else if (std::string_view("+-*/^()[]").find(c) != std::string_view::npos) {
      ++i;
      t.kind = Token::op;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
    t.text = std::string(s.substr(start, i - start));
    col += int(i - start);
    out.push_back(std::move(t));
  }
  Token e;
  e.line = line;
  e.column = col;
  out.push_back(e);
  return out;
}

// Value of a parsed subexpression: a scalar tree or, in operator mode, an
// operator.
struct Value {
  TreePtr scalar;
  std::optional<PseudoOperator> op;
  bool is_op() const { return op.has_value(); }
  PseudoOperator as_op() const { return op ? *op : PseudoOperator::multiplication(normalize(*scalar)); }
};

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols, bool operator_mode)
      : toks_(tokenize(text)), sym_(symbols), opmode_(operator_mode) {}

  Value parse_all() {
    Value v = expr();
    if (peek().kind != Token::end) fail(peek(), "unexpected '" + peek().text + "'");
    return v;
  }

  // lhs ':=' rhs
  std::pair<Atom, TreePtr> relation() {
    const Token& t = peek();
    if (t.kind != Token::ident) fail(t, "relation must start with a function derivative");
    Value lhs = primary();
    const Expr l = normalize(*lhs.scalar);
    const auto atoms = l.atoms();
    if (!(l.is_polynomial() && l.num().is_monomial() && l.num().lead().coef == 1 && atoms.size() == 1 &&
          atoms.begin()->is_func() && l.num().lead().mono.total_degree() == 1))
      fail(t, "relation left-hand side must be a function-symbol atom");
    expect(":=");
    Value rhs = expr();
    if (peek().kind != Token::end) fail(peek(), "unexpected '" + peek().text + "'");
    return {*atoms.begin(), rhs.scalar};
  }

 private:
  [[noreturn]] static void fail(const Token& t, const std::string& msg) {
    throw Error(ErrorKind::syntax, "line " + std::to_string(t.line) + ", column " + std::to_string(t.column) + ": " + msg);
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept(std::string_view op) {
    if (peek().kind == Token::op && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(std::string_view op) {
    if (!accept(op)) fail(peek(), "expected '" + std::string(op) + "'");
  }

  static Value scalar(TreePtr t) { return Value{std::move(t), std::nullopt}; }
  static Value oper(PseudoOperator o) { return Value{nullptr, std::move(o)}; }

  Value expr() {
    Value v = term();
    for (;;) {
      if (accept("+")) {
        Value r = term();
        v = combine(v, r, Tree::Op::add);
      } else if (accept("-")) {
        Value r = term();
        v = combine(v, r, Tree::Op::sub);
      } else {
        return v;
      }
    }
  }

  Value term() {
    Value v = unary();
    for (;;) {
      const Token& t = peek();
      if (accept("*")) {
        Value r = unary();
        v = combine(v, r, Tree::Op::mul);
      } else if (accept("/")) {
        Value r = unary();
        if (v.is_op() || r.is_op()) fail(t, "division is defined for expressions only");
        v = scalar(Tree::binary(Tree::Op::div, v.scalar, r.scalar));
      } else {
        return v;
      }
    }
  }

  Value unary() {
    if (accept("-")) {
      Value v = unary();
      if (v.is_op()) return oper(-*v.op);
      return scalar(Tree::neg(v.scalar));
    }
    return power();
  }

  Value power() {
    Value base = primary();
    const Token& t = peek();
    if (!accept("^")) return base;
    const long k = exponent();
    if (base.is_op()) {
      if (k < 0) fail(t, "negative power of an operator");
      PseudoOperator r = PseudoOperator::multiplication(Expr(1));
      for (long i = 0; i < k; ++i) r = compose(r, *base.op);
      return oper(std::move(r));
    }
    return scalar(Tree::power(base.scalar, int(k)));
  }

  // Integer exponent; a tower 2^3^2 associates to the right.
  long exponent() {
    const bool negative = accept("-");
    const Token& e = peek();
    if (e.kind != Token::number) fail(e, "exponent must be an integer literal");
    next();
    if (e.text.size() > 4) fail(e, "exponent too large");
    long k = std::stol(e.text);
    if (accept("^")) {
      const long inner = exponent();
      if (inner < 0) fail(e, "negative exponent inside an exponent");
      long r = 1;
      for (long i = 0; i < inner; ++i) {
        r *= k;
        if (r > 10000) fail(e, "exponent too large");
      }
      k = r;
    }
    return negative ? -k : k;
  }

  Value combine(const Value& a, const Value& b, Tree::Op op) {
    if (!a.is_op() && !b.is_op()) return scalar(Tree::binary(op, a.scalar, b.scalar));
    switch (op) {
      case Tree::Op::add: return oper(a.as_op() + b.as_op());
      case Tree::Op::sub: return oper(a.as_op() - b.as_op());
      default: return oper(compose(a.as_op(), b.as_op()));
    }
  }

  Value primary() {
    const Token& t = next();
    if (t.kind == Token::number) return scalar(Tree::num(Rational(Integer(t.text))));
    if (t.kind == Token::op && t.text == "(") {
      Value v = expr();
      expect(")");
      return v;
    }
    if (t.kind == Token::ident) return identifier(t);
    if (t.kind == Token::end) fail(t, "unexpected end of input");
    fail(t, "unexpected '" + t.text + "'");
  }

  Value identifier(const Token& t) {
    const std::string& s = t.text;
    if (s == "D" || s == "Dinv") {
      if (!opmode_) fail(t, "'" + s + "' is only allowed in operator expressions");
      if (s == "D") return oper(PseudoOperator::derivative(1));
      expect("[");
      Value g = expr();
      expect("]");
      if (g.is_op()) fail(t, "Dinv takes an expression");
      return oper(PseudoOperator::nonlocal(Expr(1), normalize(*g.scalar)));
    }
    const auto us = s.find('_');
    const std::string base = s.substr(0, us);
    const std::string suffix = us == std::string::npos ? "" : s.substr(us + 1);
    if (us != std::string::npos && suffix.empty()) fail(t, "empty derivative suffix in '" + s + "'");

    auto jet_like = [&](const std::string& prefix, bool lin) -> std::optional<Value> {
      unsigned k = 0;
      if (base == prefix) {
        for (char c : suffix)
          if (c != 'x') fail(t, "'" + s + "': " + prefix + " only takes x-derivatives");
        k = unsigned(suffix.size());
      } else if (base.size() > prefix.size() && base.compare(0, prefix.size(), prefix) == 0 &&
                 std::all_of(base.begin() + long(prefix.size()), base.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        if (!suffix.empty()) fail(t, "'" + s + "' mixes index and suffix forms");
        k = unsigned(std::stoul(base.substr(prefix.size())));
      } else {
        return std::nullopt;
      }
      return scalar(Tree::var(lin ? Atom::psi(k) : Atom::q(k)));
    };

    if (auto v = jet_like("q", false)) return *v;
    if (auto v = jet_like("psi", true)) return *v;
    if (base == "x" || base == "t") {
      if (!suffix.empty()) fail(t, "'" + s + "': independent variables take no suffix");
      return scalar(Tree::var(base == "x" ? Atom::x() : Atom::t()));
    }
    if (sym_.parameters.count(base)) {
      if (!suffix.empty())
        throw Error(ErrorKind::undeclared, "line " + std::to_string(t.line) + ", column " + std::to_string(t.column) +
                                               ": parameter '" + base + "' depends on nothing");
      return scalar(Tree::var(Atom::param(base)));
    }
    auto it = sym_.functions.find(base);
    if (it == sym_.functions.end()) throw Error(ErrorKind::undeclared, "line " + std::to_string(t.line) + ", column " + std::to_string(t.column) + ": undeclared identifier '" + base + "'");
    MultiIndex m;
    for (char c : suffix) {
      if (c == 'q') ++m.q;
      else if (c == 'x') ++m.x;
      else if (c == 't') ++m.t;
      else fail(t, "'" + s + "': derivative letters are q, x and t");
    }
    try {
      return scalar(Tree::var(Atom::func(base, it->second, m)));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(t.line) + ", column " + std::to_string(t.column) + ": " + e.what());
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const SymbolTable& sym_;
  bool opmode_;
};

}  // namespace detail

/// Expression tree, before normalization.
inline TreePtr parse_tree(std::string_view text, const SymbolTable& symbols) {
  detail::Parser p(text, symbols, false);
  return p.parse_all().scalar;
}

inline Expr parse_expression(std::string_view text, const SymbolTable& symbols) {
  return normalize(*parse_tree(text, symbols));
}

inline PseudoOperator parse_operator(std::string_view text, const SymbolTable& symbols) {
  detail::Parser p(text, symbols, true);
  return p.parse_all().as_op();
}

inline SideRelation parse_relation(std::string_view text, const SymbolTable& symbols) {
  detail::Parser p(text, symbols, false);
  auto [lhs, rhs] = p.relation();
  return SideRelation(lhs, normalize(*rhs));
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

// " + c*D^k" style piece; `first` suppresses the leading " + ".
inline std::string signed_piece(const Expr& c, const std::string& suffix, bool first) {
  std::string body;
  bool negative = false;
  if (suffix.empty()) {
    body = to_string(c);
    if (!c.num().is_monomial()) body = "(" + body + ")";
  } else if (c.is_one()) {
    body = suffix;
  } else if (c == Expr(-1)) {
    body = suffix;
    negative = true;
  } else {
    body = factor_text(c) + "*" + suffix;
  }
  if (!body.empty() && body[0] == '-' && !negative) {
    negative = true;
    body.erase(0, 1);
  }
  if (first) return negative ? "-" + body : body;
  return (negative ? " - " : " + ") + body;
}

}  // namespace detail

inline std::string to_string(const PseudoOperator& l) {
  if (l.is_zero()) return "0";
  std::string s;
  bool first = true;
  for (int i = l.order(); i >= 0; --i) {
    const Expr& c = l.local()[unsigned(i)];
    if (c.is_zero()) continue;
    const std::string d = i == 0 ? "" : i == 1 ? "D" : "D^" + std::to_string(i);
    s += detail::signed_piece(c, d, first);
    first = false;
  }
  for (const auto& t : l.nonlocal_terms()) {
    s += detail::signed_piece(t.f, "Dinv[" + to_string(t.g) + "]", first);
    first = false;
  }
  return s;
}

inline std::string to_string(const SideRelation& r) { return r.to_string(); }

inline std::vector<std::string> to_strings(const std::vector<Expr>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(to_string(e));
  return out;
}

// ---------------------------------------------------------------------------
// Problem files

struct HierarchySpec {
  std::string seed_text;
  Expr seed;
  unsigned depth = 1;
};

/// Stand-in instances for the numeric oracle: parameter values and explicit
/// functions of x, t, q built from further parameters.
struct StandinSpec {
  std::map<std::string, std::string> parameters;  // name -> rational literal or "random"
  std::map<std::string, std::string> functions;   // name -> expression in x, t, q
};

struct ProblemFile {
  std::string id;
  std::string description;
  std::vector<std::string> notes;
  std::vector<int> refs;
  SymbolTable symbols;
  std::string evolution_text;
  std::optional<EvolutionEquation> evolution;
  unsigned order = 0;
  std::vector<std::string> constraint_text;
  std::optional<DifferentialConstraint> constraint;
  std::string operator_text;
  std::optional<PseudoOperator> op;
  std::vector<std::string> relation_text;
  RelationSet relations;
  CoefficientMode mode = CoefficientMode::concrete;
  std::optional<HierarchySpec> hierarchy;
  nlohmann::json printed = nlohmann::json::object();
  std::optional<StandinSpec> standins;
};

namespace detail {

inline void require_object(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw Error(ErrorKind::schema, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw Error(ErrorKind::schema, "unknown field '" + k + "' in " + where);
}

inline std::string get_string(const nlohmann::json& j, const std::string& key) {
  if (!j.at(key).is_string()) throw Error(ErrorKind::schema, "field '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline std::vector<std::string> get_strings(const nlohmann::json& j, const std::string& key) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw Error(ErrorKind::schema, "field '" + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : a) {
    if (!e.is_string()) throw Error(ErrorKind::schema, "field '" + key + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// Prefixes parse diagnostics with the field they came from.
template <class Fn>
auto in_field(const std::string& field, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), field + ": " + e.what());
  }
}

}  // namespace detail

inline ProblemFile parse_problem(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::schema, std::string("not valid JSON: ") + e.what());
  }
  detail::require_object(j, "problem file",
                         {"format", "id", "description", "notes", "refs", "functions", "parameters", "evolution",
                          "order", "constraint", "operator", "relations", "mode", "hierarchy", "printed", "standins"});
  if (!j.contains("format")) throw Error(ErrorKind::schema, "missing required field 'format'");
  if (!j["format"].is_number_integer() || j["format"].get<int>() != 1)
    throw Error(ErrorKind::schema, "unsupported format version (expected 1)");
  for (const char* key : {"evolution", "order"})
    if (!j.contains(key)) throw Error(ErrorKind::schema, std::string("missing required field '") + key + "'");

  ProblemFile p;
  if (j.contains("id")) p.id = detail::get_string(j, "id");
  if (j.contains("description")) p.description = detail::get_string(j, "description");
  if (j.contains("notes")) p.notes = detail::get_strings(j, "notes");
  if (j.contains("refs")) {
    if (!j["refs"].is_array()) throw Error(ErrorKind::schema, "field 'refs' must be an array of integers");
    for (const auto& r : j["refs"]) {
      if (!r.is_number_integer()) throw Error(ErrorKind::schema, "field 'refs' must be an array of integers");
      p.refs.push_back(r.get<int>());
    }
  }
  if (j.contains("parameters"))
    for (const auto& n : detail::get_strings(j, "parameters")) p.symbols.declare_parameter(n);
  if (j.contains("functions")) {
    if (!j["functions"].is_array()) throw Error(ErrorKind::schema, "field 'functions' must be an array");
    for (const auto& f : j["functions"]) {
      detail::require_object(f, "function declaration", {"name", "depends"});
      if (!f.contains("name") || !f.contains("depends"))
        throw Error(ErrorKind::schema, "function declaration needs 'name' and 'depends'");
      std::uint8_t deps = 0;
      for (const auto& d : detail::get_strings(f, "depends")) {
        if (d == "x") deps |= dep_x;
        else if (d == "t") deps |= dep_t;
        else if (d == "q") deps |= dep_q;
        else throw Error(ErrorKind::schema, "unknown dependency '" + d + "' (expected x, t or q)");
      }
      p.symbols.declare_function(detail::get_string(f, "name"), deps);
    }
  }
  if (!j["order"].is_number_integer() || j["order"].get<int>() < 1)
    throw Error(ErrorKind::schema, "field 'order' must be a positive integer");
  p.order = unsigned(j["order"].get<int>());
  p.evolution_text = detail::get_string(j, "evolution");
  p.evolution = detail::in_field("evolution", [&] {
    return EvolutionEquation(parse_expression(p.evolution_text, p.symbols), p.order);
  });
  if (j.contains("mode")) {
    const std::string m = detail::get_string(j, "mode");
    if (m == "concrete") p.mode = CoefficientMode::concrete;
    else if (m == "symbolic") p.mode = CoefficientMode::symbolic;
    else throw Error(ErrorKind::schema, "field 'mode' must be 'concrete' or 'symbolic'");
  }
  if (j.contains("constraint")) {
    p.constraint_text = detail::get_strings(j, "constraint");
    if (p.constraint_text.size() != p.order)
      throw Error(ErrorKind::schema, "constraint has " + std::to_string(p.constraint_text.size()) +
                                         " coefficients but the order is " + std::to_string(p.order));
    std::vector<Expr> a;
    for (std::size_t i = 0; i < p.constraint_text.size(); ++i)
      a.push_back(detail::in_field("constraint[" + std::to_string(i) + "]",
                                   [&] { return parse_expression(p.constraint_text[i], p.symbols); }));
    p.constraint = DifferentialConstraint(std::move(a));
  }
  if (j.contains("operator")) {
    p.operator_text = detail::get_string(j, "operator");
    p.op = detail::in_field("operator", [&] { return parse_operator(p.operator_text, p.symbols); });
  }
  if (j.contains("relations")) {
    p.relation_text = detail::get_strings(j, "relations");
    for (std::size_t i = 0; i < p.relation_text.size(); ++i)
      p.relations.add(detail::in_field("relations[" + std::to_string(i) + "]",
                                       [&] { return parse_relation(p.relation_text[i], p.symbols); }));
  }
  if (j.contains("hierarchy")) {
    const auto& h = j["hierarchy"];
    detail::require_object(h, "hierarchy", {"seed", "depth"});
    HierarchySpec hs;
    hs.seed_text = h.contains("seed") ? detail::get_string(h, "seed") : "q_x";
    hs.seed = detail::in_field("hierarchy.seed", [&] { return parse_expression(hs.seed_text, p.symbols); });
    if (h.contains("depth")) {
      if (!h["depth"].is_number_integer() || h["depth"].get<int>() < 1)
        throw Error(ErrorKind::schema, "hierarchy depth must be a positive integer");
      hs.depth = unsigned(h["depth"].get<int>());
    }
    p.hierarchy = hs;
  }
  if (j.contains("printed")) {
    if (!j["printed"].is_object()) throw Error(ErrorKind::schema, "field 'printed' must be an object");
    p.printed = j["printed"];
  }
  if (j.contains("standins")) {
    const auto& s = j["standins"];
    detail::require_object(s, "standins", {"parameters", "functions"});
    StandinSpec ss;
    for (const char* key : {"parameters", "functions"}) {
      if (!s.contains(key)) continue;
      if (!s[key].is_object()) throw Error(ErrorKind::schema, std::string("standins.") + key + " must be an object");
      for (const auto& [k, v] : s[key].items()) {
        if (!v.is_string()) throw Error(ErrorKind::schema, std::string("standins.") + key + " values must be strings");
        (std::string(key) == "parameters" ? ss.parameters : ss.functions)[k] = v.get<std::string>();
      }
    }
    p.standins = ss;
  }
  return p;
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::not_found, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

}  // namespace jetlax
