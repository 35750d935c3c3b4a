#pragma once

// Atoms are the indeterminates of the jet-space polynomial ring: the
// independent variables x and t, named parameters, derivatives of opaque
// function symbols, the jet coordinates q_k and the linearized variables psi_k.

#include <compare>
#include <cstdint>
#include <functional>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace jetlax {

/// Category of error raised anywhere in the library.
enum class ErrorKind {
  degenerate_input,
  not_polynomial,
  contract,
  syntax,
  undeclared,
  schema,
  unsupported_composition,
  nonlocality,
  non_terminating,
  not_total_derivative,
  order_mismatch,
  not_found,
  not_a_symmetry,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::not_polynomial: return "not-polynomial";
    case ErrorKind::contract: return "contract";
    case ErrorKind::syntax: return "syntax";
    case ErrorKind::undeclared: return "undeclared";
    case ErrorKind::schema: return "schema";
    case ErrorKind::unsupported_composition: return "unsupported-composition";
    case ErrorKind::nonlocality: return "nonlocality";
    case ErrorKind::non_terminating: return "non-terminating";
    case ErrorKind::not_total_derivative: return "not-total-derivative";
    case ErrorKind::order_mismatch: return "order-mismatch";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::not_a_symmetry: return "not-a-symmetry";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class AtomKind : std::uint8_t { indep = 0, param = 1, func = 2, jet = 3, lin = 4 };

/// Dependency bits of a function symbol.
enum Dependency : std::uint8_t { dep_x = 1, dep_t = 2, dep_q = 4 };

/// Derivative counts of a function symbol, one per possible dependency.
struct MultiIndex {
  std::uint8_t q = 0;
  std::uint8_t x = 0;
  std::uint8_t t = 0;

  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  bool dominates(const MultiIndex& o) const { return q >= o.q && x >= o.x && t >= o.t; }
  bool is_zero() const { return q == 0 && x == 0 && t == 0; }
  unsigned total() const { return unsigned(q) + x + t; }
  std::uint8_t& at(Dependency d) { return d == dep_x ? x : d == dep_t ? t : q; }
  std::uint8_t at(Dependency d) const { return d == dep_x ? x : d == dep_t ? t : q; }
};

namespace detail {

// Names are interned so atoms stay trivially copyable and compare by pointer
// on the fast path. The pool only ever grows.
inline const std::string* intern(std::string_view s) {
  static std::mutex mutex;
  static std::set<std::string, std::less<>> pool;
  std::lock_guard lock(mutex);
  auto it = pool.find(s);
  if (it == pool.end()) it = pool.emplace(s).first;
  return &*it;
}

}  // namespace detail

/// One indeterminate. Total order: x < t < parameters < function symbols
/// (by name, then multi-index) < q_k (by k) < psi_k (by k).
class Atom {
 public:
  Atom() = default;

  static Atom x() { return Atom(AtomKind::indep, 0); }
  static Atom t() { return Atom(AtomKind::indep, 1); }
  static Atom q(unsigned k) { return Atom(AtomKind::jet, k); }
  static Atom psi(unsigned k) { return Atom(AtomKind::lin, k); }

  static Atom param(std::string_view name) {
    Atom a(AtomKind::param, 0);
    a.name_ = detail::intern(name);
    return a;
  }

  static Atom func(std::string_view name, std::uint8_t deps, MultiIndex m = {}) {
    if ((m.x && !(deps & dep_x)) || (m.t && !(deps & dep_t)) || (m.q && !(deps & dep_q)))
      throw Error(ErrorKind::undeclared,
                  "derivative of '" + std::string(name) + "' with respect to an undeclared dependency");
    Atom a(AtomKind::func, 0);
    a.name_ = detail::intern(name);
    a.deps_ = deps;
    a.multi_ = m;
    return a;
  }

  AtomKind kind() const { return kind_; }
  unsigned index() const { return index_; }
  const std::string& name() const {
    static const std::string empty;
    return name_ ? *name_ : empty;
  }
  std::uint8_t deps() const { return deps_; }
  const MultiIndex& multi() const { return multi_; }

  bool is_x() const { return kind_ == AtomKind::indep && index_ == 0; }
  bool is_t() const { return kind_ == AtomKind::indep && index_ == 1; }
  bool is_jet() const { return kind_ == AtomKind::jet; }
  bool is_lin() const { return kind_ == AtomKind::lin; }
  bool is_func() const { return kind_ == AtomKind::func; }
  bool is_param() const { return kind_ == AtomKind::param; }
  bool depends_on(Dependency d) const { return kind_ == AtomKind::func && (deps_ & d); }

  /// Same function symbol, different derivative.
  Atom with_multi(MultiIndex m) const { return func(name(), deps_, m); }

  /// The function symbol differentiated once more with respect to `d`.
  Atom differentiated(Dependency d) const {
    MultiIndex m = multi_;
    ++m.at(d);
    return with_multi(m);
  }

  bool same_symbol(const Atom& o) const { return kind_ == AtomKind::func && o.kind_ == AtomKind::func && name_ == o.name_; }

  friend bool operator==(const Atom& a, const Atom& b) {
    return a.kind_ == b.kind_ && a.index_ == b.index_ && a.name_ == b.name_ && a.multi_ == b.multi_;
  }

  friend std::strong_ordering operator<=>(const Atom& a, const Atom& b) {
    if (auto c = a.kind_ <=> b.kind_; c != 0) return c;
    switch (a.kind_) {
      case AtomKind::indep:
      case AtomKind::jet:
      case AtomKind::lin:
        return a.index_ <=> b.index_;
      case AtomKind::param:
      case AtomKind::func:
        if (a.name_ != b.name_) {
          int c = a.name().compare(b.name());
          return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
        }
        return a.multi_ <=> b.multi_;
    }
    return std::strong_ordering::equal;
  }

  std::size_t hash() const {
    std::size_t h = std::hash<const void*>()(name_);
    h ^= (std::size_t(kind_) << 1) ^ (std::size_t(index_) << 5) ^ (std::size_t(multi_.q) << 17) ^
         (std::size_t(multi_.x) << 25) ^ (std::size_t(multi_.t) << 33);
    return h;
  }

  /// Canonical text: x, t, q, q_xx, psi_x, eta, r_qqx.
  std::string to_string() const {
    switch (kind_) {
      case AtomKind::indep:
        return index_ == 0 ? "x" : "t";
      case AtomKind::param:
        return name();
      case AtomKind::func: {
        if (multi_.is_zero()) return name();
        std::string s = name() + "_";
        s.append(multi_.q, 'q');
        s.append(multi_.x, 'x');
        s.append(multi_.t, 't');
        return s;
      }
      case AtomKind::jet:
      case AtomKind::lin: {
        std::string s = kind_ == AtomKind::jet ? "q" : "psi";
        if (index_ > 0) {
          s += "_";
          s.append(index_, 'x');
        }
        return s;
      }
    }
    return "?";
  }

 private:
  Atom(AtomKind k, unsigned index) : index_(index), kind_(k) {}

  const std::string* name_ = nullptr;
  std::uint32_t index_ = 0;
  AtomKind kind_ = AtomKind::indep;
  std::uint8_t deps_ = 0;
  MultiIndex multi_{};
};

struct AtomHash {
  std::size_t operator()(const Atom& a) const { return a.hash(); }
};

}  // namespace jetlax
