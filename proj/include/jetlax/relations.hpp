#pragma once

// Oriented rewrite rules on derivatives of function symbols. A rule
// lhs := rhs also rewrites every derivative of lhs, through the matching
// partial derivative of rhs (prolongation).

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "jetlax/expr.hpp"
#include "jetlax/text.hpp"

namespace jetlax {

struct SideRelation {
  Atom lhs;
  Expr rhs;

  SideRelation(Atom l, Expr r) : lhs(std::move(l)), rhs(std::move(r)) {
    if (!lhs.is_func()) throw Error(ErrorKind::contract, "relation left-hand side must be a function-symbol atom");
    if (rhs.contains(lhs))
      throw Error(ErrorKind::contract, "relation " + lhs.to_string() + " occurs in its own right-hand side");
  }

  bool matches(const Atom& a) const { return a.same_symbol(lhs) && a.multi().dominates(lhs.multi()); }

  /// The rule's image of `a` (which must match): rhs differentiated by the
  /// multi-index difference.
  Expr prolonged(const Atom& a) const {
    Expr r = rhs;
    const MultiIndex& m = a.multi();
    const MultiIndex& l = lhs.multi();
    for (int i = l.q; i < m.q; ++i) r = partial_derivative(r, Atom::q(0));
    for (int i = l.x; i < m.x; ++i) r = partial_derivative(r, Atom::x());
    for (int i = l.t; i < m.t; ++i) r = partial_derivative(r, Atom::t());
    return r;
  }

  std::string to_string() const { return lhs.to_string() + " := " + jetlax::to_string(rhs); }

  friend bool operator==(const SideRelation& a, const SideRelation& b) { return a.lhs == b.lhs && a.rhs == b.rhs; }
};

/// Ordered rule list; the first matching rule rewrites an atom. Reduction
/// images of atoms are memoized, so a set is cheap to reuse but must not be
/// modified while shared across threads.
class RelationSet {
 public:
  static constexpr int depth_limit = 48;

  RelationSet() = default;
  explicit RelationSet(std::vector<SideRelation> rules) : rules_(std::move(rules)) {}
  RelationSet(const RelationSet& o) : rules_(o.rules_) {}
  RelationSet(RelationSet&&) = default;
  RelationSet& operator=(const RelationSet& o) {
    if (this != &o) {
      rules_ = o.rules_;
      cache_ = std::make_shared<Cache>();
    }
    return *this;
  }
  RelationSet& operator=(RelationSet&&) = default;

  const std::vector<SideRelation>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

  void add(SideRelation r) {
    rules_.push_back(std::move(r));
    cache_->clear();
  }

  const SideRelation* rule_for(const Atom& a) const {
    for (const auto& r : rules_)
      if (r.matches(a)) return &r;
    return nullptr;
  }

  /// Fixed point of rewriting.
  Expr reduce(const Expr& e) const { return reduce(e, 0); }

  /// Reduced image of a single atom.
  Expr reduce_atom(const Atom& a) const { return reduce_atom(a, 0); }

  /// Reduces with the given rule applied first to its own match `a`; used to
  /// compare two rules on a common derivative.
  Expr reduce_via(const SideRelation& rule, const Atom& a) const { return reduce(rule.prolonged(a), 1); }

  /// Adds consequences of critical pairs until every derivative reachable by
  /// two rules reduces to a single value. Returns the rules that were added.
  std::vector<SideRelation> complete(int max_rounds = 16) {
    std::vector<SideRelation> added;
    for (int round = 0; round < max_rounds; ++round) {
      std::optional<SideRelation> fresh;
      for (std::size_t i = 0; i < rules_.size() && !fresh; ++i) {
        for (std::size_t j = i + 1; j < rules_.size() && !fresh; ++j) {
          const auto& a = rules_[i];
          const auto& b = rules_[j];
          if (!a.lhs.same_symbol(b.lhs)) continue;
          MultiIndex m;
          m.q = std::max(a.lhs.multi().q, b.lhs.multi().q);
          m.x = std::max(a.lhs.multi().x, b.lhs.multi().x);
          m.t = std::max(a.lhs.multi().t, b.lhs.multi().t);
          const Atom top = a.lhs.with_multi(m);
          const Expr d = reduce(reduce_via(a, top) - reduce_via(b, top));
          if (d.is_zero()) continue;
          fresh = orient(d);
          if (!fresh)
            throw Error(ErrorKind::non_terminating,
                        "critical pair at " + top.to_string() + " leaves " + to_string(d) + ", which cannot be oriented");
        }
      }
      if (!fresh) return added;
      added.push_back(*fresh);
      add(std::move(*fresh));
    }
    throw Error(ErrorKind::non_terminating, "relation completion did not settle");
  }

  /// Orients d = 0 as a rule for the highest-ranked function atom in which
  /// d is linear. Rank: derivative order, then atom order.
  static std::optional<SideRelation> orient(const Expr& d) {
    std::optional<Atom> best;
    for (const auto& a : d.num().atoms()) {
      if (!a.is_func() || d.den().contains(a) || d.num().degree(a) != 1) continue;
      if (!best || a.multi().total() > best->multi().total() ||
          (a.multi().total() == best->multi().total() && a > *best))
        best = a;
    }
    if (!best) return std::nullopt;
    auto parts = collect(Expr::fraction(d.num(), Poly(1)), {*best});
    const Expr a = parts[Monomial(*best)];
    const Expr b = parts.count(Monomial()) ? parts[Monomial()] : Expr();
    return SideRelation(*best, -b / a);
  }

 private:
  Expr reduce(const Expr& e, int depth) const {
    if (rules_.empty()) return e;
    Bindings b;
    for (const auto& a : e.atoms())
      if (a.is_func() && rule_for(a)) b.emplace(a, reduce_atom(a, depth));
    if (b.empty()) return e;
    return substitute(e, b);
  }

  Expr reduce_atom(const Atom& a, int depth) const {
    const SideRelation* r = rule_for(a);
    if (!r) return Expr(a);
    {
      std::lock_guard lock(cache_->mutex);
      auto it = cache_->images.find(a);
      if (it != cache_->images.end()) return it->second;
    }
    if (depth > depth_limit)
      throw Error(ErrorKind::non_terminating, "rewriting " + a.to_string() + " exceeded the depth bound");
    Expr img = reduce(r->prolonged(a), depth + 1);
    std::lock_guard lock(cache_->mutex);
    cache_->images.emplace(a, img);
    return img;
  }

  struct Cache {
    std::mutex mutex;
    std::map<Atom, Expr> images;
    void clear() {
      std::lock_guard lock(mutex);
      images.clear();
    }
  };

  std::vector<SideRelation> rules_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace jetlax
