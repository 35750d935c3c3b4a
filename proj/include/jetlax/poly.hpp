#pragma once

// Sparse multivariate polynomials over the integers in Atom indeterminates.
// Terms are kept sorted by descending lexicographic monomial order (the atom
// order decides which variable is most significant). GCDs use the recursive
// subresultant algorithm with content splitting, after a modular screen
// that proves most coprime pairs coprime without it.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "jetlax/atom.hpp"

namespace jetlax {

using Integer = mpz_class;
using Rational = mpq_class;

struct Factor {
  Atom atom;
  std::uint32_t exp;
  friend bool operator==(const Factor&, const Factor&) = default;
};

/// Power product of atoms, factors sorted by descending atom.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(const Atom& a, std::uint32_t e = 1) {
    if (e) f_.push_back({a, e});
  }

  const std::vector<Factor>& factors() const { return f_; }
  bool is_one() const { return f_.empty(); }
  std::size_t size() const { return f_.size(); }

  std::uint32_t degree(const Atom& a) const {
    for (const auto& fa : f_)
      if (fa.atom == a) return fa.exp;
    return 0;
  }

  unsigned total_degree() const {
    unsigned d = 0;
    for (const auto& fa : f_) d += fa.exp;
    return d;
  }

  /// Copy with the exponent of `a` replaced.
  Monomial with_degree(const Atom& a, std::uint32_t e) const {
    Monomial r;
    r.f_.reserve(f_.size() + 1);
    bool placed = false;
    for (const auto& fa : f_) {
      if (!placed && fa.atom <= a) {
        if (fa.atom == a) {
          if (e) r.f_.push_back({a, e});
          placed = true;
          continue;
        }
        if (e) r.f_.push_back({a, e});
        placed = true;
      }
      r.f_.push_back(fa);
    }
    if (!placed && e) r.f_.push_back({a, e});
    return r;
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.f_.reserve(a.f_.size() + b.f_.size());
    std::size_t i = 0, j = 0;
    while (i < a.f_.size() && j < b.f_.size()) {
      const auto c = a.f_[i].atom <=> b.f_[j].atom;
      if (c > 0) {
        r.f_.push_back(a.f_[i++]);
      } else if (c < 0) {
        r.f_.push_back(b.f_[j++]);
      } else {
        r.f_.push_back({a.f_[i].atom, a.f_[i].exp + b.f_[j].exp});
        ++i;
        ++j;
      }
    }
    while (i < a.f_.size()) r.f_.push_back(a.f_[i++]);
    while (j < b.f_.size()) r.f_.push_back(b.f_[j++]);
    return r;
  }

  /// a / b when b divides a.
  static std::optional<Monomial> divide(const Monomial& a, const Monomial& b) {
    Monomial r;
    std::size_t i = 0, j = 0;
    while (j < b.f_.size()) {
      if (i == a.f_.size()) return std::nullopt;
      const auto c = a.f_[i].atom <=> b.f_[j].atom;
      if (c > 0) {
        r.f_.push_back(a.f_[i++]);
      } else if (c < 0) {
        return std::nullopt;
      } else {
        if (a.f_[i].exp < b.f_[j].exp) return std::nullopt;
        if (a.f_[i].exp > b.f_[j].exp) r.f_.push_back({a.f_[i].atom, a.f_[i].exp - b.f_[j].exp});
        ++i;
        ++j;
      }
    }
    while (i < a.f_.size()) r.f_.push_back(a.f_[i++]);
    return r;
  }

  static Monomial gcd(const Monomial& a, const Monomial& b) {
    Monomial r;
    std::size_t i = 0, j = 0;
    while (i < a.f_.size() && j < b.f_.size()) {
      const auto c = a.f_[i].atom <=> b.f_[j].atom;
      if (c > 0) {
        ++i;
      } else if (c < 0) {
        ++j;
      } else {
        r.f_.push_back({a.f_[i].atom, std::min(a.f_[i].exp, b.f_[j].exp)});
        ++i;
        ++j;
      }
    }
    return r;
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;

  friend std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) {
    const std::size_t n = std::min(a.f_.size(), b.f_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (auto c = a.f_[i].atom <=> b.f_[i].atom; c != 0) return c;
      if (auto c = a.f_[i].exp <=> b.f_[i].exp; c != 0) return c;
    }
    return a.f_.size() <=> b.f_.size();
  }

 private:
  std::vector<Factor> f_;
};

struct Term {
  Monomial mono;
  Integer coef;
};

class Poly {
 public:
  Poly() = default;
  Poly(long c) {  // NOLINT(google-explicit-constructor)
    if (c != 0) terms_.push_back({Monomial(), Integer(c)});
  }
  explicit Poly(const Integer& c) {
    if (c != 0) terms_.push_back({Monomial(), c});
  }
  explicit Poly(const Atom& a, std::uint32_t e = 1) { terms_.push_back({Monomial(a, e), Integer(1)}); }
  Poly(Monomial m, Integer c) {
    if (c != 0) terms_.push_back({std::move(m), std::move(c)});
  }

  /// Builds from unsorted terms, combining like monomials.
  static Poly from_terms(std::vector<Term> ts) {
    std::sort(ts.begin(), ts.end(), [](const Term& a, const Term& b) { return a.mono > b.mono; });
    Poly p;
    for (auto& t : ts) {
      if (!p.terms_.empty() && p.terms_.back().mono == t.mono) {
        p.terms_.back().coef += t.coef;
        if (p.terms_.back().coef == 0) p.terms_.pop_back();
      } else if (t.coef != 0) {
        p.terms_.push_back(std::move(t));
      }
    }
    return p;
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].mono.is_one()); }
  bool is_one() const { return terms_.size() == 1 && terms_[0].mono.is_one() && terms_[0].coef == 1; }
  bool is_monomial() const { return terms_.size() == 1; }
  Integer constant_value() const { return terms_.empty() || !terms_.back().mono.is_one() ? Integer(0) : terms_.back().coef; }
  const Term& lead() const { return terms_.front(); }

  std::set<Atom> atoms() const {
    std::set<Atom> s;
    for (const auto& t : terms_)
      for (const auto& f : t.mono.factors()) s.insert(f.atom);
    return s;
  }

  bool contains(const Atom& a) const {
    for (const auto& t : terms_)
      if (t.mono.degree(a)) return true;
    return false;
  }

  template <class Pred>
  bool contains_if(Pred&& pred) const {
    for (const auto& t : terms_)
      for (const auto& f : t.mono.factors())
        if (pred(f.atom)) return true;
    return false;
  }

  std::uint32_t degree(const Atom& a) const {
    std::uint32_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.mono.degree(a));
    return d;
  }

  friend bool operator==(const Poly& a, const Poly& b) {
    if (a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i)
      if (a.terms_[i].mono != b.terms_[i].mono || a.terms_[i].coef != b.terms_[i].coef) return false;
    return true;
  }

  friend std::strong_ordering operator<=>(const Poly& a, const Poly& b) {
    const std::size_t n = std::min(a.terms_.size(), b.terms_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (auto c = a.terms_[i].mono <=> b.terms_[i].mono; c != 0) return c;
      int c = cmp(a.terms_[i].coef, b.terms_[i].coef);
      if (c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    return a.terms_.size() <=> b.terms_.size();
  }

  Poly operator-() const {
    Poly r = *this;
    for (auto& t : r.terms_) t.coef = -t.coef;
    return r;
  }

  friend Poly operator+(const Poly& a, const Poly& b) { return merge(a, b, false); }
  friend Poly operator-(const Poly& a, const Poly& b) { return merge(a, b, true); }
  Poly& operator+=(const Poly& b) { return *this = *this + b; }
  Poly& operator-=(const Poly& b) { return *this = *this - b; }

  Poly mul_term(const Monomial& m, const Integer& c) const {
    Poly r;
    if (c == 0) return r;
    r.terms_.reserve(terms_.size());
    for (const auto& t : terms_) r.terms_.push_back({t.mono * m, t.coef * c});
    return r;  // multiplication by a monomial preserves the order
  }

  Poly scaled(const Integer& c) const { return mul_term(Monomial(), c); }

  friend Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    if (b.terms_.size() == 1) return a.mul_term(b.terms_[0].mono, b.terms_[0].coef);
    if (a.terms_.size() == 1) return b.mul_term(a.terms_[0].mono, a.terms_[0].coef);
    std::vector<Term> ts;
    ts.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& s : a.terms_)
      for (const auto& t : b.terms_) ts.push_back({s.mono * t.mono, s.coef * t.coef});
    return from_terms(std::move(ts));
  }
  Poly& operator*=(const Poly& b) { return *this = *this * b; }

  Poly pow(unsigned e) const {
    Poly r(1), base = *this;
    while (e) {
      if (e & 1u) r *= base;
      e >>= 1u;
      if (e) base *= base;
    }
    return r;
  }

  /// Integer content (gcd of coefficients), positive.
  Integer content() const {
    Integer g = 0;
    for (const auto& t : terms_) {
      mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), t.coef.get_mpz_t());
      if (g == 1) break;
    }
    return g;
  }

  /// Largest monomial dividing every term.
  Monomial monomial_content() const {
    if (terms_.empty()) return {};
    Monomial g = terms_[0].mono;
    for (std::size_t i = 1; i < terms_.size() && !g.is_one(); ++i) g = Monomial::gcd(g, terms_[i].mono);
    return g;
  }

  /// Exact quotient by an integer (which must divide every coefficient).
  Poly div_integer(const Integer& c) const {
    Poly r = *this;
    for (auto& t : r.terms_) mpz_divexact(t.coef.get_mpz_t(), t.coef.get_mpz_t(), c.get_mpz_t());
    return r;
  }

  Poly div_monomial(const Monomial& m) const {
    Poly r;
    r.terms_.reserve(terms_.size());
    for (const auto& t : terms_) r.terms_.push_back({*Monomial::divide(t.mono, m), t.coef});
    return r;
  }

  /// Exact division; nullopt when `b` does not divide `*this`.
  std::optional<Poly> divide_exact(const Poly& b) const {
    if (b.is_zero()) throw Error(ErrorKind::degenerate_input, "polynomial division by zero");
    if (is_zero()) return Poly();
    if (b.terms_.size() == 1) {
      Poly r;
      r.terms_.reserve(terms_.size());
      for (const auto& t : terms_) {
        auto m = Monomial::divide(t.mono, b.terms_[0].mono);
        if (!m || !mpz_divisible_p(t.coef.get_mpz_t(), b.terms_[0].coef.get_mpz_t())) return std::nullopt;
        Integer q;
        mpz_divexact(q.get_mpz_t(), t.coef.get_mpz_t(), b.terms_[0].coef.get_mpz_t());
        r.terms_.push_back({std::move(*m), std::move(q)});
      }
      return r;
    }
    Poly rem = *this;
    std::vector<Term> quot;
    const Term& lb = b.terms_[0];
    while (!rem.is_zero()) {
      const Term& lr = rem.terms_[0];
      auto m = Monomial::divide(lr.mono, lb.mono);
      if (!m || !mpz_divisible_p(lr.coef.get_mpz_t(), lb.coef.get_mpz_t())) return std::nullopt;
      Integer c;
      mpz_divexact(c.get_mpz_t(), lr.coef.get_mpz_t(), lb.coef.get_mpz_t());
      rem = rem - b.mul_term(*m, c);
      quot.push_back({std::move(*m), std::move(c)});
    }
    Poly q;
    q.terms_ = std::move(quot);
    return q;
  }

  Poly exact_div(const Poly& b) const {
    auto q = divide_exact(b);
    if (!q) throw Error(ErrorKind::contract, "inexact polynomial division");
    return std::move(*q);
  }

  /// Plain partial derivative treating every atom as independent.
  Poly partial(const Atom& a) const {
    std::vector<Term> ts;
    for (const auto& t : terms_) {
      const auto d = t.mono.degree(a);
      if (!d) continue;
      ts.push_back({t.mono.with_degree(a, d - 1), t.coef * d});
    }
    return from_terms(std::move(ts));
  }

  /// Coefficients with respect to `a`: result[k] is the coefficient of a^k.
  std::vector<Poly> coefficients_in(const Atom& a) const {
    std::vector<std::vector<Term>> buckets(degree(a) + 1);
    for (const auto& t : terms_) {
      const auto d = t.mono.degree(a);
      buckets[d].push_back({d ? t.mono.with_degree(a, 0) : t.mono, t.coef});
    }
    std::vector<Poly> out;
    out.reserve(buckets.size());
    for (auto& b : buckets) out.push_back(from_terms(std::move(b)));
    return out;
  }

  static Poly from_coefficients(const std::vector<Poly>& cs, const Atom& a) {
    std::vector<Term> ts;
    for (std::size_t k = 0; k < cs.size(); ++k)
      for (const auto& t : cs[k].terms_) ts.push_back({k ? t.mono * Monomial(a, std::uint32_t(k)) : t.mono, t.coef});
    return from_terms(std::move(ts));
  }

  /// Sign normalization: leading coefficient positive.
  Poly with_positive_lead() const { return (!is_zero() && terms_[0].coef < 0) ? -*this : *this; }
  bool lead_negative() const { return !is_zero() && terms_[0].coef < 0; }

 private:
  static Poly merge(const Poly& a, const Poly& b, bool subtract) {
    Poly r;
    r.terms_.reserve(a.terms_.size() + b.terms_.size());
    std::size_t i = 0, j = 0;
    while (i < a.terms_.size() && j < b.terms_.size()) {
      const auto c = a.terms_[i].mono <=> b.terms_[j].mono;
      if (c > 0) {
        r.terms_.push_back(a.terms_[i++]);
      } else if (c < 0) {
        r.terms_.push_back(b.terms_[j++]);
        if (subtract) r.terms_.back().coef = -r.terms_.back().coef;
      } else {
        Integer s = a.terms_[i].coef;
        if (subtract) s -= b.terms_[j].coef; else s += b.terms_[j].coef;
        if (s != 0) r.terms_.push_back({a.terms_[i].mono, std::move(s)});
        ++i;
        ++j;
      }
    }
    while (i < a.terms_.size()) r.terms_.push_back(a.terms_[i++]);
    while (j < b.terms_.size()) {
      r.terms_.push_back(b.terms_[j++]);
      if (subtract) r.terms_.back().coef = -r.terms_.back().coef;
    }
    return r;
  }

  std::vector<Term> terms_;
};

namespace detail {

Poly gcd_impl(const Poly& a, const Poly& b);

// Univariate view over a coefficient ring of polynomials in the other atoms.
using UPoly = std::vector<Poly>;

inline void trim(UPoly& u) {
  while (!u.empty() && u.back().is_zero()) u.pop_back();
}

inline int udeg(const UPoly& u) { return int(u.size()) - 1; }

inline Poly ucontent(const UPoly& u) {
  Poly g;
  for (const auto& c : u) {
    g = gcd_impl(g, c);
    if (g.is_one()) break;
  }
  return g;
}

// Pseudo-remainder lc(b)^(da-db+1) * a mod b.
inline UPoly prem(UPoly a, const UPoly& b) {
  const int db = udeg(b);
  int e = udeg(a) - db + 1;
  const Poly& lb = b.back();
  while (!a.empty() && udeg(a) >= db) {
    const int shift = udeg(a) - db;
    const Poly la = a.back();
    for (auto& c : a) c = c * lb;
    for (int k = 0; k <= db; ++k) a[k + shift] -= la * b[k];
    trim(a);
    --e;
  }
  if (e > 0) {
    const Poly f = lb.pow(unsigned(e));
    for (auto& c : a) c = c * f;
  }
  return a;
}

// Subresultant PRS; inputs primitive, result primitive (up to sign).
inline UPoly subresultant_gcd(UPoly a, UPoly b) {
  if (udeg(a) < udeg(b)) std::swap(a, b);
  Poly g(1), h(1);
  while (true) {
    const int delta = udeg(a) - udeg(b);
    UPoly r = prem(a, b);
    if (r.empty()) break;
    if (udeg(r) == 0) return UPoly{Poly(1)};
    a = std::move(b);
    const Poly divisor = g * h.pow(unsigned(delta));
    for (auto& c : r) c = c.exact_div(divisor);
    b = std::move(r);
    g = a.back();
    if (delta == 0) {
      // h unchanged
    } else if (delta == 1) {
      h = g;
    } else {
      h = g.pow(unsigned(delta)).exact_div(h.pow(unsigned(delta - 1)));
    }
  }
  const Poly c = ucontent(b);
  for (auto& x : b) x = x.exact_div(c);
  return b;
}

// Arithmetic modulo the prime 2^31 - 1 for the coprimality screen.
constexpr std::uint64_t screen_prime = 2147483647u;

inline std::uint64_t mod_pow(std::uint64_t b, std::uint64_t e) {
  std::uint64_t r = 1;
  for (b %= screen_prime; e; e >>= 1, b = b * b % screen_prime)
    if (e & 1) r = r * b % screen_prime;
  return r;
}

inline std::uint64_t mod_inverse(std::uint64_t a) { return mod_pow(a, screen_prime - 2); }

// Image of p in Z_p[v] after sending every other atom to a residue drawn
// from a fixed hash of the atom and the round.
inline std::vector<std::uint64_t> univariate_image(const Poly& p, const Atom& v, unsigned round) {
  std::vector<std::uint64_t> out(p.degree(v) + 1, 0);
  for (const auto& t : p.terms()) {
    std::uint64_t c = mpz_fdiv_ui(t.coef.get_mpz_t(), screen_prime);
    std::uint32_t e = 0;
    for (const auto& f : t.mono.factors()) {
      if (f.atom == v) {
        e = f.exp;
        continue;
      }
      const std::uint64_t x =
          (std::hash<std::string>{}(f.atom.to_string()) * 0x9E3779B97F4A7C15ull + round * 0x632BE59BD9B4E019ull) %
              (screen_prime - 2) + 2;
      c = c * mod_pow(x, f.exp) % screen_prime;
    }
    out[e] = (out[e] + c) % screen_prime;
  }
  return out;
}

inline int univariate_gcd_degree(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b) {
  auto trim = [](std::vector<std::uint64_t>& u) {
    while (!u.empty() && u.back() == 0) u.pop_back();
  };
  trim(a);
  trim(b);
  while (!b.empty()) {
    if (a.size() < b.size()) std::swap(a, b);
    const std::uint64_t inv = mod_inverse(b.back());
    while (a.size() >= b.size() && !a.empty()) {
      const std::uint64_t q = a.back() * inv % screen_prime;
      const std::size_t shift = a.size() - b.size();
      for (std::size_t k = 0; k < b.size(); ++k)
        a[k + shift] = (a[k + shift] + screen_prime - q * b[k] % screen_prime) % screen_prime;
      trim(a);
    }
    std::swap(a, b);
  }
  return int(a.size()) - 1;
}

// True when a and b (primitive, no monomial content) are provably coprime:
// for every shared atom v some image in Z_p[v] keeps both degrees and has a
// constant gcd, so the true gcd has degree zero in v. Inconclusive -> false.
inline bool coprime_by_images(const Poly& a, const Poly& b, const std::set<Atom>& shared) {
  for (const auto& v : shared) {
    bool settled = false;
    for (unsigned round = 0; round < 2 && !settled; ++round) {
      const auto ia = univariate_image(a, v, round), ib = univariate_image(b, v, round);
      if (ia.back() == 0 || ib.back() == 0) continue;
      if (univariate_gcd_degree(ia, ib) > 0) return false;
      settled = true;
    }
    if (!settled) return false;
  }
  return true;
}

// gcd of two polynomials that have unit integer content and trivial
// monomial content.
inline Poly gcd_primitive(Poly a, Poly b) {
  if (a.with_positive_lead() == b.with_positive_lead()) return a.with_positive_lead();
  if (a.is_constant() || b.is_constant() || a.is_monomial() || b.is_monomial()) return Poly(1);
  auto sa = a.atoms();
  auto sb = b.atoms();
  std::set<Atom> shared;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(shared, shared.begin()));
  if (shared.empty() || coprime_by_images(a, b, shared)) return Poly(1);
  bool reduced = false;
  for (const auto& v : sa) {
    if (!sb.count(v)) {
      UPoly ua = a.coefficients_in(v);
      a = ucontent(ua);
      reduced = true;
      if (a.is_constant()) return Poly(1);
    }
  }
  for (const auto& v : sb) {
    if (!sa.count(v)) {
      UPoly ub = b.coefficients_in(v);
      b = ucontent(ub);
      reduced = true;
      if (b.is_constant()) return Poly(1);
    }
  }
  if (reduced) return gcd_impl(a, b);

  // Main variable: common atom with the smallest degree.
  Atom best;
  std::uint32_t best_deg = ~0u;
  for (const auto& v : sa) {
    const auto d = std::max(a.degree(v), b.degree(v));
    if (d < best_deg) {
      best_deg = d;
      best = v;
    }
  }
  UPoly ua = a.coefficients_in(best);
  UPoly ub = b.coefficients_in(best);
  const Poly ca = ucontent(ua);
  const Poly cb = ucontent(ub);
  const Poly c = gcd_impl(ca, cb);
  if (!ca.is_one())
    for (auto& x : ua) x = x.exact_div(ca);
  if (!cb.is_one())
    for (auto& x : ub) x = x.exact_div(cb);
  UPoly g = subresultant_gcd(std::move(ua), std::move(ub));
  return (c * Poly::from_coefficients(g, best)).with_positive_lead();
}

inline Poly gcd_impl(const Poly& a, const Poly& b) {
  if (a.is_zero()) return b.with_positive_lead();
  if (b.is_zero()) return a.with_positive_lead();
  Integer ig;
  const Integer ca = a.content(), cb = b.content();
  mpz_gcd(ig.get_mpz_t(), ca.get_mpz_t(), cb.get_mpz_t());
  if (a.is_constant() || b.is_constant()) return Poly(ig);
  const Monomial ma = a.monomial_content(), mb = b.monomial_content();
  const Monomial mg = Monomial::gcd(ma, mb);
  Poly a1 = a, b1 = b;
  if (!ma.is_one()) a1 = a1.div_monomial(ma);
  if (!mb.is_one()) b1 = b1.div_monomial(mb);
  if (ca != 1) a1 = a1.div_integer(ca);
  if (cb != 1) b1 = b1.div_integer(cb);
  Poly core = gcd_primitive(std::move(a1), std::move(b1));
  return core.mul_term(mg, ig).with_positive_lead();
}

}  // namespace detail

/// Greatest common divisor over Z[atoms], including integer content,
/// normalized to a positive leading coefficient. gcd(0, 0) = 0.
inline Poly gcd(const Poly& a, const Poly& b) { return detail::gcd_impl(a, b); }

}  // namespace jetlax
