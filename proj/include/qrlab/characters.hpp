#ifndef QRLAB_CHARACTERS_HPP
#define QRLAB_CHARACTERS_HPP

// Characters of the lattice, the character transform of plane sections, and
// finite abelian models of the group-algebra maps (sum over a subgroup,
// integration over the group).

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "qrlab/core.hpp"
#include "qrlab/prequant.hpp"

namespace qrlab::characters {

using prequant::LatticeElement;
using prequant::PlanePoint;

inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// (lambda, mu) in [0, 2 pi)^{2n}; U(k + il) = exp(i (k.lambda + l.mu)).
struct Character {
  std::vector<double> lambda;
  std::vector<double> mu;

  Character() = default;
  Character(std::vector<double> l, std::vector<double> m) : lambda(std::move(l)), mu(std::move(m)) {
    if (lambda.size() != mu.size() || lambda.empty()) throw DimensionError("character needs n lambdas and n mus");
    for (auto* v : {&lambda, &mu})
      for (double x : *v)
        if (!(x >= 0.0 && x < kTwoPi)) throw ConfigError("character coordinates must lie in [0, 2 pi)");
  }

  static Character wrapped(std::vector<double> l, std::vector<double> m) {
    for (auto& x : l) x = wrap_angle(x);
    for (auto& x : m) x = wrap_angle(x);
    return {std::move(l), std::move(m)};
  }
  static Character one(double l, double m) { return wrapped({l}, {m}); }
  static Character trivial(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }

  std::size_t dim() const { return lambda.size(); }

  bool operator==(const Character& o) const {
    if (dim() != o.dim()) return false;
    for (std::size_t j = 0; j < dim(); ++j)
      if (wrap_angle(lambda[j] - o.lambda[j]) != 0.0 || wrap_angle(mu[j] - o.mu[j]) != 0.0) return false;
    return true;
  }
};

inline cplx evaluate_character(const Character& a, const LatticeElement& g) {
  if (a.dim() != g.dim()) throw DimensionError("character and lattice element dimensions differ");
  double phase = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j)
    phase += static_cast<double>(g.k[j]) * a.lambda[j] + static_cast<double>(g.l[j]) * a.mu[j];
  return std::polar(1.0, phase);
}

/// Plane section with a declared support box [lo, hi] in (q_1, p_1, ...) coordinates.
struct CompactSection {
  std::function<cplx(const PlanePoint&)> f;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size() / 2; }

  cplx operator()(const PlanePoint& z) const {
    const auto x = z.coords();
    for (std::size_t a = 0; a < x.size(); ++a)
      if (x[a] < lo[a] || x[a] > hi[a]) return {};
    return f(z);
  }
};

/// Lattice translates gamma with (z - gamma) inside the support box of s.
inline std::vector<LatticeElement> translates_meeting(const CompactSection& s, const PlanePoint& z,
                                                      std::int64_t max_range) {
  const std::size_t n = s.dim();
  if (z.dim() != n) throw DimensionError("point and section dimensions differ");
  std::vector<std::int64_t> first(2 * n), last(2 * n);
  const auto x = z.coords();
  for (std::size_t a = 0; a < 2 * n; ++a) {
    first[a] = static_cast<std::int64_t>(std::ceil(x[a] - s.hi[a]));
    last[a] = static_cast<std::int64_t>(std::floor(x[a] - s.lo[a]));
    if (std::abs(first[a]) > max_range || std::abs(last[a]) > max_range)
      throw NumericalError("section support exceeds the configured lattice range");
  }
  std::vector<LatticeElement> out;
  std::vector<std::int64_t> cur = first;
  for (std::size_t a = 0; a < 2 * n; ++a)
    if (first[a] > last[a]) return out;
  for (;;) {
    auto g = LatticeElement::zero(n);
    for (std::size_t j = 0; j < n; ++j) {
      g.k[j] = cur[2 * j];
      g.l[j] = cur[2 * j + 1];
    }
    out.push_back(std::move(g));
    std::size_t a = 2 * n;
    while (a-- > 0) {
      if (cur[a] < last[a]) {
        ++cur[a];
        break;
      }
      cur[a] = first[a];
    }
    if (a == static_cast<std::size_t>(-1)) return out;
  }
}

/// s_alpha(z) = sum_gamma (gamma . sigma)(z) U_alpha(gamma), the inverse of
/// the transform that integrates an equivariant family over the dual torus.
class EquivariantSection {
 public:
  EquivariantSection(CompactSection sigma, Character alpha, prequant::LiftedAction act = prequant::LiftedAction(),
                     std::int64_t max_range = 64)
      : sigma_(std::move(sigma)), alpha_(std::move(alpha)), act_(act), max_range_(max_range) {
    if (sigma_.dim() != alpha_.dim()) throw DimensionError("section and character dimensions differ");
  }

  cplx operator()(const PlanePoint& z) const {
    cplx acc{};
    for (const auto& g : translates_meeting(sigma_, z, max_range_))
      acc += act_.act_on_section(g, sigma_, z) * evaluate_character(alpha_, g);
    return acc;
  }

  const Character& character() const { return alpha_; }

 private:
  CompactSection sigma_;
  Character alpha_;
  prequant::LiftedAction act_;
  std::int64_t max_range_;
};

inline EquivariantSection character_transform(const CompactSection& sigma, const Character& alpha,
                                              std::int64_t max_range = 64) {
  return {sigma, alpha, prequant::LiftedAction{}, max_range};
}

/// max over samples and generators of |(gamma . s)(z) - U_alpha(gamma)^{-1} s(z)|,
/// relative to max(|s(z)|, |(gamma . s)(z)|).
template <class Section>
ValidationReport equivariance_residual(const Section& s, const Character& alpha,
                                       std::span<const PlanePoint> samples, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"equivariance", 0.0, tol};
  const prequant::LiftedAction act;
  const std::size_t n = alpha.dim();
  for (const auto& z : samples) {
    const cplx sz = s(z);
    for (std::size_t j = 0; j < n; ++j)
      for (int kind = 0; kind < 2; ++kind) {
        const auto g = LatticeElement::unit(n, j, kind == 0 ? 1 : 0, kind == 1 ? 1 : 0);
        const cplx lhs = act.act_on_section(g, s, z);
        const cplx rhs = std::conj(evaluate_character(alpha, g)) * sz;
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        r.max_residual = std::max(r.max_residual, std::abs(lhs - rhs) / scale);
      }
  }
  r.samples = samples.size();
  r.finalize();
  return r;
}

/// (V s)(z) = int s_alpha(z) d alpha with the normalised measure, by the
/// midpoint-free uniform rule on an m^{2n} character grid (exact for
/// lattice sums spanning fewer than m translates per axis).
inline cplx average_over_characters(const CompactSection& sigma, const PlanePoint& z, std::size_t m,
                                    std::int64_t max_range = 64) {
  const std::size_t n = sigma.dim();
  if (m == 0) throw ConfigError("character grid count must be positive");
  const auto gs = translates_meeting(sigma, z, max_range);
  const prequant::LiftedAction act;
  std::vector<cplx> terms;
  terms.reserve(gs.size());
  for (const auto& g : gs) terms.push_back(act.act_on_section(g, sigma, z));
  std::size_t nodes = 1;
  for (std::size_t a = 0; a < 2 * n; ++a) nodes *= m;
  cplx acc{};
  std::vector<double> lam(n), mu(n);
  for (std::size_t node = 0; node < nodes; ++node) {
    std::size_t rest = node;
    for (std::size_t j = 0; j < n; ++j) {
      lam[j] = kTwoPi * static_cast<double>(rest % m) / static_cast<double>(m);
      rest /= m;
      mu[j] = kTwoPi * static_cast<double>(rest % m) / static_cast<double>(m);
      rest /= m;
    }
    const Character alpha(lam, mu);
    for (std::size_t i = 0; i < gs.size(); ++i) acc += terms[i] * evaluate_character(alpha, gs[i]);
  }
  return acc / static_cast<double>(nodes);
}

// ---------------------------------------------------------------------------
// Finite abelian groups G = Z/m_1 x ... x Z/m_r, mixed-radix flat indexing
// (last factor fastest).

class FiniteAbelianGroup {
 public:
  FiniteAbelianGroup() = default;
  explicit FiniteAbelianGroup(std::vector<std::int64_t> orders) : orders_(std::move(orders)) {
    if (orders_.empty()) throw ConfigError("group needs at least one cyclic factor");
    size_ = 1;
    for (auto m : orders_) {
      if (m < 1) throw ConfigError("cyclic orders must be positive");
      size_ *= static_cast<std::size_t>(m);
    }
  }

  const std::vector<std::int64_t>& orders() const { return orders_; }
  std::size_t rank() const { return orders_.size(); }
  std::size_t size() const { return size_; }

  std::vector<std::int64_t> element(std::size_t flat) const {
    std::vector<std::int64_t> e(rank());
    for (std::size_t i = rank(); i-- > 0;) {
      const auto m = static_cast<std::size_t>(orders_[i]);
      e[i] = static_cast<std::int64_t>(flat % m);
      flat /= m;
    }
    return e;
  }

  std::size_t index(std::span<const std::int64_t> e) const {
    if (e.size() != rank()) throw DimensionError("element rank differs from group rank");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < rank(); ++i) {
      const auto r = ((e[i] % orders_[i]) + orders_[i]) % orders_[i];
      flat = flat * static_cast<std::size_t>(orders_[i]) + static_cast<std::size_t>(r);
    }
    return flat;
  }

  std::size_t add(std::size_t a, std::size_t b) const {
    auto x = element(a);
    const auto y = element(b);
    for (std::size_t i = 0; i < rank(); ++i) x[i] += y[i];
    return index(x);
  }

  std::size_t negate(std::size_t a) const {
    auto x = element(a);
    for (auto& v : x) v = -v;
    return index(x);
  }

  /// U_alpha(gamma) = exp(2 pi i sum_i alpha_i gamma_i / m_i); dual indexed like G.
  cplx character(std::size_t alpha, std::size_t gamma) const {
    const auto a = element(alpha);
    const auto g = element(gamma);
    double frac = 0.0;
    for (std::size_t i = 0; i < rank(); ++i)
      frac += static_cast<double>((a[i] * g[i]) % orders_[i]) / static_cast<double>(orders_[i]);
    return std::polar(1.0, kTwoPi * frac);
  }

  bool operator==(const FiniteAbelianGroup&) const = default;

 private:
  std::vector<std::int64_t> orders_{1};
  std::size_t size_ = 1;
};

struct GroupAlgebraElement {
  FiniteAbelianGroup group;
  std::vector<cplx> values;

  GroupAlgebraElement() = default;
  GroupAlgebraElement(FiniteAbelianGroup g, std::vector<cplx> v) : group(std::move(g)), values(std::move(v)) {
    if (values.size() != group.size()) throw DimensionError("value count differs from group order");
  }

  static GroupAlgebraElement delta(const FiniteAbelianGroup& g, std::size_t at) {
    std::vector<cplx> v(g.size());
    v.at(at) = 1.0;
    return {g, std::move(v)};
  }
  static GroupAlgebraElement constant(const FiniteAbelianGroup& g, cplx c) { return {g, std::vector<cplx>(g.size(), c)}; }
  static GroupAlgebraElement random(const FiniteAbelianGroup& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::vector<cplx> v(g.size());
    for (auto& x : v) x = {nd(rng), nd(rng)};
    return {g, std::move(v)};
  }
};

namespace detail {

/// Applies the 1-D transform y_a = sum_g x_g w^{sign a g} along every factor.
inline std::vector<cplx> separable_dft(const FiniteAbelianGroup& g, std::vector<cplx> x, int sign) {
  const auto& orders = g.orders();
  std::size_t inner = g.size();
  std::vector<cplx> line, out;
  for (std::size_t axis = 0; axis < g.rank(); ++axis) {
    const auto m = static_cast<std::size_t>(orders[axis]);
    inner /= m;
    const std::size_t outer = g.size() / (inner * m);
    std::vector<cplx> roots(m);
    for (std::size_t k = 0; k < m; ++k)
      roots[k] = std::polar(1.0, sign * kTwoPi * static_cast<double>(k) / static_cast<double>(m));
    line.assign(m, {});
    out.assign(m, {});
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * m * inner + in;
        for (std::size_t k = 0; k < m; ++k) line[k] = x[base + k * inner];
        for (std::size_t a = 0; a < m; ++a) {
          cplx acc{};
          for (std::size_t k = 0; k < m; ++k) acc += line[k] * roots[(a * k) % m];
          out[a] = acc;
        }
        for (std::size_t a = 0; a < m; ++a) x[base + a * inner] = out[a];
      }
  }
  return x;
}

}  // namespace detail

/// f^(alpha) = sum_gamma f(gamma) U_alpha(gamma)^{-1}, counting measure on G.
inline std::vector<cplx> fourier_transform(const GroupAlgebraElement& f) {
  return detail::separable_dft(f.group, f.values, -1);
}

/// f(gamma) = |G|^{-1} sum_alpha f^(alpha) U_alpha(gamma).
inline GroupAlgebraElement inverse_fourier(const FiniteAbelianGroup& g, const std::vector<cplx>& fhat) {
  if (fhat.size() != g.size()) throw DimensionError("dual function size differs from group order");
  auto v = detail::separable_dft(g, fhat, +1);
  const double inv = 1.0 / static_cast<double>(g.size());
  for (auto& x : v) x *= inv;
  return {g, std::move(v)};
}

inline cplx integrate_group(const GroupAlgebraElement& f) {
  cplx acc{};
  for (const auto& v : f.values) acc += v;
  return acc;
}

/// Subgroup generated by a list of elements, with its coset table.
class Subgroup {
 public:
  Subgroup(FiniteAbelianGroup g, const std::vector<std::vector<std::int64_t>>& generators) : group_(std::move(g)) {
    for (const auto& e : generators) {
      if (e.size() != group_.rank()) throw ConfigError("subgroup generator rank differs from group rank");
      for (std::size_t i = 0; i < e.size(); ++i)
        if (e[i] < 0 || e[i] >= group_.orders()[i]) throw ConfigError("subgroup generator entry out of range");
      gens_.push_back(group_.index(e));
    }
    std::vector<char> in(group_.size(), 0);
    members_.push_back(0);
    in[0] = 1;
    for (std::size_t head = 0; head < members_.size(); ++head)
      for (auto gen : gens_) {
        const auto next = group_.add(members_[head], gen);
        if (!in[next]) {
          in[next] = 1;
          members_.push_back(next);
        }
      }
    std::sort(members_.begin(), members_.end());
    coset_of_.assign(group_.size(), kNone);
    for (std::size_t x = 0; x < group_.size(); ++x) {
      if (coset_of_[x] != kNone) continue;
      const std::size_t c = representatives_.size();
      representatives_.push_back(x);
      for (auto h : members_) coset_of_[group_.add(x, h)] = c;
    }
  }

  const FiniteAbelianGroup& group() const { return group_; }
  const std::vector<std::size_t>& members() const { return members_; }
  std::size_t order() const { return members_.size(); }
  std::size_t coset_count() const { return representatives_.size(); }
  std::size_t coset_of(std::size_t x) const { return coset_of_.at(x); }
  std::size_t representative(std::size_t c) const { return representatives_.at(c); }
  bool contains(std::size_t x) const { return std::binary_search(members_.begin(), members_.end(), x); }

  bool is_subgroup_of(const Subgroup& other) const {
    if (!(group_ == other.group_)) return false;
    for (auto m : members_)
      if (!other.contains(m)) return false;
    return true;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  FiniteAbelianGroup group_;
  std::vector<std::size_t> gens_;
  std::vector<std::size_t> members_;
  std::vector<std::size_t> coset_of_;
  std::vector<std::size_t> representatives_;
};

/// Function on G/N, one value per coset in the order of Subgroup::representative.
struct CosetFunction {
  const Subgroup* subgroup = nullptr;
  std::vector<cplx> values;
};

/// (Sigma_N f)(xN) = sum_{h in N} f(x + h).
inline CosetFunction sum_over_subgroup(const GroupAlgebraElement& f, const Subgroup& n) {
  if (!(f.group == n.group())) throw DimensionError("function and subgroup live on different groups");
  CosetFunction out{&n, std::vector<cplx>(n.coset_count())};
  for (std::size_t x = 0; x < f.values.size(); ++x) out.values[n.coset_of(x)] += f.values[x];
  return out;
}

inline cplx integrate_quotient(const CosetFunction& f) {
  cplx acc{};
  for (const auto& v : f.values) acc += v;
  return acc;
}

/// Sum over N1/N2 for N2 inside N1: takes a function on G/N2 to G/N1.
inline CosetFunction push_forward(const CosetFunction& f, const Subgroup& coarser) {
  if (!f.subgroup->is_subgroup_of(coarser)) throw ConfigError("push-forward needs nested subgroups");
  CosetFunction out{&coarser, std::vector<cplx>(coarser.coset_count())};
  for (std::size_t c = 0; c < f.values.size(); ++c) out.values[coarser.coset_of(f.subgroup->representative(c))] += f.values[c];
  return out;
}

/// int_{G/N} o Sigma_N = int_G on `trials` random elements.
inline ValidationReport check_reduction_in_stages(const Subgroup& n, std::size_t trials, std::uint64_t seed,
                                                  double tol = 1e-12) {
  require_positive_tol(tol);
  ValidationReport r{"reduction_in_stages", 0.0, tol};
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto f = GroupAlgebraElement::random(n.group(), rng);
    r.max_residual = std::max(r.max_residual, std::abs(integrate_quotient(sum_over_subgroup(f, n)) - integrate_group(f)));
  }
  r.samples = trials;
  std::ostringstream note;
  note << "|G|=" << n.group().size() << " |N|=" << n.order() << " |G/N|=" << n.coset_count();
  r.note = note.str();
  r.finalize();
  return r;
}

/// Two-stage chain N2 inside N1: int_{G/N1} o Sigma_{N1/N2} o Sigma_{N2} against
/// int_{G/N1} o Sigma_{N1} and against int_G.
inline ValidationReport check_reduction_chain(const Subgroup& n1, const Subgroup& n2, std::size_t trials,
                                              std::uint64_t seed, double tol = 1e-12) {
  require_positive_tol(tol);
  if (!n2.is_subgroup_of(n1)) throw ConfigError("chain needs N2 inside N1");
  ValidationReport r{"reduction_chain", 0.0, tol};
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto f = GroupAlgebraElement::random(n1.group(), rng);
    const auto staged = push_forward(sum_over_subgroup(f, n2), n1);
    const auto direct = sum_over_subgroup(f, n1);
    for (std::size_t c = 0; c < direct.values.size(); ++c)
      r.max_residual = std::max(r.max_residual, std::abs(staged.values[c] - direct.values[c]));
    r.max_residual = std::max(r.max_residual, std::abs(integrate_quotient(staged) - integrate_group(f)));
  }
  r.samples = trials;
  r.finalize();
  return r;
}

/// Brute-force check of sum_gamma U_alpha(gamma) = |G| [alpha = 0] and
/// sum_alpha U_alpha(gamma) = |G| [gamma = 0].
inline ValidationReport check_delta_identities(const FiniteAbelianGroup& g, double tol = 1e-12) {
  require_positive_tol(tol);
  ValidationReport r{"delta_identities", 0.0, tol};
  const std::size_t size = g.size();
  std::vector<cplx> by_alpha(size), by_gamma(size);
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t x = 0; x < size; ++x) {
      const cplx u = g.character(a, x);
      by_alpha[a] += u;
      by_gamma[x] += u;
    }
  const auto s = static_cast<double>(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double expected = i == 0 ? s : 0.0;
    r.max_residual = std::max({r.max_residual, std::abs(by_alpha[i] - expected) / s, std::abs(by_gamma[i] - expected) / s});
  }
  r.samples = size;
  r.note = "residual relative to |G|";
  r.finalize();
  return r;
}

}  // namespace qrlab::characters

#endif  // QRLAB_CHARACTERS_HPP
