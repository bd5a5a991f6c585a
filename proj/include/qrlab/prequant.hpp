#ifndef QRLAB_PREQUANT_HPP
#define QRLAB_PREQUANT_HPP

// Prequantum line bundle L = C^n x C for the lattice Z^n + iZ^n acting on C^n
// by translation: lifted action, invariant Hermitian metric, invariant
// connection, and point-sampled validators for each of their identities.

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qrlab/core.hpp"
#include "qrlab/grid.hpp"

namespace qrlab::prequant {

/// z_j = q_j + i p_j.
struct PlanePoint {
  std::vector<double> q;
  std::vector<double> p;

  PlanePoint() = default;
  PlanePoint(std::vector<double> q_, std::vector<double> p_) : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size() || q.empty()) throw DimensionError("PlanePoint needs n >= 1 and |q| = |p|");
  }
  static PlanePoint origin(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
  static PlanePoint one(double q, double p) { return {{q}, {p}}; }

  /// Interleaved coordinates (q_1, p_1, ..., q_n, p_n).
  static PlanePoint from_coords(std::span<const double> x) {
    if (x.size() % 2 != 0 || x.empty()) throw DimensionError("coordinate vector must have even length");
    PlanePoint z;
    for (std::size_t j = 0; j < x.size() / 2; ++j) {
      z.q.push_back(x[2 * j]);
      z.p.push_back(x[2 * j + 1]);
    }
    return z;
  }

  std::size_t dim() const { return q.size(); }
  cplx z(std::size_t j) const { return {q[j], p[j]}; }

  std::vector<double> coords() const {
    std::vector<double> x(2 * dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      x[2 * j] = q[j];
      x[2 * j + 1] = p[j];
    }
    return x;
  }
};

/// gamma = k + i l in Z^n + i Z^n.
struct LatticeElement {
  std::vector<std::int64_t> k;
  std::vector<std::int64_t> l;

  LatticeElement() = default;
  LatticeElement(std::vector<std::int64_t> k_, std::vector<std::int64_t> l_) : k(std::move(k_)), l(std::move(l_)) {
    if (k.size() != l.size() || k.empty()) throw DimensionError("LatticeElement needs n >= 1 and |k| = |l|");
  }
  static LatticeElement zero(std::size_t n) { return {std::vector<std::int64_t>(n, 0), std::vector<std::int64_t>(n, 0)}; }
  /// k e_j + i l e_j (j is zero-based).
  static LatticeElement unit(std::size_t n, std::size_t j, std::int64_t k, std::int64_t l) {
    auto g = zero(n);
    g.k[j] = k;
    g.l[j] = l;
    return g;
  }

  std::size_t dim() const { return k.size(); }

  LatticeElement operator+(const LatticeElement& o) const {
    check_same(o);
    LatticeElement r = *this;
    for (std::size_t j = 0; j < dim(); ++j) {
      r.k[j] += o.k[j];
      r.l[j] += o.l[j];
    }
    return r;
  }
  LatticeElement operator-() const {
    LatticeElement r = *this;
    for (std::size_t j = 0; j < dim(); ++j) {
      r.k[j] = -r.k[j];
      r.l[j] = -r.l[j];
    }
    return r;
  }
  bool operator==(const LatticeElement&) const = default;

  void check_same(const LatticeElement& o) const {
    if (o.dim() != dim()) throw DimensionError("lattice elements of different dimension");
  }
};

struct FiberedValue {
  PlanePoint base;
  cplx amplitude;
};

inline void require_dim(const LatticeElement& g, const PlanePoint& z) {
  if (g.dim() != z.dim()) throw DimensionError("lattice element and point have different dimension");
}

inline PlanePoint translate(const PlanePoint& z, const LatticeElement& g) {
  require_dim(g, z);
  PlanePoint w = z;
  for (std::size_t j = 0; j < z.dim(); ++j) {
    w.q[j] += static_cast<double>(g.k[j]);
    w.p[j] += static_cast<double>(g.l[j]);
  }
  return w;
}

/// Lift of the translation action to L. The generator e_j acts trivially on
/// the fibre, i e_j multiplies it by exp(-2 pi i twist z_j). twist = 1 is the
/// prequantisation; any other value is a deliberately broken action used as
/// a negative control (it no longer commutes with e_j).
class LiftedAction {
 public:
  explicit LiftedAction(double generator_twist = 1.0) : twist_(generator_twist) {}

  double twist() const { return twist_; }

  /// m_gamma(z), gamma . (z, w) = (z + gamma, m_gamma(z) w), obtained by
  /// composing generators: the imaginary steps first, then the real ones.
  cplx multiplier(const LatticeElement& g, const PlanePoint& z) const {
    require_dim(g, z);
    cplx m{1.0, 0.0};
    PlanePoint w = z;
    for (std::size_t j = 0; j < z.dim(); ++j) {
      const std::int64_t steps = g.l[j];
      for (std::int64_t s = 0; s < std::abs(steps); ++s) {
        if (steps > 0) {
          m *= std::exp(-kTwoPi * kI * twist_ * w.z(j));
          w.p[j] += 1.0;
        } else {
          w.p[j] -= 1.0;
          m *= std::exp(kTwoPi * kI * twist_ * w.z(j));
        }
      }
    }
    return m;
  }

  /// exp(-2 pi i l.z) exp(pi sum_j l_j (l_j - 1)); valid for twist = 1.
  static cplx multiplier_closed_form(const LatticeElement& g, const PlanePoint& z) {
    require_dim(g, z);
    cplx phase{};
    double real = 0.0;
    for (std::size_t j = 0; j < z.dim(); ++j) {
      const auto l = static_cast<double>(g.l[j]);
      phase += l * z.z(j);
      real += l * (l - 1.0);
    }
    return std::exp(-kTwoPi * kI * phase + kPi * real);
  }

  /// d/dx_axis of log m_gamma; log m_gamma is affine in z for every twist.
  cplx log_multiplier_gradient(const LatticeElement& g, std::size_t axis) const {
    const std::size_t j = axis / 2;
    if (j >= g.dim()) throw DimensionError("axis out of range");
    const auto l = static_cast<double>(g.l[j]);
    return axis % 2 == 0 ? -kTwoPi * kI * twist_ * l : kTwoPi * twist_ * l;
  }

  FiberedValue act(const LatticeElement& g, const FiberedValue& v) const {
    return {translate(v.base, g), multiplier(g, v.base) * v.amplitude};
  }

  /// (rho_gamma s)(z) = m_gamma(z - gamma) s(z - gamma).
  template <class Section>
  cplx act_on_section(const LatticeElement& g, const Section& s, const PlanePoint& z) const {
    const PlanePoint w = translate(z, -g);
    return multiplier(g, w) * s(w);
  }

 private:
  double twist_;
};

/// h(q + ip) = exp(2 pi sum_j (p_j - p_j^2)).
inline double metric_weight(const PlanePoint& z) {
  double e = 0.0;
  for (double p : z.p) e += p - p * p;
  return std::exp(kTwoPi * e);
}

/// A(d/dx_axis) for A = 2 pi i sum_j p_j dz_j + pi dp_j:
/// A(dq_j) = 2 pi i p_j, A(dp_j) = pi - 2 pi p_j.
inline cplx connection_coefficient(std::size_t axis, std::span<const double> x) {
  const double p = x[2 * (axis / 2) + 1];
  return axis % 2 == 0 ? cplx{0.0, kTwoPi * p} : cplx{kPi - kTwoPi * p, 0.0};
}

/// omega(d_x, d_y) for omega = sum_j dp_j ^ dq_j with (a^b)(X,Y) = a(X)b(Y) - a(Y)b(X).
inline double symplectic_form(std::size_t axis_x, std::size_t axis_y) {
  if (axis_x / 2 != axis_y / 2 || axis_x == axis_y) return 0.0;
  return axis_x % 2 == 0 ? -1.0 : 1.0;
}

/// (d + A)(d/dx_axis) s by central differences; margin grows by order/2.
inline GridFunction covariant_derivative(const GridFunction& s, std::size_t axis, int order = 2) {
  if (s.grid.dims() % 2 != 0) throw DimensionError("plane grids have an even number of axes");
  GridFunction out = derivative(s, axis, order);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!out.interior(i)) continue;
    const auto x = s.grid.coords(i);
    out.values[i] += connection_coefficient(axis, x) * s.values[i];
  }
  return out;
}

/// Gaussian bump exp(-width |x - centre|^2); width 0 gives the constant section 1.
struct TestSection {
  std::vector<double> centre;
  double width = 1.0;

  cplx operator()(std::span<const double> x) const {
    double r2 = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) r2 += (x[a] - centre[a]) * (x[a] - centre[a]);
    return {std::exp(-width * r2), 0.0};
  }
  cplx operator()(const PlanePoint& z) const { return (*this)(z.coords()); }
};

inline std::vector<PlanePoint> random_points(std::size_t n, std::size_t count, std::uint64_t seed,
                                             double lo = -1.5, double hi = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<PlanePoint> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    PlanePoint z = PlanePoint::origin(n);
    for (std::size_t j = 0; j < n; ++j) {
      z.q[j] = u(rng);
      z.p[j] = u(rng);
    }
    pts.push_back(std::move(z));
  }
  return pts;
}

/// One Gaussian test section per sample, centred within 0.5 of it.
inline std::vector<TestSection> gaussian_sections(std::span<const PlanePoint> samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  std::uniform_real_distribution<double> wid(0.5, 2.0);
  std::vector<TestSection> out;
  out.reserve(samples.size());
  for (const auto& z : samples) {
    auto c = z.coords();
    for (auto& x : c) x += off(rng);
    out.push_back({c, wid(rng)});
  }
  return out;
}

inline double relative_gap(cplx a, cplx b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// max_z |m_{g1+g2}(z) - m_{g1}(z+g2) m_{g2}(z)|, relative to |m_{g1+g2}(z)|.
inline ValidationReport check_cocycle(const LiftedAction& act, const LatticeElement& g1, const LatticeElement& g2,
                                      std::span<const PlanePoint> samples, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"cocycle", 0.0, tol};
  const auto g12 = g1 + g2;
  for (const auto& z : samples) {
    const cplx lhs = act.multiplier(g12, z);
    const cplx rhs = act.multiplier(g1, translate(z, g2)) * act.multiplier(g2, z);
    r.max_residual = std::max(r.max_residual, relative_gap(lhs, rhs));
  }
  r.samples = samples.size();
  r.note = "relative residual";
  r.finalize();
  return r;
}

/// Generator composition against the closed form exp(-2 pi i l.z + pi l(l-1)).
inline ValidationReport check_closed_form(const LiftedAction& act, const LatticeElement& g,
                                          std::span<const PlanePoint> samples, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"multiplier_closed_form", 0.0, tol};
  for (const auto& z : samples)
    r.max_residual = std::max(r.max_residual, relative_gap(act.multiplier(g, z), LiftedAction::multiplier_closed_form(g, z)));
  r.samples = samples.size();
  r.finalize();
  return r;
}

/// max_z |h(z + g)|m_g(z)|^2 - h(z)| / h(z).
inline ValidationReport check_metric_invariance(const LiftedAction& act, const LatticeElement& g,
                                                std::span<const PlanePoint> samples, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"metric_invariance", 0.0, tol};
  for (const auto& z : samples) {
    const double h0 = metric_weight(z);
    if (!(h0 > 0.0)) {
      r.max_residual = std::numeric_limits<double>::infinity();
      r.note = "metric weight not positive";
      break;
    }
    const double h1 = metric_weight(translate(z, g)) * std::norm(act.multiplier(g, z));
    r.max_residual = std::max(r.max_residual, std::abs(h1 - h0) / h0);
  }
  r.samples = samples.size();
  r.finalize();
  return r;
}

namespace detail {

/// [nabla_x, nabla_y] s at the centre of a local grid with spacing h.
inline cplx curvature_commutator(const TestSection& s, const PlanePoint& z, std::size_t ax, std::size_t ay, double h) {
  const auto c = z.coords();
  const std::size_t axes[] = {ax, ay};
  const auto grid = GridSpec::local(c, axes, h, 5);
  const auto f = GridFunction::sample(grid, [&](std::span<const double> x) { return s(x); });
  const auto xy = covariant_derivative(covariant_derivative(f, ay), ax);
  const auto yx = covariant_derivative(covariant_derivative(f, ax), ay);
  const auto i = f.centre_index();
  return xy.values[i] - yx.values[i];
}

}  // namespace detail

/// Compares [nabla_x, nabla_y] s with 2 pi i omega(d_x, d_y) s by nested central
/// differences at `step`. The note records the measured curvature coefficient
/// and the wedge convention; an order study at steps 0.02 and 0.01 fills `order`.
inline ValidationReport check_curvature(std::span<const PlanePoint> samples, std::span<const TestSection> sections,
                                        std::size_t axis_x, std::size_t axis_y, double step, double tol) {
  require_positive_tol(tol);
  if (samples.size() != sections.size()) throw DimensionError("one test section per sample required");
  ValidationReport r{"curvature", 0.0, tol};
  const double w = symplectic_form(axis_x, axis_y);
  const cplx expected = kTwoPi * kI * w;
  cplx measured_sum{};
  double coarse = 0.0, fine = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& z = samples[i];
    if (2 * z.dim() <= std::max(axis_x, axis_y)) throw DimensionError("curvature axis out of range");
    const cplx sv = sections[i](z);
    const cplx comm = detail::curvature_commutator(sections[i], z, axis_x, axis_y, step);
    r.max_residual = std::max(r.max_residual, std::abs(comm - expected * sv));
    if (std::abs(sv) > 1e-3) measured_sum += comm / sv;
    coarse = std::max(coarse, std::abs(detail::curvature_commutator(sections[i], z, axis_x, axis_y, 0.02) - expected * sv));
    fine = std::max(fine, std::abs(detail::curvature_commutator(sections[i], z, axis_x, axis_y, 0.01) - expected * sv));
  }
  r.samples = samples.size();
  if (coarse > 1e-11) r.order = observed_order(coarse, fine);
  std::ostringstream note;
  const cplx mean = samples.empty() ? cplx{} : measured_sum / static_cast<double>(samples.size());
  note.precision(17);
  note << "wedge convention (a^b)(X,Y)=a(X)b(Y)-a(Y)b(X); omega(d_x,d_y)=" << w
       << "; measured commutator coefficient=(" << mean.real() << "," << mean.imag() << ")"
       << "; measured omega=" << (mean / (kTwoPi * kI)).real();
  r.note = note.str();
  r.finalize();
  return r;
}

namespace detail {

/// (rho_g nabla_x rho_{-g} s - nabla_x s)(z), relative to max(|s|, |nabla_x s|), at step h.
inline cplx equivariance_defect(const LiftedAction& act, const LatticeElement& g, const TestSection& s,
                                const PlanePoint& z, std::size_t axis, double h, double& scale) {
  const PlanePoint w0 = translate(z, -g);
  const std::size_t axes[] = {axis};
  const auto lg = GridSpec::local(w0.coords(), axes, h, 3);
  const auto neg = -g;
  const auto u = GridFunction::sample(lg, [&](std::span<const double> x) {
    const auto w = PlanePoint::from_coords(x);
    return act.act_on_section(neg, s, w);
  });
  const auto du = covariant_derivative(u, axis);
  const cplx lhs = act.multiplier(g, w0) * du.values[du.centre_index()];
  const auto sg = GridFunction::sample(GridSpec::local(z.coords(), axes, h, 3),
                                       [&](std::span<const double> x) { return s(x); });
  const auto ds = covariant_derivative(sg, axis);
  const cplx rhs = ds.values[ds.centre_index()];
  scale = std::max({std::abs(rhs), std::abs(s(z)), 1e-300});
  return lhs - rhs;
}

}  // namespace detail

/// Equivariance of nabla along `axis`. Two routes: the exact gauge law
/// d_x log m_{-g}(z) + A_x(z - g) - A_x(z) = 0, and the operator identity by
/// central differences at step and step/2, Richardson-extrapolated. The
/// reported residual is the larger of the exact and extrapolated residuals.
inline ValidationReport check_connection_equivariance(const LiftedAction& act, const LatticeElement& g,
                                                      std::size_t axis, std::span<const PlanePoint> samples,
                                                      std::span<const TestSection> sections, double step,
                                                      double tol) {
  require_positive_tol(tol);
  if (samples.size() != sections.size()) throw DimensionError("one test section per sample required");
  ValidationReport r{"connection_equivariance", 0.0, tol};
  double gauge = 0.0, raw = 0.0, raw_half = 0.0, extrap = 0.0;
  const cplx dlog = act.log_multiplier_gradient(-g, axis);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& z = samples[i];
    require_dim(g, z);
    const auto x = z.coords();
    const auto xs = translate(z, -g).coords();
    const cplx a0 = connection_coefficient(axis, x);
    gauge = std::max(gauge, std::abs(dlog + connection_coefficient(axis, xs) - a0) / std::max(1.0, std::abs(a0)));
    double s1 = 1.0, s2 = 1.0;
    const cplx d1 = detail::equivariance_defect(act, g, sections[i], z, axis, step, s1);
    const cplx d2 = detail::equivariance_defect(act, g, sections[i], z, axis, step / 2, s2);
    raw = std::max(raw, std::abs(d1) / s1);
    raw_half = std::max(raw_half, std::abs(d2) / s2);
    extrap = std::max(extrap, std::abs((4.0 * d2 - d1) / 3.0) / s2);
  }
  r.samples = samples.size();
  r.max_residual = std::max(gauge, extrap);
  if (raw > 1e-12) r.order = observed_order(raw, raw_half);
  std::ostringstream note;
  note.precision(6);
  note << "gauge-law residual " << gauge << "; finite-difference residual " << raw << " at step " << step
       << ", Richardson-extrapolated " << extrap;
  r.note = note.str();
  r.finalize();
  return r;
}

inline ValidationReport check_metric_positive(std::span<const PlanePoint> samples) {
  ValidationReport r{"metric_positive", 0.0, 0.5};
  for (const auto& z : samples)
    if (!(metric_weight(z) > 0.0)) r.max_residual = 1.0;
  r.samples = samples.size();
  r.finalize();
  return r;
}

struct PrequantValidationConfig {
  std::size_t n = 1;
  std::size_t samples = 200;
  std::uint64_t seed = 20240601;
  double tol = 1e-10;
  double step = 1e-4;
  double curvature_tol = 1e-6;
  std::int64_t random_range = 3;
  std::size_t random_pairs = 50;
  double generator_twist = 1.0;  // anything but 1 breaks the action (negative control)
};

/// Full battery: cocycle (generator pairs and random pairs), closed form,
/// metric invariance and positivity, curvature on each (q_j, p_j) plane and
/// on mixed planes, connection equivariance for every generator and axis.
inline std::vector<ValidationReport> validate_prequantisation(const PrequantValidationConfig& cfg) {
  if (cfg.n == 0) throw ConfigError("n must be positive");
  require_positive_tol(cfg.tol);
  require_positive_tol(cfg.curvature_tol);
  if (!(cfg.step > 0.0)) throw ConfigError("finite-difference step must be positive");
  const LiftedAction act(cfg.generator_twist);
  const auto pts = random_points(cfg.n, cfg.samples, cfg.seed);
  const auto secs = gaussian_sections(pts, cfg.seed + 1);
  std::vector<ValidationReport> out;

  std::vector<LatticeElement> gens;
  for (std::size_t j = 0; j < cfg.n; ++j) {
    gens.push_back(LatticeElement::unit(cfg.n, j, 1, 0));
    gens.push_back(LatticeElement::unit(cfg.n, j, 0, 1));
  }
  std::mt19937_64 rng(cfg.seed + 2);
  std::uniform_int_distribution<std::int64_t> coef(-cfg.random_range, cfg.random_range);
  auto random_element = [&] {
    auto g = LatticeElement::zero(cfg.n);
    for (std::size_t j = 0; j < cfg.n; ++j) {
      g.k[j] = coef(rng);
      g.l[j] = coef(rng);
    }
    return g;
  };

  auto merge = [&](ValidationReport acc, const ValidationReport& r) {
    acc.max_residual = std::max(acc.max_residual, r.max_residual);
    acc.samples += r.samples;
    if (r.order) acc.order = acc.order ? std::min(*acc.order, *r.order) : r.order;
    if (acc.note.empty()) acc.note = r.note;
    return acc;
  };

  ValidationReport cocycle{"cocycle", 0.0, cfg.tol};
  for (const auto& a : gens)
    for (const auto& b : gens) cocycle = merge(cocycle, check_cocycle(act, a, b, pts, cfg.tol));
  for (std::size_t t = 0; t < cfg.random_pairs; ++t) {
    const auto a = random_element();
    const auto b = random_element();
    cocycle = merge(cocycle, check_cocycle(act, a, b, pts, cfg.tol));
  }
  cocycle.finalize();
  out.push_back(cocycle);

  ValidationReport closed{"multiplier_closed_form", 0.0, cfg.tol};
  for (std::size_t t = 0; t < cfg.random_pairs; ++t) closed = merge(closed, check_closed_form(act, random_element(), pts, cfg.tol));
  closed.finalize();
  out.push_back(closed);

  ValidationReport metric{"metric_invariance", 0.0, cfg.tol};
  for (const auto& g : gens) {
    metric = merge(metric, check_metric_invariance(act, g, pts, cfg.tol));
    metric = merge(metric, check_metric_invariance(act, -g, pts, cfg.tol));
  }
  for (std::size_t t = 0; t < cfg.random_pairs; ++t) metric = merge(metric, check_metric_invariance(act, random_element(), pts, cfg.tol));
  metric.finalize();
  out.push_back(metric);

  out.push_back(check_metric_positive(pts));

  ValidationReport curv{"curvature", 0.0, cfg.curvature_tol};
  for (std::size_t ax = 0; ax < 2 * cfg.n; ++ax)
    for (std::size_t ay = ax + 1; ay < 2 * cfg.n; ++ay) curv = merge(curv, check_curvature(pts, secs, ax, ay, cfg.step, cfg.curvature_tol));
  curv.note = check_curvature(std::span(pts).first(std::min<std::size_t>(pts.size(), 8)),
                              std::span(secs).first(std::min<std::size_t>(secs.size(), 8)), 0, 1, cfg.step, cfg.curvature_tol)
                  .note;
  curv.finalize();
  out.push_back(curv);

  ValidationReport conn{"connection_equivariance", 0.0, cfg.tol};
  for (const auto& g : gens)
    for (std::size_t ax = 0; ax < 2 * cfg.n; ++ax) {
      auto r = check_connection_equivariance(act, g, ax, pts, secs, cfg.step, cfg.tol);
      conn = merge(conn, r);
    }
  conn.finalize();
  out.push_back(conn);
  return out;
}

}  // namespace qrlab::prequant

#endif  // QRLAB_PREQUANT_HPP
