#ifndef QRLAB_AVG_REDUCTION_HPP
#define QRLAB_AVG_REDUCTION_HPP

// Averaging over the lattice, the N-valued inner product, the operator on
// invariant sections, normalising functions and their functional calculus.
// Plane sections here have n = 1.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrlab/characters.hpp"
#include "qrlab/core.hpp"
#include "qrlab/dirac_plane.hpp"
#include "qrlab/prequant.hpp"
#include "qrlab/twisted_kernels.hpp"

namespace qrlab::avg {

using characters::CompactSection;
using prequant::LatticeElement;
using prequant::LiftedAction;
using prequant::PlanePoint;

inline constexpr std::int64_t kDefaultLatticeRange = 64;

/// Sections with both form degrees: zero + one dzbar. An empty function is a
/// zero component.
struct CompactPlaneForm {
  CompactSection zero;
  CompactSection one;
};

/// Samples of an invariant section on the nodes (a / m, b / m), a, b in [0, m),
/// flat index a * m + b. Values off the fundamental domain follow from
/// u(w + gamma) = m_gamma(w) u(w).
struct TorusSection {
  std::size_t m = 0;
  std::vector<cplx> zero;
  std::vector<cplx> one;

  TorusSection() = default;
  explicit TorusSection(std::size_t m_) : m(m_), zero(m_ * m_), one(m_ * m_) {
    if (m_ < 8) throw ConfigError("torus grid needs at least 8 nodes per side");
  }

  double step() const { return 1.0 / static_cast<double>(m); }
  std::size_t flat(std::size_t a, std::size_t b) const { return a * m + b; }
  PlanePoint node(std::size_t a, std::size_t b) const {
    return PlanePoint::one(static_cast<double>(a) * step(), static_cast<double>(b) * step());
  }
};

/// chi(s)(z) = sum_gamma (gamma . s)(z), z in the plane.
inline cplx average_at(const CompactSection& s, const PlanePoint& z, const LiftedAction& act,
                       std::int64_t max_range = kDefaultLatticeRange) {
  if (!s.f) return {};
  cplx acc{};
  for (const auto& g : characters::translates_meeting(s, z, max_range)) acc += act.act_on_section(g, s, z);
  return acc;
}

inline TorusSection average_over_lattice(const CompactPlaneForm& s, std::size_t m, const LiftedAction& act = LiftedAction(),
                                         std::int64_t max_range = kDefaultLatticeRange) {
  TorusSection out(m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const auto z = out.node(a, b);
      out.zero[out.flat(a, b)] = average_at(s.zero, z, act, max_range);
      out.one[out.flat(a, b)] = average_at(s.one, z, act, max_range);
    }
  return out;
}

namespace detail {

/// Composite 24-point Gauss-Legendre on [lo, hi], one panel per unit length or less.
inline void composite_gauss(double lo, double hi, std::vector<double>& x, std::vector<double>& w,
                            std::size_t panels_per_unit = 1) {
  std::vector<double> ux, uw;
  twisted::detail::gauss_legendre_unit(ux, uw);
  const auto panels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) * panels_per_unit)));
  const double len = (hi - lo) / static_cast<double>(panels);
  x.clear();
  w.clear();
  for (std::size_t k = 0; k < panels; ++k)
    for (std::size_t i = 0; i < ux.size(); ++i) {
      x.push_back(lo + len * (static_cast<double>(k) + ux[i]));
      w.push_back(len * uw[i]);
    }
}

}  // namespace detail

/// (s, t)_N = sum_gamma <s, gamma . t>_{L^2(h)} for 0-forms, by Gauss-Legendre
/// over the support box of s. The gamma-sum is evaluated inside the integral.
inline cplx inner_product_N(const CompactSection& s, const CompactSection& t, const LiftedAction& act = LiftedAction(),
                            std::int64_t max_range = kDefaultLatticeRange) {
  if (s.dim() != 1 || t.dim() != 1) throw DimensionError("inner_product_N is implemented for n = 1");
  std::vector<double> xq, wq, xp, wp;
  detail::composite_gauss(s.lo[0], s.hi[0], xq, wq);
  detail::composite_gauss(s.lo[1], s.hi[1], xp, wp);
  cplx acc{};
  for (std::size_t i = 0; i < xq.size(); ++i)
    for (std::size_t j = 0; j < xp.size(); ++j) {
      const auto z = PlanePoint::one(xq[i], xp[j]);
      const cplx sv = s(z);
      if (sv == cplx{}) continue;
      acc += wq[i] * wp[j] * sv * std::conj(average_at(t, z, act, max_range)) * prequant::metric_weight(z);
    }
  return acc;
}

/// <u, v> on the fundamental domain, periodic trapezoid rule, with
/// |dzbar|^2 = 2 on the degree-one part.
inline cplx torus_inner(const TorusSection& u, const TorusSection& v) {
  if (u.m != v.m) throw DimensionError("torus sections use different grids");
  cplx acc{};
  for (std::size_t a = 0; a < u.m; ++a)
    for (std::size_t b = 0; b < u.m; ++b) {
      const std::size_t f = u.flat(a, b);
      const double h = prequant::metric_weight(u.node(a, b));
      acc += h * (u.zero[f] * std::conj(v.zero[f]) + 2.0 * u.one[f] * std::conj(v.one[f]));
    }
  return acc * u.step() * u.step();
}

/// u at node (a, b) for any integers, through the invariance relation.
inline cplx torus_value(const TorusSection& u, const std::vector<cplx>& comp, std::int64_t a, std::int64_t b,
                        const LiftedAction& act) {
  const auto m = static_cast<std::int64_t>(u.m);
  const std::int64_t k = (a >= 0 ? a : a - m + 1) / m, l = (b >= 0 ? b : b - m + 1) / m;
  const std::int64_t ar = a - k * m, br = b - l * m;
  const cplx base = comp[u.flat(static_cast<std::size_t>(ar), static_cast<std::size_t>(br))];
  if (k == 0 && l == 0) return base;
  return act.multiplier(LatticeElement{{k}, {l}}, u.node(static_cast<std::size_t>(ar), static_cast<std::size_t>(br))) * base;
}

/// D on invariant sections: zero + one dzbar -> D- (one) + D+ (zero) dzbar,
/// central differences of order 2, 4 or 6.
inline TorusSection quotient_operator_apply(const TorusSection& u, int order = 2, const LiftedAction& act = LiftedAction()) {
  const auto w = qrlab::detail::central_first_weights(order);
  if (u.m < 2 * w.size() + 1) throw NumericalError("torus grid too coarse for the stencil");
  TorusSection out(u.m);
  const double inv_h = 1.0 / u.step();
  auto diff = [&](const std::vector<cplx>& c, std::int64_t a, std::int64_t b, bool along_q) {
    cplx acc{};
    for (std::size_t k = 1; k <= w.size(); ++k) {
      const auto s = static_cast<std::int64_t>(k);
      acc += w[k - 1] * (along_q ? torus_value(u, c, a + s, b, act) - torus_value(u, c, a - s, b, act)
                                 : torus_value(u, c, a, b + s, act) - torus_value(u, c, a, b - s, act));
    }
    return acc * inv_h;
  };
  for (std::size_t a = 0; a < u.m; ++a)
    for (std::size_t b = 0; b < u.m; ++b) {
      const auto ia = static_cast<std::int64_t>(a), ib = static_cast<std::int64_t>(b);
      const std::size_t f = u.flat(a, b);
      const double p = static_cast<double>(b) * u.step();
      out.one[f] = dirac::detail::raise_term(diff(u.zero, ia, ib, true), diff(u.zero, ia, ib, false), u.zero[f]);
      out.zero[f] = dirac::detail::lower_term(diff(u.one, ia, ib, true), diff(u.one, ia, ib, false), u.one[f], p);
    }
  return out;
}

/// Plane D applied pointwise by the same central stencils, spacing h.
inline std::pair<cplx, cplx> plane_dirac_at(const CompactPlaneForm& s, const PlanePoint& z, double h, int order) {
  const auto w = qrlab::detail::central_first_weights(order);
  auto d = [&](const CompactSection& c, bool along_q) {
    cplx acc{};
    if (!c.f) return acc;
    for (std::size_t k = 1; k <= w.size(); ++k) {
      const double o = h * static_cast<double>(k);
      acc += w[k - 1] * (along_q ? c(PlanePoint::one(z.q[0] + o, z.p[0])) - c(PlanePoint::one(z.q[0] - o, z.p[0]))
                                 : c(PlanePoint::one(z.q[0], z.p[0] + o)) - c(PlanePoint::one(z.q[0], z.p[0] - o)));
    }
    return acc / h;
  };
  auto val = [&](const CompactSection& c) { return c.f ? c(z) : cplx{}; };
  const cplx zero = dirac::detail::lower_term(d(s.one, true), d(s.one, false), val(s.one), z.p[0]);
  const cplx one = dirac::detail::raise_term(d(s.zero, true), d(s.zero, false), val(s.zero));
  return {zero, one};
}

inline CompactSection widen(const CompactSection& c, double by) {
  CompactSection out = c;
  for (auto& x : out.lo) x -= by;
  for (auto& x : out.hi) x += by;
  return out;
}

/// Bounding box of the nonzero components.
inline CompactSection support_union(const CompactPlaneForm& s) {
  CompactSection box;
  for (const auto* c : {&s.zero, &s.one}) {
    if (!c->f) continue;
    if (box.lo.empty()) {
      box.lo = c->lo;
      box.hi = c->hi;
      continue;
    }
    for (std::size_t a = 0; a < box.lo.size(); ++a) {
      box.lo[a] = std::min(box.lo[a], c->lo[a]);
      box.hi[a] = std::max(box.hi[a], c->hi[a]);
    }
  }
  if (box.lo.empty()) box.lo = box.hi = {0.0, 0.0};
  return box;
}

/// max |chi(D s) - D chi(s)| over all torus nodes, relative to max |chi(D s)|.
/// Both sides use the same stencil and spacing 1/m.
inline ValidationReport check_intertwining(const CompactPlaneForm& s, std::size_t m, double tol, int order = 2,
                                           const LiftedAction& act = LiftedAction()) {
  require_positive_tol(tol);
  ValidationReport r{"intertwining", 0.0, tol};
  const double h = 1.0 / static_cast<double>(m);
  const double reach = h * static_cast<double>(order / 2);
  const auto rhs = quotient_operator_apply(average_over_lattice(s, m, act), order, act);
  double worst = 0.0, scale = 0.0;
  const TorusSection grid(m);
  const auto box = widen(support_union(s), reach);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const auto z = grid.node(a, b);
      cplx lz{}, lo{};
      for (const auto& g : characters::translates_meeting(box, z, kDefaultLatticeRange)) {
        const auto w = prequant::translate(z, -g);
        const auto [d0, d1] = plane_dirac_at(s, w, h, order);
        const cplx mult = act.multiplier(g, w);
        lz += mult * d0;
        lo += mult * d1;
      }
      const std::size_t f = grid.flat(a, b);
      worst = std::max({worst, std::abs(lz - rhs.zero[f]), std::abs(lo - rhs.one[f])});
      scale = std::max({scale, std::abs(lz), std::abs(lo)});
    }
  r.max_residual = scale > 0.0 ? worst / scale : worst;
  r.samples = m * m;
  r.note = "relative to max |chi(D s)|";
  r.finalize();
  return r;
}

/// Gaussian bump e^{-c |z - z0|^2 + i k.z} truncated where it falls below ~e^{-37}.
inline CompactSection gaussian_bump(double q0, double p0, double c, double kq = 0.0, double kp = 0.0) {
  if (!(c > 0.0)) throw ConfigError("bump width parameter must be positive");
  const double r = std::sqrt(37.0 / c);
  CompactSection s;
  s.f = [=](const PlanePoint& z) {
    const double dq = z.q[0] - q0, dp = z.p[0] - p0;
    return std::polar(std::exp(-c * (dq * dq + dp * dp)), kq * z.q[0] + kp * z.p[0]);
  };
  s.lo = {q0 - r, p0 - r};
  s.hi = {q0 + r, p0 + r};
  return s;
}

inline CompactSection random_bump(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> centre(-1.5, 1.5), width(3.0, 8.0), freq(-3.0, 3.0);
  const double q0 = centre(rng), p0 = centre(rng), c = width(rng), kq = freq(rng), kp = freq(rng);
  return gaussian_bump(q0, p0, c, kq, kp);
}

/// Isometry |(s, s)_N - ||chi(s)||^2| / ||chi(s)||^2 and positivity min Re (s, s)_N
/// over random bumps.
struct IsometryStudy {
  ValidationReport isometry;
  ValidationReport positivity;
};

inline std::string short_format(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

inline IsometryStudy check_isometry(std::size_t trials, std::uint64_t seed, std::size_t m = 64, double tol = 1e-8) {
  require_positive_tol(tol);
  IsometryStudy out{{"chi_isometry", 0.0, tol}, {"positivity", 0.0, 1e-12}};
  std::mt19937_64 rng(seed);
  double min_re = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const auto s = random_bump(rng);
    const cplx n = inner_product_N(s, s);
    const auto chi = average_over_lattice({s, {}}, m);
    const double torus = torus_inner(chi, chi).real();
    out.isometry.max_residual = std::max(out.isometry.max_residual, std::abs(n - torus) / torus);
    min_re = std::min(min_re, n.real());
  }
  out.isometry.samples = out.positivity.samples = trials;
  out.isometry.finalize();
  out.positivity.max_residual = std::max(0.0, -min_re);
  out.positivity.note = "min Re (s, s)_N = " + short_format(min_re);
  out.positivity.passed = min_re >= -1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Normalising functions


/// b(x) = x / sqrt(1 + x^2), or the bump construction
/// b(l) = int (e^{i l x} - 1) / (i x) f(x) dx = 2 int_0^R sin(l x) / x f(x) dx,
/// f = g * g with g an even C-infinity bump on [-R/2, R/2], int g^2 = 1 / pi.
class NormalizingFunction {
 public:
  static NormalizingFunction standard() { return NormalizingFunction(); }

  static NormalizingFunction bump(double R, std::size_t panels = 128) {
    if (!(R > 0.0)) throw ConfigError("bump support radius must be positive");
    if (panels == 0) throw ConfigError("bump quadrature needs at least one panel");
    NormalizingFunction b;
    b.kind_ = "bump";
    b.R_ = R;
    const double half = R / 2.0;
    auto g0 = [half](double x) {
      const double s = x / half;
      return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    };
    std::vector<double> yq, wy;
    detail::composite_gauss(-half, half, yq, wy, static_cast<std::size_t>(std::ceil(32.0 / R)));
    double g2 = 0.0;
    for (std::size_t i = 0; i < yq.size(); ++i) g2 += wy[i] * g0(yq[i]) * g0(yq[i]);
    const double c = 1.0 / std::sqrt(kPi * g2);
    auto g = [&](double x) { return c * g0(x); };

    std::vector<double> xs, wx;
    detail::composite_gauss(0.0, R, xs, wx, static_cast<std::size_t>(std::ceil(static_cast<double>(panels) / R)));
    b.x_ = xs;
    b.w_ = wx;
    b.f_.resize(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      // f(x) = int g(y) g(x - y) dy over the overlap [x - R/2, R/2].
      std::vector<double> ys, wys;
      detail::composite_gauss(xs[k] - half, half, ys, wys, static_cast<std::size_t>(std::ceil(32.0 / R)));
      double acc = 0.0;
      for (std::size_t i = 0; i < ys.size(); ++i) acc += wys[i] * g(ys[i]) * g(xs[k] - ys[i]);
      b.f_[k] = acc;
    }
    return b;
  }

  const std::string& kind() const { return kind_; }
  double radius() const { return R_; }

  double operator()(double l) const {
    if (kind_ == "standard") return l / std::sqrt(1.0 + l * l);
    double acc = 0.0;
    for (std::size_t k = 0; k < x_.size(); ++k) acc += w_[k] * std::sin(l * x_[k]) / x_[k] * f_[k];
    return 2.0 * acc;
  }

  /// f(x) at the stored quadrature nodes x in (0, R).
  const std::vector<double>& profile_nodes() const { return x_; }
  const std::vector<double>& profile_values() const { return f_; }

 private:
  NormalizingFunction() = default;
  std::string kind_ = "standard";
  double R_ = 0.0;
  std::vector<double> x_, w_, f_;
};

/// Oddness, positivity on (0, inf), and approach to +-1, on `count` points
/// spread over [-span, span]. Residual: worst of max |b(t) + b(-t)| and
/// |1 - b(span)|; positivity and tail monotonicity are pass/fail.
/// span = 0 picks 1e4 for the standard function (algebraic tail) and 200 for
/// the bump (its quadrature resolves sin(t x) only for moderate t).
inline ValidationReport check_normalizing_axioms(const NormalizingFunction& b, std::size_t count = 1000,
                                                 double span = 0.0, double tol = 1e-6) {
  require_positive_tol(tol);
  if (span == 0.0) span = b.kind() == "standard" ? 1e4 : 200.0;
  if (!(span > 0.0)) throw ConfigError("span must be positive");
  ValidationReport r{"normalizing_" + b.kind(), 0.0, tol};
  bool positive = b(0.0) == 0.0, monotone_tail = true;
  double odd = 0.0, prev = -1.0;
  for (std::size_t i = 1; i <= count; ++i) {
    const double t = span * static_cast<double>(i) / static_cast<double>(count);
    const double bt = b(t), bm = b(-t);
    odd = std::max(odd, std::abs(bt + bm));
    if (!(bt > 0.0)) positive = false;
    if (t > span / 2.0 && bt < prev - 1e-12) monotone_tail = false;
    prev = bt;
  }
  const double limit = std::max(std::abs(1.0 - b(span)), std::abs(1.0 + b(-span)));
  r.max_residual = std::max(odd, limit);
  r.samples = count;
  r.note = "oddness " + short_format(odd) + ", limit gap " + short_format(limit) + " at t = " + short_format(span);
  r.finalize();
  r.passed = r.passed && positive && monotone_tail;
  if (!positive) r.note += ", not positive on (0, inf)";
  if (!monotone_tail) r.note += ", tail not monotone";
  return r;
}

// ---------------------------------------------------------------------------
// Functional calculus

/// F = U b(Lambda) U* for self-adjoint D.
inline Eigen::MatrixXcd functional_calculus(const Eigen::MatrixXcd& D, const std::function<double(double)>& b,
                                            double tol = 1e-10) {
  if (D.rows() != D.cols()) throw DimensionError("functional calculus needs a square matrix");
  const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
  if ((D - D.adjoint()).cwiseAbs().maxCoeff() > tol * scale) throw ConfigError("matrix is not self-adjoint");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D);
  Eigen::VectorXd bl(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < bl.size(); ++i) bl(i) = b(es.eigenvalues()(i));
  return es.eigenvectors() * bl.asDiagonal() * es.eigenvectors().adjoint();
}

/// [[0, A*], [A, 0]].
inline Eigen::MatrixXcd graded(const Eigen::MatrixXcd& A) {
  const auto r = A.rows(), c = A.cols();
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(r + c, r + c);
  D.topRightCorner(c, r) = A.adjoint();
  D.bottomLeftCorner(r, c) = A;
  return D;
}

inline Eigen::MatrixXcd random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = {nd(rng), nd(rng)};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

struct CalculusContract {
  double norm = 0.0;           // ||F||
  double self_adjoint = 0.0;   // max |F - F*|
  double diagonal_block = 0.0; // max |entry| of the diagonal blocks
  double conjugation = 0.0;    // max |b(T D T*) - T b(D) T*|
};

/// Contract of F = b(D) on a random graded D of size 2 half.
inline CalculusContract check_functional_calculus(const std::function<double(double)>& b, Eigen::Index half,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd A(half, half);
  for (Eigen::Index i = 0; i < half; ++i)
    for (Eigen::Index j = 0; j < half; ++j) A(i, j) = {nd(rng), nd(rng)};
  const Eigen::MatrixXcd D = graded(A);
  const Eigen::MatrixXcd F = functional_calculus(D, b);
  CalculusContract c;
  c.norm = Eigen::JacobiSVD<Eigen::MatrixXcd>(F).singularValues()(0);
  c.self_adjoint = (F - F.adjoint()).cwiseAbs().maxCoeff();
  c.diagonal_block = std::max(F.topLeftCorner(half, half).cwiseAbs().maxCoeff(),
                              F.bottomRightCorner(half, half).cwiseAbs().maxCoeff());
  const Eigen::MatrixXcd T = random_unitary(2 * half, rng);
  Eigen::MatrixXcd TDT = T * D * T.adjoint();
  TDT = 0.5 * (TDT + TDT.adjoint());
  c.conjugation = (functional_calculus(TDT, b) - T * F * T.adjoint()).cwiseAbs().maxCoeff();
  return c;
}

/// -i d/dx by central differences on n sites of spacing `spacing`, zero outside.
inline Eigen::MatrixXcd discrete_dirac_1d(Eigen::Index n, double spacing = 1.0) {
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(n, n);
  const cplx c = -kI / (2.0 * spacing);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    D(i, i + 1) = c;
    D(i + 1, i) = -c;
  }
  return D;
}

/// Largest |F_ij| with |i - j| > band, where band = ceil(factor * R / spacing) + slack.
/// Diagnostic: the bound is only normative for compactly supported f.
inline ValidationReport check_finite_propagation(const Eigen::MatrixXcd& D, const NormalizingFunction& b, double spacing,
                                                 double tol, double factor = 1.0, Eigen::Index slack = 12) {
  require_positive_tol(tol);
  const double R = b.kind() == "bump" ? b.radius() : 1.0;
  const auto band = static_cast<Eigen::Index>(std::ceil(factor * R / spacing)) + slack;
  const Eigen::MatrixXcd F = functional_calculus(D, [&](double x) { return b(x); });
  double worst = 0.0;
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    for (Eigen::Index j = 0; j < F.cols(); ++j)
      if (std::abs(i - j) > band) worst = std::max(worst, std::abs(F(i, j)));
  ValidationReport r{"finite_propagation_" + b.kind(), worst, tol};
  r.samples = static_cast<std::size_t>(F.size());
  r.note = "band " + std::to_string(band);
  r.finalize();
  return r;
}

}  // namespace qrlab::avg

#endif  // QRLAB_AVG_REDUCTION_HPP
