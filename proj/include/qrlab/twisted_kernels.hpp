#ifndef QRLAB_TWISTED_KERNELS_HPP
#define QRLAB_TWISTED_KERNELS_HPP

// Twisted Dirac operators D_alpha, alpha = (lambda, mu), for n = 1.
//
// Two independent routes to ker D+_alpha and ker D-_alpha:
//  * theta series s(z) = e^{i lambda z} e^{-pi p} sum_k a_k e^{2 pi i k z};
//  * the Zak parameterisation of alpha-equivariant sections,
//      s(q, p) = e^{i lambda q} sum_k c_k(p) e^{2 pi i k q},
//      c_k(p)  = e^{-i k mu} e^{-pi k^2 - 2 pi k p + pi k} v(p + k),
//    under which the fundamental-domain norm becomes int |v|^2 rho dt with
//    rho(t) = e^{2 pi (t - t^2)}, and
//      D+ v = (i/2) (v' + (lambda + pi) v),
//      D- w = i (w' + (pi - lambda - 4 pi t) w).
//    With half densities u = sqrt(rho) v (0-forms) and u = sqrt(2 rho) w
//    (1-forms, |dzbar|^2 = 2) both become (i/sqrt 2)(d/dt +- (2 pi t + lambda)),
//    so the Gram operators are harmonic oscillators:
//      G+ = (1/2)(-d^2 + (2 pi t + lambda)^2 - 2 pi),  G- = G+ + 2 pi.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qrlab/characters.hpp"
#include "qrlab/core.hpp"
#include "qrlab/dirac_plane.hpp"
#include "qrlab/grid.hpp"
#include "qrlab/prequant.hpp"

namespace qrlab::twisted {

using prequant::PlanePoint;

// ---------------------------------------------------------------------------
// Theta series

enum class ThetaConvention {
  shifted, // a_k = e^{-pi k^2} e^{-k (lambda + i mu + 2 pi)}
  forced,  // a_k = e^{-pi k^2} e^{-k (lambda + i mu)}, from a_{k+1} = e^{-lambda - i mu - pi - 2 pi k} a_k
};

inline const char* to_string(ThetaConvention c) { return c == ThetaConvention::shifted ? "shifted" : "forced"; }

struct TwistedSectionFourier {
  double lambda = 0.0;
  double mu = 0.0;
  int K = 12;
  ThetaConvention convention = ThetaConvention::shifted;
  std::vector<cplx> coeffs;  // index k + K

  cplx a(int k) const { return std::abs(k) > K ? cplx{} : coeffs[static_cast<std::size_t>(k + K)]; }

  /// Real shift s with |a_k| = e^{-pi k^2 - k s}.
  double decay_shift() const { return convention == ThetaConvention::shifted ? lambda + kTwoPi : lambda; }
};

inline TwistedSectionFourier theta_coefficients(double lambda, double mu, int K,
                                                ThetaConvention conv = ThetaConvention::shifted) {
  if (K < 1) throw ConfigError("theta truncation K must be at least 1");
  TwistedSectionFourier s{lambda, mu, K, conv, {}};
  const cplx shift{s.decay_shift(), mu};
  s.coeffs.resize(static_cast<std::size_t>(2 * K + 1));
  for (int k = -K; k <= K; ++k) {
    const double kk = static_cast<double>(k);
    s.coeffs[static_cast<std::size_t>(k + K)] = std::exp(-kPi * kk * kk - kk * shift);
  }
  return s;
}

/// Coefficients of the two-term recursion forced by s(z + i) = e^{i mu} e^{-2 pi i z} s(z),
/// built by iterating the recursion outward from a_0 = 1 (independent of the closed form).
inline TwistedSectionFourier theta_by_recursion(double lambda, double mu, int K) {
  if (K < 1) throw ConfigError("theta truncation K must be at least 1");
  TwistedSectionFourier s{lambda, mu, K, ThetaConvention::forced, std::vector<cplx>(static_cast<std::size_t>(2 * K + 1))};
  auto ratio = [&](int k) { return std::exp(cplx{-lambda - kPi - kTwoPi * k, -mu}); };  // a_{k+1} / a_k
  s.coeffs[static_cast<std::size_t>(K)] = 1.0;
  for (int k = 0; k < K; ++k) s.coeffs[static_cast<std::size_t>(k + 1 + K)] = s.coeffs[static_cast<std::size_t>(k + K)] * ratio(k);
  for (int k = 0; k > -K; --k) s.coeffs[static_cast<std::size_t>(k - 1 + K)] = s.coeffs[static_cast<std::size_t>(k + K)] / ratio(k - 1);
  return s;
}

struct ThetaValue {
  cplx value;
  double envelope;  // |prefactor| sum_k |a_k e^{2 pi i k z}|, a zero-free scale
  double tail;      // bound on the omitted terms, same scale
};

/// e^{i lambda z} e^{-pi p} sum_{|k| <= K} a_k e^{2 pi i k z}. Throws when the
/// bound on the omitted terms exceeds tail_tol times the envelope.
inline ThetaValue evaluate_theta(const TwistedSectionFourier& s, const PlanePoint& z, double tail_tol = 1e-14) {
  if (z.dim() != 1) throw DimensionError("theta sections live on C^1");
  const cplx zz = z.z(0);
  const double p = z.p[0];
  const cplx pre = std::exp(kI * s.lambda * zz - kPi * p);
  cplx sum{};
  double env = 0.0;
  for (int k = -s.K; k <= s.K; ++k) {
    const cplx t = s.a(k) * std::exp(kTwoPi * kI * static_cast<double>(k) * zz);
    sum += t;
    env += std::abs(t);
  }
  // log |a_k e^{2 pi i k z}| = -pi k^2 - k (shift + 2 pi p): successive ratios beyond
  // |k| = K + 1 shrink geometrically once the vertex lies inside [-K, K].
  const double b = s.decay_shift() + kTwoPi * p;
  auto log_mag = [&](double k) { return -kPi * k * k - k * b; };
  double tail = 0.0;
  for (int side : {1, -1}) {
    const double k1 = side * static_cast<double>(s.K + 1);
    const double log_ratio = log_mag(k1 + side) - log_mag(k1);
    if (log_ratio >= 0.0) {
      tail = std::numeric_limits<double>::infinity();
      break;
    }
    tail += std::exp(log_mag(k1)) / (1.0 - std::exp(log_ratio));
  }
  const double scale = std::abs(pre);
  ThetaValue out{pre * sum, scale * env, scale * tail};
  if (!(out.tail <= tail_tol * out.envelope)) throw NumericalError("theta truncation tail exceeds tolerance");
  return out;
}

inline cplx evaluate_twisted_section(const TwistedSectionFourier& s, const PlanePoint& z, double tail_tol = 1e-14) {
  return evaluate_theta(s, z, tail_tol).value;
}

/// Residuals of s(z + 1) = e^{i lambda} s(z) and s(z + i) = e^{i mu} e^{-2 pi i z} s(z),
/// each relative to the larger side. The note reports both separately.
template <class Eval>
ValidationReport boundary_condition_residual(const Eval& s, double lambda, double mu,
                                             std::span<const PlanePoint> samples, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"boundary_conditions", 0.0, tol};
  double rq = 0.0, ri = 0.0;
  for (const auto& z : samples) {
    const cplx s0 = s(z);
    const cplx sq = s(PlanePoint::one(z.q[0] + 1.0, z.p[0]));
    const cplx si = s(PlanePoint::one(z.q[0], z.p[0] + 1.0));
    const cplx eq = std::polar(1.0, lambda) * s0;
    const cplx ei = std::polar(1.0, mu) * std::exp(-kTwoPi * kI * z.z(0)) * s0;
    rq = std::max(rq, prequant::relative_gap(sq, eq));
    ri = std::max(ri, prequant::relative_gap(si, ei));
  }
  r.max_residual = std::max(rq, ri);
  r.samples = samples.size();
  std::ostringstream note;
  note.precision(6);
  note << "q-relation residual " << rq << "; i-relation residual " << ri;
  r.note = note.str();
  r.finalize();
  return r;
}

/// Which coefficient convention satisfies the boundary conditions, by substitution.
struct ConventionResolution {
  ValidationReport shifted;
  ValidationReport forced;
  cplx shifted_i_factor;  // measured s(z+i) / (e^{i mu} e^{-2 pi i z} s(z)) for the shifted family
  ThetaConvention used = ThetaConvention::forced;
  std::string note;
};

inline ConventionResolution resolve_theta_convention(double lambda, double mu, std::span<const PlanePoint> samples,
                                                     int K = 12, double tol = 1e-12) {
  ConventionResolution out;
  const auto shifted = theta_coefficients(lambda, mu, K, ThetaConvention::shifted);
  const auto forced = theta_coefficients(lambda, mu, K, ThetaConvention::forced);
  auto ev = [](const TwistedSectionFourier& s) { return [&s](const PlanePoint& z) { return evaluate_twisted_section(s, z); }; };
  out.shifted = boundary_condition_residual(ev(shifted), lambda, mu, samples, tol);
  out.forced = boundary_condition_residual(ev(forced), lambda, mu, samples, tol);
  if (!samples.empty()) {
    const auto& z = samples.front();
    out.shifted_i_factor = evaluate_twisted_section(shifted, PlanePoint::one(z.q[0], z.p[0] + 1.0)) /
                         (std::polar(1.0, mu) * std::exp(-kTwoPi * kI * z.z(0)) * evaluate_twisted_section(shifted, z));
  }
  out.used = out.forced.passed || !out.shifted.passed ? ThetaConvention::forced : ThetaConvention::shifted;
  std::ostringstream note;
  note.precision(10);
  note << "shifted coefficients e^{-pi k^2} e^{-k(lambda+i mu+2 pi)}: " << (out.shifted.passed ? "pass" : "fail")
       << " (" << out.shifted.note << "; i-relation factor " << out.shifted_i_factor.real()
       << ", e^{2 pi} = " << std::exp(kTwoPi) << ")"
       << "; forced coefficients e^{-pi k^2} e^{-k(lambda+i mu)}: " << (out.forced.passed ? "pass" : "fail") << " ("
       << out.forced.note << ")"
       << "; shifted a_k(lambda) equal forced a_k(lambda + 2 pi), and the shifted section is e^{-2 pi i z} times "
          "the forced section at lambda + 2 pi; kernel computations use the "
       << to_string(out.used) << " coefficients";
  out.note = note.str();
  return out;
}

/// Relative residual |D+ s| / envelope at z, with D+ applied by central
/// differences of the given order and step on a local plane grid.
inline double theta_dirac_plus_residual(const TwistedSectionFourier& s, const PlanePoint& z, double step = 1e-3,
                                        int order = 4) {
  const auto c = z.coords();
  const std::size_t axes[] = {0, 1};
  const std::size_t pts = static_cast<std::size_t>(order) + 1;
  const auto grid = GridSpec::local(c, axes, step, pts);
  const auto f = GridFunction::sample(grid, [&](std::span<const double> x) {
    return evaluate_twisted_section(s, PlanePoint::from_coords(x));
  });
  const auto d = dirac::dirac_plus_apply(f, order);
  return std::abs(d.values[f.centre_index()]) / evaluate_theta(s, z).envelope;
}

// ---------------------------------------------------------------------------
// Zak reduction

inline double zak_weight(double t) { return std::exp(kTwoPi * (t - t * t)); }

/// Uniform grid t_j = -T + j h, h = 2T / (N - 1).
struct ZakGrid {
  double T = 5.0;
  std::size_t N = 256;

  double h() const { return 2.0 * T / static_cast<double>(N - 1); }
  double t(std::size_t j) const { return -T + static_cast<double>(j) * h(); }

  void validate(double weight_floor = 1e-12) const {
    if (!(T >= 3.0) || !(T <= 10.0)) throw ConfigError("Zak half-width T must lie in [3, 10]");
    if (N < 64) throw ConfigError("Zak grid count N must be at least 64");
    if (zak_weight(T) > weight_floor || zak_weight(-T) > weight_floor)
      throw NumericalError("Zak weight at the interval ends exceeds the truncation floor");
  }
};

struct ZakProfile {
  ZakGrid grid;
  std::vector<cplx> values;  // v(t_j)

  template <class Fn>
  static ZakProfile sample(const ZakGrid& g, Fn&& v) {
    ZakProfile p{g, std::vector<cplx>(g.N)};
    for (std::size_t j = 0; j < g.N; ++j) p.values[j] = v(g.t(j));
    return p;
  }
};

/// Coefficient factor c_k(p) / v(p + k).
inline cplx zak_factor(int k, double p, double mu) {
  const double kk = static_cast<double>(k);
  return std::polar(std::exp(-kPi * kk * kk - kTwoPi * kk * p + kPi * kk), -kk * mu);
}

/// Plane section from a line profile v (any callable on R), summing the k with
/// |p + k| <= T.
template <class Fn>
cplx lift_zak(double lambda, double mu, const Fn& v, const PlanePoint& z, double T) {
  const double q = z.q[0], p = z.p[0];
  cplx acc{};
  const int k0 = static_cast<int>(std::ceil(-T - p)), k1 = static_cast<int>(std::floor(T - p));
  for (int k = k0; k <= k1; ++k)
    acc += zak_factor(k, p, mu) * v(p + k) * std::polar(1.0, kTwoPi * k * q);
  return std::polar(1.0, lambda * q) * acc;
}

/// Line profile of the theta section: v(t) = e^{-(lambda + pi) t} for the forced
/// coefficients (up to the factor a_0 = 1).
inline double theta_zak_profile(double lambda, double t) { return std::exp(-(lambda + kPi) * t); }

enum class SecondDerivative { sinc, fd4, fd6 };

inline const char* to_string(SecondDerivative d) {
  switch (d) {
    case SecondDerivative::sinc: return "sinc";
    case SecondDerivative::fd4: return "fd4";
    case SecondDerivative::fd6: return "fd6";
  }
  return "?";
}

namespace detail {

/// d/dt by 4th-order central differences with zero extension past the ends.
inline Eigen::MatrixXd first_derivative_fd4(std::size_t n, double h) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double w1 = 2.0 / (3.0 * h), w2 = -1.0 / (12.0 * h);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (i + 1 < d.rows()) d(i, i + 1) = w1;
    if (i >= 1) d(i, i - 1) = -w1;
    if (i + 2 < d.rows()) d(i, i + 2) = w2;
    if (i >= 2) d(i, i - 2) = -w2;
  }
  return d;
}

/// -d^2/dt^2 with Dirichlet closure: sinc collocation or central stencils.
inline Eigen::MatrixXd minus_second_derivative(std::size_t n, double h, SecondDerivative kind) {
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(N, N);
  const double ih2 = 1.0 / (h * h);
  if (kind == SecondDerivative::sinc) {
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = 0; j < N; ++j) {
        if (i == j) {
          d(i, j) = kPi * kPi / 3.0 * ih2;
        } else {
          const double k = static_cast<double>(i - j);
          d(i, j) = 2.0 * ((i - j) % 2 == 0 ? 1.0 : -1.0) / (k * k) * ih2;
        }
      }
    return d;
  }
  const std::vector<double> w = kind == SecondDerivative::fd4
                                    ? std::vector<double>{-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0}
                                    : std::vector<double>{-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
  for (Eigen::Index i = 0; i < N; ++i)
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (i + kk < N) d(i, i + kk) = -w[k] * ih2;
      if (i - kk >= 0) d(i, i - kk) = -w[k] * ih2;
    }
  return d;
}

}  // namespace detail

/// Discretised chirality blocks at one character.
///  plus_matrix, minus_matrix: first-order operators on v and w samples (FD4);
///  weights: trapezoid weights h rho(t_j) for <v, v'> (1-forms carry 2 rho);
///  gram_plus, gram_minus: D+* D+ and D+ D+* in half-density coordinates.
struct ReducedDiracPair {
  double lambda = 0.0;
  double mu = 0.0;
  ZakGrid grid;
  SecondDerivative second = SecondDerivative::sinc;
  Eigen::MatrixXcd plus_matrix;
  Eigen::MatrixXcd minus_matrix;
  Eigen::VectorXd weights;
  Eigen::MatrixXd gram_plus;
  Eigen::MatrixXd gram_minus;
};

inline ReducedDiracPair build_reduced_pair(double lambda, double mu, const ZakGrid& grid,
                                           SecondDerivative second = SecondDerivative::sinc,
                                           double weight_floor = 1e-12) {
  grid.validate(weight_floor);
  const auto N = static_cast<Eigen::Index>(grid.N);
  const double h = grid.h();
  ReducedDiracPair r{lambda, mu, grid, second, {}, {}, {}, {}, {}};
  const Eigen::MatrixXd d1 = detail::first_derivative_fd4(grid.N, h);
  Eigen::VectorXd t(N);
  for (Eigen::Index j = 0; j < N; ++j) t(j) = grid.t(static_cast<std::size_t>(j));

  r.plus_matrix = (0.5 * kI) * d1.cast<cplx>();
  r.plus_matrix.diagonal().array() += 0.5 * kI * (lambda + kPi);
  r.minus_matrix = kI * d1.cast<cplx>();
  r.minus_matrix.diagonal().array() += kI * (kPi - lambda - 4.0 * kPi * t.array()).cast<cplx>();

  r.weights.resize(N);
  for (Eigen::Index j = 0; j < N; ++j) r.weights(j) = h * zak_weight(t(j));

  const Eigen::MatrixXd lap = detail::minus_second_derivative(grid.N, h, second);
  const Eigen::ArrayXd a = kTwoPi * t.array() + lambda;
  r.gram_plus = 0.5 * lap;
  r.gram_plus.diagonal().array() += 0.5 * (a * a - kTwoPi);
  r.gram_minus = r.gram_plus;
  r.gram_minus.diagonal().array() += kTwoPi;
  return r;
}

struct BlockKernel {
  int dim = -1;  // -1: indeterminate
  bool determinate = false;
  double sigma_min = 0.0;
  double sigma_gap = 0.0;
  std::vector<double> sigma;  // leading singular values, ascending
  Eigen::MatrixXcd frames;    // half-density coefficients u = sqrt(rho) v, orthonormal for h * sum
  std::string status;
};

struct KernelResult {
  double lambda = 0.0;
  double mu = 0.0;
  BlockKernel plus;
  BlockKernel minus;

  bool determinate() const { return plus.determinate && minus.determinate; }
};

struct KernelOptions {
  double gap_threshold = 1e3;
  int max_dim = 8;
  bool want_frames = true;
};

namespace detail {

/// Dimension from ascending singular values: the largest d <= max_dim with
/// sigma_d > threshold * sigma_{d-1}. A ratio in [sqrt(threshold), threshold)
/// past the chosen d makes the answer indeterminate.
inline BlockKernel classify(const Eigen::VectorXd& eig, const Eigen::MatrixXd* vecs, double h,
                            const KernelOptions& opt) {
  BlockKernel b;
  const Eigen::Index count = std::min<Eigen::Index>(eig.size(), opt.max_dim + 2);
  for (Eigen::Index i = 0; i < count; ++i) b.sigma.push_back(std::sqrt(std::abs(eig(i))));  // rounding can leave tiny negatives
  auto ratio = [&](std::size_t d) {
    return b.sigma[d - 1] == 0.0 ? std::numeric_limits<double>::infinity() : b.sigma[d] / b.sigma[d - 1];
  };
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(opt.max_dim), b.sigma.size() - 1);
  int dim = 0;
  for (std::size_t d = 1; d <= top; ++d)
    if (ratio(d) > opt.gap_threshold) dim = static_cast<int>(d);
  bool gray = false;
  double best = 0.0;
  for (std::size_t d = static_cast<std::size_t>(dim) + 1; d <= top; ++d) {
    const double r = ratio(d);
    best = std::max(best, r);
    if (r >= std::sqrt(opt.gap_threshold)) gray = true;
  }
  b.sigma_min = b.sigma.front();
  b.sigma_gap = dim > 0 ? ratio(static_cast<std::size_t>(dim)) : best;
  if (gray) {
    b.status = "indeterminate: singular-value ratio inside the ambiguity band";
    return b;
  }
  b.determinate = true;
  b.dim = dim;
  b.status = "ok";
  if (vecs && dim > 0) {
    b.frames = vecs->leftCols(dim).cast<cplx>() / std::sqrt(h);
    for (Eigen::Index c = 0; c < b.frames.cols(); ++c) {
      Eigen::Index arg = 0;
      b.frames.col(c).cwiseAbs().maxCoeff(&arg);
      const cplx ph = b.frames(arg, c) / std::abs(b.frames(arg, c));
      b.frames.col(c) *= std::conj(ph);
    }
  }
  return b;
}

}  // namespace detail

inline KernelResult kernel_dims(const ReducedDiracPair& pair, const KernelOptions& opt = {}) {
  if (!(opt.gap_threshold > 1.0)) throw ConfigError("gap threshold must exceed 1");
  if (opt.max_dim < 1) throw ConfigError("max_dim must be positive");
  KernelResult r{pair.lambda, pair.mu, {}, {}};
  const double h = pair.grid.h();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pair.gram_plus, opt.want_frames ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    const Eigen::MatrixXd vecs = opt.want_frames ? es.eigenvectors() : Eigen::MatrixXd{};
    r.plus = detail::classify(es.eigenvalues(), opt.want_frames ? &vecs : nullptr, h, opt);
  }
  {
    // The minus kernel is expected to be trivial: eigenvectors only on demand.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pair.gram_minus, Eigen::EigenvaluesOnly);
    r.minus = detail::classify(es.eigenvalues(), nullptr, h, opt);
    if (opt.want_frames && r.minus.dim > 0) {
      es.compute(pair.gram_minus, Eigen::ComputeEigenvectors);
      const Eigen::MatrixXd vecs = es.eigenvectors();
      r.minus = detail::classify(es.eigenvalues(), &vecs, h, opt);
    }
  }
  return r;
}

/// Weighted inner product sum_j w_j a_j conj(b_j).
inline cplx weighted_inner(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const Eigen::VectorXd& w) {
  cplx acc{};
  for (Eigen::Index j = 0; j < a.size(); ++j) acc += w(j) * a(j) * std::conj(b(j));
  return acc;
}

/// Half-density profile u = sqrt(rho) v of the analytic kernel, normalised:
/// u(t) = 2^{1/4} e^{-pi (t + lambda / 2 pi)^2}.
inline double analytic_kernel_u(double lambda, double t) {
  const double c = t + lambda / kTwoPi;
  return std::pow(2.0, 0.25) * std::exp(-kPi * c * c);
}

/// | |<frame, analytic>| - ||analytic|| | for the dim-1 plus kernel, with the
/// analytic profile v = e^{-(lambda + pi) t} and the weighted product.
inline double frame_vs_analytic(const KernelResult& k, const ZakGrid& g) {
  if (k.plus.dim != 1) throw NumericalError("frame comparison needs a one-dimensional kernel");
  const double h = g.h();
  cplx ip{};
  double norm2 = 0.0;
  for (std::size_t j = 0; j < g.N; ++j) {
    const double t = g.t(j);
    const double u_an = std::sqrt(zak_weight(t)) * theta_zak_profile(k.lambda, t);
    ip += h * k.plus.frames(static_cast<Eigen::Index>(j), 0) * u_an;
    norm2 += h * u_an * u_an;
  }
  return std::abs(std::abs(ip) - std::sqrt(norm2));
}

/// Lift/reduce round trip: lift v to the plane, apply the plane D+ (central
/// differences, spacing `plane_step`), extract the k = 0 Zak coefficient by the
/// periodic trapezoid rule in q, and compare with plus_matrix v at t-nodes in
/// [-1, 1]. Residual relative to max |plus_matrix v| there.
template <class Fn>
ValidationReport zak_consistency(const ReducedDiracPair& pair, const Fn& v, double plane_step, double tol) {
  require_positive_tol(tol);
  ValidationReport r{"zak_consistency", 0.0, tol};
  const auto prof = ZakProfile::sample(pair.grid, v);
  const Eigen::Map<const Eigen::VectorXcd> vv(prof.values.data(), static_cast<Eigen::Index>(prof.values.size()));
  const Eigen::VectorXcd red = pair.plus_matrix * vv;
  const auto mq = static_cast<std::size_t>(std::llround(1.0 / plane_step));
  const double hq = 1.0 / static_cast<double>(mq);
  double scale = 0.0, worst = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < pair.grid.N; ++j) {
    const double t = pair.grid.t(j);
    if (std::abs(t) > 1.0) continue;
    GridSpec g;
    g.origin = {-hq, t - plane_step};
    g.step = {hq, plane_step};
    g.count = {mq + 2, 3};
    const auto f = GridFunction::sample(g, [&](std::span<const double> x) {
      return lift_zak(pair.lambda, pair.mu, v, PlanePoint::from_coords(x), pair.grid.T + 2.0);
    });
    const auto d = dirac::dirac_plus_apply(f, 2);
    cplx c0{};
    for (std::size_t i = 1; i <= mq; ++i) {
      const std::size_t flat = i * 3 + 1;
      c0 += std::polar(1.0, -pair.lambda * g.coords(flat)[0]) * d.values[flat];
    }
    c0 /= static_cast<double>(mq);
    worst = std::max(worst, std::abs(c0 - red(static_cast<Eigen::Index>(j))));
    scale = std::max(scale, std::abs(red(static_cast<Eigen::Index>(j))));
    ++used;
  }
  r.max_residual = scale > 0.0 ? worst / scale : worst;
  r.samples = used;
  r.note = "relative to max |plus_matrix v| on [-1, 1]";
  r.finalize();
  return r;
}

/// Fundamental-domain norm of the lifted section, int_{[0,1]^2} |s|^2 h, by the
/// periodic trapezoid rule in q and Gauss-free midpoint rule in p, against
/// int |v|^2 rho dt on the Zak grid. Returns the relative difference.
template <class Fn>
double zak_norm_mismatch(double lambda, double mu, const Fn& v, const ZakGrid& grid, std::size_t m = 64) {
  double plane = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double q = static_cast<double>(i) / static_cast<double>(m);
      const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
      const auto z = PlanePoint::one(q, p);
      plane += std::norm(lift_zak(lambda, mu, v, z, grid.T + 2.0)) * prequant::metric_weight(z);
    }
  plane /= static_cast<double>(m * m);
  double line = 0.0;
  for (std::size_t j = 0; j < grid.N; ++j) line += grid.h() * std::norm(v(grid.t(j))) * zak_weight(grid.t(j));
  return std::abs(plane - line) / line;
}

// ---------------------------------------------------------------------------
// Fibre overlaps for the Berry phase, in the trivialisation by restriction to
// the fundamental domain [0,1]^2.

namespace detail {

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

/// (e^{i d} - 1) / (i d) = int_0^1 e^{i d q} dq.
inline cplx unit_interval_fourier(double d) {
  if (std::abs(d) < 1e-8) return {1.0 - d * d / 6.0, d / 2.0};
  return (std::polar(1.0, d) - 1.0) / (kI * d);
}

/// 24-point Gauss-Legendre nodes and weights mapped to [0, 1].
inline void gauss_legendre_unit(std::vector<double>& x, std::vector<double>& w) {
  using rule = boost::math::quadrature::gauss<double, 24>;
  x.clear();
  w.clear();
  const auto& ab = rule::abscissa();
  const auto& wt = rule::weights();
  // Even order: the stored abscissae are the positive half, no node at 0.
  for (std::size_t i = ab.size(); i-- > 0;) {
    x.push_back(0.5 * (1.0 - ab[i]));
    w.push_back(0.5 * wt[i]);
  }
  for (std::size_t i = 0; i < ab.size(); ++i) {
    x.push_back(0.5 * (1.0 + ab[i]));
    w.push_back(0.5 * wt[i]);
  }
}

}  // namespace detail

/// One fibre's frame sampled at p + k for quadrature nodes p in [0, 1] and all
/// k with p + k inside the Zak interval, by band-limited interpolation.
struct FibreSamples {
  double lambda = 0.0;
  double mu = 0.0;
  int k_min = 0;
  std::vector<double> nodes, weights;
  std::vector<std::vector<cplx>> u;  // u[k - k_min][i] = u(nodes[i] + k)
};

inline FibreSamples sample_fibre(double lambda, double mu, const Eigen::VectorXcd& frame, const ZakGrid& g) {
  FibreSamples f{lambda, mu, static_cast<int>(std::floor(-g.T)) - 1, {}, {}, {}};
  detail::gauss_legendre_unit(f.nodes, f.weights);
  const std::size_t quad_nodes = f.nodes.size();
  const int k_max = static_cast<int>(std::ceil(g.T));
  const double h = g.h();
  for (int k = f.k_min; k <= k_max; ++k) {
    std::vector<cplx> row(quad_nodes);
    for (std::size_t i = 0; i < quad_nodes; ++i) {
      const double x = f.nodes[i] + k;
      if (x < -g.T || x > g.T) continue;
      cplx acc{};
      for (std::size_t j = 0; j < g.N; ++j) acc += frame(static_cast<Eigen::Index>(j)) * detail::sinc((x - g.t(j)) / h);
      row[i] = acc;
    }
    f.u.push_back(std::move(row));
  }
  return f;
}

/// <s_a |_F, s_b |_F> in L^2([0,1]^2, h):
/// sum_{k,k'} e^{i (k mu_a - k' mu_b)} Q(lambda_b - lambda_a + 2 pi (k' - k))
///            int_0^1 conj(u_a(p + k)) u_b(p + k') dp.
inline cplx fibre_overlap(const FibreSamples& a, const FibreSamples& b) {
  if (a.k_min != b.k_min || a.u.size() != b.u.size() || a.nodes.size() != b.nodes.size())
    throw DimensionError("fibre samples use different layouts");
  cplx acc{};
  const std::size_t nk = a.u.size();
  for (std::size_t ka = 0; ka < nk; ++ka)
    for (std::size_t kb = 0; kb < nk; ++kb) {
      cplx integral{};
      for (std::size_t i = 0; i < a.nodes.size(); ++i) integral += a.weights[i] * std::conj(a.u[ka][i]) * b.u[kb][i];
      if (integral == cplx{}) continue;
      const double k = static_cast<double>(ka) + a.k_min, kp = static_cast<double>(kb) + b.k_min;
      acc += std::polar(1.0, k * a.mu - kp * b.mu) *
             detail::unit_interval_fourier(b.lambda - a.lambda + kTwoPi * (kp - k)) * integral;
    }
  return acc;
}

}  // namespace qrlab::twisted

#endif  // QRLAB_TWISTED_KERNELS_HPP
