#ifndef QRLAB_INDEX_BUNDLE_HPP
#define QRLAB_INDEX_BUNDLE_HPP

// Kernel data over the dual torus: rank, plaquette Chern number, the fibre
// at the trivial character, and the reduced-space index computed two ways.

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "qrlab/characters.hpp"
#include "qrlab/core.hpp"
#include "qrlab/prequant.hpp"
#include "qrlab/twisted_kernels.hpp"

namespace qrlab::index {

using characters::Character;
using twisted::KernelOptions;
using twisted::KernelResult;
using twisted::SecondDerivative;
using twisted::ZakGrid;

/// Uniform nodes lambda_i = 2 pi i / n_lambda, mu_j = 2 pi j / n_mu. Node (0, 0)
/// is always index 0. Flat order is row-major in (lambda, mu).
struct CharacterGrid {
  std::size_t n_lambda = 16;
  std::size_t n_mu = 16;

  void validate() const {
    if (n_lambda == 0 || n_mu == 0) throw ConfigError("character grid counts must be positive");
    if (n_lambda > 4096 || n_mu > 4096) throw ConfigError("character grid counts above 4096 are not supported");
  }
  std::size_t size() const { return n_lambda * n_mu; }
  std::size_t flat(std::size_t i, std::size_t j) const { return i * n_mu + j; }
  double lambda(std::size_t i) const { return kTwoPi * static_cast<double>(i) / static_cast<double>(n_lambda); }
  double mu(std::size_t j) const { return kTwoPi * static_cast<double>(j) / static_cast<double>(n_mu); }
};

struct ScanConfig {
  ZakGrid zak;
  SecondDerivative second = SecondDerivative::sinc;
  KernelOptions kernel;
  double weight_floor = 1e-12;
  unsigned threads = 0;  // 0: QRLAB_THREADS, else 1
};

struct IndexSample {
  std::size_t i = 0, j = 0;
  Character character;
  KernelResult kernel;
};

inline KernelResult solve_node(double lambda, double mu, const ScanConfig& cfg) {
  const auto pair = twisted::build_reduced_pair(lambda, mu, cfg.zak, cfg.second, cfg.weight_floor);
  return twisted::kernel_dims(pair, cfg.kernel);
}

/// One kernel computation per node, in parallel; output order is the flat order.
inline std::vector<IndexSample> scan(const CharacterGrid& grid, const ScanConfig& cfg) {
  grid.validate();
  cfg.zak.validate(cfg.weight_floor);
  std::vector<IndexSample> out(grid.size());
  parallel_for(grid.size(), resolve_threads(cfg.threads), [&](std::size_t f) {
    const std::size_t i = f / grid.n_mu, j = f % grid.n_mu;
    out[f] = {i, j, Character::one(grid.lambda(i), grid.mu(j)), solve_node(grid.lambda(i), grid.mu(j), cfg)};
  });
  return out;
}

/// "%.17g" rendering used by every report and CSV.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_scan_csv(std::ostream& os, const std::vector<IndexSample>& samples) {
  os << "lambda,mu,dim_plus,dim_minus,sigma_min_plus,sigma_gap_plus,sigma_min_minus,sigma_gap_minus\n";
  for (const auto& s : samples) {
    const auto& k = s.kernel;
    os << format_double(k.lambda) << ',' << format_double(k.mu) << ',' << k.plus.dim << ',' << k.minus.dim << ','
       << format_double(k.plus.sigma_min) << ',' << format_double(k.plus.sigma_gap) << ','
       << format_double(k.minus.sigma_min) << ',' << format_double(k.minus.sigma_gap) << '\n';
  }
}

inline std::string node_label(const IndexSample& s) {
  return "(" + std::to_string(s.i) + "," + std::to_string(s.j) + ")";
}

struct RankCheck {
  bool constant = false;
  int rank_plus = -1;
  int rank_minus = -1;
  std::vector<std::string> offending;  // node labels that disagree or are indeterminate
};

/// The reference ranks are the most frequent determinate (dim+, dim-) pair,
/// ties broken by first occurrence.
inline RankCheck check_rank_constancy(const std::vector<IndexSample>& samples) {
  if (samples.empty()) throw ConfigError("rank check needs at least one sample");
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> tally;  // -> (count, first index)
  for (std::size_t f = 0; f < samples.size(); ++f) {
    const auto& k = samples[f].kernel;
    if (!k.determinate()) continue;
    auto [it, fresh] = tally.try_emplace({k.plus.dim, k.minus.dim}, 0, f);
    ++it->second.first;
  }
  RankCheck r;
  std::optional<std::pair<int, int>> ref;
  std::size_t best = 0, first = samples.size();
  for (const auto& [dims, cf] : tally)
    if (cf.first > best || (cf.first == best && cf.second < first)) {
      ref = dims;
      best = cf.first;
      first = cf.second;
    }
  for (const auto& s : samples)
    if (!s.kernel.determinate() || !ref || std::pair{s.kernel.plus.dim, s.kernel.minus.dim} != *ref)
      r.offending.push_back(node_label(s));
  if (ref) {
    r.rank_plus = ref->first;
    r.rank_minus = ref->second;
  }
  r.constant = r.offending.empty();
  return r;
}

struct ChernResult {
  int value = 0;
  double raw = 0.0;          // (1 / 2 pi) sum of plaquette phases before rounding
  double min_overlap = 0.0;  // smallest |link| met
};

/// Plaquette Chern number on an n_lambda x n_mu periodic grid. overlap(a, b)
/// returns <psi_a, psi_b> for flat node indices a, b (conjugate-linear in a).
/// Each plaquette contributes arg(U_x(i,j) U_y(i+1,j) conj(U_x(i,j+1)) conj(U_y(i,j))).
inline ChernResult plaquette_chern(const CharacterGrid& grid, const std::function<cplx(std::size_t, std::size_t)>& overlap,
                                   double floor = 1e-3) {
  grid.validate();
  if (grid.n_lambda < 2 || grid.n_mu < 2) throw ConfigError("Chern number needs at least a 2 x 2 grid");
  const std::size_t nl = grid.n_lambda, nm = grid.n_mu;
  std::vector<cplx> ux(grid.size()), uy(grid.size());
  ChernResult r;
  r.min_overlap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = 0; j < nm; ++j) {
      const std::size_t f = grid.flat(i, j);
      ux[f] = overlap(f, grid.flat((i + 1) % nl, j));
      uy[f] = overlap(f, grid.flat(i, (j + 1) % nm));
      r.min_overlap = std::min({r.min_overlap, std::abs(ux[f]), std::abs(uy[f])});
    }
  if (!(r.min_overlap >= floor))
    throw NumericalError("frame overlap " + format_double(r.min_overlap) + " below floor; character grid too coarse");
  double total = 0.0;
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = 0; j < nm; ++j) {
      const cplx loop = ux[grid.flat(i, j)] * uy[grid.flat((i + 1) % nl, j)] * std::conj(ux[grid.flat(i, (j + 1) % nm)]) *
                        std::conj(uy[grid.flat(i, j)]);
      total += principal_arg(loop);
    }
  r.raw = total / kTwoPi;
  r.value = static_cast<int>(std::lround(r.raw));
  return r;
}

/// Chern number of the rank-one kernel bundle of D+ from scan samples, in the
/// trivialisation by restriction to the fundamental domain.
inline ChernResult berry_chern_number(const std::vector<IndexSample>& samples, const CharacterGrid& grid,
                                      const ZakGrid& zak, double floor = 1e-3) {
  if (samples.size() != grid.size()) throw DimensionError("sample count differs from grid size");
  std::vector<twisted::FibreSamples> fib;
  fib.reserve(samples.size());
  for (const auto& s : samples) {
    const auto& k = s.kernel;
    if (!k.determinate()) throw NumericalError("indeterminate kernel at node " + node_label(s));
    if (k.plus.dim != 1) throw NumericalError("Chern number needs rank one; node " + node_label(s));
    if (k.plus.frames.cols() != 1) throw NumericalError("scan ran without frames");
    fib.push_back(twisted::sample_fibre(k.lambda, k.mu, k.plus.frames.col(0), zak));
  }
  return plaquette_chern(grid, [&](std::size_t a, std::size_t b) { return twisted::fibre_overlap(fib[a], fib[b]); },
                         floor);
}

/// Lower-band eigenvector of d(kx, ky) . sigma with d = (sin kx, sin ky, m + cos kx + cos ky):
/// a two-band frame field of known Chern number (|C| = 1 for 0 < |m| < 2).
inline Eigen::Vector2cd two_band_frame(double kx, double ky, double m) {
  Eigen::Matrix2cd H;
  const double dx = std::sin(kx), dy = std::sin(ky), dz = m + std::cos(kx) + std::cos(ky);
  H << dz, cplx{dx, -dy}, cplx{dx, dy}, -dz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(H);
  return es.eigenvectors().col(0);
}

inline ChernResult two_band_chern(const CharacterGrid& grid, double m, double floor = 1e-3) {
  std::vector<Eigen::Vector2cd> psi(grid.size());
  for (std::size_t i = 0; i < grid.n_lambda; ++i)
    for (std::size_t j = 0; j < grid.n_mu; ++j) psi[grid.flat(i, j)] = two_band_frame(grid.lambda(i), grid.mu(j), m);
  return plaquette_chern(grid, [&](std::size_t a, std::size_t b) { return psi[a].dot(psi[b]); }, floor);
}

/// dim+ - dim- at the trivial character.
inline int reduce_at_trivial(const std::vector<IndexSample>& samples) {
  for (const auto& s : samples) {
    if (s.character != Character::trivial(1)) continue;
    if (!s.kernel.determinate()) throw NumericalError("kernel at the trivial character is indeterminate");
    return s.kernel.plus.dim - s.kernel.minus.dim;
  }
  throw ConfigError("samples do not contain the trivial character");
}

struct SpectralIndex {
  int value = 0;
  KernelResult kernel;
};

/// Index of the reduced operator, i.e. the twisted block at (0, 0).
inline SpectralIndex reduced_index_spectral(const ScanConfig& cfg) {
  SpectralIndex r{0, solve_node(0.0, 0.0, cfg)};
  if (!r.kernel.determinate()) throw NumericalError("reduced kernel is indeterminate: " + r.kernel.plus.status);
  r.value = r.kernel.plus.dim - r.kernel.minus.dim;
  return r;
}

/// (i / 2 pi) F(d_q, d_p) with F = dA from the connection coefficients, by
/// central differences (A is affine in p, so the stencil is exact up to rounding).
inline double chern_density(double q, double p, double step = 1e-3) {
  auto A = [&](std::size_t axis, double qq, double pp) {
    const double x[2] = {qq, pp};
    return prequant::connection_coefficient(axis, x);
  };
  const cplx dq_Ap = (A(1, q + step, p) - A(1, q - step, p)) / (2.0 * step);
  const cplx dp_Aq = (A(0, q, p + step) - A(0, q, p - step)) / (2.0 * step);
  return (kI / kTwoPi * (dq_Ap - dp_Aq)).real();
}

struct TopologicalIndex {
  int value = 0;
  double raw = 0.0;
  double residual = 0.0;  // |raw - value|
};

/// Integral of a density over [0, q_extent] x [0, p_extent], 24-point
/// Gauss-Legendre on every unit cell. Throws if the value is not an integer
/// within tol.
inline TopologicalIndex reduced_index_topological(std::size_t q_extent = 1, std::size_t p_extent = 1,
                                                  const std::function<double(double, double)>& density = {},
                                                  double tol = 1e-6) {
  if (q_extent == 0 || p_extent == 0) throw ConfigError("integration domain must be nonempty");
  require_positive_tol(tol);
  std::vector<double> x, w;
  twisted::detail::gauss_legendre_unit(x, w);
  const auto f = density ? density : [](double q, double p) { return chern_density(q, p); };
  double total = 0.0;
  for (std::size_t cq = 0; cq < q_extent; ++cq)
    for (std::size_t cp = 0; cp < p_extent; ++cp)
      for (std::size_t a = 0; a < x.size(); ++a)
        for (std::size_t b = 0; b < x.size(); ++b)
          total += w[a] * w[b] * f(static_cast<double>(cq) + x[a], static_cast<double>(cp) + x[b]);
  TopologicalIndex r;
  r.raw = total;
  r.value = static_cast<int>(std::lround(total));
  r.residual = std::abs(total - r.value);
  if (r.residual > tol) throw NumericalError("index integral " + format_double(total) + " is not integral");
  return r;
}

struct VerdictConfig {
  CharacterGrid grid;
  ScanConfig scan;
  prequant::PrequantValidationConfig prequant;
  int truncation = 12;
  std::size_t convention_samples = 20;
  bool skip_chern = false;
  double overlap_floor = 1e-3;
  double topological_tol = 1e-6;
};

struct IndexBundleReport {
  bool pass = false;
  std::string cause;  // first failing stage, empty on PASS
  std::vector<ValidationReport> prequant;
  std::string convention;  // resolution note
  std::string convention_used;
  std::vector<IndexSample> samples;
  std::optional<RankCheck> ranks;
  std::optional<ChernResult> chern;
  std::string chern_status;  // "computed", "skipped: ..." or the error
  std::optional<int> reduced_rank;
  std::optional<SpectralIndex> spectral;
  std::optional<TopologicalIndex> topological;
  std::optional<int> common_value;
};

/// Full pipeline: prequantisation validators, convention resolution, scan,
/// rank constancy, Chern number (extension), and the three reduced indices.
inline IndexBundleReport qr_verdict(const VerdictConfig& cfg) {
  IndexBundleReport rep;
  auto fail = [&](std::string cause) {
    rep.pass = false;
    rep.cause = std::move(cause);
    return rep;
  };

  rep.prequant = prequant::validate_prequantisation(cfg.prequant);
  for (const auto& r : rep.prequant)
    if (!r.passed) return fail("prequant: " + r.check);

  const auto pts = prequant::random_points(1, cfg.convention_samples, cfg.prequant.seed + 7, -1.0, 1.0);
  const auto conv = twisted::resolve_theta_convention(0.0, 0.0, pts, cfg.truncation);
  rep.convention = conv.note;
  rep.convention_used = twisted::to_string(conv.used);
  if (!conv.forced.passed && !conv.shifted.passed) return fail("convention: no theta family meets the boundary conditions");

  try {
    rep.samples = scan(cfg.grid, cfg.scan);
  } catch (const NumericalError& e) {
    return fail(std::string("scan: ") + e.what());
  }
  rep.ranks = check_rank_constancy(rep.samples);
  if (!rep.ranks->constant) return fail("rank: non-constant at " + rep.ranks->offending.front());

  if (cfg.skip_chern) {
    rep.chern_status = "skipped: requested";
  } else if (cfg.grid.n_lambda < 2 || cfg.grid.n_mu < 2) {
    rep.chern_status = "skipped: grid smaller than 2 x 2";
  } else if (rep.ranks->rank_plus != 1) {
    rep.chern_status = "skipped: rank is not one";
  } else {
    try {
      rep.chern = berry_chern_number(rep.samples, cfg.grid, cfg.scan.zak, cfg.overlap_floor);
      rep.chern_status = "computed";
    } catch (const NumericalError& e) {
      return fail(std::string("chern: ") + e.what());
    }
  }

  try {
    rep.reduced_rank = reduce_at_trivial(rep.samples);
    rep.spectral = reduced_index_spectral(cfg.scan);
    rep.topological = reduced_index_topological(1, 1, {}, cfg.topological_tol);
  } catch (const std::exception& e) {
    return fail(std::string("reduction: ") + e.what());
  }
  if (*rep.reduced_rank != rep.spectral->value || rep.spectral->value != rep.topological->value)
    return fail("reduction: legs disagree");
  rep.common_value = *rep.reduced_rank;
  rep.pass = true;
  return rep;
}

}  // namespace qrlab::index

#endif  // QRLAB_INDEX_BUNDLE_HPP
