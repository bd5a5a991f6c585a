#include <gtest/gtest.h>

#include <random>

#include "qrlab/avg_reduction.hpp"

using namespace qrlab;
using namespace qrlab::avg;

namespace {

CompactSection box_bump(double q0, double p0, double r) {
  // C-infinity bump supported in the disc of radius r.
  CompactSection s;
  s.f = [=](const PlanePoint& z) {
    const double d2 = ((z.q[0] - q0) * (z.q[0] - q0) + (z.p[0] - p0) * (z.p[0] - p0)) / (r * r);
    return d2 < 1.0 ? cplx{std::exp(-1.0 / (1.0 - d2)), 0.0} : cplx{};
  };
  s.lo = {q0 - r, p0 - r};
  s.hi = {q0 + r, p0 + r};
  return s;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (auto x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TorusSection sample_torus(std::size_t m, const std::function<cplx(const PlanePoint&)>& zero,
                          const std::function<cplx(const PlanePoint&)>& one = {}) {
  TorusSection u(m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      u.zero[u.flat(a, b)] = zero ? zero(u.node(a, b)) : cplx{};
      u.one[u.flat(a, b)] = one ? one(u.node(a, b)) : cplx{};
    }
  return u;
}

}  // namespace

TEST(Averaging, SupportInsideOneCellIsTransplanted) {
  const auto s = box_bump(0.5, 0.5, 0.3);
  const auto chi = average_over_lattice({s, {}}, 16);
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) EXPECT_EQ(chi.zero[chi.flat(a, b)], s(chi.node(a, b)));
}

TEST(Averaging, TranslatedSectionHasSameAverage) {
  const LiftedAction act;
  const auto s = gaussian_bump(0.2, 0.4, 5.0, 1.0, -0.5);
  const LatticeElement g{{2}, {-1}};
  CompactSection moved;
  moved.f = [&](const PlanePoint& z) { return act.act_on_section(g, s, z); };
  moved.lo = {s.lo[0] + 2.0, s.lo[1] - 1.0};
  moved.hi = {s.hi[0] + 2.0, s.hi[1] - 1.0};
  const auto a = average_over_lattice({s, {}}, 16);
  const auto b = average_over_lattice({moved, {}}, 16);
  EXPECT_LT(max_diff(a.zero, b.zero), 1e-12 * max_abs(a.zero));
}

TEST(Averaging, MatchesDirectLatticeSum) {
  // Independent sum over the full box |k|, |l| <= 12 with the closed-form multiplier.
  const auto s = gaussian_bump(-0.3, 0.6, 3.0, 0.5, 1.0);
  const auto chi = average_over_lattice({s, {}}, 8);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) {
      const auto z = chi.node(a, b);
      cplx direct{};
      for (std::int64_t k = -12; k <= 12; ++k)
        for (std::int64_t l = -12; l <= 12; ++l) {
          const auto w = PlanePoint::one(z.q[0] - k, z.p[0] - l);
          direct += LiftedAction::multiplier_closed_form(LatticeElement{{k}, {l}}, w) * s(w);
        }
      EXPECT_LT(std::abs(direct - chi.zero[chi.flat(a, b)]), 1e-12 * std::max(1.0, std::abs(direct)));
    }
}

TEST(Averaging, RangeLimitIsEnforced) {
  const auto s = gaussian_bump(0.0, 0.0, 0.01);
  EXPECT_THROW(average_over_lattice({s, {}}, 8, LiftedAction(), 10), NumericalError);
}

TEST(InnerProductN, SingleCellSupportGivesL2Norm) {
  const auto s = box_bump(0.5, 0.5, 0.4);
  double l2 = 0.0;
  const std::size_t m = 400;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const auto z = PlanePoint::one((i + 0.5) / m, (j + 0.5) / m);
      l2 += std::norm(s(z)) * prequant::metric_weight(z);
    }
  l2 /= static_cast<double>(m * m);
  const cplx n = inner_product_N(s, s);
  EXPECT_NEAR(n.real(), l2, 1e-7 * l2);
  EXPECT_EQ(n.imag(), 0.0);
}

TEST(InnerProductN, NoOverlappingTranslatesGivesZero) {
  const auto s = box_bump(0.25, 0.25, 0.2);
  const auto t = box_bump(0.75, 0.75, 0.2);
  EXPECT_EQ(inner_product_N(s, t), cplx{});
}

TEST(InnerProductN, AgreesWithTorusProductOnRandomBumps) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_bump(rng), t = random_bump(rng);
    const cplx plane = inner_product_N(s, t);
    const auto cs = average_over_lattice({s, {}}, 64), ct = average_over_lattice({t, {}}, 64);
    const cplx torus = torus_inner(cs, ct);
    EXPECT_LT(std::abs(plane - torus), 1e-9 * std::sqrt(torus_inner(cs, cs).real() * torus_inner(ct, ct).real()));
  }
}

TEST(InnerProductN, IsometryAndPositivity) {
  const auto st = check_isometry(20, 5);
  EXPECT_TRUE(st.isometry.passed) << st.isometry.max_residual;
  EXPECT_LT(st.isometry.max_residual, 1e-8);
  EXPECT_TRUE(st.positivity.passed) << st.positivity.note;
}

TEST(QuotientOperator, ConstantAwayFromTheSeam) {
  // Constants are not invariant; rows whose stencil stays inside [0, 1) in p
  // see the plane computation D+ 1 = i pi / 2.
  const auto u = sample_torus(16, [](const PlanePoint&) { return cplx{1.0}; });
  const auto d = quotient_operator_apply(u);
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 1; b < 15; ++b) EXPECT_NEAR(std::abs(d.one[d.flat(a, b)] - kI * kPi / 2.0), 0.0, 1e-13);
}

TEST(QuotientOperator, AnnihilatesTrivialCharacterTheta) {
  const auto s = twisted::theta_coefficients(0.0, 0.0, 12, twisted::ThetaConvention::forced);
  auto residual = [&](std::size_t m) {
    const auto u = sample_torus(m, [&](const PlanePoint& z) { return twisted::evaluate_twisted_section(s, z); });
    return max_abs(quotient_operator_apply(u).one) / max_abs(u.zero);
  };
  const double c = residual(64), f = residual(128);
  EXPECT_LT(f, 5e-3);
  EXPECT_GT(observed_order(c, f), 1.8);
}

TEST(QuotientOperator, MatchesReducedPlusBlockAtTrivialCharacter) {
  // Lift v(t) = e^{-pi t} (1 + t / 2); the (0, 0) reduced block gives
  // D+ v = (i / 2)(v' + pi v) = (i / 4) e^{-pi t}.
  auto v = [](double t) { return cplx{std::exp(-kPi * t) * (1.0 + 0.5 * t)}; };
  auto dv = [](double t) { return 0.25 * kI * std::exp(-kPi * t); };
  auto residual = [&](std::size_t m) {
    const auto u = sample_torus(m, [&](const PlanePoint& z) { return twisted::lift_zak(0.0, 0.0, v, z, 12.0); });
    const auto want = sample_torus(m, [&](const PlanePoint& z) { return twisted::lift_zak(0.0, 0.0, dv, z, 12.0); });
    return max_diff(quotient_operator_apply(u).one, want.zero) / max_abs(want.zero);
  };
  const double c = residual(32), f = residual(64);
  EXPECT_LT(f, 5e-2);
  EXPECT_GT(observed_order(c, f), 1.8);
}

TEST(QuotientOperator, IsLinear) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  TorusSection u(16), v(16);
  for (std::size_t i = 0; i < u.zero.size(); ++i) {
    u.zero[i] = {nd(rng), nd(rng)};
    u.one[i] = {nd(rng), nd(rng)};
    v.zero[i] = {nd(rng), nd(rng)};
    v.one[i] = {nd(rng), nd(rng)};
  }
  const cplx c{0.3, -1.2};
  TorusSection w(16);
  for (std::size_t i = 0; i < w.zero.size(); ++i) {
    w.zero[i] = u.zero[i] + c * v.zero[i];
    w.one[i] = u.one[i] + c * v.one[i];
  }
  const auto du = quotient_operator_apply(u), dv = quotient_operator_apply(v), dw = quotient_operator_apply(w);
  for (std::size_t i = 0; i < w.zero.size(); ++i) {
    EXPECT_LT(std::abs(dw.zero[i] - du.zero[i] - c * dv.zero[i]), 1e-10);
    EXPECT_LT(std::abs(dw.one[i] - du.one[i] - c * dv.one[i]), 1e-10);
  }
}

TEST(Intertwining, WideGaussianConvergesAtSecondOrder) {
  const CompactPlaneForm s{gaussian_bump(0.3, 0.2, 1.5, 0.7, 0.0), gaussian_bump(-0.4, 0.5, 2.0, 0.0, 1.1)};
  const auto coarse = check_intertwining(s, 64, 1e-2);
  const auto fine = check_intertwining(s, 128, 1e-3);
  EXPECT_TRUE(fine.passed) << fine.max_residual;
  EXPECT_GT(observed_order(coarse.max_residual, fine.max_residual), 1.8);
}

TEST(Intertwining, SingleCellSupportIsPureDiscretisationError) {
  // Only gamma = 0 contributes and both sides apply the same stencil to the
  // same samples, so they agree exactly.
  const CompactPlaneForm s{box_bump(0.5, 0.5, 0.35), box_bump(0.45, 0.55, 0.3)};
  EXPECT_EQ(check_intertwining(s, 64, 1.0).max_residual, 0.0);
}

TEST(Intertwining, ZeroSectionGivesZero) {
  const auto r = check_intertwining(CompactPlaneForm{}, 16, 1e-12);
  EXPECT_EQ(r.max_residual, 0.0);
}

TEST(NormalizingFunction, StandardValues) {
  const auto b = NormalizingFunction::standard();
  EXPECT_EQ(b(0.0), 0.0);
  EXPECT_DOUBLE_EQ(b(1.0), 1.0 / std::sqrt(2.0));
  EXPECT_TRUE(check_normalizing_axioms(b, 1000, 1e4, 1e-8).passed);
}

TEST(NormalizingFunction, BumpIsOddAndApproachesOne) {
  const auto b = NormalizingFunction::bump(1.0);
  EXPECT_EQ(b(0.0), 0.0);
  for (double t : {0.1, 1.0, 7.5, 40.0}) EXPECT_EQ(b(-t), -b(t));
  const auto r = check_normalizing_axioms(b);
  EXPECT_TRUE(r.passed) << r.note;
  EXPECT_NEAR(b(200.0), 1.0, 1e-6);
}

TEST(NormalizingFunction, BumpProfileIsConvolutionSquare) {
  // f = g * g with int g^2 = 1 / pi: f(0+) -> 1 / pi, f vanishes at R.
  const auto b = NormalizingFunction::bump(2.0);
  const auto& x = b.profile_nodes();
  const auto& f = b.profile_values();
  EXPECT_NEAR(f.front(), 1.0 / kPi, 1e-4);
  EXPECT_LT(f.back(), 1e-10);
  for (double v : f) EXPECT_GE(v, 0.0);
  EXPECT_LT(x.front(), 1e-2);
  EXPECT_THROW(NormalizingFunction::bump(0.0), ConfigError);
}

TEST(FunctionalCalculus, ZeroAndTwoByTwo) {
  const auto b = NormalizingFunction::standard();
  auto fb = [&](double x) { return b(x); };
  EXPECT_EQ(functional_calculus(Eigen::MatrixXcd::Zero(4, 4), fb).cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXcd D(2, 2);
  D << 0, 1, 1, 0;
  const Eigen::MatrixXcd F = functional_calculus(D, fb);
  EXPECT_LT((F - D / std::sqrt(2.0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FunctionalCalculus, RejectsNonSelfAdjoint) {
  Eigen::MatrixXcd D(2, 2);
  D << 0, 1, 0, 0;
  EXPECT_THROW(functional_calculus(D, [](double x) { return x; }), ConfigError);
}

TEST(FunctionalCalculus, ContractOnRandomGradedMatrices) {
  const auto bs = NormalizingFunction::standard();
  const auto bb = NormalizingFunction::bump(1.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto* b : {&bs, &bb}) {
      const auto c = check_functional_calculus([&](double x) { return (*b)(x); }, 32, seed);
      EXPECT_LE(c.norm, 1.0 + 1e-12) << b->kind();
      EXPECT_LT(c.self_adjoint, 1e-12);
      EXPECT_LT(c.diagonal_block, 1e-12) << b->kind();
      EXPECT_LT(c.conjugation, 1e-10) << b->kind();
    }
  }
}

TEST(FiniteCalculus, BumpIsBandLimitedOnDiscreteDirac) {
  const auto D = discrete_dirac_1d(512);
  const auto r = check_finite_propagation(D, NormalizingFunction::bump(1.0), 1.0, 1e-8);
  EXPECT_TRUE(r.passed) << r.max_residual << " " << r.note;
}

TEST(FiniteCalculus, StandardFunctionIsOnlyDiagnostic) {
  // No pass/fail gate: the standard b has non-compact Fourier support. Only
  // check that the off-band profile is reported and smaller than the entries.
  const auto D = discrete_dirac_1d(128);
  const auto r = check_finite_propagation(D, NormalizingFunction::standard(), 1.0, 1e-8);
  EXPECT_GT(r.max_residual, 0.0);
  EXPECT_LT(r.max_residual, 1.0);
}
