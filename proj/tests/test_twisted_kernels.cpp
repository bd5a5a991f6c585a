#include <gtest/gtest.h>

#include <random>

#include "qrlab/twisted_kernels.hpp"

using namespace qrlab;
using namespace qrlab::twisted;

namespace {

std::vector<PlanePoint> plane_samples(std::size_t count, std::uint64_t seed) {
  return prequant::random_points(1, count, seed, -1.0, 1.0);
}

const ZakGrid kDefaultGrid{5.0, 256};

}  // namespace

TEST(ThetaCoefficients, TrivialCharacterValues) {
  const auto s = theta_coefficients(0.0, 0.0, 12);
  EXPECT_EQ(s.a(0), cplx(1.0, 0.0));
  EXPECT_NEAR(s.a(1).real(), 8.06995175703045992e-5, 1e-19);
  EXPECT_NEAR(s.a(-1).real(), 23.1406926327792690, 1e-13);
  EXPECT_EQ(s.a(13), cplx{});
}

TEST(ThetaCoefficients, NormalisedAndConsecutiveRatio) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto s = theta_coefficients(l, m, 12);
    EXPECT_EQ(s.a(0), cplx(1.0, 0.0));
    for (int k = -5; k < 5; ++k) {
      const cplx expected = std::exp(-kPi * (2.0 * k + 1.0)) * std::exp(-cplx{l + kTwoPi, m});
      EXPECT_LT(prequant::relative_gap(s.a(k + 1) / s.a(k), expected), 1e-13);
    }
  }
  EXPECT_THROW(theta_coefficients(0.0, 0.0, 0), ConfigError);
}

TEST(ThetaCoefficients, GaussianDecayBound) {
  for (double l : {0.0, 2.0, 6.0}) {
    const auto s = theta_coefficients(l, 1.0, 12);
    for (int k = -12; k <= 12; ++k)
      EXPECT_LE(std::abs(s.a(k)), std::exp(-kPi * k * k + (std::abs(l) + kTwoPi) * std::abs(k)) * (1.0 + 1e-12));
  }
}

TEST(ThetaCoefficients, RecursionMatchesForcedClosedForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto rec = theta_by_recursion(l, m, 12);
    const auto closed = theta_coefficients(l, m, 12, ThetaConvention::forced);
    for (int k = -12; k <= 12; ++k) EXPECT_LT(prequant::relative_gap(rec.a(k), closed.a(k)), 1e-11) << k;
  }
}

TEST(ThetaEvaluation, OriginAtTrivialCharacter) {
  // High-precision oracle: sum_k e^{-pi k^2 - 2 pi k} = e^pi pi^{1/4} / Gamma(3/4).
  const auto s = theta_coefficients(0.0, 0.0, 12);
  const auto v = evaluate_theta(s, PlanePoint::one(0.0, 0.0));
  EXPECT_NEAR(v.value.real(), 25.1408540318387327, 1e-13);
  EXPECT_NEAR(v.value.imag(), 0.0, 1e-13);
  EXPECT_LT(v.tail, 1e-60);
}

TEST(ThetaEvaluation, UnitShiftMultipliesByCharacter) {
  const auto s = theta_coefficients(1.7, 0.4, 12);
  for (const auto& z : plane_samples(20, 3)) {
    const cplx a = evaluate_twisted_section(s, z);
    const cplx b = evaluate_twisted_section(s, PlanePoint::one(z.q[0] + 1.0, z.p[0]));
    EXPECT_LT(prequant::relative_gap(b, std::polar(1.0, 1.7) * a), 1e-12);
  }
}

TEST(ThetaEvaluation, QuasiPeriodicityOfShiftedFamily) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 5; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto s0 = theta_coefficients(l, m, 12);
    const auto s1 = theta_coefficients(l + kTwoPi, m, 12);
    const cplx factor = std::exp(cplx{l + 3.0 * kPi, m});
    for (const auto& z : plane_samples(20, 5 + t))
      EXPECT_LT(prequant::relative_gap(evaluate_twisted_section(s1, z), factor * evaluate_twisted_section(s0, z)), 1e-6);
  }
}

TEST(ThetaEvaluation, QuasiPeriodicityOfForcedFamily) {
  const auto s0 = theta_coefficients(0.5, 2.0, 12, ThetaConvention::forced);
  const auto s1 = theta_coefficients(0.5 + kTwoPi, 2.0, 12, ThetaConvention::forced);
  const cplx factor = std::exp(cplx{0.5 + kPi, 2.0});
  for (const auto& z : plane_samples(20, 6))
    EXPECT_LT(prequant::relative_gap(evaluate_twisted_section(s1, z), factor * evaluate_twisted_section(s0, z)), 1e-10);
}

TEST(ThetaEvaluation, TailViolationThrows) {
  const auto s = theta_coefficients(0.0, 0.0, 1);
  EXPECT_THROW(evaluate_twisted_section(s, PlanePoint::one(0.0, 3.0)), NumericalError);
}

TEST(BoundaryConditions, ShiftedFamilyFailsImaginaryRelationByE2Pi) {
  const auto pts = plane_samples(20, 7);
  const auto res = resolve_theta_convention(0.0, 0.0, pts);
  const auto shifted = theta_coefficients(0.0, 0.0, 12);
  for (const auto& z : pts)
    EXPECT_LT(prequant::relative_gap(evaluate_twisted_section(shifted, PlanePoint::one(z.q[0] + 1.0, z.p[0])),
                                     evaluate_twisted_section(shifted, z)),
              1e-13);
  EXPECT_FALSE(res.shifted.passed);
  EXPECT_NEAR(res.shifted_i_factor.real(), std::exp(kTwoPi), 1e-8 * std::exp(kTwoPi));
  EXPECT_NEAR(res.shifted_i_factor.imag(), 0.0, 1e-6);
  EXPECT_TRUE(res.forced.passed) << res.forced.note;
  EXPECT_EQ(res.used, ThetaConvention::forced);
  EXPECT_NE(res.note.find("forced"), std::string::npos);
}

TEST(BoundaryConditions, RecursionFamilySatisfiesBothRelations) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto s = theta_by_recursion(l, m, 12);
    const auto r = boundary_condition_residual([&](const PlanePoint& z) { return evaluate_twisted_section(s, z); }, l,
                                               m, plane_samples(20, 9 + t), 1e-12);
    EXPECT_TRUE(r.passed) << r.note;
  }
}

TEST(ThetaKernel, BothFamiliesAnnihilatedByPlaneDiracPlus) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 10; ++t) {
    const double l = ang(rng), m = ang(rng);
    for (auto conv : {ThetaConvention::forced, ThetaConvention::shifted}) {
      const auto s = theta_coefficients(l, m, 12, conv);
      for (const auto& z : plane_samples(20, 11 + t)) EXPECT_LT(theta_dirac_plus_residual(s, z), 1e-6);
    }
  }
}

TEST(ThetaKernel, ResidualConvergesWithStep) {
  const auto s = theta_coefficients(1.0, 2.0, 12, ThetaConvention::forced);
  const auto z = PlanePoint::one(0.3, 0.2);
  const double coarse = theta_dirac_plus_residual(s, z, 2e-2, 2);
  const double fine = theta_dirac_plus_residual(s, z, 1e-2, 2);
  EXPECT_GT(observed_order(coarse, fine), 1.8);
}

TEST(ZakGrid, Preconditions) {
  EXPECT_THROW(ZakGrid({2.0, 256}).validate(), ConfigError);
  EXPECT_THROW(ZakGrid({5.0, 32}).validate(), ConfigError);
  EXPECT_THROW(ZakGrid({3.0, 128}).validate(1e-20), NumericalError);
  EXPECT_NO_THROW(kDefaultGrid.validate());
}

TEST(ZakLift, ThetaProfileReproducesThetaSection) {
  // Oracle: the forced theta section equals the lift of v(t) = e^{-(lambda + pi) t}.
  for (const auto& [l, m] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {1.3, 4.0}, {5.9, 0.7}}) {
    const auto s = theta_coefficients(l, m, 12, ThetaConvention::forced);
    for (const auto& z : plane_samples(10, 12)) {
      const cplx lifted = lift_zak(l, m, [&](double t) { return theta_zak_profile(l, t); }, z, 9.0);
      EXPECT_LT(prequant::relative_gap(lifted, evaluate_twisted_section(s, z)), 1e-12);
    }
  }
}

TEST(ZakLift, LiftedProfilesAreEquivariant) {
  const double l = 2.1, m = 5.3;
  auto v = [](double t) { return cplx{std::exp(-3.0 * t * t) * (1.0 + t), 0.5 * t}; };
  const auto r = characters::equivariance_residual(
      [&](const PlanePoint& z) { return lift_zak(l, m, v, z, 7.0); }, characters::Character::one(l, m),
      plane_samples(30, 13), 1e-12);
  EXPECT_TRUE(r.passed) << r.max_residual;
}

TEST(ZakLift, NormMatchesLineIntegral) {
  auto v = [](double t) { return cplx{std::exp(-1.5 * (t - 0.3) * (t - 0.3)), 0.2}; };
  EXPECT_LT(zak_norm_mismatch(1.0, 2.0, v, kDefaultGrid, 128), 1e-8);
}

TEST(ReducedPair, ZeroProfileMapsToZero) {
  const auto pair = build_reduced_pair(0.4, 0.9, kDefaultGrid);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(256);
  EXPECT_EQ((pair.plus_matrix * zero).norm(), 0.0);
  EXPECT_EQ((pair.minus_matrix * zero).norm(), 0.0);
}

TEST(ReducedPair, ZakConsistencyIsSecondOrder) {
  const auto pair = build_reduced_pair(0.8, 2.5, ZakGrid{5.0, 1025});
  auto v = [](double t) { return cplx{std::exp(-2.0 * t * t), 0.3 * t * std::exp(-t * t)}; };
  const auto coarse = zak_consistency(pair, v, 1.0 / 64.0, 1e-2);
  const auto fine = zak_consistency(pair, v, 1.0 / 128.0, 1e-2);
  EXPECT_TRUE(fine.passed) << fine.max_residual;
  EXPECT_GT(observed_order(coarse.max_residual, fine.max_residual), 1.8);
}

TEST(ReducedPair, MinusBlockIsWeightedAdjoint) {
  const double l = 1.1;
  auto mismatch = [&](std::size_t n) {
    const auto pair = build_reduced_pair(l, 0.3, ZakGrid{5.0, n});
    auto v = ZakProfile::sample(pair.grid, [&](double t) { return cplx{std::exp(-(l + kPi) * t - 0.5 * t * t), 0.1 * t}; });
    auto w = ZakProfile::sample(pair.grid, [&](double t) { return cplx{std::exp(-(l + kPi) * t) * std::sin(t), 0.0}; });
    const auto N = static_cast<Eigen::Index>(n);
    const Eigen::Map<Eigen::VectorXcd> vv(v.values.data(), N), ww(w.values.data(), N);
    const cplx lhs = weighted_inner(pair.plus_matrix * vv, ww, 2.0 * pair.weights);
    const cplx rhs = weighted_inner(vv, pair.minus_matrix * ww, pair.weights);
    return std::abs(lhs - rhs) / std::abs(lhs);
  };
  const double coarse = mismatch(512), fine = mismatch(1024);
  EXPECT_LT(fine, 1e-5);
  EXPECT_GT(observed_order(coarse, fine), 3.5);
}

TEST(KernelDims, TrivialCharacterDefaults) {
  const auto k = kernel_dims(build_reduced_pair(0.0, 0.0, kDefaultGrid));
  EXPECT_EQ(k.plus.dim, 1);
  EXPECT_EQ(k.minus.dim, 0);
  EXPECT_GE(k.plus.sigma_gap, 1e3);
  EXPECT_NEAR(k.minus.sigma_min, std::sqrt(kTwoPi), 1e-6);
  EXPECT_NEAR(k.plus.sigma[1], std::sqrt(kTwoPi), 1e-6);
  EXPECT_LT(frame_vs_analytic(k, kDefaultGrid), 1e-6);
}

TEST(KernelDims, RandomCharacters) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int t = 0; t < 6; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto k = kernel_dims(build_reduced_pair(l, m, kDefaultGrid));
    EXPECT_EQ(k.plus.dim, 1);
    EXPECT_EQ(k.minus.dim, 0);
    EXPECT_GE(k.plus.sigma_gap, 1e3);
    EXPECT_LT(frame_vs_analytic(k, kDefaultGrid), 1e-6);
    double err = 0.0;
    for (std::size_t j = 0; j < kDefaultGrid.N; ++j)
      err = std::max(err, std::abs(k.plus.frames(static_cast<Eigen::Index>(j), 0) - analytic_kernel_u(l, kDefaultGrid.t(j))));
    EXPECT_LT(err, 1e-6);
  }
}

TEST(KernelDims, SpectrumIsMuIndependent) {
  const auto a = kernel_dims(build_reduced_pair(1.0, 0.0, kDefaultGrid));
  const auto b = kernel_dims(build_reduced_pair(1.0, 4.0, kDefaultGrid));
  EXPECT_EQ(a.plus.sigma, b.plus.sigma);
  EXPECT_EQ(a.minus.sigma, b.minus.sigma);
}

TEST(KernelDims, OscillatorLevels) {
  const auto k = kernel_dims(build_reduced_pair(2.0, 0.0, kDefaultGrid));
  for (std::size_t m = 1; m < 6; ++m) EXPECT_NEAR(k.plus.sigma[m], std::sqrt(kTwoPi * m), 1e-6);
  for (std::size_t m = 0; m < 6; ++m) EXPECT_NEAR(k.minus.sigma[m], std::sqrt(kTwoPi * (m + 1)), 1e-6);
}

TEST(KernelDims, CoarseGridAndFiniteDifferenceClosures) {
  for (auto kind : {SecondDerivative::sinc, SecondDerivative::fd4, SecondDerivative::fd6}) {
    const auto k = kernel_dims(build_reduced_pair(0.0, 0.0, ZakGrid{5.0, 64}, kind), {1e1});
    EXPECT_EQ(k.plus.dim, 1) << to_string(kind);
    EXPECT_EQ(k.minus.dim, 0) << to_string(kind);
  }
  const auto fd4 = kernel_dims(build_reduced_pair(0.0, 0.0, kDefaultGrid, SecondDerivative::fd4));
  const auto sinc = kernel_dims(build_reduced_pair(0.0, 0.0, kDefaultGrid));
  EXPECT_GT(sinc.plus.sigma_gap, 100.0 * fd4.plus.sigma_gap);
}

TEST(KernelDims, ThresholdSweepAgrees) {
  const auto pair = build_reduced_pair(0.0, 0.0, kDefaultGrid);
  EXPECT_EQ(kernel_dims(pair, {1e2}).plus.dim, kernel_dims(pair, {1e3}).plus.dim);
  EXPECT_THROW(kernel_dims(pair, {1.0}), ConfigError);
}

TEST(KernelDims, AmbiguousGapIsIndeterminate) {
  Eigen::VectorXd eig(5);
  eig << 1e-6, 1.0, 2.0, 3.0, 4.0;  // sigma ratio 1e3: inside the band for threshold 1e4
  const auto b = twisted::detail::classify(eig, nullptr, 0.1, {1e4});
  EXPECT_FALSE(b.determinate);
  EXPECT_EQ(b.dim, -1);
  const auto c = twisted::detail::classify(eig, nullptr, 0.1, {1e2});
  EXPECT_TRUE(c.determinate);
  EXPECT_EQ(c.dim, 1);
}

TEST(KernelDims, ExactZeroCountsAsGap) {
  Eigen::VectorXd eig(4);
  eig << 0.0, 0.0, 1.0, 2.0;
  const auto b = twisted::detail::classify(eig, nullptr, 0.1, {});
  EXPECT_TRUE(b.determinate);
  EXPECT_EQ(b.dim, 2);
}

TEST(FibreOverlap, NormOfRestrictedSection) {
  // <s|_F, s|_F> equals the Zak line norm of a unit frame.
  const auto k = kernel_dims(build_reduced_pair(1.2, 3.4, kDefaultGrid));
  const auto f = sample_fibre(1.2, 3.4, k.plus.frames.col(0), kDefaultGrid);
  const cplx o = fibre_overlap(f, f);
  EXPECT_NEAR(o.real(), 1.0, 1e-10);
  EXPECT_NEAR(o.imag(), 0.0, 1e-12);
}

TEST(FibreOverlap, MatchesDirectPlaneQuadrature) {
  // Oracle: 2-D quadrature of conj(s_a) s_b h over [0,1]^2 with the lifted analytic profiles.
  const double la = 0.3, ma = 1.0, lb = 0.9, mb = 1.4;
  const auto ka = kernel_dims(build_reduced_pair(la, ma, kDefaultGrid));
  const auto kb = kernel_dims(build_reduced_pair(lb, mb, kDefaultGrid));
  const cplx o = fibre_overlap(sample_fibre(la, ma, ka.plus.frames.col(0), kDefaultGrid),
                               sample_fibre(lb, mb, kb.plus.frames.col(0), kDefaultGrid));
  auto va = [&](double t) { return analytic_kernel_u(la, t) / std::sqrt(zak_weight(t)); };
  auto vb = [&](double t) { return analytic_kernel_u(lb, t) / std::sqrt(zak_weight(t)); };
  const std::size_t m = 200;
  cplx direct{};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const auto z = PlanePoint::one((i + 0.5) / m, (j + 0.5) / m);
      direct += std::conj(lift_zak(la, ma, va, z, 8.0)) * lift_zak(lb, mb, vb, z, 8.0) * prequant::metric_weight(z);
    }
  direct /= static_cast<double>(m * m);
  EXPECT_LT(std::abs(o - direct), 1e-4);
}
