#include <gtest/gtest.h>

#include <sstream>

#include "qrlab/index_bundle.hpp"

using namespace qrlab;
using namespace qrlab::index;

namespace {

// Scans shared across tests; each grid is computed once.
const std::vector<IndexSample>& scan_cached(std::size_t n) {
  static std::map<std::size_t, std::vector<IndexSample>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, scan(CharacterGrid{n, n}, ScanConfig{})).first;
  return it->second;
}

IndexSample synthetic(std::size_t i, std::size_t j, int plus, int minus) {
  IndexSample s;
  s.i = i;
  s.j = j;
  s.character = Character::one(0.0, 0.0);
  s.kernel.plus.dim = plus;
  s.kernel.minus.dim = minus;
  s.kernel.plus.determinate = s.kernel.minus.determinate = true;
  return s;
}

}  // namespace

TEST(CharacterGrid, ContainsTrivialNodeAtIndexZero) {
  const CharacterGrid g{5, 3};
  EXPECT_EQ(g.size(), 15u);
  EXPECT_EQ(g.lambda(0), 0.0);
  EXPECT_EQ(g.mu(0), 0.0);
  EXPECT_NEAR(g.lambda(4), 8.0 * kPi / 5.0, 1e-15);
  EXPECT_THROW(CharacterGrid({0, 3}).validate(), ConfigError);
}

TEST(Scan, TwoByTwoGivesFourSamplesOfRankOneZero) {
  const auto& s = scan_cached(2);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& x : s) {
    EXPECT_EQ(x.kernel.plus.dim, 1);
    EXPECT_EQ(x.kernel.minus.dim, 0);
    EXPECT_GE(x.kernel.plus.sigma_gap, 1e3);
  }
  EXPECT_EQ(s[0].character, Character::trivial(1));
  EXPECT_EQ(s[1].kernel.lambda, 0.0);
  EXPECT_DOUBLE_EQ(s[1].kernel.mu, kPi);
}

TEST(Scan, RefinementLeavesDimensionsUnchanged) {
  for (std::size_t n : {8u, 16u}) {
    const auto r = check_rank_constancy(scan_cached(n));
    EXPECT_TRUE(r.constant) << n;
    EXPECT_EQ(r.rank_plus, 1);
    EXPECT_EQ(r.rank_minus, 0);
  }
}

TEST(Scan, ResultDoesNotDependOnThreadCount) {
  ScanConfig one, three;
  one.threads = 1;
  three.threads = 3;
  const CharacterGrid g{3, 2};
  std::ostringstream a, b;
  write_scan_csv(a, scan(g, one));
  write_scan_csv(b, scan(g, three));
  EXPECT_EQ(a.str(), b.str());
}

TEST(ScanCsv, HeaderRowsAndSeventeenDigits) {
  std::ostringstream os;
  write_scan_csv(os, scan_cached(2));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "lambda,mu,dim_plus,dim_minus,sigma_min_plus,sigma_gap_plus,sigma_min_minus,sigma_gap_minus");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4u);
  EXPECT_NE(os.str().find("3.1415926535897931"), std::string::npos);
}

TEST(RankConstancy, CorruptedNodeIsNamed) {
  std::vector<IndexSample> s{synthetic(0, 0, 1, 0), synthetic(0, 1, 1, 0), synthetic(1, 0, 2, 0), synthetic(1, 1, 1, 0)};
  const auto r = check_rank_constancy(s);
  EXPECT_FALSE(r.constant);
  ASSERT_EQ(r.offending.size(), 1u);
  EXPECT_EQ(r.offending[0], "(1,0)");
  EXPECT_EQ(r.rank_plus, 1);
}

TEST(RankConstancy, IndeterminateNodeIsOffending) {
  std::vector<IndexSample> s{synthetic(0, 0, 1, 0), synthetic(0, 1, 1, 0)};
  s[1].kernel.plus.determinate = false;
  const auto r = check_rank_constancy(s);
  EXPECT_FALSE(r.constant);
  EXPECT_EQ(r.offending, std::vector<std::string>{"(0,1)"});
}

TEST(RankConstancy, SingleNodeIsConstant) {
  const auto r = check_rank_constancy({synthetic(0, 0, 3, 1)});
  EXPECT_TRUE(r.constant);
  EXPECT_EQ(r.rank_plus, 3);
  EXPECT_EQ(r.rank_minus, 1);
  EXPECT_THROW(check_rank_constancy({}), ConfigError);
}

TEST(PlaquetteChern, ConstantFrameGivesZero) {
  const auto r = plaquette_chern(CharacterGrid{8, 8}, [](std::size_t, std::size_t) { return cplx{1.0, 0.0}; });
  EXPECT_EQ(r.value, 0);
  EXPECT_EQ(r.raw, 0.0);
}

TEST(PlaquetteChern, PureGaugePhaseGivesZero) {
  const CharacterGrid g{8, 8};
  auto theta = [&](std::size_t f) { return g.lambda(f / 8) + 2.0 * g.mu(f % 8); };
  const auto r = plaquette_chern(g, [&](std::size_t a, std::size_t b) { return std::polar(1.0, theta(b) - theta(a)); });
  EXPECT_EQ(r.value, 0);
  EXPECT_NEAR(r.raw, 0.0, 1e-13);
}

// Oracle: (1 / 2 pi) int -i tr(P [d_x P, d_y P]) over the Brillouin torus with
// P the lower-band projector, 200 x 200 midpoint rule: +1 (m = 1), -1 (m = -1), 0 (m = 3).
TEST(PlaquetteChern, TwoBandControlMatchesContinuumCurvature) {
  for (std::size_t n : {8u, 16u, 32u}) {
    const auto a = two_band_chern(CharacterGrid{n, n}, 1.0);
    EXPECT_EQ(a.value, 1) << n;
    EXPECT_NEAR(a.raw, 1.0, 1e-12) << n;
    EXPECT_EQ(two_band_chern(CharacterGrid{n, n}, -1.0).value, -1) << n;
    EXPECT_EQ(two_band_chern(CharacterGrid{n, n}, 3.0).value, 0) << n;
  }
}

TEST(PlaquetteChern, NearlyOrthogonalLinksFailLoudly) {
  EXPECT_THROW(plaquette_chern(CharacterGrid{4, 4}, [](std::size_t a, std::size_t b) { return a == 5 && b == 6 ? cplx{1e-4} : cplx{1.0}; }),
               NumericalError);
  EXPECT_THROW(plaquette_chern(CharacterGrid{1, 4}, [](std::size_t, std::size_t) { return cplx{1.0}; }), ConfigError);
}

TEST(BerryChern, KernelBundleIsRefinementStable) {
  const ZakGrid zak;
  const auto c8 = berry_chern_number(scan_cached(8), CharacterGrid{8, 8}, zak);
  const auto c16 = berry_chern_number(scan_cached(16), CharacterGrid{16, 16}, zak);
  EXPECT_EQ(c8.value, c16.value);
  EXPECT_NEAR(c8.raw, c8.value, 1e-8);
  EXPECT_NEAR(c16.raw, c16.value, 1e-8);
  EXPECT_GT(c8.min_overlap, 0.5);
}

TEST(BerryChern, RequiresRankOne) {
  std::vector<IndexSample> s{synthetic(0, 0, 2, 0), synthetic(0, 1, 2, 0), synthetic(1, 0, 2, 0), synthetic(1, 1, 2, 0)};
  EXPECT_THROW(berry_chern_number(s, CharacterGrid{2, 2}, ZakGrid{}), NumericalError);
}

TEST(Reduction, TrivialFibreOfLatticeSystem) { EXPECT_EQ(reduce_at_trivial(scan_cached(2)), 1); }

TEST(Reduction, SyntheticTrivialFibres) {
  EXPECT_EQ(reduce_at_trivial({synthetic(0, 0, 2, 1)}), 1);
  EXPECT_EQ(reduce_at_trivial({synthetic(0, 0, 0, 0)}), 0);
  auto off = synthetic(0, 0, 1, 0);
  off.character = Character::one(1.0, 0.0);
  EXPECT_THROW(reduce_at_trivial({off}), ConfigError);
}

TEST(Reduction, SpectralIndexIsRobust) {
  EXPECT_EQ(reduced_index_spectral(ScanConfig{}).value, 1);
  ScanConfig coarse;
  coarse.zak.N = 64;
  EXPECT_EQ(reduced_index_spectral(coarse).value, 1);
  ScanConfig loose;
  loose.kernel.gap_threshold = 1e2;
  EXPECT_EQ(reduced_index_spectral(loose).value, 1);
}

TEST(Reduction, TopologicalIndexIsSymplecticVolume) {
  EXPECT_NEAR(chern_density(0.3, 0.7), 1.0, 1e-12);
  const auto one = reduced_index_topological();
  EXPECT_EQ(one.value, 1);
  EXPECT_LT(one.residual, 1e-12);
  EXPECT_EQ(reduced_index_topological(2, 1).value, 2);
  EXPECT_THROW(reduced_index_topological(1, 1, [](double q, double p) { return 1.0 + 0.3 * q * p; }), NumericalError);
}

TEST(Verdict, DefaultsPassWithValueOne) {
  VerdictConfig cfg;
  cfg.grid = {4, 4};
  const auto r = qr_verdict(cfg);
  ASSERT_TRUE(r.pass) << r.cause;
  EXPECT_EQ(*r.common_value, 1);
  EXPECT_EQ(r.chern_status, "computed");
  EXPECT_EQ(r.convention_used, "forced");
}

TEST(Verdict, BrokenCocycleFailsAtPrequant) {
  VerdictConfig cfg;
  cfg.grid = {2, 2};
  cfg.prequant.generator_twist = 1.01;
  const auto r = qr_verdict(cfg);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.cause.rfind("prequant", 0), 0u) << r.cause;
  EXPECT_TRUE(r.samples.empty());
}

TEST(Verdict, SingleTrivialNodeSkipsChern) {
  VerdictConfig cfg;
  cfg.grid = {1, 1};
  const auto r = qr_verdict(cfg);
  ASSERT_TRUE(r.pass) << r.cause;
  EXPECT_FALSE(r.chern.has_value());
  EXPECT_EQ(r.chern_status.rfind("skipped", 0), 0u);
}
