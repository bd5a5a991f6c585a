// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "commands.hpp"

using namespace qrlab;

namespace {

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int failures = 0;

void line(int id, bool ok, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!ok) ++failures;
}

template <class Fn>
void guarded(int id, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    line(id, false, std::string("exception: ") + e.what());
  }
}

const ValidationReport& find(const std::vector<ValidationReport>& v, const std::string& name) {
  for (const auto& r : v)
    if (r.check == name) return r;
  throw std::runtime_error("missing report " + name);
}

index::ScanConfig scan_defaults(unsigned threads) {
  index::ScanConfig s;
  s.threads = threads;
  return s;
}

std::vector<index::IndexSample> scan16;  // shared by criteria 2 and 6

void criterion1() {
  Clock c;
  prequant::PrequantValidationConfig cfg;  // 200 samples, tol 1e-10, step 1e-4
  const auto reps = prequant::validate_prequantisation(cfg);
  const double secs = c.seconds();
  const auto& co = find(reps, "cocycle");
  const auto& mi = find(reps, "metric_invariance");
  const auto& ce = find(reps, "connection_equivariance");
  const auto& cu = find(reps, "curvature");
  const double order = cu.order.value_or(0.0);
  bool ok = co.max_residual < 1e-10 && mi.max_residual < 1e-10 && ce.max_residual < 1e-10 && cu.max_residual < 1e-6 &&
            order >= 1.8 && secs < 5.0;
  for (const auto& r : reps) ok = ok && r.passed;
  line(1, ok,
       "cocycle " + fmt("%.2e", co.max_residual) + ", metric " + fmt("%.2e", mi.max_residual) + ", connection " +
           fmt("%.2e", ce.max_residual) + ", curvature " + fmt("%.2e", cu.max_residual) + " (order " +
           fmt("%.2f", order) + "), " + fmt("%.2f s", secs));
}

void criterion2() {
  const index::CharacterGrid g{16, 16};
  Clock c1;
  scan16 = index::scan(g, scan_defaults(1));
  const double t1 = c1.seconds();
  bool dims = true;
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& s : scan16) {
    dims = dims && s.kernel.determinate() && s.kernel.plus.dim == 1 && s.kernel.minus.dim == 0;
    gap = std::min(gap, s.kernel.plus.sigma_gap);
  }
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned p = std::max(2u, std::min(4u, hw));
  Clock cp;
  const auto par = index::scan(g, scan_defaults(p));
  const double tp = cp.seconds();
  const double speedup = t1 / tp;
  std::ostringstream a, b;
  index::write_scan_csv(a, scan16);
  index::write_scan_csv(b, par);
  const bool same = a.str() == b.str();
  // Near-linear: at least 70% parallel efficiency at p threads.
  const bool scaling = hw >= p && speedup >= 0.7 * p;
  std::string detail = "256 nodes dims (1,0): " + std::string(dims ? "yes" : "no") + ", min gap " + fmt("%.3g", gap) +
                       ", single-thread " + fmt("%.1f s", t1) + ", " + std::to_string(p) + " threads " + fmt("%.1f s", tp) +
                       " (speedup " + fmt("%.2f", speedup) + ", identical output " + (same ? "yes" : "no") + ")";
  if (hw < p) detail += "; scaling study impossible: host exposes " + std::to_string(hw) + " hardware thread(s)";
  line(2, dims && gap >= 1e3 && t1 < 60.0 && same && scaling, detail);
}

void criterion3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  double worst = 0.0;
  std::string used;
  for (int t = 0; t < 10; ++t) {
    const double l = ang(rng), m = ang(rng);
    const auto pts = prequant::random_points(1, 20, 400 + t, -1.0, 1.0);
    const auto conv = twisted::resolve_theta_convention(l, m, pts, 12);
    used = twisted::to_string(conv.used);
    const auto s = twisted::theta_coefficients(l, m, 12, conv.used);
    for (const auto& z : pts) worst = std::max(worst, twisted::theta_dirac_plus_residual(s, z));
  }
  line(3, worst < 1e-6, "max relative D+ residual " + fmt("%.2e", worst) + " over 10 x 20 points, convention " + used);
}

void criterion4() {
  const auto s0 = twisted::theta_coefficients(0.0, 0.0, 12, twisted::ThetaConvention::shifted);
  const auto s1 = twisted::theta_coefficients(kTwoPi, 0.0, 12, twisted::ThetaConvention::shifted);
  const double e3pi = std::exp(3.0 * kPi);
  double worst = 0.0;
  for (const auto& z : prequant::random_points(1, 20, 404, -1.0, 1.0)) {
    const cplx ratio = twisted::evaluate_twisted_section(s1, z) / twisted::evaluate_twisted_section(s0, z);
    worst = std::max(worst, std::abs(ratio - e3pi) / e3pi);
  }
  line(4, worst < 1e-6, "max |s_{2pi,0} / s_{0,0} - e^{3 pi}| / e^{3 pi} = " + fmt("%.2e", worst) + " at 20 points");
}

void criterion5() {
  if (scan16.empty()) throw std::runtime_error("16 x 16 scan unavailable");
  Clock c;
  const int trivial = index::reduce_at_trivial(scan16);
  const auto spectral = index::reduced_index_spectral(scan_defaults(1));
  const auto topo = index::reduced_index_topological();
  const double secs = c.seconds();
  const bool ok = trivial == 1 && spectral.value == 1 && topo.value == 1 && topo.residual < 1e-10 && secs < 10.0;
  line(5, ok,
       "at_trivial " + std::to_string(trivial) + ", spectral " + std::to_string(spectral.value) + ", topological " +
           std::to_string(topo.value) + " (residual " + fmt("%.1e", topo.residual) + "), " + fmt("%.2f s", secs) +
           " beyond the scan");
}

void criterion6() {
  if (scan16.empty()) throw std::runtime_error("16 x 16 scan unavailable");
  const twisted::ZakGrid zak;
  const auto c8 = index::berry_chern_number(index::scan({8, 8}, scan_defaults(0)), {8, 8}, zak);
  const auto c16 = index::berry_chern_number(scan16, {16, 16}, zak);
  const auto c32 = index::berry_chern_number(index::scan({32, 32}, scan_defaults(0)), {32, 32}, zak);
  const auto control = index::two_band_chern({8, 8}, 1.0);
  const bool ok = c8.value == c16.value && c16.value == c32.value && control.value == 1;
  line(6, ok,
       "kernel bundle " + std::to_string(c8.value) + "/" + std::to_string(c16.value) + "/" + std::to_string(c32.value) +
           " at 8/16/32 (raw 32: " + fmt("%.12f", c32.raw) + "), two-band control " + std::to_string(control.value));
}

void criterion7() {
  const auto iso = avg::check_isometry(50, 707);
  const avg::CompactPlaneForm s{avg::gaussian_bump(0.3, 0.2, 1.5, 0.7, 0.0), avg::gaussian_bump(-0.4, 0.5, 2.0, 0.0, 1.1)};
  const auto coarse = avg::check_intertwining(s, 64, 1e-2);
  const auto fine = avg::check_intertwining(s, 128, 1e-3);
  const double order = observed_order(coarse.max_residual, fine.max_residual);
  const bool ok = iso.isometry.max_residual < 1e-8 && iso.positivity.passed && order >= 1.8;
  line(7, ok,
       "isometry " + fmt("%.2e", iso.isometry.max_residual) + " on 50 bumps, " + iso.positivity.note +
           ", intertwining " + fmt("%.2e", fine.max_residual) + " at 1/128 (order " + fmt("%.2f", order) + ")");
}

void criterion8() {
  const auto standard = avg::NormalizingFunction::standard();
  const auto bump = avg::NormalizingFunction::bump(1.0);
  const auto as = avg::check_normalizing_axioms(standard, 1000);
  const auto ab = avg::check_normalizing_axioms(bump, 1000);
  double norm = 0.0, odd = 0.0, conj = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (const auto* b : {&standard, &bump}) {
      const auto k = avg::check_functional_calculus([&](double x) { return (*b)(x); }, 32, seed);
      norm = std::max(norm, k.norm);
      odd = std::max(odd, k.diagonal_block);
      conj = std::max(conj, k.conjugation);
    }
  const bool ok = as.passed && ab.passed && norm <= 1.0 + 1e-12 && odd < 1e-12 && conj < 1e-10;
  line(8, ok,
       "axioms standard " + std::string(as.passed ? "ok" : "bad") + ", bump " + (ab.passed ? "ok" : "bad") +
           "; 64 x 64 graded: max ||F|| " + fmt("%.6f", norm) + ", diagonal blocks " + fmt("%.1e", odd) +
           ", conjugation " + fmt("%.1e", conj));
}

void criterion9() {
  using characters::FiniteAbelianGroup;
  using characters::Subgroup;
  double worst = 0.0;
  bool ok = true;
  auto note = [&](const ValidationReport& r) {
    worst = std::max(worst, r.max_residual);
    ok = ok && r.passed;
  };
  note(characters::check_reduction_in_stages(Subgroup(FiniteAbelianGroup({4}), {{2}}), 100, 91));
  note(characters::check_reduction_in_stages(Subgroup(FiniteAbelianGroup({12}), {{3}}), 100, 92));
  const FiniteAbelianGroup z8({8});
  note(characters::check_reduction_chain(Subgroup(z8, {{2}}), Subgroup(z8, {{4}}), 100, 93));
  std::size_t groups = 0;
  double delta = 0.0;
  auto check_delta = [&](std::vector<std::int64_t> orders) {
    const auto r = characters::check_delta_identities(FiniteAbelianGroup(std::move(orders)));
    delta = std::max(delta, r.max_residual);
    ok = ok && r.passed;
    ++groups;
  };
  for (std::int64_t m = 1; m <= 256; ++m) check_delta({m});
  for (auto orders : std::vector<std::vector<std::int64_t>>{{2, 2}, {2, 4}, {4, 6}, {2, 2, 2}, {3, 5, 7}, {16, 16}, {2, 2, 2, 2, 2, 2, 2, 2}})
    check_delta(orders);
  line(9, ok && worst < 1e-12,
       "reduction identities " + fmt("%.1e", worst) + " (Z/4 <2>, Z/12 <3>, Z/8 chain), delta identities " +
           fmt("%.1e", delta) + " on " + std::to_string(groups) + " groups of order <= 256");
}

void criterion10() {
  cli::RunConfig c;
  c.threads = 1;
  const auto a = cli::cmd_verify_qr(c);
  c.threads = 2;
  const auto b = cli::cmd_verify_qr(c);
  const std::string ja = cli::render(a.report), jb = cli::render(b.report);
  const bool ok = a.code == 0 && ja == jb && a.csv == b.csv && !a.csv.empty();
  line(10, ok,
       "verify-qr JSON " + std::to_string(ja.size()) + " bytes, CSV " + std::to_string(a.csv.size()) +
           " bytes, identical at 1 and 2 threads: " + (ja == jb && a.csv == b.csv ? "yes" : "no"));
}

}  // namespace

int main() {
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, criterion7);
  guarded(8, criterion8);
  guarded(9, criterion9);
  guarded(10, criterion10);
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criterion(s) fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
