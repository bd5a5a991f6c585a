#ifndef QRLAB_CORE_HPP
#define QRLAB_CORE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qrlab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Thrown when operand dimensions (complex dimension n, grid sizes) disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for invalid configuration values (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical precondition fails at run time: grid too coarse,
/// truncation tail too large, support too wide, non-integral index.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outcome of one numeric validator. Residuals are maxima over samples,
/// accumulated in sample order so reports are bit-reproducible.
struct ValidationReport {
  ValidationReport() = default;
  ValidationReport(std::string name, double residual, double tolerance)
      : check(std::move(name)), max_residual(residual), tol(tolerance) {}

  std::string check;
  double max_residual = 0.0;
  double tol = 0.0;
  bool passed = false;
  std::size_t samples = 0;
  std::optional<double> order;  // measured convergence order, when a study ran
  std::string note;

  void finalize() { passed = std::isfinite(max_residual) && max_residual < tol; }
};

inline void require_positive_tol(double tol) {
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
}

/// Parallelism degree: explicit request wins, then QRLAB_THREADS, then 1.
inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QRLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

/// Runs fn(i) for i in [0, count). Work is claimed through an atomic counter;
/// callers write results into preallocated slots, so output does not depend
/// on the thread count. The first exception thrown by any task is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const unsigned n = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Convergence order from residuals at step h and h/2.
inline double observed_order(double coarse, double fine) {
  if (!(fine > 0.0) || !(coarse > 0.0)) return 0.0;
  return std::log2(coarse / fine);
}

/// Principal argument in (-pi, pi].
inline double principal_arg(cplx z) {
  double a = std::arg(z);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

}  // namespace qrlab

#endif  // QRLAB_CORE_HPP
