#ifndef QRLAB_DIRAC_PLANE_HPP
#define QRLAB_DIRAC_PLANE_HPP

// Dolbeault-Dirac operator on C^n coupled to the prequantum line bundle,
// acting on (0,*)-forms sum_l f_l dzbar^l sampled on a rectangle.

#include <bit>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qrlab/core.hpp"
#include "qrlab/grid.hpp"
#include "qrlab/prequant.hpp"

namespace qrlab::dirac {

/// Strictly increasing subset of {1..n}, stored as a bit mask (bit j-1 <-> j).
class MultiIndex {
 public:
  MultiIndex() = default;
  MultiIndex(std::size_t n, std::uint32_t mask) : n_(n), mask_(mask) {
    if (n == 0 || n > 16) throw DimensionError("multi-index dimension must be in [1, 16]");
    if (mask >> n) throw DimensionError("multi-index entry exceeds n");
  }
  MultiIndex(std::size_t n, const std::vector<int>& entries) : n_(n) {
    if (n == 0 || n > 16) throw DimensionError("multi-index dimension must be in [1, 16]");
    int prev = 0;
    for (int e : entries) {
      if (e <= prev || e > static_cast<int>(n)) throw DimensionError("multi-index must be strictly increasing in {1..n}");
      mask_ |= 1u << (e - 1);
      prev = e;
    }
  }

  std::size_t n() const { return n_; }
  std::uint32_t mask() const { return mask_; }
  int degree() const { return std::popcount(mask_); }
  bool contains(int j) const { return (mask_ >> (j - 1)) & 1u; }
  MultiIndex with(int j) const { return {n_, mask_ | (1u << (j - 1))}; }
  MultiIndex without(int j) const { return {n_, mask_ & ~(1u << (j - 1))}; }

  std::vector<int> entries() const {
    std::vector<int> e;
    for (std::size_t j = 1; j <= n_; ++j)
      if (contains(static_cast<int>(j))) e.push_back(static_cast<int>(j));
    return e;
  }

  bool operator==(const MultiIndex&) const = default;

 private:
  std::size_t n_ = 1;
  std::uint32_t mask_ = 0;
};

/// (-1)^{#{r in l : r < j}}.
inline int epsilon_sign(int j, const MultiIndex& l) {
  if (j < 1 || j > static_cast<int>(l.n())) throw DimensionError("epsilon_sign: j out of range");
  const std::uint32_t below = l.mask() & ((1u << (j - 1)) - 1u);
  return std::popcount(below) % 2 == 0 ? 1 : -1;
}

/// Form sum_l f_l dzbar^l on a uniform grid over R^{2n} (axes q_1, p_1, ...).
/// components[mask] is empty for a zero coefficient.
struct FormSection {
  std::size_t n = 1;
  GridSpec grid;
  std::vector<std::vector<cplx>> components;
  std::vector<std::size_t> margin;

  FormSection() = default;
  FormSection(std::size_t n_, GridSpec g) : n(n_), grid(std::move(g)), components(std::size_t{1} << n_), margin(2 * n_, 0) {
    if (grid.dims() != 2 * n) throw DimensionError("form grid must have 2n axes");
    grid.validate();
  }

  void set(const MultiIndex& l, std::vector<cplx> values) {
    if (l.n() != n) throw DimensionError("multi-index dimension differs from form dimension");
    if (values.size() != grid.size()) throw DimensionError("component size differs from grid size");
    components[l.mask()] = std::move(values);
  }

  void set(const MultiIndex& l, const std::function<cplx(std::span<const double>)>& fn) {
    set(l, GridFunction::sample(grid, fn).values);
  }

  const std::vector<cplx>* get(const MultiIndex& l) const {
    const auto& c = components[l.mask()];
    return c.empty() ? nullptr : &c;
  }

  GridFunction component(std::uint32_t mask) const {
    GridFunction f(grid);
    f.margin = margin;
    if (!components[mask].empty()) f.values = components[mask];
    return f;
  }

  bool interior(std::size_t flat) const {
    for (std::size_t a = 0; a < grid.dims(); ++a) {
      const auto i = grid.index_along(flat, a);
      if (i < margin[a] || i + margin[a] >= grid.count[a]) return false;
    }
    return true;
  }
};

namespace detail {

// D+ piece: dbar_j f + (i pi / 2) f, with dbar = (d_q + i d_p) / 2.
inline cplx raise_term(cplx dq, cplx dp, cplx f) { return 0.5 * (dq + kI * dp) + kI * (kPi / 2.0) * f; }

// D- piece: -2 d_j f + (i pi - 4 pi i p_j) f, with d = (d_q - i d_p) / 2.
inline cplx lower_term(cplx dq, cplx dp, cplx f, double p) { return -(dq - kI * dp) + kI * (kPi - 4.0 * kPi * p) * f; }

}  // namespace detail

/// D(f dzbar^l) = sum_{j in l} eps_{jl} (-2 df/dz_j + (i pi - 4 pi i p_j) f) dzbar^{l \ j}
///             + sum_{j not in l} eps_{jl} (df/dzbar_j + (i pi / 2) f) dzbar^{l u j}.
inline FormSection dirac_apply(const FormSection& s, int order = 2) {
  FormSection out(s.n, s.grid);
  const std::size_t half = static_cast<std::size_t>(order / 2);
  for (std::size_t a = 0; a < out.margin.size(); ++a) out.margin[a] = s.margin[a] + half;
  const std::size_t npts = s.grid.size();
  for (std::uint32_t mask = 0; mask < s.components.size(); ++mask) {
    if (s.components[mask].empty()) continue;
    const MultiIndex l(s.n, mask);
    const GridFunction f = s.component(mask);
    for (int j = 1; j <= static_cast<int>(s.n); ++j) {
      const auto dq = derivative(f, 2 * (j - 1), order);
      const auto dp = derivative(f, 2 * (j - 1) + 1, order);
      const int eps = epsilon_sign(j, l);
      const bool lowering = l.contains(j);
      const auto target = lowering ? l.without(j) : l.with(j);
      auto& dst = out.components[target.mask()];
      if (dst.empty()) dst.assign(npts, cplx{});
      for (std::size_t i = 0; i < npts; ++i) {
        if (!out.interior(i)) continue;
        cplx term;
        if (lowering) {
          const double p = s.grid.origin[2 * (j - 1) + 1] +
                           static_cast<double>(s.grid.index_along(i, 2 * (j - 1) + 1)) * s.grid.step[2 * (j - 1) + 1];
          term = detail::lower_term(dq.values[i], dp.values[i], f.values[i], p);
        } else {
          term = detail::raise_term(dq.values[i], dp.values[i], f.values[i]);
        }
        dst[i] += static_cast<double>(eps) * term;
      }
    }
  }
  return out;
}

inline void require_n1(const GridFunction& f) {
  if (f.grid.dims() != 2) throw DimensionError("chirality blocks are defined for n = 1 only");
}

/// D+ = d/dzbar + i pi / 2 (n = 1).
inline GridFunction dirac_plus_apply(const GridFunction& f, int order = 2) {
  require_n1(f);
  const auto dq = derivative(f, 0, order);
  const auto dp = derivative(f, 1, order);
  GridFunction out(f.grid);
  out.margin = f.margin;
  for (auto& m : out.margin) m += static_cast<std::size_t>(order / 2);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    if (out.interior(i)) out.values[i] = detail::raise_term(dq.values[i], dp.values[i], f.values[i]);
  return out;
}

/// D- = -2 d/dz + i pi - 4 pi i p (n = 1).
inline GridFunction dirac_minus_apply(const GridFunction& f, int order = 2) {
  require_n1(f);
  const auto dq = derivative(f, 0, order);
  const auto dp = derivative(f, 1, order);
  GridFunction out(f.grid);
  out.margin = f.margin;
  for (auto& m : out.margin) m += static_cast<std::size_t>(order / 2);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!out.interior(i)) continue;
    const double p = f.grid.origin[1] + static_cast<double>(f.grid.index_along(i, 1)) * f.grid.step[1];
    out.values[i] = detail::lower_term(dq.values[i], dp.values[i], f.values[i], p);
  }
  return out;
}

/// Trapezoid pairing weight: metric_weight x Euclidean density, with
/// |dzbar^l|^2 = 2^{|l|} (the metric induced by the Euclidean one on C^n).
struct QuadratureSpec {
  GridSpec grid;
  std::string rule = "trapezoid";
  int stencil_order = 2;
};

inline double form_norm_weight(const MultiIndex& l) { return std::ldexp(1.0, l.degree()); }

/// <s, t> = sum_l 2^{|l|} int s_l conj(t_l) h dV over points interior to both.
inline cplx pairing(const FormSection& s, const FormSection& t) {
  if (s.n != t.n || s.grid.size() != t.grid.size()) throw DimensionError("forms live on different grids");
  cplx acc{};
  const double vol = s.grid.cell_volume();
  std::vector<double> h(s.grid.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = prequant::metric_weight(prequant::PlanePoint::from_coords(s.grid.coords(i)));
  for (std::uint32_t mask = 0; mask < s.components.size(); ++mask) {
    const auto& a = s.components[mask];
    const auto& b = t.components[mask];
    if (a.empty() || b.empty()) continue;
    const double w = form_norm_weight(MultiIndex(s.n, mask));
    cplx part{};
    for (std::size_t i = 0; i < a.size(); ++i)
      if (s.interior(i) && t.interior(i)) part += a[i] * std::conj(b[i]) * h[i];
    acc += w * part;
  }
  return acc * vol;
}

/// Throws unless every component is below `floor` times the peak magnitude
/// within `layers` of the boundary.
inline void require_interior_support(const FormSection& s, std::size_t layers, double floor) {
  double peak = 0.0;
  for (const auto& c : s.components)
    for (const auto& v : c) peak = std::max(peak, std::abs(v));
  floor *= peak;
  for (const auto& c : s.components) {
    if (c.empty()) continue;
    for (std::size_t i = 0; i < c.size(); ++i) {
      bool edge = false;
      for (std::size_t a = 0; a < s.grid.dims(); ++a) {
        const auto k = s.grid.index_along(i, a);
        if (k < layers || k + layers >= s.grid.count[a]) edge = true;
      }
      if (edge && std::abs(c[i]) > floor && floor > 0.0) throw NumericalError("support touches the quadrature boundary");
    }
  }
}

/// |<Ds, t> - <s, Dt>| for compactly supported s, t.
inline double check_formal_symmetry(const FormSection& s, const FormSection& t, const QuadratureSpec& quad,
                                    double floor = 1e-12) {
  if (s.grid.size() != quad.grid.size() || t.grid.size() != quad.grid.size())
    throw DimensionError("forms and quadrature grid differ");
  const std::size_t layers = static_cast<std::size_t>(quad.stencil_order / 2) + 1;
  require_interior_support(s, layers, floor);
  require_interior_support(t, layers, floor);
  const auto ds = dirac_apply(s, quad.stencil_order);
  const auto dt = dirac_apply(t, quad.stencil_order);
  return std::abs(pairing(ds, t) - pairing(s, dt));
}

}  // namespace qrlab::dirac

#endif  // QRLAB_DIRAC_PLANE_HPP
