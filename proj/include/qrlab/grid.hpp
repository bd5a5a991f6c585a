#ifndef QRLAB_GRID_HPP
#define QRLAB_GRID_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qrlab/core.hpp"

namespace qrlab {

/// Uniform tensor grid over a rectangle. Axis a has nodes
/// origin[a] + i * step[a], i in [0, count[a]). For plane grids over R^{2n}
/// the axes are ordered q_1, p_1, q_2, p_2, ...
struct GridSpec {
  std::vector<double> origin;
  std::vector<double> step;
  std::vector<std::size_t> count;

  std::size_t dims() const { return count.size(); }

  std::size_t size() const {
    std::size_t s = 1;
    for (auto c : count) s *= c;
    return s;
  }

  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < count.size(); ++a) s *= count[a];
    return s;
  }

  std::size_t index_along(std::size_t flat, std::size_t axis) const {
    return (flat / stride(axis)) % count[axis];
  }

  std::vector<double> coords(std::size_t flat) const {
    std::vector<double> x(dims());
    for (std::size_t a = dims(); a-- > 0;) {
      x[a] = origin[a] + static_cast<double>(flat % count[a]) * step[a];
      flat /= count[a];
    }
    return x;
  }

  double cell_volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < dims(); ++a) v *= count[a] > 1 ? step[a] : 1.0;
    return v;
  }

  void validate() const {
    if (origin.size() != count.size() || step.size() != count.size())
      throw DimensionError("grid descriptor arrays differ in length");
    for (std::size_t a = 0; a < dims(); ++a) {
      if (count[a] == 0) throw ConfigError("grid count must be positive");
      if (count[a] > 1 && !(step[a] > 0.0)) throw ConfigError("grid step must be positive");
    }
  }

  /// Grid of `points` nodes per axis listed in `axes`, centred on `centre`, one node elsewhere.
  static GridSpec local(std::span<const double> centre, std::span<const std::size_t> axes,
                        double h, std::size_t points) {
    GridSpec g;
    g.origin.assign(centre.begin(), centre.end());
    g.step.assign(centre.size(), h);
    g.count.assign(centre.size(), 1);
    for (auto a : axes) {
      g.count[a] = points;
      g.origin[a] = centre[a] - h * static_cast<double>(points / 2);
    }
    return g;
  }
};

/// Complex samples on a GridSpec. `margin[a]` counts the layers at each end
/// of axis a where values are not meaningful (left by derivative stencils).
struct GridFunction {
  GridSpec grid;
  std::vector<cplx> values;
  std::vector<std::size_t> margin;

  GridFunction() = default;
  explicit GridFunction(GridSpec g)
      : grid(std::move(g)), values(grid.size(), cplx{}), margin(grid.dims(), 0) {}

  static GridFunction sample(const GridSpec& g,
                             const std::function<cplx(std::span<const double>)>& fn) {
    g.validate();
    GridFunction out(g);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const auto x = g.coords(i);
      out.values[i] = fn(x);
    }
    return out;
  }

  bool interior(std::size_t flat) const {
    for (std::size_t a = 0; a < grid.dims(); ++a) {
      const auto i = grid.index_along(flat, a);
      if (i < margin[a] || i + margin[a] >= grid.count[a]) return false;
    }
    return true;
  }

  std::size_t centre_index() const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < grid.dims(); ++a) flat += (grid.count[a] / 2) * grid.stride(a);
    return flat;
  }
};

namespace detail {

inline std::span<const double> central_first_weights(int order) {
  static const double w2[] = {0.5};
  static const double w4[] = {2.0 / 3.0, -1.0 / 12.0};
  static const double w6[] = {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
  switch (order) {
    case 2: return w2;
    case 4: return w4;
    case 6: return w6;
    default: throw ConfigError("finite-difference order must be 2, 4 or 6");
  }
}

}  // namespace detail

/// Central-difference derivative along `axis`. The result has the same grid;
/// its margin on `axis` grows by order/2.
inline GridFunction derivative(const GridFunction& f, std::size_t axis, int order = 2) {
  const auto w = detail::central_first_weights(order);
  const std::size_t half = w.size();
  if (axis >= f.grid.dims()) throw DimensionError("derivative axis out of range");
  if (f.grid.count[axis] < 2 * (f.margin[axis] + half) + 1)
    throw NumericalError("grid too coarse for the derivative stencil");
  GridFunction out(f.grid);
  out.margin = f.margin;
  out.margin[axis] += half;
  const std::size_t stride = f.grid.stride(axis);
  const double inv_h = 1.0 / f.grid.step[axis];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const auto ia = f.grid.index_along(i, axis);
    if (ia < half || ia + half >= f.grid.count[axis]) continue;
    cplx acc{};
    for (std::size_t k = 1; k <= half; ++k)
      acc += w[k - 1] * (f.values[i + k * stride] - f.values[i - k * stride]);
    out.values[i] = acc * inv_h;
  }
  return out;
}

}  // namespace qrlab

#endif  // QRLAB_GRID_HPP
