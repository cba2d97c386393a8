#pragma once

#include <functional>
#include <vector>

#include "lrbms/geometry.hpp"
#include "lrbms/grid.hpp"
#include "lrbms/linalg.hpp"

namespace lrbms {

/// Piecewise linear function on the fine triangulation, discontinuous across
/// faces. Coefficients are nodal values, three per triangle, so the global
/// layout is (3 * t + local_vertex).
class DGFunction {
 public:
  DGFunction() = default;
  explicit DGFunction(const NestedGrid& grid)
      : grid_(&grid), coeffs_(3 * grid.num_fine(), 0.0) {}

  const NestedGrid& grid() const { return *grid_; }

  double coeff(int t, int k) const { return coeffs_[3 * static_cast<std::size_t>(t) + k]; }
  double& coeff(int t, int k) { return coeffs_[3 * static_cast<std::size_t>(t) + k]; }

  Vector& coefficients() { return coeffs_; }
  const Vector& coefficients() const { return coeffs_; }

  /// One-sided value taken from triangle t.
  double value(int t, Vec2 x) const {
    const FineTriangle& tri = grid_->fine(t);
    double v = 0.0;
    for (int k = 0; k < 3; ++k)
      v += coeff(t, k) * (1.0 / 3.0 + dot(tri.basis_gradient[k], x - tri.centroid));
    return v;
  }

  /// Broken gradient; constant per triangle.
  Vec2 gradient(int t) const {
    const FineTriangle& tri = grid_->fine(t);
    Vec2 g;
    for (int k = 0; k < 3; ++k)
      g = g + coeff(t, k) * tri.basis_gradient[k];
    return g;
  }

  static DGFunction interpolate(const NestedGrid& grid, const std::function<double(Vec2)>& f) {
    DGFunction u(grid);
    for (std::size_t t = 0; t < grid.num_fine(); ++t)
      for (int k = 0; k < 3; ++k)
        u.coeff(static_cast<int>(t), k) = f(grid.fine(static_cast<int>(t)).corner[k]);
    return u;
  }

  static DGFunction constant(const NestedGrid& grid, double c) {
    DGFunction u(grid);
    for (auto& v : u.coeffs_)
      v = c;
    return u;
  }

  /// Coefficients of the triangles of a coarse element, in fine_elements order.
  Vector restrict_to(int coarse) const {
    const auto& elems = grid_->coarse(coarse).fine_elements;
    Vector block(3 * elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i)
      for (int k = 0; k < 3; ++k)
        block[3 * i + k] = coeff(elems[i], k);
    return block;
  }

  void add_scaled_block(int coarse, const Vector& block, double s) {
    const auto& elems = grid_->coarse(coarse).fine_elements;
    for (std::size_t i = 0; i < elems.size(); ++i)
      for (int k = 0; k < 3; ++k)
        coeff(elems[i], k) += s * block[3 * i + k];
  }

 private:
  const NestedGrid* grid_ = nullptr;
  Vector coeffs_;
};

}  // namespace lrbms
