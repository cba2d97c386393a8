#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrbms/dg_function.hpp"
#include "lrbms/geometry.hpp"
#include "lrbms/grid.hpp"

namespace lrbms {

struct Parameter {
  std::vector<double> values;
};

struct ParameterBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  bool contains(const Parameter& mu, double tol = 1e-12) const;
  Parameter midpoint() const;
  /// All 2^dim corners, lexicographic in the component bits.
  std::vector<Parameter> corners() const;
};

using ScalarField = std::function<double(Vec2)>;

/// Coefficient restricted to the forms c, mu_i, and c * mu_i.
struct ThetaCoefficient {
  double scale = 1.0;
  int index = -1;  // -1 encodes a constant

  double operator()(const Parameter& mu) const {
    return index < 0 ? scale : scale * mu.values[static_cast<std::size_t>(index)];
  }

  static ThetaCoefficient constant(double c) { return {c, -1}; }
  static ThetaCoefficient parameter(int i, double scale = 1.0) { return {scale, i}; }
};

/// lambda(mu; x) = sum_q theta_q(mu) * lambda_q(x), plus an optional fixed part
/// whose coefficient is pinned to one. Equivalence constants are formed over the
/// parametric components only.
class AffineScalarField {
 public:
  void add_component(ScalarField field, ThetaCoefficient theta);
  void set_fixed_component(ScalarField field);

  std::size_t num_parametric() const { return parametric_.size(); }
  /// Parametric components followed by the fixed one when present.
  std::size_t num_components() const { return parametric_.size() + (fixed_ ? 1 : 0); }
  bool has_fixed_component() const { return fixed_.has_value(); }

  double coefficient(std::size_t k, const Parameter& mu) const;
  const ScalarField& component(std::size_t k) const;
  const ThetaCoefficient& theta(std::size_t k) const { return parametric_[k].theta; }

  /// Throws when the result is not strictly positive.
  double evaluate(const Parameter& mu, Vec2 x) const;

 private:
  struct Component {
    ScalarField field;
    ThetaCoefficient theta;
  };
  std::vector<Component> parametric_;
  std::optional<ScalarField> fixed_;
};

/// (alpha, gamma): min and max of theta_q(mu) / theta_q(mu_bar) over the
/// parametric components; a fixed component contributes the ratio one. Throws
/// when some theta_q(mu_bar) vanishes.
std::pair<double, double> equivalence_constants(const AffineScalarField& lambda,
                                                const Parameter& mu, const Parameter& mu_bar);

/// Piecewise constant SPD tensor, one value per fine triangle.
struct DiffusionTensorField {
  std::vector<SymMat2> per_element;

  const SymMat2& on(int t) const { return per_element[static_cast<std::size_t>(t)]; }

  static DiffusionTensorField identity(const NestedGrid& grid);
  /// contrast * I on coarse cells with even ix + iy, identity elsewhere.
  static DiffusionTensorField checkerboard(const NestedGrid& grid, double contrast);
  /// Text table, one line per fine triangle: index a11 a12 a22.
  static DiffusionTensorField from_table(const NestedGrid& grid, const std::string& path);
};

/// Source term, piecewise linear per fine triangle (nodal values, same layout
/// as DGFunction). Keeping the data piecewise polynomial lets the residual
/// estimator integrate it exactly.
class SourceField {
 public:
  SourceField() = default;
  explicit SourceField(const NestedGrid& grid) : grid_(&grid), values_(3 * grid.num_fine(), 0.0) {}

  double value(int t, Vec2 x) const;
  double nodal(int t, int k) const { return values_[3 * static_cast<std::size_t>(t) + k]; }
  double& nodal(int t, int k) { return values_[3 * static_cast<std::size_t>(t) + k]; }

  /// Exact integral over a fine triangle.
  double integrate_fine(int t) const;
  /// Exact integral over a coarse element.
  double integrate_coarse(int coarse) const;
  double l2_norm() const;

  static SourceField from_function(const NestedGrid& grid, const std::function<double(Vec2)>& f);
  static SourceField constant(const NestedGrid& grid, double c);

 private:
  const NestedGrid* grid_ = nullptr;
  std::vector<double> values_;
};

/// Extremal eigenvalues of lambda(mu) * kappa over a finite parameter sample,
/// evaluated at element centroids.
struct EigenBounds {
  std::vector<double> fine_min;
  std::vector<double> fine_max;
  /// min over the fine triangles of each coarse element
  std::vector<double> coarse_min;
};

class ParametricProblem {
 public:
  ParametricProblem(const NestedGrid& grid, AffineScalarField lambda, DiffusionTensorField kappa,
                    SourceField source, ParameterBox box);

  const NestedGrid& grid() const { return *grid_; }
  const AffineScalarField& lambda() const { return lambda_; }
  const DiffusionTensorField& kappa() const { return kappa_; }
  const SourceField& source() const { return source_; }
  const ParameterBox& box() const { return box_; }
  /// Bounds over the box corners and midpoint, fixed at construction.
  const EigenBounds& default_eigen_bounds() const { return bounds_; }

  /// True when the fixed component is nonzero somewhere; the two-parameter norm
  /// equivalence then fails in general and callers should be warned.
  bool fixed_component_active() const { return fixed_active_; }

 private:
  const NestedGrid* grid_;
  AffineScalarField lambda_;
  DiffusionTensorField kappa_;
  SourceField source_;
  ParameterBox box_;
  EigenBounds bounds_;
  bool fixed_active_ = false;
};

EigenBounds eigen_bounds(const ParametricProblem& problem, std::span<const Parameter> sample);

/// integral of lambda_k (kappa grad p) . grad q, over the whole domain or one
/// coarse element.
double energy_product_component(const ParametricProblem& problem, std::size_t k,
                                const DGFunction& p, const DGFunction& q, int coarse = -1);

double energy_norm(const ParametricProblem& problem, const Parameter& mu, const DGFunction& q);
double local_energy_norm(const ParametricProblem& problem, const Parameter& mu,
                         const DGFunction& q, int coarse);

}  // namespace lrbms
