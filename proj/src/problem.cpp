#include "lrbms/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lrbms {

bool ParameterBox::contains(const Parameter& mu, double tol) const {
  if (mu.values.size() != dim())
    return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (mu.values[i] < lower[i] - tol || mu.values[i] > upper[i] + tol)
      return false;
  return true;
}

Parameter ParameterBox::midpoint() const {
  Parameter mu;
  for (std::size_t i = 0; i < dim(); ++i)
    mu.values.push_back(0.5 * (lower[i] + upper[i]));
  return mu;
}

std::vector<Parameter> ParameterBox::corners() const {
  std::vector<Parameter> out;
  const std::size_t count = std::size_t{1} << dim();
  for (std::size_t mask = 0; mask < count; ++mask) {
    Parameter mu;
    for (std::size_t i = 0; i < dim(); ++i)
      mu.values.push_back((mask >> i) & 1 ? upper[i] : lower[i]);
    out.push_back(std::move(mu));
  }
  return out;
}

void AffineScalarField::add_component(ScalarField field, ThetaCoefficient theta) {
  parametric_.push_back({std::move(field), theta});
}

void AffineScalarField::set_fixed_component(ScalarField field) { fixed_ = std::move(field); }

double AffineScalarField::coefficient(std::size_t k, const Parameter& mu) const {
  if (k < parametric_.size())
    return parametric_[k].theta(mu);
  return 1.0;  // fixed component
}

const ScalarField& AffineScalarField::component(std::size_t k) const {
  if (k < parametric_.size())
    return parametric_[k].field;
  return *fixed_;
}

double AffineScalarField::evaluate(const Parameter& mu, Vec2 x) const {
  double v = 0.0;
  for (const auto& c : parametric_)
    v += c.theta(mu) * c.field(x);
  if (fixed_)
    v += (*fixed_)(x);
  if (!(v > 0.0))
    throw std::domain_error("AffineScalarField: non-positive value");
  return v;
}

std::pair<double, double> equivalence_constants(const AffineScalarField& lambda,
                                                const Parameter& mu, const Parameter& mu_bar) {
  if (lambda.num_parametric() == 0)
    throw std::invalid_argument("equivalence_constants: no parametric components");
  double alpha = std::numeric_limits<double>::infinity();
  double gamma = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < lambda.num_parametric(); ++k) {
    const double denom = lambda.theta(k)(mu_bar);
    if (denom == 0.0)
      throw std::domain_error("equivalence_constants: theta vanishes at mu_bar");
    const double ratio = lambda.theta(k)(mu) / denom;
    alpha = std::min(alpha, ratio);
    gamma = std::max(gamma, ratio);
  }
  if (lambda.has_fixed_component()) {
    // The fixed part scales with coefficient one at every parameter.
    alpha = std::min(alpha, 1.0);
    gamma = std::max(gamma, 1.0);
  }
  return {alpha, gamma};
}

DiffusionTensorField DiffusionTensorField::identity(const NestedGrid& grid) {
  DiffusionTensorField f;
  f.per_element.assign(grid.num_fine(), SymMat2::identity());
  return f;
}

DiffusionTensorField DiffusionTensorField::checkerboard(const NestedGrid& grid, double contrast) {
  if (!(contrast > 0.0))
    throw std::invalid_argument("DiffusionTensorField::checkerboard: contrast must be positive");
  DiffusionTensorField f;
  f.per_element.reserve(grid.num_fine());
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const CoarseElement& c = grid.coarse(grid.fine(static_cast<int>(t)).coarse_element);
    const bool high = (c.ix + c.iy) % 2 == 0;
    f.per_element.push_back(high ? SymMat2::identity().scaled(contrast) : SymMat2::identity());
  }
  return f;
}

DiffusionTensorField DiffusionTensorField::from_table(const NestedGrid& grid,
                                                      const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("DiffusionTensorField::from_table: cannot open " + path);
  DiffusionTensorField f;
  f.per_element.assign(grid.num_fine(), SymMat2::identity());
  std::vector<bool> seen(grid.num_fine(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream row(line);
    long index = -1;
    SymMat2 m;
    if (!(row >> index >> m.a11 >> m.a12 >> m.a22))
      throw std::runtime_error("DiffusionTensorField::from_table: malformed line '" + line + "'");
    if (index < 0 || static_cast<std::size_t>(index) >= grid.num_fine())
      throw std::runtime_error("DiffusionTensorField::from_table: element index out of range");
    if (m.eigenvalues().first <= 0.0)
      throw std::runtime_error("DiffusionTensorField::from_table: tensor is not positive definite");
    f.per_element[static_cast<std::size_t>(index)] = m;
    seen[static_cast<std::size_t>(index)] = true;
  }
  for (std::size_t t = 0; t < seen.size(); ++t)
    if (!seen[t])
      throw std::runtime_error("DiffusionTensorField::from_table: missing element " +
                               std::to_string(t));
  return f;
}

double SourceField::value(int t, Vec2 x) const {
  const FineTriangle& tri = grid_->fine(t);
  double v = 0.0;
  for (int k = 0; k < 3; ++k)
    v += nodal(t, k) * (1.0 / 3.0 + dot(tri.basis_gradient[k], x - tri.centroid));
  return v;
}

double SourceField::integrate_fine(int t) const {
  // Linear integrand: the centroid value times the area is exact.
  const FineTriangle& tri = grid_->fine(t);
  return tri.area * (nodal(t, 0) + nodal(t, 1) + nodal(t, 2)) / 3.0;
}

double SourceField::integrate_coarse(int coarse) const {
  double s = 0.0;
  for (int t : grid_->coarse(coarse).fine_elements)
    s += integrate_fine(t);
  return s;
}

double SourceField::l2_norm() const {
  double s = 0.0;
  for (std::size_t t = 0; t < grid_->num_fine(); ++t)
    for (const QuadPoint& q : triangle_rule(*grid_, static_cast<int>(t), 2)) {
      const double v = value(static_cast<int>(t), q.x);
      s += q.weight * v * v;
    }
  return std::sqrt(s);
}

SourceField SourceField::from_function(const NestedGrid& grid,
                                       const std::function<double(Vec2)>& f) {
  SourceField s(grid);
  for (std::size_t t = 0; t < grid.num_fine(); ++t)
    for (int k = 0; k < 3; ++k)
      s.nodal(static_cast<int>(t), k) = f(grid.fine(static_cast<int>(t)).corner[k]);
  return s;
}

SourceField SourceField::constant(const NestedGrid& grid, double c) {
  SourceField s(grid);
  for (std::size_t t = 0; t < grid.num_fine(); ++t)
    for (int k = 0; k < 3; ++k)
      s.nodal(static_cast<int>(t), k) = c;
  return s;
}

ParametricProblem::ParametricProblem(const NestedGrid& grid, AffineScalarField lambda,
                                     DiffusionTensorField kappa, SourceField source,
                                     ParameterBox box)
    : grid_(&grid),
      lambda_(std::move(lambda)),
      kappa_(std::move(kappa)),
      source_(std::move(source)),
      box_(std::move(box)) {
  if (lambda_.num_components() == 0)
    throw std::invalid_argument("ParametricProblem: diffusion field has no components");
  if (kappa_.per_element.size() != grid.num_fine())
    throw std::invalid_argument("ParametricProblem: kappa size does not match the grid");
  if (box_.dim() == 0)
    throw std::invalid_argument("ParametricProblem: empty parameter box");
  for (std::size_t i = 0; i < box_.dim(); ++i)
    if (!(box_.lower[i] <= box_.upper[i]))
      throw std::invalid_argument("ParametricProblem: inverted parameter box");

  std::vector<Parameter> sample = box_.corners();
  sample.push_back(box_.midpoint());
  // Positivity of lambda over the sample, checked at centroids.
  for (const Parameter& mu : sample)
    for (std::size_t t = 0; t < grid.num_fine(); ++t)
      lambda_.evaluate(mu, grid.fine(static_cast<int>(t)).centroid);
  bounds_ = eigen_bounds(*this, sample);

  if (lambda_.has_fixed_component()) {
    const ScalarField& fixed = lambda_.component(lambda_.num_components() - 1);
    for (std::size_t t = 0; t < grid.num_fine() && !fixed_active_; ++t)
      if (fixed(grid.fine(static_cast<int>(t)).centroid) != 0.0)
        fixed_active_ = true;
  }
}

EigenBounds eigen_bounds(const ParametricProblem& problem, std::span<const Parameter> sample) {
  if (sample.empty())
    throw std::invalid_argument("eigen_bounds: empty sample");
  const NestedGrid& grid = problem.grid();
  EigenBounds b;
  b.fine_min.assign(grid.num_fine(), std::numeric_limits<double>::infinity());
  b.fine_max.assign(grid.num_fine(), -std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const auto [emin, emax] = problem.kappa().on(static_cast<int>(t)).eigenvalues();
    const Vec2 c = grid.fine(static_cast<int>(t)).centroid;
    for (const Parameter& mu : sample) {
      const double lam = problem.lambda().evaluate(mu, c);
      b.fine_min[t] = std::min(b.fine_min[t], lam * emin);
      b.fine_max[t] = std::max(b.fine_max[t], lam * emax);
    }
  }
  b.coarse_min.assign(grid.num_coarse(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c)
    for (int t : grid.coarse(static_cast<int>(c)).fine_elements)
      b.coarse_min[c] = std::min(b.coarse_min[c], b.fine_min[static_cast<std::size_t>(t)]);
  return b;
}

namespace {

double component_product_on(const ParametricProblem& problem, std::size_t k, const DGFunction& p,
                            const DGFunction& q, int t) {
  const Vec2 gp = p.gradient(t);
  const Vec2 gq = q.gradient(t);
  const double cell = dot(problem.kappa().on(t).apply(gp), gq);
  if (cell == 0.0)
    return 0.0;
  double lam_int = 0.0;
  for (const QuadPoint& quad : triangle_rule(problem.grid(), t, 2))
    lam_int += quad.weight * problem.lambda().component(k)(quad.x);
  return cell * lam_int;
}

}  // namespace

double energy_product_component(const ParametricProblem& problem, std::size_t k,
                                const DGFunction& p, const DGFunction& q, int coarse) {
  double s = 0.0;
  if (coarse < 0) {
    for (std::size_t t = 0; t < problem.grid().num_fine(); ++t)
      s += component_product_on(problem, k, p, q, static_cast<int>(t));
  } else {
    for (int t : problem.grid().coarse(coarse).fine_elements)
      s += component_product_on(problem, k, p, q, t);
  }
  return s;
}

namespace {

double energy_norm_impl(const ParametricProblem& problem, const Parameter& mu, const DGFunction& q,
                        int coarse) {
  double sq = 0.0;
  for (std::size_t k = 0; k < problem.lambda().num_components(); ++k)
    sq += problem.lambda().coefficient(k, mu) * energy_product_component(problem, k, q, q, coarse);
  if (sq < -1e-12)
    throw std::domain_error("energy_norm: negative square, inconsistent data");
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace

double energy_norm(const ParametricProblem& problem, const Parameter& mu, const DGFunction& q) {
  return energy_norm_impl(problem, mu, q, -1);
}

double local_energy_norm(const ParametricProblem& problem, const Parameter& mu,
                         const DGFunction& q, int coarse) {
  return energy_norm_impl(problem, mu, q, coarse);
}

}  // namespace lrbms
