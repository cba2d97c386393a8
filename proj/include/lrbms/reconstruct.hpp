#pragma once

#include <span>
#include <vector>

#include "lrbms/dg_function.hpp"
#include "lrbms/problem.hpp"

namespace lrbms {

/// Continuous piecewise linear function, stored through its vertex values.
class ConformingFunction {
 public:
  ConformingFunction() = default;
  explicit ConformingFunction(const NestedGrid& grid)
      : grid_(&grid), nodal_(grid.num_vertices(), 0.0) {}

  const NestedGrid& grid() const { return *grid_; }

  double nodal(int v) const { return nodal_[static_cast<std::size_t>(v)]; }
  double& nodal(int v) { return nodal_[static_cast<std::size_t>(v)]; }
  const Vector& nodal_values() const { return nodal_; }

  /// Same function in the discontinuous representation; jumps vanish by
  /// construction.
  DGFunction to_dg() const;

 private:
  const NestedGrid* grid_ = nullptr;
  Vector nodal_;
};

/// Averaging interpolant into the conforming subspace: interior vertices take
/// the arithmetic mean of the one-sided values over their patch, boundary
/// vertices are set to zero to match the homogeneous Dirichlet data.
ConformingFunction oswald_interpolate(const DGFunction& u);

/// Lowest-order Raviart-Thomas-Nedelec field on the fine triangulation. The
/// degree of freedom of a face is its constant normal component along the
/// stored face normal, so the field is H(div)-conforming by construction.
class RTNFunction {
 public:
  RTNFunction() = default;
  explicit RTNFunction(const NestedGrid& grid) : grid_(&grid), dofs_(grid.num_faces(), 0.0) {}

  const NestedGrid& grid() const { return *grid_; }

  double dof(int e) const { return dofs_[static_cast<std::size_t>(e)]; }
  double& dof(int e) { return dofs_[static_cast<std::size_t>(e)]; }
  Vector& dofs() { return dofs_; }
  const Vector& dofs() const { return dofs_; }

  Vec2 value(int t, Vec2 x) const;
  /// Constant per triangle.
  double divergence(int t) const;

 private:
  const NestedGrid* grid_ = nullptr;
  Vector dofs_;
};

/// Diffusive-flux reconstruction for one affine component of the diffusion
/// field. Every face degree of freedom is the mean numerical flux of the
/// discretization, evaluated with the same quadrature as the assembly, so the
/// affine combination of the component fluxes is the reconstruction of the
/// combined operator and coarse conservation holds up to the solver residual.
RTNFunction reconstruct_flux_component(const ParametricProblem& problem, const DGFunction& p,
                                       std::size_t k, double penalty_factor);

/// All components in the order of the diffusion field.
std::vector<RTNFunction> reconstruct_flux_components(const ParametricProblem& problem,
                                                     const DGFunction& p, double penalty_factor);

RTNFunction combine_flux(std::span<const RTNFunction> components, std::span<const double> weights);

/// (div u, 1) - (f, 1) over a coarse element.
double coarse_conservation_residual(const ParametricProblem& problem, const RTNFunction& u,
                                    int coarse);

/// (div u, 1) - (f, 1) over a single fine triangle. Vanishes for fluxes built
/// from solutions of the full fine-level system, since the indicator of every
/// triangle is then an admissible test function; reduced solutions only retain
/// the coarse version.
double fine_conservation_residual(const ParametricProblem& problem, const RTNFunction& u, int t);

/// Residual of the local reconstruction identity on one coarse element, tested
/// with a broken polynomial q: (u, grad q)_T plus the local bilinear form of
/// (p, q) minus the coupling correction that weights the far side of each
/// skeleton face. Zero for q constant on the element; for the indicator of a
/// single interior fine triangle it reproduces the local load (f, q) instead.
double volume_moment_residual(const ParametricProblem& problem, double penalty_factor,
                              const DGFunction& p, const Parameter& mu, const RTNFunction& u,
                              int coarse, const DGFunction& q);

}  // namespace lrbms
