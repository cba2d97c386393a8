#pragma once

#include <span>
#include <vector>

#include "lrbms/dg_function.hpp"
#include "lrbms/linalg.hpp"
#include "lrbms/problem.hpp"
#include "lrbms/reconstruct.hpp"

namespace lrbms {

/// Poincare constant of convex elements, used by the residual indicator.
inline constexpr double poincare_constant = 1.0 / (3.141592653589793238462643383279502884 *
                                                   3.141592653589793238462643383279502884);

/// Squared local indicators of one coarse element.
struct LocalIndicators {
  double nc_sq = 0.0;
  double r_sq = 0.0;
  double df_sq = 0.0;
};

struct EstimatorReport {
  Parameter mu, mu_bar, mu_hat;
  /// Norm equivalence constants of mu against mu_bar and mu_hat.
  double alpha_bar = 1.0, gamma_bar = 1.0;
  double alpha_hat = 1.0, gamma_hat = 1.0;
  std::vector<LocalIndicators> local;
  /// Square roots of the summed local squares.
  double eta_nc = 0.0, eta_r = 0.0, eta_df = 0.0;
  /// Combined upper bound of the mu_bar-energy error.
  double eta = 0.0;
};

/// Nonconformity defect p minus its averaging interpolant.
DGFunction nonconformity_defect(const DGFunction& p);

/// Squared energy seminorm of the defect d over one coarse element, weighted
/// at mu_bar.
double eta_nc_sq_local(const ParametricProblem& problem, const DGFunction& d,
                       const Parameter& mu_bar, int coarse);

/// Squared residual indicator over one coarse element: the Poincare-weighted
/// misfit between the source and the divergence of the reconstructed flux.
/// c_eps is a positive lower eigenvalue bound of the diffusion on the element.
double eta_r_sq_local(const ParametricProblem& problem, const RTNFunction& u, int coarse,
                      double c_eps);

/// Squared diffusive-flux indicator over one coarse element, weighting both the
/// gradient and the reconstructed flux with the diffusion frozen at mu_hat.
double eta_df_sq_local(const ParametricProblem& problem, const DGFunction& p,
                       const RTNFunction& u, const Parameter& mu_hat, int coarse);

/// Full high-dimensional estimator: interpolates, reconstructs the flux at mu,
/// evaluates the three local families, and combines them with the norm
/// equivalence constants into a bound of the mu_bar-energy error.
EstimatorReport eta_global(const ParametricProblem& problem, const DGFunction& p,
                           const Parameter& mu, const Parameter& mu_bar, const Parameter& mu_hat,
                           double penalty_factor);

/// Parameter-independent estimator blocks of one coarse element. Quadratic in
/// the coefficients of the local bases of the element and its vertex
/// neighborhood; evaluation never touches the fine grid.
struct ElementEstimatorData {
  std::vector<int> touching;  // the element and its vertex neighbors, ascending
  std::vector<int> offsets;   // position of each touching block in the stacked vector
  int stacked_size = 0;
  int self_offset = 0;  // position of the element's own block
  int self_size = 0;

  std::vector<DenseMatrix> nc;                // per component, stacked x stacked
  DenseMatrix df_a;                           // self x self
  std::vector<DenseMatrix> df_b;              // per component, self x stacked
  std::vector<std::vector<DenseMatrix>> df_c; // per component pair, stacked x stacked
  double r_ff = 0.0;
  std::vector<Vector> r_fd;                   // per component, stacked
  std::vector<std::vector<DenseMatrix>> r_dd; // per component pair, stacked x stacked
  double r_scale = 0.0;                       // Poincare constant * h_T^2 / c_eps
};

struct EstimatorOfflineData {
  Parameter mu_hat;
  double penalty_factor = 0.0;
  std::vector<int> basis_sizes;  // per coarse element
  std::vector<ElementEstimatorData> elements;
};

/// Precomputes the estimator blocks for the given local bases. basis[T][n] is
/// the n-th basis vector of element T over its fine-element coefficient block.
EstimatorOfflineData offline_decompose(const ParametricProblem& problem,
                                       const std::vector<std::vector<Vector>>& basis,
                                       const Parameter& mu_hat, double penalty_factor);

/// Evaluates the estimator from the offline blocks and reduced coefficients
/// (one block per coarse element). Matches eta_global applied to the expanded
/// high-dimensional function up to rounding; the cost is independent of the
/// fine grid size.
EstimatorReport eta_online(const EstimatorOfflineData& offline, const ParametricProblem& problem,
                           std::span<const Vector> coefficients, const Parameter& mu,
                           const Parameter& mu_bar);

}  // namespace lrbms
