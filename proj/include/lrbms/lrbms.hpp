#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrbms/estimate.hpp"
#include "lrbms/swipdg.hpp"

namespace lrbms {

class ModelVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reduced model with one local basis per coarse element. The global reduced
/// space is the direct sum of the local spaces, ordered by element, and the
/// projected operator keeps the affine component structure of the full one.
struct ReducedModel {
  int coarse_per_dim = 0;
  int fine_per_dim = 0;
  double penalty_factor = 0.0;
  Parameter mu_hat;

  /// basis[T][n]: coefficients over the fine-element block of element T.
  std::vector<std::vector<Vector>> basis;
  std::vector<DenseMatrix> components;
  Vector rhs;
  /// Offline estimator blocks; rebuilt by rebuild_estimator, stored with the
  /// model so online evaluation never needs the fine grid.
  EstimatorOfflineData estimator;

  std::size_t num_elements() const { return basis.size(); }
  int basis_size(std::size_t t) const { return static_cast<int>(basis[t].size()); }
  int size() const;
  /// Start of each element's block in the stacked coefficient vector.
  std::vector<int> offsets() const;
};

/// Diagonal blocks of the combined operator at mu_hat, one per coarse element.
/// Principal submatrices of a symmetric positive definite matrix, hence usable
/// as local inner products; in particular the element constants have positive
/// norm through the coupling penalty.
std::vector<SparseMatrix> local_product_matrices(const AssembledOperator& op,
                                                 const Parameter& mu_hat);

/// Model holding exactly the constant function on every coarse element,
/// normalized in the local product. Keeping the constants in every basis makes
/// reduced solutions conservative on the coarse level.
ReducedModel seed_constant_model(const ParametricProblem& problem, const AssembledOperator& op,
                                 const Parameter& mu_hat);

/// Gram-Schmidt extension of each local basis by the element restriction of
/// the snapshot. Accepted vectors are never modified; candidates whose
/// remainder falls below drop_tol times their norm are rejected. Returns the
/// number of elements whose basis grew and rebuilds the projection.
int extend_model(ReducedModel& model, const ParametricProblem& problem,
                 const AssembledOperator& op, const DGFunction& snapshot,
                 double drop_tol = 1e-10);

/// Recomputes the projected components and right-hand side from the bases.
void rebuild_projection(ReducedModel& model, const ParametricProblem& problem,
                        const AssembledOperator& op);

/// Recomputes the offline estimator blocks for the current bases.
void rebuild_estimator(ReducedModel& model, const ParametricProblem& problem);

/// Dense Galerkin solve of the reduced system at mu; returns the stacked
/// coefficient vector.
Vector solve_reduced(const ReducedModel& model, const ParametricProblem& problem,
                     const Parameter& mu);

/// Splits a stacked coefficient vector into per-element blocks.
std::vector<Vector> split_coefficients(const ReducedModel& model, const Vector& stacked);

/// Expands reduced coefficients into the fine discontinuous space.
DGFunction expand_reduced(const ReducedModel& model, const NestedGrid& grid,
                          const Vector& stacked);

struct GreedyOptions {
  double tolerance = 1e-8;
  int max_extensions = 20;
  double drop_tol = 1e-10;
  /// Estimates are taken against mu_bar = mu unless a fixed value is given.
  std::optional<Parameter> fixed_mu_bar;
};

struct GreedyStep {
  int selected = -1;      // training index with the largest estimate
  double max_eta = 0.0;   // largest estimate over the training set
  int size_before = 0;    // reduced dimension when the sweep was evaluated
  int size_after = 0;     // reduced dimension after the extension
};

struct GreedyResult {
  std::vector<GreedyStep> history;
  bool converged = false;
};

/// Estimator-driven greedy training: evaluates the estimator over the training
/// set, solves the fine problem at the worst parameter, and enriches the local
/// bases with that snapshot. Stops at the tolerance, the extension cap, or
/// when a sweep no longer grows any basis. Ties pick the first index. The
/// offline estimator blocks are rebuilt once at the end.
GreedyResult greedy_train(ReducedModel& model, const ParametricProblem& problem,
                          const AssembledOperator& op, std::span<const Parameter> training,
                          const GreedyOptions& options);

/// Writes manifest.json and model.bin into the directory (created if needed).
void save_model(const ReducedModel& model, const std::string& dir);

/// Loads a model saved by save_model. Throws ModelVersionError when the format
/// version is not supported and std::runtime_error on malformed content.
ReducedModel load_model(const std::string& dir);

}  // namespace lrbms
