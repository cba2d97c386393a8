#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lrbms/dg_function.hpp"
#include "lrbms/linalg.hpp"
#include "lrbms/problem.hpp"

namespace lrbms {

/// Per-face coupling data of the symmetric weighted interior penalty method.
/// The weights and the penalty are built from the tensor kappa alone, so the
/// scalar factor lambda can stay inside the affine components.
struct FaceCoupling {
  double weight_inside = 1.0;
  double weight_outside = 0.0;
  double penalty = 0.0;
};

/// Weighted-average coupling for one fine face. With the normal diffusivities
/// d_in = n . kappa_in n and d_out = n . kappa_out n, interior faces use
/// weights (d_out, d_in) / (d_in + d_out) and the penalty
/// penalty_factor * 2 d_in d_out / ((d_in + d_out) h_e); boundary faces take
/// the full inside trace and penalty_factor * d_in / h_e.
FaceCoupling face_coupling_data(const ParametricProblem& problem, int face_index,
                                double penalty_factor);

/// Affinely decomposed stiffness matrix and fixed right-hand side. Components
/// follow the order of the diffusion field: parametric parts first, then the
/// fixed part when present. All components share one sparsity pattern.
struct AssembledOperator {
  std::vector<SparseMatrix> components;
  Vector rhs;
  const ParametricProblem* problem = nullptr;
  double penalty_factor = 0.0;

  std::size_t num_dofs() const { return rhs.size(); }

  /// theta_q(mu) per component; the fixed part contributes one.
  Vector component_weights(const Parameter& mu) const;

  SparseMatrix combined(const Parameter& mu) const;
};

/// Assembles the symmetric weighted interior penalty discretization with
/// piecewise linear elements over the fine triangulation. The result depends
/// only on fine-level data, never on the coarse partition. Every component
/// matrix is exactly symmetric: local entries are computed once per unordered
/// index pair and written to both positions.
AssembledOperator assemble(const ParametricProblem& problem, double penalty_factor = 8.0);

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& message, int iterations, double relative_residual)
      : std::runtime_error(message),
        iterations(iterations),
        relative_residual(relative_residual) {}

  int iterations = 0;
  double relative_residual = 0.0;
};

struct SolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradient solve of the combined system at mu. Throws SolverError
/// when the iteration fails to reach rel_tol; an indefinite direction hints at
/// a penalty factor that is too small. max_iter <= 0 selects a size-based cap.
DGFunction solve_dg(const AssembledOperator& op, const Parameter& mu, double rel_tol = 1e-12,
                    int max_iter = 0, SolveInfo* info = nullptr);

}  // namespace lrbms
