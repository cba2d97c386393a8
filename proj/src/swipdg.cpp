#include "lrbms/swipdg.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <sstream>

namespace lrbms {

FaceCoupling face_coupling_data(const ParametricProblem& problem, int face_index,
                                double penalty_factor) {
  const FineFace& face = problem.grid().face(face_index);
  const Vec2 n = face.normal;
  const double d_in = dot(n, problem.kappa().on(face.inside).apply(n));
  FaceCoupling cp;
  if (face.boundary) {
    cp.weight_inside = 1.0;
    cp.weight_outside = 0.0;
    cp.penalty = penalty_factor * d_in / face.length;
    return cp;
  }
  const double d_out = dot(n, problem.kappa().on(face.outside).apply(n));
  const double sum = d_in + d_out;
  cp.weight_inside = d_out / sum;
  cp.weight_outside = d_in / sum;
  cp.penalty = penalty_factor * (2.0 * d_in * d_out / sum) / face.length;
  return cp;
}

Vector AssembledOperator::component_weights(const Parameter& mu) const {
  if (mu.values.size() != problem->box().dim())
    throw std::invalid_argument("AssembledOperator: parameter dimension mismatch");
  const AffineScalarField& lambda = problem->lambda();
  Vector w(lambda.num_components());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = lambda.coefficient(k, mu);
  return w;
}

SparseMatrix AssembledOperator::combined(const Parameter& mu) const {
  const Vector w = component_weights(mu);
  std::vector<const SparseMatrix*> terms;
  terms.reserve(components.size());
  for (const SparseMatrix& m : components)
    terms.push_back(&m);
  return SparseMatrix::weighted_sum(terms, w);
}

namespace {

/// Basis value of triangle t at x; the three nodal functions per triangle.
double basis_value(const FineTriangle& tri, int k, Vec2 x) {
  return 1.0 / 3.0 + dot(tri.basis_gradient[k], x - tri.centroid);
}

struct FaceSide {
  int triangle = -1;
  double sign = 1.0;    // orientation of the jump contribution
  double weight = 0.0;  // averaging weight
};

}  // namespace

AssembledOperator assemble(const ParametricProblem& problem, double penalty_factor) {
  if (!(penalty_factor > 0.0))
    throw std::invalid_argument("assemble: penalty factor must be positive");
  const NestedGrid& grid = problem.grid();
  const AffineScalarField& lambda = problem.lambda();
  const std::size_t num_components = lambda.num_components();
  const std::size_t n = 3 * grid.num_fine();

  std::vector<SparseBuilder> builders;
  builders.reserve(num_components);
  for (std::size_t k = 0; k < num_components; ++k)
    builders.emplace_back(n, n);

  // Volume terms. The gradients are constant, so only lambda needs quadrature.
  for (std::size_t ti = 0; ti < grid.num_fine(); ++ti) {
    const int t = static_cast<int>(ti);
    const FineTriangle& tri = grid.fine(t);
    const auto rule = triangle_rule(grid, t, 2);
    std::array<Vec2, 3> kg;
    for (int i = 0; i < 3; ++i)
      kg[i] = problem.kappa().on(t).apply(tri.basis_gradient[i]);
    for (std::size_t k = 0; k < num_components; ++k) {
      double lam_int = 0.0;
      for (const QuadPoint& q : rule)
        lam_int += q.weight * lambda.component(k)(q.x);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
          const double value = lam_int * dot(kg[i], tri.basis_gradient[j]);
          builders[k].add(3 * t + i, 3 * t + j, value);
          if (j != i)
            builders[k].add(3 * t + j, 3 * t + i, value);
        }
    }
  }

  // Face terms over every fine face: consistency, symmetry, penalty. Local
  // entries are evaluated once per unordered pair and mirrored, which keeps
  // each component matrix exactly symmetric in floating point.
  for (std::size_t ei = 0; ei < grid.num_faces(); ++ei) {
    const int e = static_cast<int>(ei);
    const FineFace& face = grid.face(e);
    const FaceCoupling cp = face_coupling_data(problem, e, penalty_factor);
    const auto rule = face_rule(grid, e, 2);

    std::array<FaceSide, 2> sides;
    sides[0] = {face.inside, 1.0, cp.weight_inside};
    int num_sides = 1;
    if (!face.boundary) {
      sides[1] = {face.outside, -1.0, cp.weight_outside};
      num_sides = 2;
    }

    // Weighted normal flux of each basis function, constant along the face.
    std::array<std::array<double, 3>, 2> flux{};
    for (int s = 0; s < num_sides; ++s) {
      const FineTriangle& tri = grid.fine(sides[s].triangle);
      for (int i = 0; i < 3; ++i)
        flux[s][i] =
            sides[s].weight * dot(problem.kappa().on(sides[s].triangle).apply(tri.basis_gradient[i]),
                                  face.normal);
    }
    // Basis traces at the quadrature points.
    std::array<std::array<std::array<double, 3>, 2>, 2> val{};
    for (std::size_t q = 0; q < rule.size(); ++q)
      for (int s = 0; s < num_sides; ++s) {
        const FineTriangle& tri = grid.fine(sides[s].triangle);
        for (int i = 0; i < 3; ++i)
          val[q][s][i] = basis_value(tri, i, rule[q].x);
      }

    for (std::size_t k = 0; k < num_components; ++k) {
      std::array<double, 2> lam{};
      for (std::size_t q = 0; q < rule.size(); ++q)
        lam[q] = lambda.component(k)(rule[q].x);
      const int total = 3 * num_sides;
      for (int p = 0; p < total; ++p) {
        const int si = p / 3, i = p % 3;
        for (int pj = p; pj < total; ++pj) {
          const int sj = pj / 3, j = pj % 3;
          double value = 0.0;
          for (std::size_t q = 0; q < rule.size(); ++q) {
            const double jump_i = sides[si].sign * val[q][si][i];
            const double jump_j = sides[sj].sign * val[q][sj][j];
            value += rule[q].weight * lam[q] *
                     (-flux[si][i] * jump_j - flux[sj][j] * jump_i + cp.penalty * jump_i * jump_j);
          }
          const int gi = 3 * sides[si].triangle + i;
          const int gj = 3 * sides[sj].triangle + j;
          builders[k].add(gi, gj, value);
          if (gj != gi)
            builders[k].add(gj, gi, value);
        }
      }
    }
  }

  AssembledOperator op;
  op.problem = &problem;
  op.penalty_factor = penalty_factor;
  op.components.reserve(num_components);
  for (auto& b : builders)
    op.components.push_back(b.compress());

  // Right-hand side: (f, v). Both factors are linear, the midpoint rule is exact.
  op.rhs.assign(n, 0.0);
  for (std::size_t ti = 0; ti < grid.num_fine(); ++ti) {
    const int t = static_cast<int>(ti);
    const FineTriangle& tri = grid.fine(t);
    for (const QuadPoint& q : triangle_rule(grid, t, 2)) {
      const double f = problem.source().value(t, q.x);
      for (int i = 0; i < 3; ++i)
        op.rhs[3 * static_cast<std::size_t>(t) + static_cast<std::size_t>(i)] +=
            q.weight * f * basis_value(tri, i, q.x);
    }
  }
  return op;
}

DGFunction solve_dg(const AssembledOperator& op, const Parameter& mu, double rel_tol,
                    int max_iter, SolveInfo* info) {
  const SparseMatrix a = op.combined(mu);
  if (max_iter <= 0)
    max_iter = 200 + 30 * static_cast<int>(op.num_dofs());
  const CgResult cg = cg_solve(a, op.rhs, rel_tol, max_iter);
  if (!cg.converged) {
    std::ostringstream msg;
    msg << "dg solve failed after " << cg.iterations << " iterations, relative residual "
        << cg.relative_residual;
    if (cg.indefinite)
      msg << "; the operator looks indefinite, consider a larger penalty factor";
    throw SolverError(msg.str(), cg.iterations, cg.relative_residual);
  }
  if (info) {
    info->iterations = cg.iterations;
    info->relative_residual = cg.relative_residual;
  }
  DGFunction u(op.problem->grid());
  u.coefficients() = cg.x;
  return u;
}

}  // namespace lrbms
