#include "lrbms/reconstruct.hpp"

#include <stdexcept>

#include "lrbms/swipdg.hpp"

namespace lrbms {

DGFunction ConformingFunction::to_dg() const {
  DGFunction u(*grid_);
  for (std::size_t t = 0; t < grid_->num_fine(); ++t) {
    const FineTriangle& tri = grid_->fine(static_cast<int>(t));
    for (int k = 0; k < 3; ++k)
      u.coeff(static_cast<int>(t), k) = nodal(tri.vertices[static_cast<std::size_t>(k)]);
  }
  return u;
}

ConformingFunction oswald_interpolate(const DGFunction& u) {
  const NestedGrid& grid = u.grid();
  ConformingFunction s(grid);
  for (std::size_t vi = 0; vi < grid.num_vertices(); ++vi) {
    const int v = static_cast<int>(vi);
    if (grid.boundary_vertex(v))
      continue;  // homogeneous Dirichlet trace
    const std::vector<int>& patch = grid.vertex_patch(v);
    double mean = 0.0;
    for (int t : patch)
      mean += u.coeff(t, grid.local_vertex(t, v));
    s.nodal(v) = mean / static_cast<double>(patch.size());
  }
  return s;
}

Vec2 RTNFunction::value(int t, Vec2 x) const {
  const FineTriangle& tri = grid_->fine(t);
  Vec2 v;
  for (int k = 0; k < 3; ++k) {
    const double h = grid_->face(tri.faces[static_cast<std::size_t>(k)]).length;
    const double c = static_cast<double>(tri.face_sign[static_cast<std::size_t>(k)]) *
                     dof(tri.faces[static_cast<std::size_t>(k)]) * h / (2.0 * tri.area);
    v = v + c * (x - tri.corner[static_cast<std::size_t>(k)]);
  }
  return v;
}

double RTNFunction::divergence(int t) const {
  const FineTriangle& tri = grid_->fine(t);
  double d = 0.0;
  for (int k = 0; k < 3; ++k)
    d += static_cast<double>(tri.face_sign[static_cast<std::size_t>(k)]) *
         dof(tri.faces[static_cast<std::size_t>(k)]) *
         grid_->face(tri.faces[static_cast<std::size_t>(k)]).length;
  return d / tri.area;
}

RTNFunction reconstruct_flux_component(const ParametricProblem& problem, const DGFunction& p,
                                       std::size_t k, double penalty_factor) {
  if (k >= problem.lambda().num_components())
    throw std::invalid_argument("reconstruct_flux_component: component index out of range");
  const NestedGrid& grid = problem.grid();
  const ScalarField& lam = problem.lambda().component(k);
  RTNFunction u(grid);
  for (std::size_t ei = 0; ei < grid.num_faces(); ++ei) {
    const int e = static_cast<int>(ei);
    const FineFace& face = grid.face(e);
    const FaceCoupling cp = face_coupling_data(problem, e, penalty_factor);
    const Vec2 flux_in = problem.kappa().on(face.inside).apply(p.gradient(face.inside));
    const double normal_in = dot(flux_in, face.normal);
    double acc = 0.0;
    if (face.boundary) {
      for (const QuadPoint& q : face_rule(grid, e, 2))
        acc += q.weight * lam(q.x) * (-normal_in + cp.penalty * p.value(face.inside, q.x));
    } else {
      const Vec2 flux_out = problem.kappa().on(face.outside).apply(p.gradient(face.outside));
      const double avg =
          cp.weight_inside * normal_in + cp.weight_outside * dot(flux_out, face.normal);
      for (const QuadPoint& q : face_rule(grid, e, 2)) {
        const double jump = p.value(face.inside, q.x) - p.value(face.outside, q.x);
        acc += q.weight * lam(q.x) * (-avg + cp.penalty * jump);
      }
    }
    u.dof(e) = acc / face.length;
  }
  return u;
}

std::vector<RTNFunction> reconstruct_flux_components(const ParametricProblem& problem,
                                                     const DGFunction& p, double penalty_factor) {
  std::vector<RTNFunction> out;
  out.reserve(problem.lambda().num_components());
  for (std::size_t k = 0; k < problem.lambda().num_components(); ++k)
    out.push_back(reconstruct_flux_component(problem, p, k, penalty_factor));
  return out;
}

RTNFunction combine_flux(std::span<const RTNFunction> components,
                         std::span<const double> weights) {
  if (components.empty() || components.size() != weights.size())
    throw std::invalid_argument("combine_flux: empty or mismatched input");
  RTNFunction u(components[0].grid());
  for (std::size_t k = 0; k < components.size(); ++k)
    axpy(weights[k], components[k].dofs(), u.dofs());
  return u;
}

double coarse_conservation_residual(const ParametricProblem& problem, const RTNFunction& u,
                                    int coarse) {
  double r = 0.0;
  for (int t : problem.grid().coarse(coarse).fine_elements)
    r += fine_conservation_residual(problem, u, t);
  return r;
}

double fine_conservation_residual(const ParametricProblem& problem, const RTNFunction& u, int t) {
  return u.divergence(t) * problem.grid().fine(t).area - problem.source().integrate_fine(t);
}

double volume_moment_residual(const ParametricProblem& problem, double penalty_factor,
                              const DGFunction& p, const Parameter& mu, const RTNFunction& u,
                              int coarse, const DGFunction& q) {
  const NestedGrid& grid = problem.grid();
  const AffineScalarField& lambda = problem.lambda();
  double residual = 0.0;

  // (u, grad q) plus the volume part of the local form.
  for (int t : grid.coarse(coarse).fine_elements) {
    const Vec2 gq = q.gradient(t);
    const Vec2 kgp = problem.kappa().on(t).apply(p.gradient(t));
    for (const QuadPoint& qp : triangle_rule(grid, t, 2)) {
      residual += qp.weight * dot(u.value(t, qp.x), gq);
      residual += qp.weight * lambda.evaluate(mu, qp.x) * dot(kgp, gq);
    }
  }

  for (std::size_t ei = 0; ei < grid.num_faces(); ++ei) {
    const int e = static_cast<int>(ei);
    const FineFace& face = grid.face(e);
    const bool inside_in = grid.fine(face.inside).coarse_element == coarse;
    const bool outside_in = !face.boundary && grid.fine(face.outside).coarse_element == coarse;
    if (!inside_in && !outside_in)
      continue;
    const FaceCoupling cp = face_coupling_data(problem, e, penalty_factor);

    if (face.coarse_face < 0) {
      // Strictly inside the element: full coupling form of (p, q).
      const double np_in = dot(problem.kappa().on(face.inside).apply(p.gradient(face.inside)),
                               face.normal);
      const double np_out = dot(problem.kappa().on(face.outside).apply(p.gradient(face.outside)),
                                face.normal);
      const double nq_in = dot(problem.kappa().on(face.inside).apply(q.gradient(face.inside)),
                               face.normal);
      const double nq_out = dot(problem.kappa().on(face.outside).apply(q.gradient(face.outside)),
                                face.normal);
      const double avg_p = cp.weight_inside * np_in + cp.weight_outside * np_out;
      const double avg_q = cp.weight_inside * nq_in + cp.weight_outside * nq_out;
      for (const QuadPoint& qp : face_rule(grid, e, 2)) {
        const double lam = lambda.evaluate(mu, qp.x);
        const double jump_p = p.value(face.inside, qp.x) - p.value(face.outside, qp.x);
        const double jump_q = q.value(face.inside, qp.x) - q.value(face.outside, qp.x);
        residual +=
            qp.weight * lam * (-avg_p * jump_q - avg_q * jump_p + cp.penalty * jump_p * jump_q);
      }
    } else if (!face.boundary) {
      // Skeleton face: correction weighting the far side; the two orientation
      // flips of normal and jump cancel, so the stored orientation serves both
      // incident elements.
      const double omega_far = inside_in ? cp.weight_outside : cp.weight_inside;
      const int t_near = inside_in ? face.inside : face.outside;
      const double nq = dot(problem.kappa().on(t_near).apply(q.gradient(t_near)), face.normal);
      for (const QuadPoint& qp : face_rule(grid, e, 2)) {
        const double jump_p = p.value(face.inside, qp.x) - p.value(face.outside, qp.x);
        residual -= qp.weight * omega_far * lambda.evaluate(mu, qp.x) * nq * jump_p;
      }
    }
    // Boundary faces carry no correction: the far-side weight is zero there.
  }
  return residual;
}

}  // namespace lrbms
