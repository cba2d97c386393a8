#include "lrbms/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrbms {

DGFunction nonconformity_defect(const DGFunction& p) {
  const DGFunction s = oswald_interpolate(p).to_dg();
  DGFunction d = p;
  for (std::size_t i = 0; i < d.coefficients().size(); ++i)
    d.coefficients()[i] -= s.coefficients()[i];
  return d;
}

double eta_nc_sq_local(const ParametricProblem& problem, const DGFunction& d,
                       const Parameter& mu_bar, int coarse) {
  double sq = 0.0;
  for (std::size_t k = 0; k < problem.lambda().num_components(); ++k)
    sq += problem.lambda().coefficient(k, mu_bar) *
          energy_product_component(problem, k, d, d, coarse);
  return sq;
}

double eta_r_sq_local(const ParametricProblem& problem, const RTNFunction& u, int coarse,
                      double c_eps) {
  if (!(c_eps > 0.0))
    throw std::invalid_argument("eta_r_sq_local: eigenvalue bound must be positive");
  const NestedGrid& grid = problem.grid();
  double misfit = 0.0;
  for (int t : grid.coarse(coarse).fine_elements) {
    const double div = u.divergence(t);
    for (const QuadPoint& q : triangle_rule(grid, t, 2)) {
      const double r = problem.source().value(t, q.x) - div;
      misfit += q.weight * r * r;
    }
  }
  const double h = grid.coarse(coarse).diameter;
  return poincare_constant * h * h / c_eps * misfit;
}

double eta_df_sq_local(const ParametricProblem& problem, const DGFunction& p,
                       const RTNFunction& u, const Parameter& mu_hat, int coarse) {
  const NestedGrid& grid = problem.grid();
  double sq = 0.0;
  for (int t : grid.coarse(coarse).fine_elements) {
    const Vec2 g = p.gradient(t);
    const SymMat2& kappa = problem.kappa().on(t);
    const double gkg = dot(kappa.apply(g), g);
    for (const QuadPoint& q : triangle_rule(grid, t, 3)) {
      const double lam = problem.lambda().evaluate(mu_hat, q.x);
      const Vec2 ux = u.value(t, q.x);
      sq += q.weight * (lam * gkg + 2.0 * dot(g, ux) + dot(kappa.solve(ux), ux) / lam);
    }
  }
  return sq;
}

namespace {

EstimatorReport combine_report(const ParametricProblem& problem, const Parameter& mu,
                               const Parameter& mu_bar, const Parameter& mu_hat,
                               std::vector<LocalIndicators> local) {
  EstimatorReport report;
  report.mu = mu;
  report.mu_bar = mu_bar;
  report.mu_hat = mu_hat;
  std::tie(report.alpha_bar, report.gamma_bar) =
      equivalence_constants(problem.lambda(), mu, mu_bar);
  std::tie(report.alpha_hat, report.gamma_hat) =
      equivalence_constants(problem.lambda(), mu, mu_hat);
  double nc = 0.0, r = 0.0, df = 0.0;
  for (LocalIndicators& ind : local) {
    ind.nc_sq = std::max(0.0, ind.nc_sq);
    ind.r_sq = std::max(0.0, ind.r_sq);
    ind.df_sq = std::max(0.0, ind.df_sq);
    nc += ind.nc_sq;
    r += ind.r_sq;
    df += ind.df_sq;
  }
  report.local = std::move(local);
  report.eta_nc = std::sqrt(nc);
  report.eta_r = std::sqrt(r);
  report.eta_df = std::sqrt(df);
  report.eta = std::sqrt(report.gamma_bar / report.alpha_bar) * report.eta_nc +
               report.eta_r / std::sqrt(report.alpha_bar) +
               std::max(std::sqrt(report.gamma_hat), 1.0 / std::sqrt(report.alpha_hat)) /
                   std::sqrt(report.alpha_bar * report.alpha_hat) * report.eta_df;
  return report;
}

}  // namespace

EstimatorReport eta_global(const ParametricProblem& problem, const DGFunction& p,
                           const Parameter& mu, const Parameter& mu_bar, const Parameter& mu_hat,
                           double penalty_factor) {
  const NestedGrid& grid = problem.grid();
  const DGFunction d = nonconformity_defect(p);
  const std::vector<RTNFunction> components =
      reconstruct_flux_components(problem, p, penalty_factor);
  Vector weights(components.size());
  for (std::size_t k = 0; k < components.size(); ++k)
    weights[k] = problem.lambda().coefficient(k, mu);
  const RTNFunction u = combine_flux(components, weights);

  const EigenBounds& bounds = problem.default_eigen_bounds();
  std::vector<LocalIndicators> local(grid.num_coarse());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    const int coarse = static_cast<int>(c);
    local[c].nc_sq = eta_nc_sq_local(problem, d, mu_bar, coarse);
    local[c].r_sq = eta_r_sq_local(problem, u, coarse, bounds.coarse_min[c]);
    local[c].df_sq = eta_df_sq_local(problem, p, u, mu_hat, coarse);
  }
  return combine_report(problem, mu, mu_bar, mu_hat, std::move(local));
}

namespace {

std::vector<int> touching_elements(const NestedGrid& grid, int coarse) {
  const CoarseElement& c = grid.coarse(coarse);
  const int n = grid.coarse_per_dim();
  std::vector<int> out;
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      const int i = c.ix + di, j = c.iy + dj;
      if (i >= 0 && i < n && j >= 0 && j < n)
        out.push_back(j * n + i);
    }
  return out;  // ascending by construction
}

double quad_form(const DenseMatrix& m, const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j)
      row += m(i, j) * b[j];
    s += a[i] * row;
  }
  return s;
}

}  // namespace

EstimatorOfflineData offline_decompose(const ParametricProblem& problem,
                                       const std::vector<std::vector<Vector>>& basis,
                                       const Parameter& mu_hat, double penalty_factor) {
  const NestedGrid& grid = problem.grid();
  if (basis.size() != grid.num_coarse())
    throw std::invalid_argument("offline_decompose: one basis per coarse element expected");
  const AffineScalarField& lambda = problem.lambda();
  const std::size_t ncomp = lambda.num_components();

  // Expand every basis function once: its nonconformity defect and the flux
  // reconstruction components, both linear in the function.
  struct Expanded {
    DGFunction phi;
    DGFunction defect;
    std::vector<RTNFunction> flux;
  };
  std::vector<std::vector<Expanded>> expanded(grid.num_coarse());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    expanded[c].reserve(basis[c].size());
    for (const Vector& block : basis[c]) {
      Expanded ex;
      ex.phi = DGFunction(grid);
      ex.phi.add_scaled_block(static_cast<int>(c), block, 1.0);
      ex.defect = nonconformity_defect(ex.phi);
      ex.flux = reconstruct_flux_components(problem, ex.phi, penalty_factor);
      expanded[c].push_back(std::move(ex));
    }
  }

  EstimatorOfflineData data;
  data.mu_hat = mu_hat;
  data.penalty_factor = penalty_factor;
  data.basis_sizes.resize(grid.num_coarse());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c)
    data.basis_sizes[c] = static_cast<int>(basis[c].size());
  data.elements.resize(grid.num_coarse());

  const EigenBounds& bounds = problem.default_eigen_bounds();

  for (std::size_t ci = 0; ci < grid.num_coarse(); ++ci) {
    const int coarse = static_cast<int>(ci);
    ElementEstimatorData& el = data.elements[ci];
    el.touching = touching_elements(grid, coarse);
    el.offsets.resize(el.touching.size());
    int offset = 0;
    for (std::size_t s = 0; s < el.touching.size(); ++s) {
      el.offsets[s] = offset;
      if (el.touching[s] == coarse)
        el.self_offset = offset;
      offset += data.basis_sizes[static_cast<std::size_t>(el.touching[s])];
    }
    el.stacked_size = offset;
    el.self_size = data.basis_sizes[ci];
    const int nst = el.stacked_size;
    const int nself = el.self_size;

    // Stacked view of the expanded functions touching this element.
    std::vector<const Expanded*> stack(static_cast<std::size_t>(nst));
    {
      std::size_t pos = 0;
      for (int tc : el.touching)
        for (const Expanded& ex : expanded[static_cast<std::size_t>(tc)])
          stack[pos++] = &ex;
    }

    const std::vector<int>& elems = grid.coarse(coarse).fine_elements;
    const std::size_t nt = elems.size();

    // Per-triangle data of the stacked functions over this element.
    std::vector<std::vector<Vec2>> dgrad(stack.size(), std::vector<Vec2>(nt));
    std::vector<std::vector<Vec2>> pgrad(stack.size(), std::vector<Vec2>(nt));
    for (std::size_t a = 0; a < stack.size(); ++a)
      for (std::size_t ti = 0; ti < nt; ++ti) {
        dgrad[a][ti] = stack[a]->defect.gradient(elems[ti]);
        pgrad[a][ti] = stack[a]->phi.gradient(elems[ti]);
      }

    // Quadrature caches per triangle.
    std::vector<std::vector<QuadPoint>> rule2(nt), rule3(nt);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      rule2[ti] = triangle_rule(grid, elems[ti], 2);
      rule3[ti] = triangle_rule(grid, elems[ti], 3);
    }

    // Nonconformity blocks: per component, the volume products of the defects.
    el.nc.assign(ncomp, DenseMatrix(nst, nst));
    for (std::size_t k = 0; k < ncomp; ++k) {
      for (std::size_t ti = 0; ti < nt; ++ti) {
        double lam_int = 0.0;
        for (const QuadPoint& q : rule2[ti])
          lam_int += q.weight * lambda.component(k)(q.x);
        const SymMat2& kappa = problem.kappa().on(elems[ti]);
        for (int a = 0; a < nst; ++a) {
          const Vec2 kga = kappa.apply(dgrad[static_cast<std::size_t>(a)][ti]);
          for (int b = a; b < nst; ++b) {
            const double v = lam_int * dot(kga, dgrad[static_cast<std::size_t>(b)][ti]);
            el.nc[k](a, b) += v;
            if (b != a)
              el.nc[k](b, a) += v;
          }
        }
      }
    }

    // Flux values and divergences of the stacked functions at the order-3
    // points, per component.
    const std::size_t nq3 = rule3.empty() || rule3[0].empty() ? 0 : rule3[0].size();
    std::vector<std::vector<std::vector<Vec2>>> uval(
        stack.size(), std::vector<std::vector<Vec2>>(ncomp, std::vector<Vec2>(nt * nq3)));
    std::vector<std::vector<std::vector<double>>> udiv(
        stack.size(), std::vector<std::vector<double>>(ncomp, std::vector<double>(nt)));
    for (std::size_t a = 0; a < stack.size(); ++a)
      for (std::size_t k = 0; k < ncomp; ++k)
        for (std::size_t ti = 0; ti < nt; ++ti) {
          udiv[a][k][ti] = stack[a]->flux[k].divergence(elems[ti]);
          for (std::size_t q = 0; q < nq3; ++q)
            uval[a][k][ti * nq3 + q] = stack[a]->flux[k].value(elems[ti], rule3[ti][q].x);
        }

    // Inverse-diffusion weights at the order-3 points.
    std::vector<double> lam_hat(nt * nq3);
    for (std::size_t ti = 0; ti < nt; ++ti)
      for (std::size_t q = 0; q < nq3; ++q)
        lam_hat[ti * nq3 + q] = lambda.evaluate(mu_hat, rule3[ti][q].x);

    // df_a: gradient Gram of the element's own basis at mu_hat.
    el.df_a = DenseMatrix(nself, nself);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      double lam_int = 0.0;
      for (std::size_t q = 0; q < nq3; ++q)
        lam_int += rule3[ti][q].weight * lam_hat[ti * nq3 + q];
      const SymMat2& kappa = problem.kappa().on(elems[ti]);
      for (int a = 0; a < nself; ++a) {
        const std::size_t sa = static_cast<std::size_t>(el.self_offset + a);
        const Vec2 kga = kappa.apply(pgrad[sa][ti]);
        for (int b = a; b < nself; ++b) {
          const std::size_t sb = static_cast<std::size_t>(el.self_offset + b);
          const double v = lam_int * dot(kga, pgrad[sb][ti]);
          el.df_a(a, b) += v;
          if (b != a)
            el.df_a(b, a) += v;
        }
      }
    }

    // df_b: cross products between the element's gradients and the fluxes.
    el.df_b.assign(ncomp, DenseMatrix(nself, nst));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t ti = 0; ti < nt; ++ti)
        for (int a = 0; a < nself; ++a) {
          const std::size_t sa = static_cast<std::size_t>(el.self_offset + a);
          for (int b = 0; b < nst; ++b) {
            double acc = 0.0;
            for (std::size_t q = 0; q < nq3; ++q)
              acc += rule3[ti][q].weight *
                     dot(pgrad[sa][ti], uval[static_cast<std::size_t>(b)][k][ti * nq3 + q]);
            el.df_b[k](a, b) += acc;
          }
        }

    // df_c: inverse-weighted flux products, one block per component pair.
    el.df_c.assign(ncomp, std::vector<DenseMatrix>(ncomp));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = k; l < ncomp; ++l) {
        DenseMatrix m(nst, nst);
        for (std::size_t ti = 0; ti < nt; ++ti) {
          const SymMat2& kappa = problem.kappa().on(elems[ti]);
          for (int a = 0; a < nst; ++a)
            for (int b = 0; b < nst; ++b) {
              double acc = 0.0;
              for (std::size_t q = 0; q < nq3; ++q) {
                const std::size_t idx = ti * nq3 + q;
                acc += rule3[ti][q].weight / lam_hat[idx] *
                       dot(kappa.solve(uval[static_cast<std::size_t>(a)][k][idx]),
                           uval[static_cast<std::size_t>(b)][l][idx]);
              }
              m(a, b) += acc;
            }
        }
        el.df_c[k][l] = m;
        if (l != k) {
          DenseMatrix mt(nst, nst);
          for (int a = 0; a < nst; ++a)
            for (int b = 0; b < nst; ++b)
              mt(a, b) = m(b, a);
          el.df_c[l][k] = std::move(mt);
        }
      }

    // Residual blocks: expansion of |f - div u|^2 in the coefficients.
    el.r_ff = 0.0;
    std::vector<double> f_int(nt, 0.0);
    for (std::size_t ti = 0; ti < nt; ++ti)
      for (const QuadPoint& q : rule2[ti]) {
        const double f = problem.source().value(elems[ti], q.x);
        el.r_ff += q.weight * f * f;
        f_int[ti] += q.weight * f;
      }
    el.r_fd.assign(ncomp, Vector(static_cast<std::size_t>(nst), 0.0));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (int a = 0; a < nst; ++a)
        for (std::size_t ti = 0; ti < nt; ++ti)
          el.r_fd[k][static_cast<std::size_t>(a)] +=
              f_int[ti] * udiv[static_cast<std::size_t>(a)][k][ti];
    el.r_dd.assign(ncomp, std::vector<DenseMatrix>(ncomp));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l) {
        DenseMatrix m(nst, nst);
        for (int a = 0; a < nst; ++a)
          for (int b = 0; b < nst; ++b) {
            double acc = 0.0;
            for (std::size_t ti = 0; ti < nt; ++ti)
              acc += grid.fine(elems[ti]).area * udiv[static_cast<std::size_t>(a)][k][ti] *
                     udiv[static_cast<std::size_t>(b)][l][ti];
            m(a, b) = acc;
          }
        el.r_dd[k][l] = std::move(m);
      }

    const double h = grid.coarse(coarse).diameter;
    el.r_scale = poincare_constant * h * h / bounds.coarse_min[ci];
  }
  return data;
}

EstimatorReport eta_online(const EstimatorOfflineData& offline, const ParametricProblem& problem,
                           std::span<const Vector> coefficients, const Parameter& mu,
                           const Parameter& mu_bar) {
  if (coefficients.size() != offline.elements.size())
    throw std::invalid_argument("eta_online: coefficient block count mismatch");
  for (std::size_t c = 0; c < coefficients.size(); ++c)
    if (coefficients[c].size() != static_cast<std::size_t>(offline.basis_sizes[c]))
      throw std::invalid_argument("eta_online: coefficient block size mismatch");

  const AffineScalarField& lambda = problem.lambda();
  const std::size_t ncomp = lambda.num_components();
  Vector theta_mu(ncomp), theta_bar(ncomp);
  for (std::size_t k = 0; k < ncomp; ++k) {
    theta_mu[k] = lambda.coefficient(k, mu);
    theta_bar[k] = lambda.coefficient(k, mu_bar);
  }

  std::vector<LocalIndicators> local(offline.elements.size());
  for (std::size_t ci = 0; ci < offline.elements.size(); ++ci) {
    const ElementEstimatorData& el = offline.elements[ci];
    Vector stacked(static_cast<std::size_t>(el.stacked_size));
    for (std::size_t s = 0; s < el.touching.size(); ++s) {
      const Vector& block = coefficients[static_cast<std::size_t>(el.touching[s])];
      std::copy(block.begin(), block.end(), stacked.begin() + el.offsets[s]);
    }
    const Vector self(stacked.begin() + el.self_offset,
                      stacked.begin() + el.self_offset + el.self_size);

    double nc_sq = 0.0;
    for (std::size_t k = 0; k < ncomp; ++k)
      nc_sq += theta_bar[k] * quad_form(el.nc[k], stacked, stacked);
    local[ci].nc_sq = nc_sq;

    double df_sq = quad_form(el.df_a, self, self);
    for (std::size_t k = 0; k < ncomp; ++k)
      df_sq += 2.0 * theta_mu[k] * quad_form(el.df_b[k], self, stacked);
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        df_sq += theta_mu[k] * theta_mu[l] * quad_form(el.df_c[k][l], stacked, stacked);
    local[ci].df_sq = df_sq;

    double misfit = el.r_ff;
    for (std::size_t k = 0; k < ncomp; ++k)
      misfit -= 2.0 * theta_mu[k] * dot(el.r_fd[k], stacked);
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        misfit += theta_mu[k] * theta_mu[l] * quad_form(el.r_dd[k][l], stacked, stacked);
    local[ci].r_sq = el.r_scale * misfit;
  }
  return combine_report(problem, mu, mu_bar, offline.mu_hat, std::move(local));
}

}  // namespace lrbms
