#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "lrbms/config.hpp"
#include "lrbms/estimate.hpp"
#include "lrbms/runner.hpp"
#include "lrbms/swipdg.hpp"

using namespace lrbms;

namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

// Unit square as a single coarse element with two fine triangles, unit
// diffusion tensor, lambda = mu0, source one.
struct UnitSquare {
  NestedGrid grid{1, 1};
  ParametricProblem problem{grid, make_lambda(), DiffusionTensorField::identity(grid),
                            SourceField::constant(grid, 1.0), ParameterBox{{0.5}, {2.0}}};

  static AffineScalarField make_lambda() {
    AffineScalarField lambda;
    lambda.add_component([](Vec2) { return 1.0; }, ThetaCoefficient::parameter(0));
    return lambda;
  }
};

Scenario make(const std::string& preset, int coarse, int fine) {
  RunConfig config = parse_config_text("[problem]\npreset = " + preset + "\n");
  return build_scenario(config, coarse, fine);
}

}  // namespace

TEST_CASE("conforming functions have no nonconformity defect") {
  const NestedGrid grid(2, 2);
  ConformingFunction s(grid);
  for (std::size_t v = 0; v < grid.num_vertices(); ++v) {
    if (grid.boundary_vertex(static_cast<int>(v))) continue;
    const Vec2 x = grid.vertex(static_cast<int>(v));
    s.nodal(static_cast<int>(v)) = std::cos(x.x) * (1.0 + x.y);
  }
  const DGFunction d = nonconformity_defect(s.to_dg());
  for (double c : d.coefficients()) CHECK(std::abs(c) <= 1e-14);
}

TEST_CASE("nonconformity indicator of a one-sided linear bump") {
  UnitSquare sq;
  // All four vertices are boundary vertices, so the averaged interpolant is
  // zero and the defect is the function itself.
  DGFunction u(sq.grid);
  for (int k = 0; k < 3; ++k)
    u.coeff(1, k) = sq.grid.fine(1).corner[static_cast<std::size_t>(k)].x;
  const DGFunction d = nonconformity_defect(u);
  for (std::size_t i = 0; i < u.coefficients().size(); ++i)
    CHECK(d.coefficients()[i] == doctest::Approx(u.coefficients()[i]).epsilon(1e-15));
  // theta(mu_bar) * |grad x|^2 * area of the upper triangle.
  CHECK(eta_nc_sq_local(sq.problem, d, Parameter{{2.0}}, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("residual indicator oracle on the unit square") {
  UnitSquare sq;
  const RTNFunction zero(sq.grid);
  // Poincare constant times squared diameter times the L2 misfit of f = 1.
  const double sq_value = eta_r_sq_local(sq.problem, zero, 0, 1.0);
  CHECK(std::sqrt(sq_value) == doctest::Approx(std::sqrt(2.0) / pi).epsilon(1e-14));
  CHECK(std::sqrt(sq_value) == doctest::Approx(0.45015815807855303).epsilon(1e-14));

  // A flux with divergence equal to the source cancels the misfit.
  RTNFunction matching(sq.grid);
  for (std::size_t e = 0; e < sq.grid.num_faces(); ++e) {
    const FineFace& f = sq.grid.face(static_cast<int>(e));
    matching.dof(static_cast<int>(e)) = 0.5 * dot(f.midpoint, f.normal);
  }
  CHECK(eta_r_sq_local(sq.problem, matching, 0, 1.0) <= 1e-14);

  CHECK_THROWS_AS(eta_r_sq_local(sq.problem, zero, 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(eta_r_sq_local(sq.problem, zero, 0, -1.0), std::invalid_argument);
}

TEST_CASE("diffusive flux indicator vanishes for the matching flux") {
  UnitSquare sq;
  const Parameter mu_hat{{1.5}};
  const DGFunction p = DGFunction::interpolate(sq.grid, [](Vec2 x) { return x.x; });

  RTNFunction u(sq.grid);
  for (std::size_t e = 0; e < sq.grid.num_faces(); ++e)
    u.dof(static_cast<int>(e)) = -1.5 * sq.grid.face(static_cast<int>(e)).normal.x;
  CHECK(std::abs(eta_df_sq_local(sq.problem, p, u, mu_hat, 0)) <= 1e-13);

  // Against the zero flux the indicator reduces to the weighted gradient norm.
  const RTNFunction zero(sq.grid);
  CHECK(eta_df_sq_local(sq.problem, p, zero, mu_hat, 0) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("prefactors collapse at the anchor parameter") {
  const Scenario sc = make("manufactured", 2, 4);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const Parameter mu{{1.25}};
  const DGFunction p = solve_dg(op, mu, 1e-12);
  const EstimatorReport report = eta_global(*sc.problem, p, mu, mu, mu, 8.0);
  CHECK(report.alpha_bar == 1.0);
  CHECK(report.gamma_bar == 1.0);
  CHECK(report.alpha_hat == 1.0);
  CHECK(report.gamma_hat == 1.0);
  CHECK(report.eta ==
        doctest::Approx(report.eta_nc + report.eta_r + report.eta_df).epsilon(1e-15));
  CHECK(report.eta_nc > 0.0);
  CHECK(report.eta_r > 0.0);
  CHECK(report.eta_df > 0.0);
  REQUIRE(report.local.size() == sc.grid->num_coarse());
  double nc = 0.0;
  for (const LocalIndicators& ind : report.local) nc += ind.nc_sq;
  CHECK(std::sqrt(nc) == doctest::Approx(report.eta_nc).epsilon(1e-15));
}

TEST_CASE("estimator bounds the energy error") {
  const Scenario sc = make("manufactured", 2, 8);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const Parameter mu{{1.25}};
  const DGFunction p = solve_dg(op, mu, 1e-12);
  const EstimatorReport report = eta_global(*sc.problem, p, mu, mu, mu, 8.0);
  const double error = exact_energy_error(*sc.problem, p, mu, mu);
  CHECK(report.eta >= error);
  CHECK(report.eta < 10.0 * error);
}

TEST_CASE("combination formula uses the equivalence constants") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const Parameter mu{{0.3}}, mu_bar{{0.7}}, mu_hat{{0.55}};
  const DGFunction p = solve_dg(op, mu, 1e-12);
  const EstimatorReport report = eta_global(*sc.problem, p, mu, mu_bar, mu_hat, 8.0);

  const auto [ab, gb] = equivalence_constants(sc.problem->lambda(), mu, mu_bar);
  const auto [ah, gh] = equivalence_constants(sc.problem->lambda(), mu, mu_hat);
  CHECK(report.alpha_bar == doctest::Approx(ab).epsilon(1e-15));
  CHECK(report.gamma_bar == doctest::Approx(gb).epsilon(1e-15));
  CHECK(report.alpha_hat == doctest::Approx(ah).epsilon(1e-15));
  CHECK(report.gamma_hat == doctest::Approx(gh).epsilon(1e-15));

  const double expected = std::sqrt(gb / ab) * report.eta_nc +
                          report.eta_r / std::sqrt(ab) +
                          std::max(std::sqrt(gh), 1.0 / std::sqrt(ah)) / std::sqrt(ab * ah) *
                              report.eta_df;
  CHECK(report.eta == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("offline blocks reproduce the full estimator") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const NestedGrid& grid = *sc.grid;
  const Parameter mu_hat{{0.55}};

  const DGFunction s1 = solve_dg(op, mu_hat, 1e-12);
  const DGFunction s2 = solve_dg(op, Parameter{{0.15}}, 1e-12);

  std::vector<std::vector<Vector>> basis(grid.num_coarse());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    const int coarse = static_cast<int>(c);
    const std::size_t block = 3 * grid.coarse(coarse).fine_elements.size();
    basis[c].push_back(Vector(block, 1.0));
    basis[c].push_back(s1.restrict_to(coarse));
    basis[c].push_back(s2.restrict_to(coarse));
  }
  const EstimatorOfflineData offline = offline_decompose(*sc.problem, basis, mu_hat, 8.0);

  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Vector> coeffs(grid.num_coarse());
    DGFunction expanded(grid);
    for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
      coeffs[c].resize(basis[c].size());
      for (std::size_t n = 0; n < basis[c].size(); ++n) {
        coeffs[c][n] = 2.0 * uniform01(rng) - 1.0;
        expanded.add_scaled_block(static_cast<int>(c), basis[c][n], coeffs[c][n]);
      }
    }
    const Parameter mu{{0.1 + 0.9 * uniform01(rng)}};
    const Parameter mu_bar{{0.1 + 0.9 * uniform01(rng)}};

    const EstimatorReport direct = eta_global(*sc.problem, expanded, mu, mu_bar, mu_hat, 8.0);
    const EstimatorReport online = eta_online(offline, *sc.problem, coeffs, mu, mu_bar);
    CHECK(online.eta_nc == doctest::Approx(direct.eta_nc).epsilon(1e-9));
    CHECK(online.eta_r == doctest::Approx(direct.eta_r).epsilon(1e-9));
    CHECK(online.eta_df == doctest::Approx(direct.eta_df).epsilon(1e-9));
    CHECK(online.eta == doctest::Approx(direct.eta).epsilon(1e-9));
  }

  std::vector<Vector> short_blocks(grid.num_coarse() - 1);
  CHECK_THROWS_AS(eta_online(offline, *sc.problem, short_blocks, mu_hat, mu_hat),
                  std::invalid_argument);
  std::vector<Vector> wrong_size(grid.num_coarse(), Vector(2, 0.0));
  CHECK_THROWS_AS(eta_online(offline, *sc.problem, wrong_size, mu_hat, mu_hat),
                  std::invalid_argument);
}
