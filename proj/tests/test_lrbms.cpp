#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lrbms/config.hpp"
#include "lrbms/lrbms.hpp"
#include "lrbms/runner.hpp"

using namespace lrbms;

namespace {

Scenario make(const std::string& preset, int coarse, int fine) {
  RunConfig config = parse_config_text("[problem]\npreset = " + preset + "\n");
  return build_scenario(config, coarse, fine);
}

double max_abs_diff(const Vector& a, const Vector& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("seeded model carries the element constants") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const Parameter mu_hat = sc.problem->box().midpoint();
  ReducedModel model = seed_constant_model(*sc.problem, op, mu_hat);

  CHECK(model.coarse_per_dim == 2);
  CHECK(model.fine_per_dim == 2);
  CHECK(model.num_elements() == sc.grid->num_coarse());
  CHECK(model.size() == static_cast<int>(sc.grid->num_coarse()));
  for (std::size_t t = 0; t < model.num_elements(); ++t) {
    REQUIRE(model.basis_size(t) == 1);
    const Vector& b = model.basis[t][0];
    // Scaled constant block: all entries equal and nonzero.
    for (double v : b) CHECK(v == doctest::Approx(b[0]).epsilon(1e-15));
    CHECK(std::abs(b[0]) > 0.0);
  }

  // Unit diagonal of the projected operator at mu_hat: the seeds are
  // normalized in the local product.
  const Vector w = op.component_weights(mu_hat);
  for (std::size_t t = 0; t < model.num_elements(); ++t) {
    double diag = 0.0;
    for (std::size_t k = 0; k < model.components.size(); ++k)
      diag += w[k] * model.components[k](t, t);
    CHECK(diag == doctest::Approx(1.0).epsilon(1e-12));
  }

  const std::vector<int> offsets = model.offsets();
  REQUIRE(offsets.size() == model.num_elements());
  for (std::size_t t = 0; t < offsets.size(); ++t)
    CHECK(offsets[t] == static_cast<int>(t));
}

TEST_CASE("reduced solutions of the seeded model are coarsely conservative") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  ReducedModel model = seed_constant_model(*sc.problem, op, sc.problem->box().midpoint());

  const Parameter mu{{0.35}};
  const Vector red = solve_reduced(model, *sc.problem, mu);
  const DGFunction p = expand_reduced(model, *sc.grid, red);
  const RTNFunction u =
      combine_flux(reconstruct_flux_components(*sc.problem, p, 8.0), op.component_weights(mu));
  const double scale = 1.0 + sc.problem->source().l2_norm();
  for (std::size_t c = 0; c < sc.grid->num_coarse(); ++c)
    CHECK(std::abs(coarse_conservation_residual(*sc.problem, u, static_cast<int>(c))) <=
          1e-10 * scale);
}

TEST_CASE("extension reproduces the snapshot and saturates") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  ReducedModel model = seed_constant_model(*sc.problem, op, sc.problem->box().midpoint());

  const Parameter mu{{0.6}};
  const DGFunction snapshot = solve_dg(op, mu, 1e-13);
  const int grown = extend_model(model, *sc.problem, op, snapshot);
  CHECK(grown == static_cast<int>(sc.grid->num_coarse()));
  for (std::size_t t = 0; t < model.num_elements(); ++t) CHECK(model.basis_size(t) == 2);

  // The enriched space contains the snapshot, so the reduced solution at the
  // snapshot parameter reproduces it.
  const Vector red = solve_reduced(model, *sc.problem, mu);
  const DGFunction p = expand_reduced(model, *sc.grid, red);
  CHECK(max_abs_diff(p.coefficients(), snapshot.coefficients()) <= 1e-8);

  // Re-adding the same snapshot cannot grow any basis.
  CHECK(extend_model(model, *sc.problem, op, snapshot) == 0);
  for (std::size_t t = 0; t < model.num_elements(); ++t) CHECK(model.basis_size(t) == 2);
}

TEST_CASE("reduced galerkin system is consistent with the projection") {
  const Scenario sc = make("manufactured", 2, 4);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  ReducedModel model = seed_constant_model(*sc.problem, op, sc.problem->box().midpoint());
  extend_model(model, *sc.problem, op, solve_dg(op, Parameter{{1.0}}, 1e-12));

  const Parameter mu{{1.8}};
  const Vector red = solve_reduced(model, *sc.problem, mu);
  const DGFunction p = expand_reduced(model, *sc.grid, red);

  // Residual of the full system applied to the expansion, tested against the
  // reduced space: expand each unit coefficient vector and take inner products.
  const SparseMatrix a = op.combined(mu);
  const Vector ap = a * p.coefficients();
  Vector residual(ap.size());
  for (std::size_t i = 0; i < ap.size(); ++i) residual[i] = op.rhs[i] - ap[i];
  const std::vector<int> offsets = model.offsets();
  for (std::size_t t = 0; t < model.num_elements(); ++t)
    for (int n = 0; n < model.basis_size(t); ++n) {
      Vector e(static_cast<std::size_t>(model.size()), 0.0);
      e[static_cast<std::size_t>(offsets[t] + n)] = 1.0;
      const DGFunction phi = expand_reduced(model, *sc.grid, e);
      CHECK(std::abs(dot(phi.coefficients(), residual)) <= 1e-9);
    }
}

TEST_CASE("greedy training history is monotone and reproduces snapshots") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  ReducedModel model = seed_constant_model(*sc.problem, op, sc.problem->box().midpoint());

  const std::vector<Parameter> training = training_set(sc.problem->box(), 6, 7);
  GreedyOptions options;
  options.tolerance = 1e-12;  // unreachable, exercises the stagnation stop
  options.max_extensions = 10;
  const GreedyResult result = greedy_train(model, *sc.problem, op, training, options);

  REQUIRE_FALSE(result.history.empty());
  for (std::size_t s = 0; s + 1 < result.history.size(); ++s) {
    CHECK(result.history[s + 1].max_eta <= result.history[s].max_eta * (1.0 + 1e-12));
    CHECK(result.history[s].size_after >= result.history[s].size_before);
  }
  for (const GreedyStep& step : result.history) {
    CHECK(step.selected >= 0);
    CHECK(step.selected < static_cast<int>(training.size()));
  }

  // Every selected parameter is reproduced by the trained model.
  for (const GreedyStep& step : result.history) {
    const Parameter& mu = training[static_cast<std::size_t>(step.selected)];
    const DGFunction fine = solve_dg(op, mu, 1e-12);
    const DGFunction red = expand_reduced(model, *sc.grid,
                                          solve_reduced(model, *sc.problem, mu));
    CHECK(max_abs_diff(red.coefficients(), fine.coefficients()) <= 1e-8);
  }

  // The estimator blocks are rebuilt at the end of training, so the model can
  // be saved and evaluated online directly.
  const std::vector<Vector> blocks =
      split_coefficients(model, solve_reduced(model, *sc.problem, training[0]));
  const EstimatorReport online =
      eta_online(model.estimator, *sc.problem, blocks, training[0], training[0]);
  CHECK(online.eta > 0.0);

  CHECK_THROWS_AS(greedy_train(model, *sc.problem, op, std::vector<Parameter>{}, options),
                  std::invalid_argument);
}

TEST_CASE("model save and load round trip") {
  const Scenario sc = make("checkerboard", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  const Parameter mu_hat = sc.problem->box().midpoint();
  ReducedModel model = seed_constant_model(*sc.problem, op, mu_hat);
  extend_model(model, *sc.problem, op, solve_dg(op, Parameter{{0.2}}, 1e-12));

  const std::filesystem::path dir = fresh_dir("lrbms_model_roundtrip");
  // Estimator blocks are not built yet, saving must refuse.
  CHECK_THROWS_AS(save_model(model, dir.string()), std::logic_error);

  rebuild_estimator(model, *sc.problem);
  save_model(model, dir.string());
  const ReducedModel loaded = load_model(dir.string());

  CHECK(loaded.coarse_per_dim == model.coarse_per_dim);
  CHECK(loaded.fine_per_dim == model.fine_per_dim);
  CHECK(loaded.penalty_factor == model.penalty_factor);
  CHECK(loaded.mu_hat.values == model.mu_hat.values);
  REQUIRE(loaded.num_elements() == model.num_elements());
  for (std::size_t t = 0; t < model.num_elements(); ++t) {
    REQUIRE(loaded.basis_size(t) == model.basis_size(t));
    for (std::size_t n = 0; n < model.basis[t].size(); ++n)
      CHECK(loaded.basis[t][n] == model.basis[t][n]);  // bitwise
  }
  REQUIRE(loaded.components.size() == model.components.size());
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    REQUIRE(loaded.components[k].rows() == model.components[k].rows());
    for (std::size_t i = 0; i < model.components[k].rows(); ++i)
      for (std::size_t j = 0; j < model.components[k].cols(); ++j)
        CHECK(loaded.components[k](i, j) == model.components[k](i, j));
  }
  CHECK(loaded.rhs == model.rhs);
  CHECK(loaded.estimator.mu_hat.values == model.estimator.mu_hat.values);
  CHECK(loaded.estimator.basis_sizes == model.estimator.basis_sizes);
  REQUIRE(loaded.estimator.elements.size() == model.estimator.elements.size());
  for (std::size_t c = 0; c < model.estimator.elements.size(); ++c) {
    const ElementEstimatorData& a = loaded.estimator.elements[c];
    const ElementEstimatorData& b = model.estimator.elements[c];
    CHECK(a.touching == b.touching);
    CHECK(a.offsets == b.offsets);
    CHECK(a.stacked_size == b.stacked_size);
    CHECK(a.self_offset == b.self_offset);
    CHECK(a.self_size == b.self_size);
    CHECK(a.r_ff == b.r_ff);
    CHECK(a.r_scale == b.r_scale);
    REQUIRE(a.nc.size() == b.nc.size());
    for (std::size_t k = 0; k < b.nc.size(); ++k)
      for (std::size_t i = 0; i < b.nc[k].rows(); ++i)
        for (std::size_t j = 0; j < b.nc[k].cols(); ++j)
          CHECK(a.nc[k](i, j) == b.nc[k](i, j));
  }

  // The loaded model answers online queries identically.
  const Parameter mu{{0.45}};
  const Vector red_a = solve_reduced(model, *sc.problem, mu);
  const Vector red_b = solve_reduced(loaded, *sc.problem, mu);
  CHECK(red_a == red_b);

  std::filesystem::remove_all(dir);
}

TEST_CASE("model loading rejects unsupported formats") {
  const Scenario sc = make("manufactured", 2, 2);
  const AssembledOperator op = assemble(*sc.problem, 8.0);
  ReducedModel model = seed_constant_model(*sc.problem, op, sc.problem->box().midpoint());
  rebuild_estimator(model, *sc.problem);

  const std::filesystem::path dir = fresh_dir("lrbms_model_version");
  save_model(model, dir.string());

  // Bump the format version in place.
  const std::filesystem::path manifest = dir / "manifest.json";
  std::string text;
  {
    std::ifstream in(manifest);
    REQUIRE(in.good());
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const std::string needle = "\"format_version\"";
  const std::size_t pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  const std::size_t colon = text.find(':', pos);
  REQUIRE(colon != std::string::npos);
  std::size_t digit = colon + 1;
  while (digit < text.size() && (text[digit] == ' ')) ++digit;
  REQUIRE(digit < text.size());
  text[digit] = '9';
  {
    std::ofstream out(manifest, std::ios::trunc);
    out << text;
  }
  CHECK_THROWS_AS(load_model(dir.string()), ModelVersionError);

  CHECK_THROWS_AS(load_model((dir / "missing").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}
