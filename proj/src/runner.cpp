#include "lrbms/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "lrbms/estimate.hpp"
#include "lrbms/io.hpp"
#include "lrbms/lrbms.hpp"
#include "lrbms/reconstruct.hpp"
#include "lrbms/swipdg.hpp"

namespace lrbms {
namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run metadata goes into '#' comment lines only, so the data rows of repeated
/// runs stay byte-identical.
std::vector<std::string> run_comments(const CommandContext& ctx, double wall_seconds) {
  return {"generated " + timestamp_utc(), "config " + ctx.config_path,
          "wall_seconds " + format_double(wall_seconds)};
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void validate_context(const CommandContext& ctx) {
  if (ctx.config_path.empty()) throw ConfigError("missing configuration file path");
  if (ctx.threads < 1) throw ConfigError("--threads must be at least 1");
  if (ctx.levels < 1 || ctx.levels > 8) throw ConfigError("--levels must be between 1 and 8");
  if (ctx.training_size < 0) throw ConfigError("--training-size must be positive");
  if (ctx.tolerance < 0.0) throw ConfigError("--tol must be non-negative");
}

Parameter resolve_mu(const CommandContext& ctx, const ParameterBox& box) {
  if (!ctx.mu) return box.midpoint();
  if (ctx.mu->size() != box.dim())
    throw ConfigError("--mu has " + std::to_string(ctx.mu->size()) +
                      " entries but the parameter box has dimension " + std::to_string(box.dim()));
  Parameter mu{*ctx.mu};
  if (!box.contains(mu)) throw ConfigError("--mu lies outside the parameter box");
  return mu;
}

std::vector<std::string> mu_column_names(std::size_t dim, const std::string& prefix = "mu") {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

void write_solution_csv(const std::string& path, const NestedGrid& grid, const DGFunction& p,
                        const std::vector<std::string>& comments) {
  CsvTable table;
  table.comments = comments;
  table.columns = {"triangle", "corner", "x", "y", "value"};
  table.rows.reserve(3 * grid.num_fine());
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const FineTriangle& tri = grid.fine(static_cast<int>(t));
    for (int k = 0; k < 3; ++k)
      table.rows.push_back({static_cast<double>(t), static_cast<double>(k), tri.corner[k].x,
                            tri.corner[k].y, p.coeff(static_cast<int>(t), k)});
  }
  write_csv(table, path);
}

void write_flux_csv(const std::string& path, const NestedGrid& grid, const RTNFunction& u,
                    const std::vector<std::string>& comments) {
  CsvTable table;
  table.comments = comments;
  table.columns = {"face", "x", "y", "normal_x", "normal_y", "dof"};
  table.rows.reserve(grid.num_faces());
  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    const FineFace& f = grid.face(static_cast<int>(e));
    table.rows.push_back({static_cast<double>(e), f.midpoint.x, f.midpoint.y, f.normal.x,
                          f.normal.y, u.dof(static_cast<int>(e))});
  }
  write_csv(table, path);
}

void dump_operator(const std::string& dir, const AssembledOperator& op, const Parameter& mu,
                   const std::vector<std::string>& comments) {
  for (std::size_t k = 0; k < op.components.size(); ++k)
    write_matrix_market(op.components[k], join_path(dir, "component_" + std::to_string(k) + ".mtx"));
  write_matrix_market(op.combined(mu), join_path(dir, "combined.mtx"));
  CsvTable rhs;
  rhs.comments = comments;
  rhs.columns = {"dof", "value"};
  for (std::size_t i = 0; i < op.rhs.size(); ++i)
    rhs.rows.push_back({static_cast<double>(i), op.rhs[i]});
  write_csv(rhs, join_path(dir, "rhs.csv"));
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ModelVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_model_version;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver_failure;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  }
}

// ---------------------------------------------------------------------------
// verify checks

struct CheckResult {
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

CheckResult check_grid_geometry(const RunConfig&, const Scenario& sc) {
  const NestedGrid& grid = *sc.grid;
  double defect = 0.0;
  std::string detail;

  double area = 0.0;
  for (std::size_t t = 0; t < grid.num_fine(); ++t) area += grid.fine(static_cast<int>(t)).area;
  defect = std::max(defect, std::abs(area - 1.0));

  double coarse_area = 0.0;
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    const CoarseElement& ce = grid.coarse(static_cast<int>(c));
    coarse_area += ce.side * ce.side;
    double patch = 0.0;
    for (int t : ce.fine_elements) {
      patch += grid.fine(t).area;
      if (grid.fine(t).coarse_element != static_cast<int>(c)) detail = "coarse containment broken";
    }
    defect = std::max(defect, std::abs(patch - ce.side * ce.side));
  }
  defect = std::max(defect, std::abs(coarse_area - 1.0));

  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    const FineFace& f = grid.face(static_cast<int>(e));
    defect = std::max(defect, std::abs(norm(f.normal) - 1.0));
    const Vec2 a = grid.vertex(f.vertices[0]);
    const Vec2 b = grid.vertex(f.vertices[1]);
    defect = std::max(defect, norm(0.5 * (a + b) - f.midpoint));
    defect = std::max(defect, std::abs(norm(b - a) - f.length));
    // The stored normal is perpendicular to the edge.
    defect = std::max(defect, std::abs(dot(f.normal, b - a)) / f.length);
    if (f.boundary != (f.outside < 0)) detail = "boundary flag inconsistent";
    if (!f.boundary && f.inside == f.outside) detail = "degenerate face neighbors";
  }

  for (std::size_t c = 0; c < grid.num_coarse_faces(); ++c) {
    const CoarseFace& cf = grid.coarse_face(static_cast<int>(c));
    double len = 0.0;
    for (int e : cf.fine_faces) {
      len += grid.face(e).length;
      if (grid.face(e).coarse_face != static_cast<int>(c)) detail = "coarse face containment broken";
      defect = std::max(defect, norm(grid.face(e).normal - cf.normal));
    }
    defect = std::max(defect, std::abs(len - cf.length));
  }

  for (std::size_t v = 0; v < grid.num_vertices(); ++v) {
    const Vec2 x = grid.vertex(static_cast<int>(v));
    const bool on_boundary =
        x.x < 1e-14 || x.x > 1.0 - 1e-14 || x.y < 1e-14 || x.y > 1.0 - 1e-14;
    if (grid.boundary_vertex(static_cast<int>(v)) != on_boundary) detail = "boundary vertex flag wrong";
    for (int t : grid.vertex_patch(static_cast<int>(v)))
      if (grid.local_vertex(t, static_cast<int>(v)) < 0) detail = "vertex patch lists a stranger";
  }

  CheckResult r;
  r.value = defect;
  r.threshold = 1e-12;
  r.detail = detail;
  r.passed = detail.empty() && defect <= r.threshold;
  return r;
}

CheckResult check_norm_equivalence(const RunConfig&, const Scenario& sc) {
  const ParametricProblem& problem = *sc.problem;
  std::mt19937_64 rng(20260817ull);
  std::vector<DGFunction> samples;
  for (int s = 0; s < 4; ++s) {
    DGFunction v(*sc.grid);
    for (std::size_t t = 0; t < sc.grid->num_fine(); ++t)
      for (int k = 0; k < 3; ++k)
        v.coeff(static_cast<int>(t), k) = 2.0 * uniform01(rng) - 1.0;
    samples.push_back(std::move(v));
  }

  std::vector<Parameter> anchors = problem.box().corners();
  anchors.push_back(problem.box().midpoint());
  std::vector<std::pair<Parameter, Parameter>> pairs;
  for (const Parameter& mu : anchors)
    for (const Parameter& mu_bar : anchors) pairs.emplace_back(mu, mu_bar);
  for (int s = 0; s < 4; ++s) {
    std::vector<Parameter> random = sample_parameters(problem.box(), 2, rng);
    pairs.emplace_back(random[0], random[1]);
  }

  double violation = 0.0;
  for (const auto& [mu, mu_bar] : pairs) {
    const auto [alpha, gamma] = equivalence_constants(problem.lambda(), mu, mu_bar);
    for (const DGFunction& v : samples) {
      const double sq = std::pow(energy_norm(problem, mu, v), 2);
      const double sq_bar = std::pow(energy_norm(problem, mu_bar, v), 2);
      violation = std::max(violation, (alpha * sq_bar - sq) / std::max(sq, 1e-300));
      violation = std::max(violation, (sq - gamma * sq_bar) / std::max(sq, 1e-300));
    }
  }

  CheckResult r;
  r.value = violation;
  r.threshold = 1e-12;
  r.passed = violation <= r.threshold;
  return r;
}

CheckResult check_coercivity(const RunConfig& config, const Scenario& sc) {
  const AssembledOperator op = assemble(*sc.problem, config.penalty_factor);
  std::mt19937_64 rng(414243ull);
  std::vector<Parameter> anchors = sc.problem->box().corners();
  anchors.push_back(sc.problem->box().midpoint());

  double max_defect = 0.0;
  double min_rayleigh = std::numeric_limits<double>::infinity();
  for (const Parameter& mu : anchors) {
    const SparseMatrix a = op.combined(mu);
    max_defect = std::max(max_defect, a.symmetry_defect());
    for (int s = 0; s < 5; ++s) {
      Vector x(op.num_dofs());
      for (double& xi : x) xi = 2.0 * uniform01(rng) - 1.0;
      const Vector ax = a * x;
      min_rayleigh = std::min(min_rayleigh, dot(x, ax) / dot(x, x));
    }
  }

  CheckResult r;
  r.value = min_rayleigh;
  r.threshold = 0.0;
  r.passed = max_defect == 0.0 && min_rayleigh > 0.0;
  if (max_defect != 0.0) r.detail = "symmetry defect " + format_double(max_defect);
  return r;
}

double max_entry_difference(const SparseMatrix& a, const SparseMatrix& b) {
  if (!a.same_pattern(b)) return std::numeric_limits<double>::infinity();
  double diff = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto va = a.row_values(i);
    const auto vb = b.row_values(i);
    for (std::size_t j = 0; j < va.size(); ++j) diff = std::max(diff, std::abs(va[j] - vb[j]));
  }
  return diff;
}

/// The assembled operator only sees fine entities, so every coarse partition of
/// the same fine mesh must produce bitwise identical matrices. The diffusion
/// tensor is transplanted between the scenarios because preset tensors may
/// depend on the coarse partition.
CheckResult check_single_level_collapse(const RunConfig& config, const Scenario& sc) {
  const AssembledOperator reference = assemble(*sc.problem, config.penalty_factor);
  const int cells = sc.grid->cells_per_dim();

  double diff = 0.0;
  std::string detail;
  for (int a = 1; a <= cells; ++a) {
    if (cells % a != 0) continue;
    const int b = cells / a;
    const Scenario alt = build_scenario(config, a, b);
    DiffusionTensorField kappa;
    kappa.per_element = sc.problem->kappa().per_element;
    const ParametricProblem transplanted(*alt.grid, alt.problem->lambda(), kappa,
                                         alt.problem->source(), alt.problem->box());
    const AssembledOperator other = assemble(transplanted, config.penalty_factor);
    if (other.components.size() != reference.components.size()) {
      detail = "component count differs";
      continue;
    }
    for (std::size_t k = 0; k < reference.components.size(); ++k)
      diff = std::max(diff, max_entry_difference(reference.components[k], other.components[k]));
    for (std::size_t i = 0; i < reference.rhs.size(); ++i)
      diff = std::max(diff, std::abs(reference.rhs[i] - other.rhs[i]));
  }

  CheckResult r;
  r.value = diff;
  r.threshold = 0.0;
  r.detail = detail;
  r.passed = detail.empty() && diff == 0.0;
  return r;
}

CheckResult check_oswald_conformity(const RunConfig&, const Scenario& sc) {
  const NestedGrid& grid = *sc.grid;
  std::mt19937_64 rng(777ull);
  DGFunction v(grid);
  for (std::size_t t = 0; t < grid.num_fine(); ++t)
    for (int k = 0; k < 3; ++k) v.coeff(static_cast<int>(t), k) = 2.0 * uniform01(rng) - 1.0;

  const ConformingFunction s = oswald_interpolate(v);
  const DGFunction sd = s.to_dg();
  double scale = 1.0;
  for (double c : s.nodal_values()) scale = std::max(scale, std::abs(c));

  double defect = 0.0;
  for (std::size_t e = 0; e < grid.num_faces(); ++e) {
    const FineFace& f = grid.face(static_cast<int>(e));
    for (const QuadPoint& q : face_rule(grid, static_cast<int>(e), 2)) {
      const double inside = sd.value(f.inside, q.x);
      if (f.boundary)
        defect = std::max(defect, std::abs(inside));
      else
        defect = std::max(defect, std::abs(inside - sd.value(f.outside, q.x)));
    }
  }

  const ConformingFunction again = oswald_interpolate(sd);
  for (std::size_t i = 0; i < again.nodal_values().size(); ++i)
    defect = std::max(defect, std::abs(again.nodal_values()[i] - s.nodal_values()[i]));

  CheckResult r;
  r.value = defect;
  r.threshold = 1e-13 * scale;
  r.passed = defect <= r.threshold;
  return r;
}

CheckResult check_conservation_dg(const RunConfig& config, const Scenario& sc) {
  const ParametricProblem& problem = *sc.problem;
  const AssembledOperator op = assemble(problem, config.penalty_factor);
  const Parameter mu = problem.box().midpoint();
  const DGFunction p = solve_dg(op, mu, config.cg_tolerance, config.cg_max_iterations);

  const std::vector<RTNFunction> components =
      reconstruct_flux_components(problem, p, config.penalty_factor);
  const RTNFunction u = combine_flux(components, op.component_weights(mu));

  double residual = 0.0;
  for (std::size_t c = 0; c < sc.grid->num_coarse(); ++c)
    residual = std::max(residual,
                        std::abs(coarse_conservation_residual(problem, u, static_cast<int>(c))));
  for (std::size_t t = 0; t < sc.grid->num_fine(); ++t)
    residual =
        std::max(residual, std::abs(fine_conservation_residual(problem, u, static_cast<int>(t))));

  CheckResult r;
  r.value = residual;
  r.threshold = 1e-10 * (1.0 + problem.source().l2_norm());
  r.passed = residual <= r.threshold;
  return r;
}

CheckResult check_offline_online_equality(const RunConfig& config, const Scenario& sc) {
  const ParametricProblem& problem = *sc.problem;
  const AssembledOperator op = assemble(problem, config.penalty_factor);
  const Parameter mu_hat = resolve_mu_hat(config.estimator, problem.box());

  ReducedModel model = seed_constant_model(problem, op, mu_hat);
  extend_model(model, problem, op,
               solve_dg(op, mu_hat, config.cg_tolerance, config.cg_max_iterations));
  extend_model(model, problem, op,
               solve_dg(op, problem.box().corners().front(), config.cg_tolerance,
                        config.cg_max_iterations));
  rebuild_estimator(model, problem);

  std::mt19937_64 rng(90125ull);
  double max_rel = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Vector stacked(static_cast<std::size_t>(model.size()));
    for (double& c : stacked) c = 2.0 * uniform01(rng) - 1.0;
    const Parameter mu = sample_parameters(problem.box(), 1, rng).front();

    const std::vector<Vector> blocks = split_coefficients(model, stacked);
    const EstimatorReport online = eta_online(model.estimator, problem, blocks, mu, mu);
    const DGFunction expanded = expand_reduced(model, *sc.grid, stacked);
    const EstimatorReport direct =
        eta_global(problem, expanded, mu, mu, mu_hat, config.penalty_factor);

    const auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
    };
    max_rel = std::max({max_rel, rel(online.eta_nc, direct.eta_nc), rel(online.eta_r, direct.eta_r),
                        rel(online.eta_df, direct.eta_df), rel(online.eta, direct.eta)});
  }

  CheckResult r;
  r.value = max_rel;
  r.threshold = 1e-9;
  r.passed = max_rel <= r.threshold;
  return r;
}

CheckResult check_galerkin_orthogonality(const RunConfig& config, const Scenario& sc) {
  const ParametricProblem& problem = *sc.problem;
  const AssembledOperator op = assemble(problem, config.penalty_factor);
  const Parameter mu = problem.box().midpoint();
  const DGFunction p = solve_dg(op, mu, config.cg_tolerance, config.cg_max_iterations);

  const Vector ap = op.combined(mu) * p.coefficients();
  Vector residual = op.rhs;
  axpy(-1.0, ap, residual);
  const double fine_rel = norm2(residual) / (1.0 + norm2(op.rhs));

  const Parameter mu_hat = resolve_mu_hat(config.estimator, problem.box());
  ReducedModel model = seed_constant_model(problem, op, mu_hat);
  extend_model(model, problem, op, p);
  const Vector c = solve_reduced(model, problem, mu);
  const Vector weights = op.component_weights(mu);
  Vector reduced_residual = model.rhs;
  const int n = model.size();
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < model.components.size(); ++k)
      for (int j = 0; j < n; ++j) row += weights[k] * model.components[k](i, j) * c[j];
    reduced_residual[static_cast<std::size_t>(i)] -= row;
  }
  const double reduced_rel = norm2(reduced_residual) / (1.0 + norm2(model.rhs));

  CheckResult r;
  r.value = std::max(fine_rel, reduced_rel);
  r.threshold = 10.0 * config.cg_tolerance + 1e-12;
  r.passed = r.value <= r.threshold;
  return r;
}

}  // namespace

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Parameter> sample_parameters(const ParameterBox& box, int count,
                                         std::mt19937_64& rng) {
  std::vector<Parameter> sample;
  sample.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Parameter mu;
    mu.values.reserve(box.dim());
    for (std::size_t d = 0; d < box.dim(); ++d)
      mu.values.push_back(box.lower[d] + (box.upper[d] - box.lower[d]) * uniform01(rng));
    sample.push_back(std::move(mu));
  }
  return sample;
}

std::vector<Parameter> training_set(const ParameterBox& box, int size, unsigned long long seed) {
  if (size < 1) throw ConfigError("training set size must be positive");
  if (box.dim() == 1) {
    std::vector<Parameter> set;
    if (size == 1) return {box.midpoint()};
    for (int i = 0; i < size; ++i) {
      const double s = static_cast<double>(i) / (size - 1);
      set.push_back(Parameter{{box.lower[0] + s * (box.upper[0] - box.lower[0])}});
    }
    return set;
  }
  std::mt19937_64 rng(seed);
  return sample_parameters(box, size, rng);
}

bool has_exact_solution(const RunConfig& config) {
  return config.lambda_components == std::vector<std::string>{"one"} &&
         config.lambda_thetas.size() == 1 && config.lambda_thetas[0].index == 0 &&
         config.lambda_thetas[0].scale == 1.0 && config.lambda_fixed == "none" &&
         config.kappa == "identity" && config.source == "sinsin";
}

double exact_energy_norm(const Parameter& mu) {
  return pi / std::sqrt(2.0 * mu.values.at(0));
}

double exact_energy_error(const ParametricProblem& problem, const DGFunction& p_h,
                          const Parameter& mu, const Parameter& mu_bar) {
  const NestedGrid& grid = problem.grid();
  const double scale = 1.0 / mu.values.at(0);
  double sq = 0.0;
  for (std::size_t t = 0; t < grid.num_fine(); ++t) {
    const Vec2 gh = p_h.gradient(static_cast<int>(t));
    const SymMat2& kappa = problem.kappa().on(static_cast<int>(t));
    for (const QuadPoint& q : triangle_rule(grid, static_cast<int>(t), 3)) {
      const Vec2 g_exact{pi * std::cos(pi * q.x.x) * std::sin(pi * q.x.y) * scale,
                         pi * std::sin(pi * q.x.x) * std::cos(pi * q.x.y) * scale};
      const Vec2 d = g_exact - gh;
      sq += q.weight * problem.lambda().evaluate(mu_bar, q.x) * dot(kappa.apply(d), d);
    }
  }
  return std::sqrt(sq);
}

int cmd_solve(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    const RunConfig config = parse_config_file(ctx.config_path);
    const Scenario sc = build_scenario(config);
    const Parameter mu = resolve_mu(ctx, sc.problem->box());

    WallTimer timer;
    const AssembledOperator op = assemble(*sc.problem, config.penalty_factor);
    SolveInfo info;
    const DGFunction p = solve_dg(op, mu, config.cg_tolerance, config.cg_max_iterations, &info);
    const double wall = timer.seconds();

    ensure_directory(ctx.out_dir);
    const std::vector<std::string> comments = run_comments(ctx, wall);
    write_solution_csv(join_path(ctx.out_dir, "solution.csv"), *sc.grid, p, comments);
    if (ctx.dump) {
      dump_operator(ctx.out_dir, op, mu, comments);
      const std::vector<RTNFunction> components =
          reconstruct_flux_components(*sc.problem, p, config.penalty_factor);
      const RTNFunction u = combine_flux(components, op.component_weights(mu));
      write_flux_csv(join_path(ctx.out_dir, "flux.csv"), *sc.grid, u, comments);
    }

    std::cout << "solve: dofs=" << op.num_dofs() << " iterations=" << info.iterations
              << " residual=" << format_double(info.relative_residual)
              << " wall_seconds=" << format_double(wall) << "\n";
    return exit_ok;
  });
}

int cmd_estimate(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    const RunConfig config = parse_config_file(ctx.config_path);
    const Scenario sc = build_scenario(config);
    const Parameter mu = resolve_mu(ctx, sc.problem->box());
    const Parameter mu_bar = resolve_mu_bar(config.estimator, mu);
    const Parameter mu_hat = resolve_mu_hat(config.estimator, sc.problem->box());

    WallTimer timer;
    const AssembledOperator op = assemble(*sc.problem, config.penalty_factor);
    const DGFunction p = solve_dg(op, mu, config.cg_tolerance, config.cg_max_iterations);
    const EstimatorReport report =
        eta_global(*sc.problem, p, mu, mu_bar, mu_hat, config.penalty_factor);
    const double wall = timer.seconds();

    ensure_directory(ctx.out_dir);
    const std::vector<std::string> comments = run_comments(ctx, wall);
    write_solution_csv(join_path(ctx.out_dir, "solution.csv"), *sc.grid, p, comments);

    CsvTable local;
    local.comments = comments;
    local.columns = {"element", "ix", "iy", "eta_nc_sq", "eta_r_sq", "eta_df_sq"};
    for (std::size_t c = 0; c < report.local.size(); ++c) {
      const CoarseElement& ce = sc.grid->coarse(static_cast<int>(c));
      local.rows.push_back({static_cast<double>(c), static_cast<double>(ce.ix),
                            static_cast<double>(ce.iy), report.local[c].nc_sq, report.local[c].r_sq,
                            report.local[c].df_sq});
    }
    write_csv(local, join_path(ctx.out_dir, "estimate_local.csv"));

    CsvTable global;
    global.comments = comments;
    global.columns = mu_column_names(mu.values.size());
    for (const char* name :
         {"eta_nc", "eta_r", "eta_df", "eta", "alpha_bar", "gamma_bar", "alpha_hat", "gamma_hat"})
      global.columns.push_back(name);
    Vector row = mu.values;
    for (double v : {report.eta_nc, report.eta_r, report.eta_df, report.eta, report.alpha_bar,
                     report.gamma_bar, report.alpha_hat, report.gamma_hat})
      row.push_back(v);
    global.rows.push_back(row);
    write_csv(global, join_path(ctx.out_dir, "estimate_global.csv"));

    std::cout << "estimate: eta_nc=" << format_double(report.eta_nc)
              << " eta_r=" << format_double(report.eta_r)
              << " eta_df=" << format_double(report.eta_df)
              << " eta=" << format_double(report.eta) << " wall_seconds=" << format_double(wall)
              << "\n";
    return exit_ok;
  });
}

int cmd_study(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    const RunConfig config = parse_config_file(ctx.config_path);
    const int levels = ctx.levels;
    if (config.fine_per_dim * config.coarse_per_dim * (1 << (levels - 1)) > 1024)
      throw ConfigError("refinement study exceeds 1024 fine cells per dimension");

    struct LevelRow {
      int fine_per_dim = 0;
      std::size_t dofs = 0;
      EstimatorReport report;
      double error = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<LevelRow> rows(static_cast<std::size_t>(levels));
    const bool exact = has_exact_solution(config);

    WallTimer timer;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<int> next{0};
    const auto worker = [&] {
      for (int l = next.fetch_add(1); l < levels; l = next.fetch_add(1)) {
        try {
          const int nf = config.fine_per_dim << l;
          const Scenario sc = build_scenario(config, config.coarse_per_dim, nf);
          const Parameter mu = resolve_mu(ctx, sc.problem->box());
          const Parameter mu_bar = resolve_mu_bar(config.estimator, mu);
          const Parameter mu_hat = resolve_mu_hat(config.estimator, sc.problem->box());
          const AssembledOperator op = assemble(*sc.problem, config.penalty_factor);
          const DGFunction p =
              solve_dg(op, mu, config.cg_tolerance, config.cg_max_iterations);
          LevelRow& row = rows[static_cast<std::size_t>(l)];
          row.fine_per_dim = nf;
          row.dofs = op.num_dofs();
          row.report = eta_global(*sc.problem, p, mu, mu_bar, mu_hat, config.penalty_factor);
          if (exact) row.error = exact_energy_error(*sc.problem, p, mu, mu_bar);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };

    const int used = std::max(1, std::min(ctx.threads, levels));
    if (used == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < used; ++i) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    const double wall = timer.seconds();

    ensure_directory(ctx.out_dir);
    CsvTable table;
    table.comments = run_comments(ctx, wall);
    table.columns = {"level", "fine_per_dim", "dofs",  "eta_nc",     "eta_r",
                     "eta_df", "eta",         "error", "effectivity"};
    for (int l = 0; l < levels; ++l) {
      const LevelRow& row = rows[static_cast<std::size_t>(l)];
      table.rows.push_back({static_cast<double>(l), static_cast<double>(row.fine_per_dim),
                            static_cast<double>(row.dofs), row.report.eta_nc, row.report.eta_r,
                            row.report.eta_df, row.report.eta, row.error,
                            row.report.eta / row.error});
      std::cout << "study level " << l << ": fine_per_dim=" << row.fine_per_dim
                << " dofs=" << row.dofs << " eta=" << format_double(row.report.eta);
      if (exact)
        std::cout << " error=" << format_double(row.error)
                  << " effectivity=" << format_double(row.report.eta / row.error);
      std::cout << "\n";
    }
    write_csv(table, join_path(ctx.out_dir, "study.csv"));
    std::cout << "study: levels=" << levels << " wall_seconds=" << format_double(wall) << "\n";
    return exit_ok;
  });
}

int cmd_greedy(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    const RunConfig config = parse_config_file(ctx.config_path);
    const Scenario sc = build_scenario(config);
    const ParametricProblem& problem = *sc.problem;
    const Parameter mu_hat = resolve_mu_hat(config.estimator, problem.box());

    const int size = ctx.training_size > 0 ? ctx.training_size : config.training_size;
    const std::vector<Parameter> training = training_set(problem.box(), size, ctx.seed);

    GreedyOptions options;
    options.tolerance = ctx.tolerance > 0.0 ? ctx.tolerance : config.greedy_tolerance;
    options.max_extensions = config.greedy_max_extensions;
    options.drop_tol = config.greedy_drop_tol;
    if (!config.estimator.mu_bar_online) options.fixed_mu_bar = config.estimator.mu_bar_fixed;

    WallTimer timer;
    const AssembledOperator op = assemble(problem, config.penalty_factor);
    ReducedModel model = seed_constant_model(problem, op, mu_hat);
    const GreedyResult result = greedy_train(model, problem, op, training, options);
    const double wall = timer.seconds();

    const std::string model_dir =
        ctx.model_dir.empty() ? join_path(ctx.out_dir, "model") : ctx.model_dir;
    ensure_directory(ctx.out_dir);
    save_model(model, model_dir);

    const std::vector<std::string> comments = run_comments(ctx, wall);
    CsvTable training_table;
    training_table.comments = comments;
    training_table.columns = {"index"};
    for (const std::string& name : mu_column_names(problem.box().dim()))
      training_table.columns.push_back(name);
    for (std::size_t i = 0; i < training.size(); ++i) {
      Vector row{static_cast<double>(i)};
      for (double v : training[i].values) row.push_back(v);
      training_table.rows.push_back(row);
    }
    write_csv(training_table, join_path(ctx.out_dir, "training.csv"));

    CsvTable history;
    history.comments = comments;
    history.columns = {"sweep", "selected", "max_eta", "size_before", "size_after"};
    for (const std::string& name : mu_column_names(problem.box().dim(), "selected_mu"))
      history.columns.push_back(name);
    for (std::size_t s = 0; s < result.history.size(); ++s) {
      const GreedyStep& step = result.history[s];
      Vector row{static_cast<double>(s), static_cast<double>(step.selected), step.max_eta,
                 static_cast<double>(step.size_before), static_cast<double>(step.size_after)};
      for (double v : training[static_cast<std::size_t>(step.selected)].values) row.push_back(v);
      history.rows.push_back(row);
      std::cout << "greedy sweep " << s << ": max_eta=" << format_double(step.max_eta)
                << " selected=" << step.selected << " size=" << step.size_after << "\n";
    }
    write_csv(history, join_path(ctx.out_dir, "greedy.csv"));

    std::cout << "greedy: " << (result.converged ? "converged" : "stopped")
              << " size=" << model.size() << " sweeps=" << result.history.size()
              << " model=" << model_dir << " wall_seconds=" << format_double(wall) << "\n";
    if (!result.converged)
      std::cout << "warning: tolerance " << format_double(options.tolerance)
                << " not reached within the extension budget\n";
    return exit_ok;
  });
}

int cmd_online(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    if (ctx.model_dir.empty()) throw ConfigError("online requires --model <directory>");
    const RunConfig config = parse_config_file(ctx.config_path);
    const ReducedModel model = load_model(ctx.model_dir);

    const Scenario sc = build_scenario(config);
    const ParametricProblem& problem = *sc.problem;
    if (model.coarse_per_dim != config.coarse_per_dim ||
        model.fine_per_dim != config.fine_per_dim)
      throw ConfigError("model grid " + std::to_string(model.coarse_per_dim) + "/" +
                        std::to_string(model.fine_per_dim) +
                        " does not match the configuration grid " +
                        std::to_string(config.coarse_per_dim) + "/" +
                        std::to_string(config.fine_per_dim));
    if (model.components.size() != problem.lambda().num_components())
      throw ConfigError("model has " + std::to_string(model.components.size()) +
                        " operator components but the problem has " +
                        std::to_string(problem.lambda().num_components()));
    if (model.estimator.elements.size() != sc.grid->num_coarse())
      throw ConfigError("model estimator data does not cover the coarse partition");

    const Parameter mu = resolve_mu(ctx, problem.box());
    const Parameter mu_bar = resolve_mu_bar(config.estimator, mu);

    WallTimer timer;
    const Vector stacked = solve_reduced(model, problem, mu);
    const std::vector<Vector> blocks = split_coefficients(model, stacked);
    const EstimatorReport report = eta_online(model.estimator, problem, blocks, mu, mu_bar);
    const double wall = timer.seconds();

    ensure_directory(ctx.out_dir);
    const std::vector<std::string> comments = run_comments(ctx, wall);
    CsvTable table;
    table.comments = comments;
    table.columns = mu_column_names(mu.values.size());
    for (const char* name : {"model_size", "eta_nc", "eta_r", "eta_df", "eta"})
      table.columns.push_back(name);
    Vector row = mu.values;
    for (double v : {static_cast<double>(model.size()), report.eta_nc, report.eta_r, report.eta_df,
                     report.eta})
      row.push_back(v);
    table.rows.push_back(row);
    write_csv(table, join_path(ctx.out_dir, "online.csv"));

    if (ctx.dump)
      write_solution_csv(join_path(ctx.out_dir, "solution.csv"), *sc.grid,
                         expand_reduced(model, *sc.grid, stacked), comments);

    std::cout << "online: size=" << model.size() << " eta=" << format_double(report.eta)
              << " eta_nc=" << format_double(report.eta_nc)
              << " eta_r=" << format_double(report.eta_r)
              << " eta_df=" << format_double(report.eta_df)
              << " wall_seconds=" << format_double(wall) << "\n";
    return exit_ok;
  });
}

int cmd_verify(const CommandContext& ctx) {
  return run_guarded([&] {
    validate_context(ctx);
    const RunConfig config = parse_config_file(ctx.config_path);
    const Scenario sc = build_scenario(config);

    using Check = CheckResult (*)(const RunConfig&, const Scenario&);
    const std::vector<std::pair<std::string, Check>> checks = {
        {"grid_geometry", check_grid_geometry},
        {"norm_equivalence", check_norm_equivalence},
        {"coercivity", check_coercivity},
        {"single_level_collapse", check_single_level_collapse},
        {"oswald_conformity", check_oswald_conformity},
        {"conservation_dg", check_conservation_dg},
        {"offline_online_equality", check_offline_online_equality},
        {"galerkin_orthogonality", check_galerkin_orthogonality},
    };

    WallTimer timer;
    ensure_directory(ctx.out_dir);
    std::ofstream log(join_path(ctx.out_dir, "verify.txt"), std::ios::binary);
    int failed = 0;
    for (const auto& [name, check] : checks) {
      CheckResult result;
      try {
        result = check(config, sc);
      } catch (const std::exception& e) {
        result.passed = false;
        result.detail = e.what();
      }
      std::ostringstream line;
      line << "check " << name << ": " << (result.passed ? "ok" : "FAILED")
           << " value=" << format_double(result.value)
           << " threshold=" << format_double(result.threshold);
      if (!result.detail.empty()) line << " (" << result.detail << ")";
      std::cout << line.str() << "\n";
      log << line.str() << "\n";
      if (!result.passed) ++failed;
    }
    const double wall = timer.seconds();
    std::ostringstream summary;
    summary << "verify: " << (checks.size() - static_cast<std::size_t>(failed)) << "/"
            << checks.size() << " checks passed, wall_seconds=" << format_double(wall);
    std::cout << summary.str() << "\n";
    log << summary.str() << "\n";
    if (!log) throw ConfigError("cannot write verify log");
    return failed == 0 ? exit_ok : exit_check_failed;
  });
}

}  // namespace lrbms
