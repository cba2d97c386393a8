#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrbms/problem.hpp"

namespace lrbms {

/// Raised for malformed or inconsistent configuration input; the command line
/// maps it to its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How the estimator picks its anchor parameters when a query arrives.
struct EstimatorPolicy {
  bool mu_bar_online = true;   // mu_bar = mu of the query
  Parameter mu_bar_fixed;
  bool mu_hat_midpoint = true; // mu_hat = midpoint of the parameter box
  Parameter mu_hat_fixed;
};

Parameter resolve_mu_bar(const EstimatorPolicy& policy, const Parameter& mu);
Parameter resolve_mu_hat(const EstimatorPolicy& policy, const ParameterBox& box);

/// Validated run configuration. Presets fill every field; file entries
/// override them. Unknown sections or keys are rejected by name.
struct RunConfig {
  std::string preset;

  std::vector<std::string> lambda_components;
  std::vector<ThetaCoefficient> lambda_thetas;
  std::string lambda_fixed = "none";
  std::string kappa = "identity";
  double kappa_contrast = 100.0;
  std::string kappa_table;
  std::string source = "constant";
  double source_value = 1.0;
  std::vector<double> box_lower, box_upper;

  int coarse_per_dim = 2;
  int fine_per_dim = 4;

  double penalty_factor = 8.0;
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 0;  // 0 selects a size-based cap

  EstimatorPolicy estimator;

  double greedy_tolerance = 1e-8;
  int greedy_max_extensions = 20;
  int training_size = 8;
  double greedy_drop_tol = 1e-10;

  std::size_t parameter_dim() const { return box_lower.size(); }
};

/// Grid and problem built from a configuration; the problem references the
/// grid, so both live together.
struct Scenario {
  std::unique_ptr<NestedGrid> grid;
  std::unique_ptr<ParametricProblem> problem;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Builds the two-level grid and the parametric problem. The dimension
/// overload substitutes the grid resolution, keeping everything else; the
/// refinement study and the partition invariance check rely on it.
Scenario build_scenario(const RunConfig& config);
Scenario build_scenario(const RunConfig& config, int coarse_per_dim, int fine_per_dim);

/// Comma-separated list of doubles, e.g. the value of a --mu flag.
std::vector<double> parse_double_list(const std::string& text);

}  // namespace lrbms
