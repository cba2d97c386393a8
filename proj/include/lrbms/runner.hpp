#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lrbms/config.hpp"
#include "lrbms/dg_function.hpp"

namespace lrbms {

inline constexpr int exit_ok = 0;
inline constexpr int exit_check_failed = 1;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_solver_failure = 3;
inline constexpr int exit_model_version = 4;

/// Options shared by the commands; unset optionals fall back to the
/// configuration file or to defaults documented in the command line help.
struct CommandContext {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::vector<double>> mu;
  unsigned long long seed = 0;
  int threads = 1;
  bool dump = false;
  int levels = 3;
  std::string model_dir;
  int training_size = 0;   // 0: value from the configuration
  double tolerance = 0.0;  // 0: value from the configuration
};

/// Fine solve at one parameter; writes solution.csv (optionally the matrices
/// and the reconstructed flux with --dump).
int cmd_solve(const CommandContext& ctx);
/// Fine solve plus the localized estimator; writes local and global reports.
int cmd_estimate(const CommandContext& ctx);
/// Refinement study over successively refined fine grids at fixed coarse
/// partition; writes study.csv with estimates (and errors when the exact
/// solution is known).
int cmd_study(const CommandContext& ctx);
/// Greedy training of a reduced model; writes the history and saves the model.
int cmd_greedy(const CommandContext& ctx);
/// Loads a saved model and evaluates reduced solutions plus the online
/// estimator at one or more parameters.
int cmd_online(const CommandContext& ctx);
/// Runs the built-in consistency checks; exit code 1 when any of them fails.
int cmd_verify(const CommandContext& ctx);

/// Portable uniform draw in [0, 1): 53 bits straight from the engine, so the
/// sequence is identical across standard library implementations.
double uniform01(std::mt19937_64& rng);

/// count independent uniform samples from the box.
std::vector<Parameter> sample_parameters(const ParameterBox& box, int count,
                                         std::mt19937_64& rng);

/// Training set of the given size: equispaced (endpoints included) for one
/// parameter dimension, seeded uniform samples otherwise.
std::vector<Parameter> training_set(const ParameterBox& box, int size,
                                    unsigned long long seed);

/// True when the configuration matches the analytically solvable setup:
/// identity tensor, single "one" component with coefficient mu0, interpolated
/// sine source.
bool has_exact_solution(const RunConfig& config);

/// Energy error against the exact solution of that setup, measured in the
/// mu_bar-weighted broken energy norm by elementwise quadrature.
double exact_energy_error(const ParametricProblem& problem, const DGFunction& p_h,
                          const Parameter& mu, const Parameter& mu_bar);

/// Energy norm of the exact solution at mu.
double exact_energy_norm(const Parameter& mu);

}  // namespace lrbms
