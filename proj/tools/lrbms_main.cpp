#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "lrbms/config.hpp"
#include "lrbms/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Two-level symmetric weighted interior penalty DG solver for parametric "
      "elliptic multiscale problems, with a localized a posteriori error "
      "estimator and greedy reduced basis training."};
  app.require_subcommand(1);

  lrbms::CommandContext ctx;
  std::string mu_text;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", ctx.config_path, "configuration file")->required();
    cmd->add_option("--out", ctx.out_dir, "output directory")->capture_default_str();
  };
  const auto add_mu = [&](CLI::App* cmd) {
    cmd->add_option("--mu", mu_text,
                    "parameter value, comma separated; defaults to the box midpoint");
  };

  CLI::App* solve = app.add_subcommand("solve", "fine solve at one parameter");
  add_common(solve);
  add_mu(solve);
  solve->add_flag("--dump", ctx.dump, "also write the operator matrices and the flux");

  CLI::App* estimate =
      app.add_subcommand("estimate", "fine solve plus the localized error estimator");
  add_common(estimate);
  add_mu(estimate);

  CLI::App* study = app.add_subcommand("study", "estimator refinement study over fine grids");
  add_common(study);
  add_mu(study);
  study->add_option("--levels", ctx.levels, "number of refinement levels")
      ->capture_default_str();
  study->add_option("--threads", ctx.threads, "worker threads for the levels")
      ->capture_default_str();

  CLI::App* greedy = app.add_subcommand("greedy", "greedy reduced basis training");
  add_common(greedy);
  greedy->add_option("--seed", ctx.seed, "seed for the training set sampler")
      ->capture_default_str();
  greedy->add_option("--training-size", ctx.training_size,
                     "training set size; 0 keeps the configured value");
  greedy->add_option("--tol", ctx.tolerance, "greedy tolerance; 0 keeps the configured value");
  greedy->add_option("--model", ctx.model_dir, "model output directory; defaults to <out>/model");

  CLI::App* online = app.add_subcommand("online", "reduced solve plus the online estimator");
  add_common(online);
  add_mu(online);
  online->add_option("--model", ctx.model_dir, "model directory written by greedy")->required();
  online->add_flag("--dump", ctx.dump, "also expand and write the reduced solution");

  CLI::App* verify = app.add_subcommand("verify", "built-in consistency checks");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lrbms::exit_config_error;
  }

  if (!mu_text.empty()) {
    try {
      ctx.mu = lrbms::parse_double_list(mu_text);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return lrbms::exit_config_error;
    }
  }

  if (solve->parsed()) return lrbms::cmd_solve(ctx);
  if (estimate->parsed()) return lrbms::cmd_estimate(ctx);
  if (study->parsed()) return lrbms::cmd_study(ctx);
  if (greedy->parsed()) return lrbms::cmd_greedy(ctx);
  if (online->parsed()) return lrbms::cmd_online(ctx);
  if (verify->parsed()) return lrbms::cmd_verify(ctx);
  return lrbms::exit_config_error;
}
