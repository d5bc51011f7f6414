// Command-line front end for the experiment runs.

#include "igam/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"Randomized shallow networks and adapted additive models: experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"quad2d", "Train an RSN on noisy |x|^2 data in 2-D and write near/far gradient fields"},
      {"n-sweep", "Distance between ridge RSN and the adapted GAM as the width grows"},
      {"t-sweep", "Distance between gradient-flow and ridge solutions as T grows"},
      {"dir-sweep", "Refinement of the adapted GAM over the number of directions"},
      {"d1", "One-dimensional consistency run with the two-direction partition"},
  };
  for (const auto &[name, help] : commands) {
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config; omitted fields keep their defaults")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Seed; overrides the config");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    const igam::Json j = config_path.empty() ? igam::Json::object() : igam::read_json(config_path);
    igam::ExperimentConfig config = igam::config_from_json(experiment, j);
    if (seed) config.seed = *seed;
    const auto start = std::chrono::steady_clock::now();
    const igam::ExperimentResult result = igam::run_experiment(config, out_dir);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << result.summary.dump(2) << '\n';
    std::cerr << experiment << ": wrote " << out_dir << " in " << seconds << " s\n";
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
