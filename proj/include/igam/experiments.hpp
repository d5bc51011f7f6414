#pragma once

// Config-driven experiment runs. Every run is a pure function of its config
// (including the seed) and returns its table and summary; when an output
// directory is given the same content is written as CSV/JSON.

#include "igam/gam.hpp"
#include "igam/io.hpp"
#include "igam/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace igam {

struct DatasetSpec {
  std::string inputs = "uniform";          ///< "uniform" on [-1,1]^d or "gaussian_minmax"
  std::string target = "sine_plus_square"; ///< "squared_norm" or "sine_plus_square"
  int N = 32;
  double noise = 0.05;
  std::string csv; ///< when set, read x1..xd,y1..y_dout from this file instead
};

struct Quad2dOptions {
  double gamma = 1.0 / 32768.0;
  long long tau = 32768;
  std::string trainer = "gd"; ///< "gd" (explicit Euler) or "flow" (exact, T = gamma tau)
  bool compare_flow = false;  ///< also report the distance between GD and the exact flow
  int near_per_axis = 101;
  int far_per_axis = 121;
  double far_extent = 10.0;
  double ring_lo = 5.0;
  double ring_hi = 10.0;
};

struct ExperimentConfig {
  std::string experiment; ///< quad2d, n-sweep, t-sweep, dir-sweep, d1
  std::uint64_t seed = 0;
  int replicates = 5;
  int d = 2;
  int d_out = 1;
  long long n = 1024;
  std::vector<long long> n_list;
  InitDistribution init;
  DatasetSpec dataset;
  std::optional<double> lambda;
  std::optional<double> lambda_tilde;
  std::vector<double> T_list;
  std::vector<int> m_list;
  std::optional<int> m; ///< directions of the comparator; default ceil(sqrt(n))
  double grid_step = 0.02;
  WeightingOptions weighting;
  Box<double> K;
  int eval_per_axis = 32;
  Quad2dOptions quad2d;
};

/// Defaults for the named experiment.
ExperimentConfig default_config(const std::string &experiment);
/// Defaults overridden by the fields present in j. Unknown fields and
/// inconsistent combinations raise Error naming the field.
ExperimentConfig config_from_json(const std::string &experiment, const Json &j);
Json to_json(const ExperimentConfig &config);

/// Deterministic child seed for (tag, index) derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index);

Datasetd make_dataset(const ExperimentConfig &config);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string &name) const;
  std::vector<double> values(const std::string &name) const;
};

struct ExperimentResult {
  Table table;  ///< sweep.csv content (empty for quad2d)
  Json summary; ///< summary.json content
};

ExperimentResult run_quadratic2d(const ExperimentConfig &config, const std::filesystem::path &out = {});
ExperimentResult run_n_sweep(const ExperimentConfig &config, const std::filesystem::path &out = {});
ExperimentResult run_T_sweep(const ExperimentConfig &config, const std::filesystem::path &out = {});
ExperimentResult run_direction_sweep(const ExperimentConfig &config, const std::filesystem::path &out = {});
ExperimentResult run_d1_consistency(const ExperimentConfig &config, const std::filesystem::path &out = {});

/// Dispatch on config.experiment.
ExperimentResult run_experiment(const ExperimentConfig &config, const std::filesystem::path &out = {});

double median(std::vector<double> v);
/// Difference of the 75% and 25% order statistics (linear interpolation).
double interquartile_range(std::vector<double> v);

} // namespace igam
