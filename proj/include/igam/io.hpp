#pragma once

// JSON and CSV persistence for networks, training reports, weightings,
// partitions and profile sets.

#include "igam/gam.hpp"
#include "igam/rsn.hpp"
#include "igam/sphere.hpp"
#include "igam/trainers.hpp"
#include "igam/weighting.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace igam {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const MatrixXd &M);
Json vector_to_json(const VectorXd &v);
MatrixXd matrix_from_json(const Json &j);
VectorXd vector_from_json(const Json &j);

/// Fields n, d, d_out, V (row-major nested arrays), b, W, link, seed.
Json to_json(const RsnParamsd &params);
RsnParamsd rsn_from_json(const Json &j);

Json to_json(const TrainReport<double> &report);
Json to_json(const WeightGrid &grid);
Json to_json(const CellWeights &weights);
/// Centers, measures and mesh.
Json to_json(const SpherePartition &partition);
/// Scalars and per-profile grid layout; node values go to CSV.
Json to_json(const AgamSolution &solution);

/// Minimal CSV writer; doubles are written with 17 significant digits so a
/// file round-trips exactly.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header);
  CsvWriter &operator<<(double value);
  CsvWriter &operator<<(long long value);
  CsvWriter &operator<<(int value) { return *this << static_cast<long long>(value); }
  CsvWriter &operator<<(const std::string &value);
  void end_row();

private:
  void separator();
  std::ofstream out_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

/// Columns step, loss.
void write_loss_curve_csv(const std::filesystem::path &path, const std::vector<double> &losses);
/// Columns direction_index, r, g.
void write_g_table_csv(const std::filesystem::path &path, const WeightGrid &grid);
/// Columns direction_index, r, phi_0, ..., phi_{d_out-1}.
void write_profiles_csv(const std::filesystem::path &path, const ProfileSet &profiles);

void write_json(const std::filesystem::path &path, const Json &j);
Json read_json(const std::filesystem::path &path);

} // namespace igam
