#include "igam/io.hpp"

#include <iomanip>

namespace igam {

Json matrix_to_json(const MatrixXd &M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const VectorXd &v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

MatrixXd matrix_from_json(const Json &j) {
  if (!j.is_array()) throw Error("matrix_from_json: expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json &row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("matrix_from_json: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

VectorXd vector_from_json(const Json &j) {
  if (!j.is_array()) throw Error("vector_from_json: expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Json to_json(const RsnParamsd &params) {
  Json j;
  j["n"] = params.neurons();
  j["d"] = params.input_dim();
  j["d_out"] = params.output_dim();
  j["V"] = matrix_to_json(params.V);
  j["b"] = vector_to_json(params.b);
  j["W"] = matrix_to_json(params.W);
  j["link"] = to_string(params.link);
  j["seed"] = params.seed;
  return j;
}

RsnParamsd rsn_from_json(const Json &j) {
  RsnParamsd params;
  const auto n = j.at("n").get<Eigen::Index>();
  const auto d = j.at("d").get<Eigen::Index>();
  const auto d_out = j.at("d_out").get<Eigen::Index>();
  params.V = matrix_from_json(j.at("V"));
  params.b = vector_from_json(j.at("b"));
  params.W = matrix_from_json(j.at("W"));
  if (n == 0) params.V.resize(0, d);
  if (params.W.size() == 0) params.W.resize(d_out, n);
  params.link = link_from_string(j.at("link").get<std::string>());
  params.seed = j.value("seed", std::uint64_t{0});
  if (params.V.rows() != n || params.V.cols() != d || params.W.rows() != d_out)
    throw Error("rsn_from_json: shapes disagree with n, d, d_out");
  params.validate();
  return params;
}

Json to_json(const TrainReport<double> &report) {
  Json j;
  j["W_star"] = matrix_to_json(report.W);
  j["lambda_tilde"] = report.lambda_tilde;
  j["objective_value"] = report.objective_value;
  j["loss_value"] = report.loss_value;
  j["penalty_value"] = report.penalty_value;
  j["gradient_norm"] = report.gradient_norm;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  return j;
}

namespace {

Json supports_to_json(const std::vector<Interval> &support) {
  Json out = Json::array();
  for (const Interval &iv : support) out.push_back(Json::array({iv.lo, iv.hi}));
  return out;
}

} // namespace

Json to_json(const WeightGrid &grid) {
  Json j;
  j["d"] = grid.d;
  j["directions"] = matrix_to_json(grid.directions);
  j["direction_weights"] = vector_to_json(grid.direction_weights);
  j["positions"] = vector_to_json(grid.positions);
  j["g_table"] = matrix_to_json(grid.g_table);
  j["direction_density"] = vector_to_json(grid.direction_density);
  j["support"] = supports_to_json(grid.support);
  j["gbar"] = grid.gbar;
  j["n_samples"] = grid.n_samples;
  j["bandwidth_direction"] = grid.bandwidth_direction;
  j["bandwidth_position"] = grid.bandwidth_position;
  j["seed"] = grid.seed;
  return j;
}

Json to_json(const CellWeights &weights) {
  Json j;
  j["positions"] = vector_to_json(weights.positions);
  j["table"] = matrix_to_json(weights.table);
  j["cell_mass"] = vector_to_json(weights.cell_mass);
  Json flags = Json::array();
  for (bool z : weights.zero_mass) flags.push_back(z);
  j["zero_mass"] = flags;
  j["support"] = supports_to_json(weights.support);
  j["gbar"] = weights.gbar;
  j["gbar_check"] = weights.gbar_check;
  return j;
}

Json to_json(const SpherePartition &partition) {
  Json j;
  j["kind"] = to_string(partition.kind());
  j["d"] = partition.dim();
  j["m"] = partition.size();
  j["centers"] = matrix_to_json(partition.centers());
  j["measures"] = vector_to_json(partition.measures());
  j["mesh"] = partition.mesh();
  return j;
}

Json to_json(const AgamSolution &solution) {
  Json j;
  j["link"] = to_string(solution.link);
  j["lambda"] = solution.profiles.lambda;
  j["gbar_used"] = solution.profiles.gbar_used;
  j["objective"] = solution.objective;
  j["loss"] = solution.loss;
  j["penalty"] = solution.penalty;
  j["stationarity"] = solution.stationarity;
  j["iterations"] = solution.iterations;
  Json profiles = Json::array();
  for (Eigen::Index k = 0; k < solution.profiles.size(); ++k) {
    const Profile &p = solution.profiles.profiles[static_cast<std::size_t>(k)];
    Json entry;
    entry["cell"] = solution.profiles.cell(k);
    entry["direction"] = vector_to_json(solution.profiles.directions.row(k).transpose());
    entry["r0"] = p.r0;
    entry["h"] = p.h;
    entry["nodes"] = p.nodes();
    profiles.push_back(std::move(entry));
  }
  j["profiles"] = profiles;
  return j;
}

CsvWriter::CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_ << std::setprecision(17);
  for (const std::string &name : header) *this << name;
  end_row();
}

void CsvWriter::separator() {
  if (filled_ == columns_) throw Error("CsvWriter: too many columns in row");
  if (filled_++ > 0) out_ << ',';
}

CsvWriter &CsvWriter::operator<<(double value) {
  separator();
  out_ << value;
  return *this;
}

CsvWriter &CsvWriter::operator<<(long long value) {
  separator();
  out_ << value;
  return *this;
}

CsvWriter &CsvWriter::operator<<(const std::string &value) {
  separator();
  out_ << value;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw Error("CsvWriter: incomplete row");
  out_ << '\n';
  filled_ = 0;
}

void write_loss_curve_csv(const std::filesystem::path &path, const std::vector<double> &losses) {
  CsvWriter csv(path, {"step", "loss"});
  for (std::size_t t = 0; t < losses.size(); ++t) {
    csv << static_cast<long long>(t) << losses[t];
    csv.end_row();
  }
}

void write_g_table_csv(const std::filesystem::path &path, const WeightGrid &grid) {
  CsvWriter csv(path, {"direction_index", "r", "g"});
  for (Eigen::Index g = 0; g < grid.num_directions(); ++g)
    for (Eigen::Index j = 0; j < grid.num_positions(); ++j) {
      csv << static_cast<long long>(g) << grid.positions[j] << grid.g_table(g, j);
      csv.end_row();
    }
}

void write_profiles_csv(const std::filesystem::path &path, const ProfileSet &profiles) {
  std::vector<std::string> header{"direction_index", "r"};
  for (Eigen::Index c = 0; c < profiles.output_dim(); ++c) header.push_back("phi_" + std::to_string(c));
  CsvWriter csv(path, header);
  for (Eigen::Index k = 0; k < profiles.size(); ++k) {
    const Profile &p = profiles.profiles[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < p.nodes(); ++j) {
      csv << static_cast<long long>(k) << p.position(j);
      for (Eigen::Index c = 0; c < p.values.cols(); ++c) csv << p.values(j, c);
      csv.end_row();
    }
  }
}

void write_json(const std::filesystem::path &path, const Json &j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

} // namespace igam
