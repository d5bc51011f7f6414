#include "igam/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace igam {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

SpherePartition::SpherePartition(Kind kind, MatrixXd centers, VectorXd measures, double mesh)
    : kind_(kind), centers_(std::move(centers)), measures_(std::move(measures)), mesh_(mesh) {
  if (centers_.rows() != measures_.size()) throw Error("SpherePartition: centers and measures disagree");
}

double SpherePartition::sphere_measure() const {
  switch (dim()) {
  case 1: return 2.0;
  case 2: return kTwoPi;
  case 3: return 4.0 * std::numbers::pi;
  default: throw Error("SpherePartition: unsupported dimension");
  }
}

Eigen::Index SpherePartition::assign(const Eigen::Ref<const VectorXd> &s) const {
  if (s.size() != dim()) throw Error("SpherePartition::assign: dimension mismatch");
  switch (kind_) {
  case Kind::pm1:
    return s[0] >= 0.0 ? 0 : 1;
  case Kind::circle: {
    double theta = std::atan2(s[1], s[0]);
    if (theta < 0.0) theta += kTwoPi;
    const Eigen::Index m = size();
    auto cell = static_cast<Eigen::Index>(std::floor(theta * static_cast<double>(m) / kTwoPi));
    return std::clamp<Eigen::Index>(cell, 0, m - 1);
  }
  case Kind::fibonacci: {
    Eigen::Index best = 0;
    (centers_ * s).maxCoeff(&best);
    return best;
  }
  }
  return 0;
}

std::string to_string(SpherePartition::Kind kind) {
  switch (kind) {
  case SpherePartition::Kind::pm1: return "pm1";
  case SpherePartition::Kind::circle: return "circle";
  case SpherePartition::Kind::fibonacci: return "fibonacci";
  }
  return "unknown";
}

SpherePartition partition_pm1() {
  MatrixXd centers(2, 1);
  centers << 1.0, -1.0;
  return SpherePartition(SpherePartition::Kind::pm1, centers, VectorXd::Ones(2), 0.0);
}

SpherePartition partition_circle(int m) {
  if (m < 1) throw Error("partition_circle: m must be >= 1");
  MatrixXd centers(m, 2);
  const double arc = kTwoPi / m;
  for (int j = 0; j < m; ++j) {
    const double theta = (j + 0.5) * arc;
    centers(j, 0) = std::cos(theta);
    centers(j, 1) = std::sin(theta);
  }
  // Farthest point of an arc of angle 2 pi/m from its midpoint is at angle pi/m.
  const double mesh = 2.0 * std::sin(std::numbers::pi / (2.0 * m));
  return SpherePartition(SpherePartition::Kind::circle, centers, VectorXd::Constant(m, arc), mesh);
}

VectorXd random_unit_vector(Eigen::Index d, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  VectorXd v(d);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

SpherePartition partition_fibonacci(int m, std::uint64_t seed, int mc_points) {
  if (m < 4) throw Error("partition_fibonacci: m must be >= 4");
  if (mc_points < 1) throw Error("partition_fibonacci: mc_points must be positive");
  MatrixXd centers(m, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < m; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / m;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    centers(i, 0) = r * std::cos(phi);
    centers(i, 1) = r * std::sin(phi);
    centers(i, 2) = z;
  }
  SpherePartition provisional(SpherePartition::Kind::fibonacci, centers, VectorXd::Zero(m), 0.0);

  std::mt19937_64 rng(seed);
  VectorXd counts = VectorXd::Zero(m);
  double mesh = 0.0;
  for (int p = 0; p < mc_points; ++p) {
    const VectorXd s = random_unit_vector(3, rng);
    const Eigen::Index cell = provisional.assign(s);
    counts[cell] += 1.0;
    mesh = std::max(mesh, (s - centers.row(cell).transpose()).norm());
  }
  const VectorXd measures = counts * (4.0 * std::numbers::pi / mc_points);
  return SpherePartition(SpherePartition::Kind::fibonacci, centers, measures, mesh);
}

SpherePartition make_partition(int d, int m, std::uint64_t seed) {
  switch (d) {
  case 1: return partition_pm1();
  case 2: return partition_circle(m);
  case 3: return partition_fibonacci(m, seed);
  default: throw Error("make_partition: only d = 1, 2, 3 are supported");
  }
}

RsnParamsd snap_directions(const RsnParamsd &params, const SpherePartition &partition) {
  if (params.input_dim() != partition.dim()) throw Error("snap_directions: dimension mismatch");
  const KinkGeometry<double> geom = kink_geometry(params);
  RsnParamsd snapped = params;
  for (Eigen::Index k = 0; k < params.neurons(); ++k) {
    const Eigen::Index cell = partition.assign(geom.s.row(k).transpose());
    snapped.V.row(k) = partition.centers().row(cell) * geom.vnorm[k];
  }
  snapped.W.setZero();
  return snapped;
}

} // namespace igam
