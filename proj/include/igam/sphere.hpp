#pragma once

// Disjoint covers of the unit sphere S^{d-1} (d = 1, 2, 3) by cells with a
// center direction each, plus snapping of network directions onto centers.

#include "igam/rsn.hpp"
#include "igam/types.hpp"

namespace igam {

class SpherePartition {
public:
  enum class Kind { pm1, circle, fibonacci };

  SpherePartition(Kind kind, MatrixXd centers, VectorXd measures, double mesh);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return centers_.cols(); }
  Eigen::Index size() const { return centers_.rows(); }
  const MatrixXd &centers() const { return centers_; }
  VectorXd center(Eigen::Index cell) const { return centers_.row(cell).transpose(); }
  /// Surface measure of every cell (counting measure for d = 1).
  const VectorXd &measures() const { return measures_; }
  /// max over cells of sup_{s in cell} |s - center|.
  double mesh() const { return mesh_; }
  /// Measure of the whole sphere: 2, 2 pi or 4 pi.
  double sphere_measure() const;

  /// Index of the unique cell containing the direction s (s need not be normalised).
  Eigen::Index assign(const Eigen::Ref<const VectorXd> &s) const;

private:
  Kind kind_;
  MatrixXd centers_;
  VectorXd measures_;
  double mesh_;
};

std::string to_string(SpherePartition::Kind kind);

/// {+1} and {-1}; mesh 0, counting measure.
SpherePartition partition_pm1();

/// m equal half-open arcs [2 pi j/m, 2 pi (j+1)/m) with centers at the arc midpoints.
SpherePartition partition_circle(int m);

/// Fibonacci-lattice centers on S^2 with nearest-center cells (ties to the
/// lower index). Measures and mesh are Monte Carlo estimates.
SpherePartition partition_fibonacci(int m, std::uint64_t seed = 0, int mc_points = 100000);

/// pm1 for d = 1 (m is ignored), circle for d = 2, fibonacci for d = 3.
SpherePartition make_partition(int d, int m, std::uint64_t seed = 0);

/// Uniformly distributed point on S^{d-1}.
VectorXd random_unit_vector(Eigen::Index d, std::mt19937_64 &rng);

/// Replaces each v_k by center(cell(s_k)) * |v_k|. Biases are kept, so kink
/// positions and |v_k| are unchanged; W is reset to zero for retraining.
RsnParamsd snap_directions(const RsnParamsd &params, const SpherePartition &partition);

} // namespace igam
