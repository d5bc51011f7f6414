#pragma once

// Monte Carlo estimate of the penalty weight
//
//   g_s(r) = p(s) * g_{xi|s}(r) * E[ |v|^2 | xi = r, s ],
//
// i.e. the |v|^2-weighted joint density of (kink direction, kink position),
// tabulated on a direction x position grid, together with gbar = int g_s(0) ds
// and the per-cell weights used by the finite-direction model.

#include "igam/rsn.hpp"
#include "igam/sphere.hpp"

#include <utility>

namespace igam {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct WeightGrid {
  int d = 0;
  MatrixXd directions;              ///< G x d unit vectors
  VectorXd direction_weights;       ///< quadrature weight of every direction node
  VectorXd positions;               ///< J uniform nodes
  MatrixXd g_table;                 ///< G x J, g_s(r)
  MatrixXd joint_density;           ///< G x J, p(s) g_{xi|s}(r)
  MatrixXd cond_second_moment;      ///< G x J, E[|v|^2 | xi = r, s]
  VectorXd direction_density;       ///< G, p(s) (probability mass per node for d = 1)
  std::vector<Interval> support;    ///< per direction node
  double gbar = 0.0;
  long long n_samples = 0;
  double bandwidth_direction = 0.0; ///< radians (unused for d = 1)
  double bandwidth_position = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index num_directions() const { return directions.rows(); }
  Eigen::Index num_positions() const { return positions.size(); }
  double position_step() const { return positions[1] - positions[0]; }

  /// Interpolation weights of an arbitrary direction onto direction nodes:
  /// the sign node for d = 1, linear in angle for d = 2, nearest node for d = 3.
  std::vector<std::pair<Eigen::Index, double>> direction_stencil(const Eigen::Ref<const VectorXd> &s) const;
  /// Nearest direction node.
  Eigen::Index nearest_direction(const Eigen::Ref<const VectorXd> &s) const;

  /// Linear interpolation of row `node` of a G x J table at r; 0 outside the grid.
  double row_value(const MatrixXd &table, Eigen::Index node, double r) const;

  double g(const Eigen::Ref<const VectorXd> &s, double r) const;
  double p(const Eigen::Ref<const VectorXd> &s) const;
  Interval support_at(const Eigen::Ref<const VectorXd> &s) const;

  /// Double quadrature of p(s) g_{xi|s}(r); close to 1 when the grid holds the law.
  double density_mass() const;
};

struct WeightingOptions {
  int dir_grid = 256;      ///< direction nodes (ignored for d = 1)
  int pos_grid = 801;      ///< position nodes
  long long n_samples = 1000000;
  double bandwidth = 0.0;  ///< <= 0: Silverman rule per axis; > 0: used for both axes
  double support_mass = 0.999;
};

/// Raises "degenerate weighting" if the estimate vanishes identically.
WeightGrid estimate_weighting(const InitDistribution &init, int d, const WeightingOptions &opts = {});

/// Direction quadrature of s -> g_s(0); raises if the result is not positive.
double gbar(const WeightGrid &grid);

/// Smallest interval holding `mass` of the sorted sample (values must be sorted).
Interval smallest_interval(const std::vector<double> &sorted, double mass);

struct CellWeights {
  VectorXd positions;            ///< shared with the WeightGrid
  MatrixXd table;                ///< m x J, gcheck_s(r) = g(s, r) * int_{U(s)} p
  VectorXd cell_mass;            ///< int_{U(s)} p(s) ds
  std::vector<bool> zero_mass;   ///< cells without probability mass (dropped by the solver)
  std::vector<Interval> support; ///< per cell, from the center direction
  double gbar = 0.0;             ///< scaling constant used in the penalty (the grid's gbar)
  double gbar_check = 0.0;       ///< sum_s gcheck_s(0)

  Eigen::Index size() const { return table.rows(); }
  double value(Eigen::Index cell, double r) const;
  double max_value() const { return table.maxCoeff(); }
};

CellWeights cell_weights(const WeightGrid &grid, const SpherePartition &partition);

} // namespace igam
