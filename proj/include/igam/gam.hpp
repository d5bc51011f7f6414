#pragma once

// Adapted generalised additive model over finitely many directions:
//
//   min_phi  sum_i loss(y_i, sum_s phi_s(<s, x_i>))
//          + lambda * gbar * sum_s int phi_s''(r)^2 / gcheck_s(r) dr
//
// with phi_s = phi_s' = 0 left of the support of gcheck_s and phi_s'' = 0
// outside it. Profiles are node values on a uniform grid, interpolated
// piecewise linearly; phi'' is the central second difference.

#include "igam/trainers.hpp"
#include "igam/weighting.hpp"

namespace igam {

/// Relative floor applied to the weight inside its support before dividing by it.
inline constexpr double kWeightFloor = 1e-8;

/// One profile function on nodes r_j = r0 + j h, j = 0..J. Extrapolates
/// linearly on both sides.
struct Profile {
  double r0 = 0.0;
  double h = 1.0;
  MatrixXd values;        ///< (J+1) x d_out node values
  std::vector<bool> free; ///< per node: second difference allowed to be nonzero

  Eigen::Index nodes() const { return values.rows(); }
  double position(Eigen::Index j) const { return r0 + static_cast<double>(j) * h; }
  double last_position() const { return position(nodes() - 1); }

  RowVectorXd value(double r) const;
  /// Slope at r; on a node the slope of the segment to its left is used.
  RowVectorXd slope(double r) const;
  /// Rows 1..J-1: (phi_{j+1} - 2 phi_j + phi_{j-1}) / h^2; rows 0 and J are zero.
  MatrixXd second_differences() const;
};

struct ProfileSet {
  MatrixXd directions; ///< m x d
  std::vector<Profile> profiles;
  /// Partition cell of every profile; empty means profile k is cell k.
  std::vector<Eigen::Index> cell_index;
  double lambda = 0.0;
  double gbar_used = 0.0;

  Eigen::Index size() const { return directions.rows(); }
  Eigen::Index output_dim() const { return profiles.empty() ? 0 : profiles.front().values.cols(); }
  Eigen::Index cell(Eigen::Index k) const { return cell_index.empty() ? k : cell_index[static_cast<std::size_t>(k)]; }
};

/// f(x) = inverse_link(sum_s phi_s(<s, x>)) and its partial derivatives.
Evaluation<double> evaluate_profiles(const ProfileSet &profiles, LinkKind link, const Eigen::Ref<const MatrixXd> &X);

struct AgamOptions {
  int min_support_nodes = 8;
  int max_newton_iter = 100;
  double newton_tolerance = 1e-10;
};

struct AgamSolution {
  ProfileSet profiles;
  LinkKind link = LinkKind::identity;
  double objective = 0.0;
  double loss = 0.0;
  double penalty = 0.0;      ///< unscaled by lambda
  double stationarity = 0.0; ///< gradient norm relative to the gradient at zero
  int iterations = 0;
};

template <typename Derived>
Evaluation<double> evaluate(const AgamSolution &sol, const Eigen::MatrixBase<Derived> &X) {
  return evaluate_profiles(sol.profiles, sol.link, X.template cast<double>());
}

/// Squared loss (identity link) is solved in closed form; binary cross-entropy
/// (logit link, d_out = 1) by damped Newton. Cells flagged zero_mass are dropped.
AgamSolution solve_agam(const Datasetd &dataset, const SpherePartition &partition, const CellWeights &weights,
                        double lambda, double grid_step, const AgamOptions &opts = {});

/// eval_agam in function form.
inline Evaluation<double> eval_agam(const AgamSolution &sol, const Eigen::Ref<const MatrixXd> &X) {
  return evaluate_profiles(sol.profiles, sol.link, X);
}

/// gbar * sum_s h * sum_j |D^2 phi_s(r_j)|^2 / max(gcheck_s(r_j), eps).
double penalty_agam(const ProfileSet &profiles, const CellWeights &weights);

/// gbar * sum_g w_g * h * sum_j |D^2 phi_g(r_j)|^2 / max(g_g(r_j), eps) for
/// profiles given on the direction nodes of the grid.
double penalty_igam(const ProfileSet &profiles, const WeightGrid &grid);

/// Cell profiles from continuum profiles sampled at the cell centers: phi * mu(U).
ProfileSet agam_from_igam(const ProfileSet &at_centers, const SpherePartition &partition);

/// Piecewise-constant lift of cell profiles onto arbitrary directions: phi / mu(U).
ProfileSet igam_from_agam(const ProfileSet &cells, const SpherePartition &partition, const MatrixXd &directions);

} // namespace igam
