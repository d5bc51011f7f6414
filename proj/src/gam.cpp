#include "igam/gam.hpp"

#include <algorithm>
#include <cmath>

namespace igam {

namespace {

// Segment index holding r for values: floor, clamped to [0, J-1].
Eigen::Index value_segment(const Profile &p, double r) {
  const Eigen::Index segments = p.nodes() - 1;
  const double t = (r - p.r0) / p.h;
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(t)), 0, segments - 1);
}

// Segment index for slopes: on a node the left segment wins.
Eigen::Index slope_segment(const Profile &p, double r) {
  const Eigen::Index segments = p.nodes() - 1;
  const double t = (r - p.r0) / p.h;
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(t)) - 1, 0, segments - 1);
}

struct CellLayout {
  Eigen::Index cell = 0;
  Profile profile;
  std::vector<Eigen::Index> free_nodes;
  std::vector<double> penalty_weight; ///< lambda * gbar * h / max(gcheck, eps) per free node
  Eigen::Index offset = 0;            ///< first column in the stacked design
};

} // namespace

RowVectorXd Profile::value(double r) const {
  if (nodes() < 2) throw Error("Profile: need at least two nodes");
  const Eigen::Index j = value_segment(*this, r);
  const double frac = (r - position(j)) / h;
  return (1.0 - frac) * values.row(j) + frac * values.row(j + 1);
}

RowVectorXd Profile::slope(double r) const {
  if (nodes() < 2) throw Error("Profile: need at least two nodes");
  const Eigen::Index j = slope_segment(*this, r);
  return (values.row(j + 1) - values.row(j)) / h;
}

MatrixXd Profile::second_differences() const {
  MatrixXd d2 = MatrixXd::Zero(values.rows(), values.cols());
  for (Eigen::Index j = 1; j + 1 < values.rows(); ++j)
    d2.row(j) = (values.row(j + 1) - 2.0 * values.row(j) + values.row(j - 1)) / (h * h);
  return d2;
}

Evaluation<double> evaluate_profiles(const ProfileSet &profiles, LinkKind link, const Eigen::Ref<const MatrixXd> &X) {
  const Eigen::Index P = X.rows(), d = X.cols();
  const Eigen::Index d_out = std::max<Eigen::Index>(profiles.output_dim(), 1);
  if (profiles.size() > 0 && profiles.directions.cols() != d)
    throw Error("evaluate_profiles: input dimension mismatch");
  MatrixXd z = MatrixXd::Zero(P, d_out);
  std::vector<MatrixXd> dz(static_cast<std::size_t>(d), MatrixXd::Zero(P, d_out));
  for (Eigen::Index c = 0; c < profiles.size(); ++c) {
    const Profile &prof = profiles.profiles[static_cast<std::size_t>(c)];
    const VectorXd proj = X * profiles.directions.row(c).transpose();
    for (Eigen::Index i = 0; i < P; ++i) {
      z.row(i) += prof.value(proj[i]);
      const RowVectorXd s = prof.slope(proj[i]);
      for (Eigen::Index a = 0; a < d; ++a) dz[static_cast<std::size_t>(a)].row(i) += profiles.directions(c, a) * s;
    }
  }
  Evaluation<double> out;
  out.values = apply_inverse_link(z, link);
  const MatrixXd dlink = inverse_link_derivative(z, link);
  for (auto &partial : dz) out.partials.push_back(partial.cwiseProduct(dlink));
  return out;
}

AgamSolution solve_agam(const Datasetd &dataset, const SpherePartition &partition, const CellWeights &weights,
                        double lambda, double grid_step, const AgamOptions &opts) {
  if (!(lambda > 0.0)) throw Error("solve_agam: lambda must be positive");
  if (!(grid_step > 0.0)) throw Error("solve_agam: grid step must be positive");
  if (weights.size() != partition.size()) throw Error("solve_agam: weights and partition disagree on cell count");
  const LinkKind link = dataset.loss == LossKind::squared ? LinkKind::identity : LinkKind::logit;
  const Eigen::Index N = dataset.size(), d = partition.dim(), d_out = dataset.Y.cols();
  if (N > 0 && dataset.X.cols() != d) throw Error("solve_agam: data dimension mismatch");
  if (link == LinkKind::logit && d_out != 1) throw Error("solve_agam: cross-entropy requires d_out = 1");

  const double h = grid_step;
  const double eps = kWeightFloor * weights.max_value();
  const double tol = 1e-9 * h;

  // Grid layout per active cell; nodes aligned to multiples of h.
  std::vector<CellLayout> layout;
  Eigen::Index unknowns = 0;
  for (Eigen::Index c = 0; c < partition.size(); ++c) {
    if (weights.zero_mass[static_cast<std::size_t>(c)]) continue;
    const Interval supp = weights.support[static_cast<std::size_t>(c)];
    const VectorXd center = partition.center(c);
    double right = supp.hi;
    if (N > 0) right = std::max(right, (dataset.X * center).maxCoeff());
    if (dataset.K) {
      double reach = 0.0;
      for (Eigen::Index a = 0; a < d; ++a)
        reach += center[a] > 0 ? center[a] * dataset.K->hi[a] : center[a] * dataset.K->lo[a];
      right = std::max(right, reach);
    }
    CellLayout cl;
    cl.cell = c;
    const double first = h * std::floor(supp.lo / h + 1e-9);
    cl.profile.r0 = first - h;
    cl.profile.h = h;
    const auto J = static_cast<Eigen::Index>(std::ceil((right - cl.profile.r0) / h - 1e-9)) + 1;
    cl.profile.values = MatrixXd::Zero(std::max<Eigen::Index>(J, 3) + 1, d_out);
    cl.profile.free.assign(static_cast<std::size_t>(cl.profile.nodes()), false);
    for (Eigen::Index j = 1; j + 1 < cl.profile.nodes(); ++j) {
      const double r = cl.profile.position(j);
      if (r < supp.lo - tol || r > supp.hi + tol) continue;
      cl.profile.free[static_cast<std::size_t>(j)] = true;
      cl.free_nodes.push_back(j);
      cl.penalty_weight.push_back(lambda * weights.gbar * h / std::max(weights.value(c, r), eps));
    }
    if (static_cast<int>(cl.free_nodes.size()) < opts.min_support_nodes) throw Error("grid too coarse");
    cl.offset = unknowns;
    unknowns += static_cast<Eigen::Index>(cl.free_nodes.size());
    layout.push_back(std::move(cl));
  }

  // Stacked design: column (cell, j) is h * relu(<s, x_i> - r_j), the
  // response of unit curvature at node j.
  MatrixXd A = MatrixXd::Zero(N, unknowns);
  VectorXd Lambda(unknowns);
  for (const CellLayout &cl : layout) {
    const VectorXd proj = N > 0 ? VectorXd(dataset.X * partition.center(cl.cell)) : VectorXd();
    for (std::size_t f = 0; f < cl.free_nodes.size(); ++f) {
      const Eigen::Index col = cl.offset + static_cast<Eigen::Index>(f);
      const double r = cl.profile.position(cl.free_nodes[f]);
      Lambda[col] = cl.penalty_weight[f];
      for (Eigen::Index i = 0; i < N; ++i) A(i, col) = h * std::max(proj[i] - r, 0.0);
    }
  }
  const VectorXd inv_lambda = Lambda.cwiseInverse();

  auto gradient = [&](const MatrixXd &U) -> MatrixXd {
    const MatrixXd Z = A * U;
    return A.transpose() * pointwise_loss_gradient(dataset.loss, Z, dataset.Y) + 2.0 * (Lambda.asDiagonal() * U);
  };

  MatrixXd U = MatrixXd::Zero(unknowns, d_out);
  int iterations = 0;
  if (N > 0 && unknowns > 0) {
    if (link == LinkKind::identity) {
      if (N <= unknowns) {
        MatrixXd system = A * inv_lambda.asDiagonal() * A.transpose();
        system.diagonal().array() += 1.0;
        const MatrixXd R = system.llt().solve(dataset.Y);
        U = inv_lambda.asDiagonal() * (A.transpose() * R);
      } else {
        MatrixXd system = A.transpose() * A;
        system.diagonal() += Lambda;
        U = system.llt().solve(A.transpose() * dataset.Y);
      }
      iterations = 1;
    } else {
      // Damped Newton; Hessian A^T S A + 2 Lambda inverted through the N x N
      // Woodbury form.
      auto objective = [&](const MatrixXd &V) {
        return pointwise_loss(dataset.loss, A * V, dataset.Y) + (Lambda.asDiagonal() * V).cwiseProduct(V).sum();
      };
      const VectorXd inv_m = 0.5 * inv_lambda;
      const double g0 = gradient(U).norm();
      for (; iterations < opts.max_newton_iter; ++iterations) {
        const MatrixXd g = gradient(U);
        if (g.norm() <= opts.newton_tolerance * std::max(g0, 1e-300)) break;
        const VectorXd z = A * U.col(0);
        const VectorXd sqrt_s = inverse_link_derivative(z, LinkKind::logit).col(0).cwiseSqrt();
        const MatrixXd As = sqrt_s.asDiagonal() * A;
        MatrixXd inner = As * inv_m.asDiagonal() * As.transpose();
        inner.diagonal().array() += 1.0;
        const VectorXd mg = inv_m.cwiseProduct(g.col(0));
        const VectorXd step = mg - inv_m.asDiagonal() * (As.transpose() * inner.llt().solve(As * mg));
        const double f0 = objective(U);
        const double decrease = g.col(0).dot(step);
        double t = 1.0;
        MatrixXd trial = U;
        for (int ls = 0; ls < 60; ++ls) {
          trial.col(0) = U.col(0) - t * step;
          if (objective(trial) <= f0 - 1e-4 * t * decrease) break;
          t *= 0.5;
        }
        U = trial;
      }
    }
  }

  AgamSolution sol;
  sol.link = link;
  sol.iterations = iterations;
  sol.profiles.lambda = lambda;
  sol.profiles.gbar_used = weights.gbar;
  sol.profiles.directions.resize(static_cast<Eigen::Index>(layout.size()), d);
  for (std::size_t k = 0; k < layout.size(); ++k) {
    CellLayout &cl = layout[k];
    sol.profiles.directions.row(static_cast<Eigen::Index>(k)) = partition.centers().row(cl.cell);
    sol.profiles.cell_index.push_back(cl.cell);
    // Integrate the curvature twice from the zero left boundary.
    RowVectorXd curvature_sum = RowVectorXd::Zero(d_out);
    std::size_t f = 0;
    for (Eigen::Index j = 0; j + 1 < cl.profile.nodes(); ++j) {
      if (f < cl.free_nodes.size() && cl.free_nodes[f] == j) {
        curvature_sum += h * U.row(cl.offset + static_cast<Eigen::Index>(f));
        ++f;
      }
      cl.profile.values.row(j + 1) = cl.profile.values.row(j) + h * curvature_sum;
    }
    sol.profiles.profiles.push_back(std::move(cl.profile));
  }

  if (N > 0) sol.loss = pointwise_loss(dataset.loss, A * U, dataset.Y);
  sol.penalty = penalty_agam(sol.profiles, weights);
  sol.objective = sol.loss + lambda * sol.penalty;
  if (unknowns > 0) {
    const double g0 = gradient(MatrixXd::Zero(unknowns, d_out)).norm();
    const double gu = gradient(U).norm();
    sol.stationarity = g0 > 0.0 ? gu / g0 : gu;
  }
  return sol;
}

double penalty_agam(const ProfileSet &profiles, const CellWeights &weights) {
  const double eps = kWeightFloor * weights.max_value();
  double total = 0.0;
  for (Eigen::Index k = 0; k < profiles.size(); ++k) {
    const Profile &prof = profiles.profiles[static_cast<std::size_t>(k)];
    const MatrixXd d2 = prof.second_differences();
    const Eigen::Index cell = profiles.cell(k);
    for (Eigen::Index j = 1; j + 1 < prof.nodes(); ++j) {
      const double sq = d2.row(j).squaredNorm();
      if (sq == 0.0) continue;
      total += prof.h * sq / std::max(weights.value(cell, prof.position(j)), eps);
    }
  }
  return weights.gbar * total;
}

double penalty_igam(const ProfileSet &profiles, const WeightGrid &grid) {
  if (profiles.size() != grid.num_directions()) throw Error("penalty_igam: need one profile per direction node");
  const double eps = kWeightFloor * grid.g_table.maxCoeff();
  double total = 0.0;
  for (Eigen::Index g = 0; g < profiles.size(); ++g) {
    const Profile &prof = profiles.profiles[static_cast<std::size_t>(g)];
    const MatrixXd d2 = prof.second_differences();
    double inner = 0.0;
    for (Eigen::Index j = 1; j + 1 < prof.nodes(); ++j) {
      const double sq = d2.row(j).squaredNorm();
      if (sq == 0.0) continue;
      inner += prof.h * sq / std::max(grid.row_value(grid.g_table, g, prof.position(j)), eps);
    }
    total += grid.direction_weights[g] * inner;
  }
  return grid.gbar * total;
}

ProfileSet agam_from_igam(const ProfileSet &at_centers, const SpherePartition &partition) {
  if (at_centers.size() != partition.size()) throw Error("agam_from_igam: need one profile per cell center");
  ProfileSet out = at_centers;
  out.directions = partition.centers();
  out.cell_index.clear();
  for (Eigen::Index c = 0; c < partition.size(); ++c)
    out.profiles[static_cast<std::size_t>(c)].values *= partition.measures()[c];
  return out;
}

ProfileSet igam_from_agam(const ProfileSet &cells, const SpherePartition &partition, const MatrixXd &directions) {
  if (directions.cols() != partition.dim()) throw Error("igam_from_agam: dimension mismatch");
  ProfileSet out;
  out.directions = directions;
  out.lambda = cells.lambda;
  out.gbar_used = cells.gbar_used;
  for (Eigen::Index g = 0; g < directions.rows(); ++g) {
    const Eigen::Index cell = partition.assign(directions.row(g).transpose());
    Eigen::Index match = -1;
    for (Eigen::Index k = 0; k < cells.size(); ++k)
      if (cells.cell(k) == cell) {
        match = k;
        break;
      }
    Profile lifted;
    if (match < 0) {
      // Dropped (zero-mass) cell: the profile is identically zero.
      const Profile &any = cells.profiles.front();
      lifted = any;
      lifted.values.setZero();
    } else {
      lifted = cells.profiles[static_cast<std::size_t>(match)];
      lifted.values /= partition.measures()[cell];
    }
    out.profiles.push_back(std::move(lifted));
  }
  return out;
}

} // namespace igam
