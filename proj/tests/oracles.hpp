#pragma once

// Reference computations shared by the unit tests and the acceptance binary.
// They use the plainest available formulation (dense systems on node values,
// full-pivot LU) and none of the library's solver code paths.

#include "igam/gam.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <array>
#include <random>

namespace igam::oracle {

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return M;
}

/// Full vectorised KKT system of the ridge objective, solved by full-pivot LU:
/// (I_dout (x) (F^T F + lambda I)) vec(W^T) = vec(F^T Y).
inline MatrixXd ridge_kkt(const MatrixXd &F, const MatrixXd &Y, double lambda_tilde) {
  const Eigen::Index n = F.cols(), d_out = Y.cols();
  MatrixXd block = F.transpose() * F;
  block.diagonal().array() += lambda_tilde;
  const MatrixXd H = Eigen::kroneckerProduct(MatrixXd::Identity(d_out, d_out), block);
  const MatrixXd rhs = F.transpose() * Y;
  const VectorXd sol = H.fullPivLu().solve(Eigen::Map<const VectorXd>(rhs.data(), rhs.size()));
  return Eigen::Map<const MatrixXd>(sol.data(), n, d_out).transpose();
}

/// Node layout of one profile: positions r0 + j h, j = 0..J, and the nodes
/// whose second difference may be nonzero (interior nodes inside the support).
struct NodeLayout {
  Eigen::Index cell = 0;
  VectorXd direction;
  double r0 = 0.0, h = 1.0;
  Eigen::Index nodes = 0;
  std::vector<bool> free;
};

/// The layout the solver is expected to use, rebuilt from the support
/// interval and the data: nodes aligned to multiples of h, one zero node left
/// of the support and enough nodes to the right to cover the data and K.
inline std::vector<NodeLayout> expected_layout(const Datasetd &data, const SpherePartition &partition,
                                               const CellWeights &weights, double h) {
  std::vector<NodeLayout> out;
  for (Eigen::Index c = 0; c < partition.size(); ++c) {
    if (weights.zero_mass[static_cast<std::size_t>(c)]) continue;
    NodeLayout L;
    L.cell = c;
    L.direction = partition.center(c);
    L.h = h;
    const Interval supp = weights.support[static_cast<std::size_t>(c)];
    L.r0 = h * std::floor(supp.lo / h + 1e-9) - h;
    double right = supp.hi;
    if (data.size() > 0) right = std::max(right, (data.X * L.direction).maxCoeff());
    if (data.K) {
      double reach = 0.0;
      for (Eigen::Index a = 0; a < L.direction.size(); ++a)
        reach += L.direction[a] > 0 ? L.direction[a] * data.K->hi[a] : L.direction[a] * data.K->lo[a];
      right = std::max(right, reach);
    }
    L.nodes = std::max<Eigen::Index>(static_cast<Eigen::Index>(std::ceil((right - L.r0) / h - 1e-9)) + 1, 3) + 1;
    L.free.assign(static_cast<std::size_t>(L.nodes), false);
    for (Eigen::Index j = 1; j + 1 < L.nodes; ++j) {
      const double r = L.r0 + static_cast<double>(j) * h;
      L.free[static_cast<std::size_t>(j)] = r >= supp.lo - 1e-9 * h && r <= supp.hi + 1e-9 * h;
    }
    out.push_back(L);
  }
  return out;
}

/// Linear interpolation weights of r on a layout (linear extrapolation at the ends).
inline std::array<std::pair<Eigen::Index, double>, 2> interpolation(const NodeLayout &L, double r) {
  const double t = (r - L.r0) / L.h;
  const Eigen::Index j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(t)), 0, L.nodes - 2);
  const double frac = t - static_cast<double>(j);
  return {{{j, 1.0 - frac}, {j + 1, frac}}};
}

/// Objective of stacked node values (one block of rows per layout), squared or
/// binary cross-entropy loss on the summed profiles plus the weighted curvature.
inline double agam_objective(const Datasetd &data, const std::vector<NodeLayout> &layout, const CellWeights &weights,
                             double lambda, const std::vector<MatrixXd> &values) {
  const Eigen::Index N = data.size(), d_out = data.Y.cols();
  MatrixXd Z = MatrixXd::Zero(N, d_out);
  double penalty = 0.0;
  const double eps = kWeightFloor * weights.max_value();
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const NodeLayout &L = layout[k];
    for (Eigen::Index i = 0; i < N; ++i)
      for (const auto &[j, w] : interpolation(L, data.X.row(i).dot(L.direction))) Z.row(i) += w * values[k].row(j);
    for (Eigen::Index j = 1; j + 1 < L.nodes; ++j) {
      const RowVectorXd d2 = (values[k].row(j + 1) - 2.0 * values[k].row(j) + values[k].row(j - 1)) / (L.h * L.h);
      const double r = L.r0 + static_cast<double>(j) * L.h;
      penalty += L.h * d2.squaredNorm() / std::max(weights.value(L.cell, r), eps);
    }
  }
  double loss = 0.0;
  if (data.loss == LossKind::squared) {
    loss = (Z - data.Y).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < N; ++i) {
      const double z = Z(i, 0);
      loss += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - data.Y(i, 0) * z;
    }
  }
  return loss + lambda * weights.gbar * penalty;
}

/// Squared-loss minimiser over node values by the dense equality-constrained
/// KKT system: phi_0 = phi_1 = 0 and zero second difference at every
/// interior node outside the support. Returns node values per layout.
inline std::vector<MatrixXd> agam_qp(const Datasetd &data, const std::vector<NodeLayout> &layout,
                                     const CellWeights &weights, double lambda) {
  std::vector<Eigen::Index> offset;
  Eigen::Index total = 0;
  for (const NodeLayout &L : layout) {
    offset.push_back(total);
    total += L.nodes;
  }
  const Eigen::Index N = data.size();
  MatrixXd B = MatrixXd::Zero(N, total);
  MatrixXd Q = MatrixXd::Zero(total, total);
  std::vector<VectorXd> constraints;
  const double eps = kWeightFloor * weights.max_value();
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const NodeLayout &L = layout[k];
    const Eigen::Index o = offset[k];
    for (Eigen::Index i = 0; i < N; ++i)
      for (const auto &[j, w] : interpolation(L, data.X.row(i).dot(L.direction))) B(i, o + j) += w;
    for (Eigen::Index j = 0; j < 2; ++j) {
      VectorXd e = VectorXd::Zero(total);
      e[o + j] = 1.0;
      constraints.push_back(e);
    }
    for (Eigen::Index j = 1; j + 1 < L.nodes; ++j) {
      VectorXd row = VectorXd::Zero(total);
      row[o + j - 1] = 1.0;
      row[o + j] = -2.0;
      row[o + j + 1] = 1.0;
      if (!L.free[static_cast<std::size_t>(j)]) {
        constraints.push_back(row);
        continue;
      }
      row /= L.h * L.h;
      const double r = L.r0 + static_cast<double>(j) * L.h;
      Q += (lambda * weights.gbar * L.h / std::max(weights.value(L.cell, r), eps)) * row * row.transpose();
    }
  }
  Q += B.transpose() * B;
  const auto C = static_cast<Eigen::Index>(constraints.size());
  MatrixXd K = MatrixXd::Zero(total + C, total + C);
  K.topLeftCorner(total, total) = Q;
  for (Eigen::Index c = 0; c < C; ++c) {
    K.block(total + c, 0, 1, total) = constraints[static_cast<std::size_t>(c)].transpose();
    K.block(0, total + c, total, 1) = constraints[static_cast<std::size_t>(c)];
  }
  MatrixXd rhs = MatrixXd::Zero(total + C, data.Y.cols());
  rhs.topRows(total) = B.transpose() * data.Y;
  const MatrixXd sol = K.fullPivLu().solve(rhs);
  std::vector<MatrixXd> out;
  for (std::size_t k = 0; k < layout.size(); ++k) out.push_back(sol.block(offset[k], 0, layout[k].nodes, data.Y.cols()));
  return out;
}

/// Largest violation of the constraints of agam_qp by node values
/// (boundary values and second differences outside the support).
inline double constraint_violation(const std::vector<NodeLayout> &layout, const std::vector<MatrixXd> &values) {
  double worst = 0.0;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const NodeLayout &L = layout[k];
    worst = std::max({worst, values[k].row(0).cwiseAbs().maxCoeff(), values[k].row(1).cwiseAbs().maxCoeff()});
    for (Eigen::Index j = 1; j + 1 < L.nodes; ++j)
      if (!L.free[static_cast<std::size_t>(j)])
        worst = std::max(worst, (values[k].row(j + 1) - 2.0 * values[k].row(j) + values[k].row(j - 1)).cwiseAbs().maxCoeff() /
                                    (L.h * L.h));
  }
  return worst;
}

/// For every profile: sup |phi'| over the nodes and the bound
/// sqrt(sum_j h |D^2 phi_j|^2 / gcheck_j * sum_j h gcheck_j) that follows from
/// phi' = sum_j h D^2 phi_j and Cauchy-Schwarz. Returns the largest ratio.
inline double poincare_ratio(const AgamSolution &sol, const CellWeights &weights) {
  double worst = 0.0;
  const double eps = kWeightFloor * weights.max_value();
  for (Eigen::Index k = 0; k < sol.profiles.size(); ++k) {
    const Profile &p = sol.profiles.profiles[static_cast<std::size_t>(k)];
    const Eigen::Index cell = sol.profiles.cell(k);
    const MatrixXd d2 = p.second_differences();
    double energy = 0.0, mass = 0.0, slope = 0.0;
    for (Eigen::Index j = 1; j + 1 < p.nodes(); ++j) {
      const double w = std::max(weights.value(cell, p.position(j)), eps);
      if (d2.row(j).squaredNorm() > 0.0) energy += p.h * d2.row(j).squaredNorm() / w;
      if (p.free[static_cast<std::size_t>(j)]) mass += p.h * w;
    }
    for (Eigen::Index j = 0; j + 1 < p.nodes(); ++j)
      slope = std::max(slope, ((p.values.row(j + 1) - p.values.row(j)) / p.h).norm());
    const double bound = std::sqrt(energy * mass);
    if (slope > 0.0) worst = std::max(worst, slope / std::max(bound, 1e-300));
  }
  return worst;
}

} // namespace igam::oracle
