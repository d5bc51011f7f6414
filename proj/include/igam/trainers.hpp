#pragma once

// Output-layer training for randomized shallow networks. All routines take the
// feature matrix (m x n) rather than the network, so they work for any frozen
// first layer, snapped or not.

#include "igam/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <numbers>
#include <optional>

namespace igam {

enum class LossKind { squared, cross_entropy_binary };

inline std::string to_string(LossKind kind) {
  return kind == LossKind::squared ? "squared" : "cross_entropy_binary";
}

inline LossKind loss_kind_from_string(const std::string &name) {
  if (name == "squared") return LossKind::squared;
  if (name == "cross_entropy_binary") return LossKind::cross_entropy_binary;
  throw Error("unknown loss '" + name + "'");
}

/// Axis-aligned box, used as the compactum K on which models are compared.
template <typename Scalar>
struct Box {
  Vector<Scalar> lo;
  Vector<Scalar> hi;
};

template <typename Scalar>
struct DatasetLoss {
  Matrix<Scalar> X; ///< m x d training inputs
  Matrix<Scalar> Y; ///< m x d_out targets
  LossKind loss = LossKind::squared;
  std::optional<Box<Scalar>> K;

  Eigen::Index size() const { return X.rows(); }
};

using Datasetd = DatasetLoss<double>;

/// Sum of per-sample losses evaluated on pre-link outputs Z (m x d_out).
/// Cross-entropy is written as log(1 + e^z) - y z, which is the binary
/// cross-entropy of sigmoid(z).
template <typename DZ, typename DY>
typename DZ::Scalar pointwise_loss(LossKind kind, const Eigen::MatrixBase<DZ> &Z, const Eigen::MatrixBase<DY> &Y) {
  using Scalar = typename DZ::Scalar;
  if (kind == LossKind::squared) return (Y.template cast<Scalar>() - Z).squaredNorm();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      const Scalar z = Z(i, j);
      const Scalar softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += softplus - Scalar(Y(i, j)) * z;
    }
  return total;
}

/// dL/dZ for pointwise_loss.
template <typename DZ, typename DY>
Matrix<typename DZ::Scalar> pointwise_loss_gradient(LossKind kind, const Eigen::MatrixBase<DZ> &Z,
                                                    const Eigen::MatrixBase<DY> &Y) {
  using Scalar = typename DZ::Scalar;
  if (kind == LossKind::squared) return Scalar(2) * (Z - Y.template cast<Scalar>());
  return apply_inverse_link(Z, LinkKind::logit) - Y.template cast<Scalar>();
}

template <typename Scalar>
struct TrainReport {
  Matrix<Scalar> W; ///< d_out x n
  Scalar lambda_tilde = 0;
  Scalar objective_value = 0;
  Scalar loss_value = 0;
  Scalar penalty_value = 0;
  Scalar gradient_norm = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Scalar>
void check_finite(const Matrix<Scalar> &M, const char *what) {
  if (!M.allFinite()) throw Error(std::string(what) + ": non-finite entries");
}

template <typename Scalar>
void fill_report(TrainReport<Scalar> &report, const Matrix<Scalar> &F, const Matrix<Scalar> &Y, LossKind kind) {
  const Matrix<Scalar> Z = F * report.W.transpose();
  report.loss_value = pointwise_loss(kind, Z, Y);
  report.penalty_value = report.lambda_tilde * report.W.squaredNorm();
  report.objective_value = report.loss_value + report.penalty_value;
  const Matrix<Scalar> G =
      pointwise_loss_gradient(kind, Z, Y).transpose() * F + Scalar(2) * report.lambda_tilde * report.W;
  report.gradient_norm = G.norm();
}

} // namespace detail

/// Closed-form minimiser of sum_i |y_i - W phi(x_i)|^2 + lambda_tilde |W|_F^2.
/// Solves whichever normal system (m x m or n x n) is smaller.
template <typename DF, typename DY>
TrainReport<typename DF::Scalar> ridge_solve(const Eigen::MatrixBase<DF> &features, const Eigen::MatrixBase<DY> &Y,
                                             typename DF::Scalar lambda_tilde) {
  using Scalar = typename DF::Scalar;
  if (!(lambda_tilde > 0)) throw Error("ridge_solve: lambda_tilde must be positive");
  const Matrix<Scalar> F = features;
  const Matrix<Scalar> T = Y.template cast<Scalar>();
  if (T.rows() != F.rows()) throw Error("ridge_solve: features and targets disagree on sample count");
  detail::check_finite(F, "ridge_solve features");
  detail::check_finite(T, "ridge_solve targets");

  const Eigen::Index m = F.rows(), n = F.cols();
  TrainReport<Scalar> report;
  report.lambda_tilde = lambda_tilde;
  if (m <= n) {
    Matrix<Scalar> gram = F * F.transpose();
    gram.diagonal().array() += lambda_tilde;
    report.W = (F.transpose() * gram.llt().solve(T)).transpose();
  } else {
    Matrix<Scalar> gram = F.transpose() * F;
    gram.diagonal().array() += lambda_tilde;
    report.W = gram.llt().solve(F.transpose() * T).transpose();
  }
  detail::fill_report(report, F, T, LossKind::squared);
  report.iterations = 0;
  report.converged = true;
  return report;
}

/// Exact solution of the linear gradient flow dW/dt = -grad L(W), W(0) = 0,
/// for squared loss. The eigendecomposition of the smaller Gram matrix is
/// computed once; weights(T) is then O(size) per query.
template <typename Scalar>
class GradientFlow {
public:
  template <typename DF, typename DY>
  GradientFlow(const Eigen::MatrixBase<DF> &features, const Eigen::MatrixBase<DY> &Y)
      : F_(features.template cast<Scalar>()), Y_(Y.template cast<Scalar>()), primal_(F_.rows() > F_.cols()) {
    if (Y_.rows() != F_.rows()) throw Error("gradient flow: features and targets disagree on sample count");
    const Matrix<Scalar> gram = primal_ ? Matrix<Scalar>(F_.transpose() * F_) : Matrix<Scalar>(F_ * F_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success) throw Error("gradient flow: eigendecomposition failed");
    eigenvalues_ = eig.eigenvalues().cwiseMax(Scalar(0));
    basis_ = eig.eigenvectors();
    // Projected right-hand side in the eigenbasis.
    rhs_ = primal_ ? Matrix<Scalar>(basis_.transpose() * (F_.transpose() * Y_)) : Matrix<Scalar>(basis_.transpose() * Y_);
  }

  /// W(T), shape d_out x n.
  Matrix<Scalar> weights(Scalar T) const {
    if (T < 0) throw Error("gradient flow: T must be non-negative");
    Vector<Scalar> factor(eigenvalues_.size());
    for (Eigen::Index i = 0; i < factor.size(); ++i) {
      const Scalar k = eigenvalues_[i];
      factor[i] = k > 0 ? -std::expm1(Scalar(-2) * k * T) / k : Scalar(2) * T;
    }
    const Matrix<Scalar> coeff = basis_ * (factor.asDiagonal() * rhs_);
    if (primal_) return coeff.transpose();
    return (F_.transpose() * coeff).transpose();
  }

  Scalar loss(Scalar T) const { return (Y_ - F_ * weights(T).transpose()).squaredNorm(); }

  const Vector<Scalar> &gram_eigenvalues() const { return eigenvalues_; }

private:
  Matrix<Scalar> F_, Y_;
  bool primal_;
  Vector<Scalar> eigenvalues_;
  Matrix<Scalar> basis_;
  Matrix<Scalar> rhs_;
};

template <typename DF, typename DY>
Matrix<typename DF::Scalar> gradient_flow_exact(const Eigen::MatrixBase<DF> &features, const Eigen::MatrixBase<DY> &Y,
                                                typename DF::Scalar T) {
  if (T < 0) throw Error("gradient flow: T must be non-negative");
  return GradientFlow<typename DF::Scalar>(features, Y).weights(T);
}

template <typename Scalar>
struct DescentResult {
  Matrix<Scalar> W;
  std::vector<Scalar> losses; ///< losses[t] is the loss after t steps, t = 0..tau
};

/// tau explicit Euler steps of size gamma on the squared loss, starting at W = 0.
/// Throws "step size too large" once the loss has grown more than tenfold over
/// the last 10 steps.
template <typename DF, typename DY>
DescentResult<typename DF::Scalar> gradient_descent(const Eigen::MatrixBase<DF> &features, const Eigen::MatrixBase<DY> &Y,
                                                    typename DF::Scalar gamma, long long tau) {
  using Scalar = typename DF::Scalar;
  if (!(gamma > 0)) throw Error("gradient_descent: gamma must be positive");
  if (tau < 0) throw Error("gradient_descent: tau must be non-negative");
  const Matrix<Scalar> F = features;
  const Matrix<Scalar> T = Y.template cast<Scalar>();
  DescentResult<Scalar> out;
  out.W = Matrix<Scalar>::Zero(T.cols(), F.cols());
  out.losses.reserve(static_cast<std::size_t>(tau) + 1);
  Matrix<Scalar> residual = F * out.W.transpose() - T;
  out.losses.push_back(residual.squaredNorm());
  for (long long step = 1; step <= tau; ++step) {
    out.W.noalias() -= (Scalar(2) * gamma) * (residual.transpose() * F);
    residual.noalias() = F * out.W.transpose();
    residual -= T;
    const Scalar loss = residual.squaredNorm();
    out.losses.push_back(loss);
    if (!std::isfinite(loss)) throw Error("step size too large");
    if (step >= 10) {
      const Scalar before = out.losses[static_cast<std::size_t>(step - 10)];
      if (loss > Scalar(10) * before && loss > std::numeric_limits<Scalar>::min()) throw Error("step size too large");
    }
  }
  return out;
}

struct IterativeOptions {
  int max_iter = 200000;
  double gradient_tolerance = 1e-7;
};

/// l2-regularised training for a convex per-sample loss by accelerated
/// gradient descent with the strongly convex momentum schedule.
template <typename DF, typename Scalar>
TrainReport<Scalar> general_loss_ridge(const Eigen::MatrixBase<DF> &features, const DatasetLoss<Scalar> &dataset,
                                       Scalar lambda_tilde, const IterativeOptions &opts = {}) {
  if (!(lambda_tilde > 0)) throw Error("general_loss_ridge: lambda_tilde must be positive");
  const Matrix<Scalar> F = features.template cast<Scalar>();
  const Matrix<Scalar> &Y = dataset.Y;
  if (Y.rows() != F.rows()) throw Error("general_loss_ridge: features and targets disagree on sample count");
  if (dataset.loss == LossKind::cross_entropy_binary && Y.cols() != 1)
    throw Error("general_loss_ridge: cross-entropy requires d_out = 1");
  detail::check_finite(F, "general_loss_ridge features");

  const Eigen::Index m = F.rows(), n = F.cols();
  Scalar top = 0;
  if (m > 0) {
    const Matrix<Scalar> gram = m <= n ? Matrix<Scalar>(F * F.transpose()) : Matrix<Scalar>(F.transpose() * F);
    top = Eigen::SelfAdjointEigenSolver<Matrix<Scalar>>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  }
  const Scalar curvature = dataset.loss == LossKind::squared ? Scalar(2) : Scalar(0.25);
  const Scalar lipschitz = curvature * top + Scalar(2) * lambda_tilde;
  const Scalar strong = Scalar(2) * lambda_tilde;
  const Scalar root = std::sqrt(lipschitz / strong);
  const Scalar momentum = (root - 1) / (root + 1);

  auto grad = [&](const Matrix<Scalar> &W) -> Matrix<Scalar> {
    const Matrix<Scalar> Z = F * W.transpose();
    return pointwise_loss_gradient(dataset.loss, Z, Y).transpose() * F + Scalar(2) * lambda_tilde * W;
  };

  TrainReport<Scalar> report;
  report.lambda_tilde = lambda_tilde;
  Matrix<Scalar> W = Matrix<Scalar>::Zero(Y.cols(), n);
  Matrix<Scalar> previous = W;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const Matrix<Scalar> g = grad(W);
    if (g.norm() <= opts.gradient_tolerance) {
      report.converged = true;
      break;
    }
    const Matrix<Scalar> lookahead = W + momentum * (W - previous);
    previous = W;
    W = lookahead - grad(lookahead) / lipschitz;
  }
  report.W = W;
  report.iterations = it;
  detail::fill_report(report, F, Y, dataset.loss);
  if (!report.converged && report.gradient_norm <= opts.gradient_tolerance) report.converged = true;
  return report;
}

/// Maps a training time to the ridge parameter it is compared against:
/// 1/T, or 1/(2(e-1)T) for the early-stopping calibration.
enum class TimeCalibration { inverse_time, early_stopping };

template <typename Scalar>
Scalar lambda_tilde_for_time(Scalar T, TimeCalibration calibration = TimeCalibration::inverse_time) {
  if (!(T > 0)) throw Error("lambda_tilde_for_time: T must be positive");
  if (calibration == TimeCalibration::inverse_time) return Scalar(1) / T;
  return Scalar(1) / (Scalar(2) * (std::numbers::e_v<Scalar> - Scalar(1)) * T);
}

} // namespace igam
