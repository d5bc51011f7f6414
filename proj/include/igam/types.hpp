#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace igam {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using RowVectorXd = RowVector<double>;

/// Thrown for violated preconditions and degenerate numerical input.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Output link. logit means the model output is sigmoid(z) of the additive predictor z.
enum class LinkKind { identity, logit };

inline std::string to_string(LinkKind link) {
  return link == LinkKind::identity ? "identity" : "logit";
}

inline LinkKind link_from_string(const std::string &name) {
  if (name == "identity") return LinkKind::identity;
  if (name == "logit") return LinkKind::logit;
  throw Error("unknown link '" + name + "'");
}

/// Applies the inverse link row-wise to a matrix of pre-link outputs.
template <typename Derived>
Matrix<typename Derived::Scalar> apply_inverse_link(const Eigen::MatrixBase<Derived> &z, LinkKind link) {
  using Scalar = typename Derived::Scalar;
  if (link == LinkKind::identity) return z;
  return z.unaryExpr([](Scalar t) { return Scalar(1) / (Scalar(1) + std::exp(-t)); });
}

/// Derivative of the inverse link, elementwise.
template <typename Derived>
Matrix<typename Derived::Scalar> inverse_link_derivative(const Eigen::MatrixBase<Derived> &z, LinkKind link) {
  using Scalar = typename Derived::Scalar;
  if (link == LinkKind::identity) return Matrix<Scalar>::Ones(z.rows(), z.cols());
  return z.unaryExpr([](Scalar t) {
    const Scalar p = Scalar(1) / (Scalar(1) + std::exp(-t));
    return p * (Scalar(1) - p);
  });
}

/// Values and first partial derivatives of a vector-valued model on a point set.
/// partials[i] holds d f / d x_i, shape points x d_out.
template <typename Scalar>
struct Evaluation {
  Matrix<Scalar> values;
  std::vector<Matrix<Scalar>> partials;
};

} // namespace igam
