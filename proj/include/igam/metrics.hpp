#pragma once

// W^{1,inf}(K) distance between two models, approximated by sup over a
// regular grid on the box K. A "model" is anything with an ADL-visible
// evaluate(model, X) returning Evaluation<Scalar>.

#include "igam/trainers.hpp"
#include "igam/types.hpp"

#include <optional>

namespace igam {

template <typename Scalar>
struct EvalGrid {
  Box<Scalar> K;
  std::vector<int> resolution;
  Matrix<Scalar> points; ///< P x d, row-major enumeration with axis 0 fastest
  /// When set, partials are central differences of the values with this step
  /// instead of the models' analytic gradients.
  std::optional<Scalar> fd_step;

  Eigen::Index dim() const { return K.lo.size(); }
};

template <typename Scalar>
EvalGrid<Scalar> make_eval_grid(const Box<Scalar> &K, std::vector<int> resolution) {
  const Eigen::Index d = K.lo.size();
  if (K.hi.size() != d || static_cast<Eigen::Index>(resolution.size()) != d)
    throw Error("make_eval_grid: dimension mismatch");
  Eigen::Index total = 1;
  for (int r : resolution) {
    if (r < 2) throw Error("make_eval_grid: need at least 2 points per axis");
    total *= r;
  }
  EvalGrid<Scalar> grid{K, resolution, Matrix<Scalar>(total, d), std::nullopt};
  std::vector<int> idx(d, 0);
  for (Eigen::Index p = 0; p < total; ++p) {
    for (Eigen::Index a = 0; a < d; ++a) {
      const Scalar t = Scalar(idx[a]) / Scalar(resolution[a] - 1);
      grid.points(p, a) = K.lo[a] + t * (K.hi[a] - K.lo[a]);
    }
    for (Eigen::Index a = 0; a < d; ++a) {
      if (++idx[a] < resolution[a]) break;
      idx[a] = 0;
    }
  }
  return grid;
}

template <typename Scalar>
EvalGrid<Scalar> make_eval_grid(const Box<Scalar> &K, int per_axis = 32) {
  return make_eval_grid(K, std::vector<int>(K.lo.size(), per_axis));
}

/// The zero function R^d -> R^{d_out}.
struct ZeroModel {
  Eigen::Index d_out = 1;
};

template <typename Derived>
Evaluation<typename Derived::Scalar> evaluate(const ZeroModel &zero, const Eigen::MatrixBase<Derived> &X) {
  using Scalar = typename Derived::Scalar;
  Evaluation<Scalar> out;
  out.values = Matrix<Scalar>::Zero(X.rows(), zero.d_out);
  out.partials.assign(X.cols(), out.values);
  return out;
}

namespace detail {

template <typename Model, typename Scalar>
Evaluation<Scalar> evaluate_on(const Model &model, const EvalGrid<Scalar> &grid) {
  if (!grid.fd_step) return evaluate(model, grid.points);
  const Scalar h = *grid.fd_step;
  Evaluation<Scalar> out;
  out.values = evaluate(model, grid.points).values;
  for (Eigen::Index a = 0; a < grid.dim(); ++a) {
    Matrix<Scalar> plus = grid.points, minus = grid.points;
    plus.col(a).array() += h;
    minus.col(a).array() -= h;
    out.partials.push_back((evaluate(model, plus).values - evaluate(model, minus).values) / (Scalar(2) * h));
  }
  return out;
}

} // namespace detail

/// max( sup|f - g|, max_i sup|d_i f - d_i g| ) over grid points and output components.
template <typename F, typename G, typename Scalar>
Scalar sobolev_distance(const F &f, const G &g, const EvalGrid<Scalar> &grid) {
  const Evaluation<Scalar> ef = detail::evaluate_on(f, grid);
  const Evaluation<Scalar> eg = detail::evaluate_on(g, grid);
  if (ef.values.cols() != eg.values.cols()) throw Error("sobolev_distance: output dimensions differ");
  Scalar dist = (ef.values - eg.values).cwiseAbs().maxCoeff();
  for (std::size_t a = 0; a < ef.partials.size(); ++a)
    dist = std::max(dist, (ef.partials[a] - eg.partials[a]).cwiseAbs().maxCoeff());
  return dist;
}

/// Sum of per-sample losses of the model's (post-link) outputs.
template <typename Model, typename Scalar>
Scalar loss_eval(const DatasetLoss<Scalar> &dataset, const Model &model) {
  if (dataset.size() == 0) return Scalar(0);
  const Matrix<Scalar> out = evaluate(model, dataset.X).values;
  if (dataset.loss == LossKind::squared) return (dataset.Y - out).squaredNorm();
  Scalar total = 0;
  const Scalar tiny = std::numeric_limits<Scalar>::min();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar p = out(i, 0), y = dataset.Y(i, 0);
    total -= y * std::log(std::max(p, tiny)) + (Scalar(1) - y) * std::log(std::max(Scalar(1) - p, tiny));
  }
  return total;
}

} // namespace igam
