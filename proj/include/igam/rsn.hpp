#pragma once

// Randomized shallow ReLU networks: frozen random first layer (V, b), trainable
// output layer W. Everything here is templated on the scalar type; sampling
// always happens in double and can be cast afterwards.

#include "igam/types.hpp"

#include <functional>
#include <random>

namespace igam {

/// Law of the i.i.d. first-layer pairs (v_k, b_k).
struct InitDistribution {
  enum class Kind {
    uniform_cube,  ///< every entry of v and b i.i.d. U[-c, c]
    gaussian,      ///< v ~ N(0, sigma_v^2 I), b ~ N(0, sigma_b^2)
    kink_uniform,  ///< direction uniform on the sphere, xi ~ U[-R, R], |v| ~ U[lo, hi], b = -xi |v|
    custom,
  };
  using Sampler = std::function<void(std::mt19937_64 &, Eigen::Ref<VectorXd> v, double &b)>;

  Kind kind = Kind::uniform_cube;
  double c = 0.05;
  double sigma_v = 1.0;
  double sigma_b = 1.0;
  double xi_radius = 2.0;
  double vnorm_lo = 0.5;
  double vnorm_hi = 1.5;
  Sampler sampler;
  std::uint64_t seed = 0;

  static InitDistribution uniform_cube(double c, std::uint64_t seed = 0) {
    InitDistribution init;
    init.kind = Kind::uniform_cube;
    init.c = c;
    init.seed = seed;
    return init;
  }
  static InitDistribution gaussian(double sigma_v, double sigma_b, std::uint64_t seed = 0) {
    InitDistribution init;
    init.kind = Kind::gaussian;
    init.sigma_v = sigma_v;
    init.sigma_b = sigma_b;
    init.seed = seed;
    return init;
  }
  static InitDistribution kink_uniform(double xi_radius, double vnorm_lo, double vnorm_hi,
                                       std::uint64_t seed = 0) {
    InitDistribution init;
    init.kind = Kind::kink_uniform;
    init.xi_radius = xi_radius;
    init.vnorm_lo = vnorm_lo;
    init.vnorm_hi = vnorm_hi;
    init.seed = seed;
    return init;
  }
  static InitDistribution custom(Sampler sampler, std::uint64_t seed = 0) {
    InitDistribution init;
    init.kind = Kind::custom;
    init.sampler = std::move(sampler);
    init.seed = seed;
    return init;
  }

  InitDistribution with_seed(std::uint64_t s) const {
    InitDistribution copy = *this;
    copy.seed = s;
    return copy;
  }
};

std::string to_string(InitDistribution::Kind kind);
InitDistribution::Kind init_kind_from_string(const std::string &name);

/// Draws one (v, b) pair. Rows that come out exactly zero are redrawn up to
/// 100 times before giving up with "degenerate initializer".
void draw_inner_weights(const InitDistribution &init, std::mt19937_64 &rng, Eigen::Ref<VectorXd> v, double &b);

template <typename Scalar>
struct RsnParams {
  Matrix<Scalar> V; ///< n x d, row k is v_k
  Vector<Scalar> b; ///< n
  Matrix<Scalar> W; ///< d_out x n, column k is w_k
  LinkKind link = LinkKind::identity;
  std::uint64_t seed = 0;

  Eigen::Index neurons() const { return V.rows(); }
  Eigen::Index input_dim() const { return V.cols(); }
  Eigen::Index output_dim() const { return W.rows(); }

  void validate() const {
    if (b.size() != V.rows() || W.cols() != V.rows())
      throw Error("RsnParams: inconsistent shapes");
    if (link == LinkKind::logit && W.rows() != 1)
      throw Error("RsnParams: logit link requires d_out = 1");
  }

  template <typename Other>
  RsnParams<Other> cast() const {
    return RsnParams<Other>{V.template cast<Other>(), b.template cast<Other>(), W.template cast<Other>(), link, seed};
  }
};

using RsnParamsd = RsnParams<double>;

/// Samples V and b i.i.d. from init; W starts at zero (the gradient-flow origin).
RsnParamsd sample_rsn(Eigen::Index n, Eigen::Index d, Eigen::Index d_out, const InitDistribution &init,
                      LinkKind link = LinkKind::identity);

/// Hidden-layer activations, entry (i, k) = max(b_k + <v_k, x_i>, 0).
template <typename Scalar, typename Derived>
Matrix<Scalar> features(const RsnParams<Scalar> &params, const Eigen::MatrixBase<Derived> &X) {
  if (X.cols() != params.input_dim()) throw Error("features: input dimension mismatch");
  Matrix<Scalar> pre = X.template cast<Scalar>() * params.V.transpose();
  pre.rowwise() += params.b.transpose();
  return pre.cwiseMax(Scalar(0));
}

template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const RsnParams<Scalar> &params, const Eigen::MatrixBase<Derived> &X) {
  const Matrix<Scalar> z = features(params, X) * params.W.transpose();
  return apply_inverse_link(z, params.link);
}

/// Jacobian (d_out x d) at a single point. The ReLU derivative is the
/// indicator of the open interval (0, inf), so it is 0 exactly on a kink.
template <typename Scalar, typename Derived>
Matrix<Scalar> gradient(const RsnParams<Scalar> &params, const Eigen::MatrixBase<Derived> &x) {
  const Vector<Scalar> point = x.template cast<Scalar>();
  if (point.size() != params.input_dim()) throw Error("gradient: input dimension mismatch");
  const Vector<Scalar> pre = params.V * point + params.b;
  const Vector<Scalar> active = (pre.array() > Scalar(0)).template cast<Scalar>();
  const Vector<Scalar> z = params.W * pre.cwiseMax(Scalar(0));
  const Vector<Scalar> dlink = inverse_link_derivative(z, params.link);
  return dlink.asDiagonal() * params.W * active.asDiagonal() * params.V;
}

/// Values and all partial derivatives on a point set, same conventions as gradient().
template <typename Scalar, typename Derived>
Evaluation<Scalar> evaluate(const RsnParams<Scalar> &params, const Eigen::MatrixBase<Derived> &X) {
  Matrix<Scalar> pre = X.template cast<Scalar>() * params.V.transpose();
  pre.rowwise() += params.b.transpose();
  const Matrix<Scalar> active = (pre.array() > Scalar(0)).template cast<Scalar>();
  const Matrix<Scalar> z = pre.cwiseMax(Scalar(0)) * params.W.transpose();
  const Matrix<Scalar> dlink = inverse_link_derivative(z, params.link);

  Evaluation<Scalar> out;
  out.values = apply_inverse_link(z, params.link);
  out.partials.reserve(params.input_dim());
  for (Eigen::Index i = 0; i < params.input_dim(); ++i) {
    Matrix<Scalar> dz = active * (params.V.col(i).asDiagonal() * params.W.transpose());
    out.partials.push_back(dz.cwiseProduct(dlink));
  }
  return out;
}

template <typename Scalar>
struct KinkGeometry {
  Vector<Scalar> xi;    ///< kink positions -b_k / |v_k|
  Matrix<Scalar> s;     ///< unit kink directions v_k / |v_k|, n x d
  Vector<Scalar> vnorm; ///< |v_k|
};

template <typename Scalar>
KinkGeometry<Scalar> kink_geometry(const RsnParams<Scalar> &params) {
  KinkGeometry<Scalar> g;
  g.vnorm = params.V.rowwise().norm();
  if ((g.vnorm.array() == Scalar(0)).any()) throw Error("zero inner weight");
  g.xi = -params.b.cwiseQuotient(g.vnorm);
  g.s = g.vnorm.cwiseInverse().asDiagonal() * params.V;
  return g;
}

} // namespace igam
