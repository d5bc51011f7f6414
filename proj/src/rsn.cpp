#include "igam/rsn.hpp"


namespace igam {

std::string to_string(InitDistribution::Kind kind) {
  switch (kind) {
  case InitDistribution::Kind::uniform_cube: return "uniform_cube";
  case InitDistribution::Kind::gaussian: return "gaussian";
  case InitDistribution::Kind::kink_uniform: return "kink_uniform";
  case InitDistribution::Kind::custom: return "custom";
  }
  return "unknown";
}

InitDistribution::Kind init_kind_from_string(const std::string &name) {
  if (name == "uniform_cube") return InitDistribution::Kind::uniform_cube;
  if (name == "gaussian") return InitDistribution::Kind::gaussian;
  if (name == "kink_uniform") return InitDistribution::Kind::kink_uniform;
  if (name == "custom") return InitDistribution::Kind::custom;
  throw Error("unknown init distribution '" + name + "'");
}

namespace {

void draw_once(const InitDistribution &init, std::mt19937_64 &rng, Eigen::Ref<VectorXd> v, double &b) {
  switch (init.kind) {
  case InitDistribution::Kind::uniform_cube: {
    std::uniform_real_distribution<double> u(-init.c, init.c);
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = u(rng);
    b = u(rng);
    return;
  }
  case InitDistribution::Kind::gaussian: {
    std::normal_distribution<double> nv(0.0, init.sigma_v), nb(0.0, init.sigma_b);
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = nv(rng);
    b = nb(rng);
    return;
  }
  case InitDistribution::Kind::kink_uniform: {
    std::normal_distribution<double> normal;
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
      norm = v.norm();
    } while (norm == 0.0);
    std::uniform_real_distribution<double> xi(-init.xi_radius, init.xi_radius);
    std::uniform_real_distribution<double> radius(init.vnorm_lo, init.vnorm_hi);
    const double r = radius(rng);
    v *= r / norm;
    b = -xi(rng) * r;
    return;
  }
  case InitDistribution::Kind::custom:
    if (!init.sampler) throw Error("custom init distribution without sampler");
    init.sampler(rng, v, b);
    return;
  }
}

} // namespace

void draw_inner_weights(const InitDistribution &init, std::mt19937_64 &rng, Eigen::Ref<VectorXd> v, double &b) {
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    draw_once(init, rng, v, b);
    if ((v.array() != 0.0).any()) return;
  }
  throw Error("degenerate initializer");
}

RsnParamsd sample_rsn(Eigen::Index n, Eigen::Index d, Eigen::Index d_out, const InitDistribution &init,
                      LinkKind link) {
  if (n < 1 || d < 1 || d_out < 1) throw Error("sample_rsn: n, d and d_out must be >= 1");
  if (link == LinkKind::logit && d_out != 1) throw Error("sample_rsn: logit link requires d_out = 1");
  RsnParamsd params;
  params.V.resize(n, d);
  params.b.resize(n);
  params.W = MatrixXd::Zero(d_out, n);
  params.link = link;
  params.seed = init.seed;

  std::mt19937_64 rng(init.seed);
  VectorXd v(d);
  for (Eigen::Index k = 0; k < n; ++k) {
    double bk = 0.0;
    draw_inner_weights(init, rng, v, bk);
    params.V.row(k) = v.transpose();
    params.b[k] = bk;
  }
  return params;
}

} // namespace igam
