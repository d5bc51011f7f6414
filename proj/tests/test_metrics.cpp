#include "igam/metrics.hpp"
#include "igam/rsn.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace igam;

namespace {

RsnParamsd random_network(Eigen::Index n, std::uint64_t seed, Eigen::Index d_out = 1) {
  RsnParamsd p = sample_rsn(n, 2, d_out, InitDistribution::uniform_cube(1.0, seed));
  std::mt19937_64 rng(seed + 1000);
  p.W = oracle::random_matrix(d_out, n, rng);
  return p;
}

Box<double> unit_box(Eigen::Index d = 2) { return {-VectorXd::Ones(d), VectorXd::Ones(d)}; }

} // namespace

TEST_CASE("make_eval_grid enumerates axis 0 fastest and includes the corners") {
  Box<double> K{VectorXd(2), VectorXd(2)};
  K.lo << 0.0, -1.0;
  K.hi << 1.0, 1.0;
  const EvalGrid<double> g = make_eval_grid(K, std::vector<int>{3, 2});
  REQUIRE(g.points.rows() == 6);
  CHECK(g.points.row(0) == Eigen::RowVector2d(0.0, -1.0));
  CHECK(g.points.row(1) == Eigen::RowVector2d(0.5, -1.0));
  CHECK(g.points.row(3) == Eigen::RowVector2d(0.0, 1.0));
  CHECK(g.points.row(5) == Eigen::RowVector2d(1.0, 1.0));
  CHECK_THROWS_AS(make_eval_grid(K, std::vector<int>{1, 4}), Error);
  CHECK_THROWS_AS(make_eval_grid(K, std::vector<int>{4}), Error);
}

TEST_CASE("distance of a model to itself is zero and to zero is its own norm") {
  const RsnParamsd f = random_network(20, 1, 2);
  const EvalGrid<double> grid = make_eval_grid(unit_box(), 25);
  CHECK(sobolev_distance(f, f, grid) == 0.0);
  const Evaluation<double> e = evaluate(f, grid.points);
  double norm = e.values.cwiseAbs().maxCoeff();
  for (const MatrixXd &p : e.partials) norm = std::max(norm, p.cwiseAbs().maxCoeff());
  CHECK(sobolev_distance(f, ZeroModel{2}, grid) == norm);
  CHECK_THROWS_AS(sobolev_distance(f, ZeroModel{1}, grid), Error);
}

TEST_CASE("symmetry and triangle inequality") {
  const EvalGrid<double> grid = make_eval_grid(unit_box(), 31);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RsnParamsd f = random_network(16, 10 * s + 1), g = random_network(16, 10 * s + 2),
                     h = random_network(16, 10 * s + 3);
    const double fg = sobolev_distance(f, g, grid), gf = sobolev_distance(g, f, grid);
    CHECK(fg == gf);
    CHECK(fg <= sobolev_distance(f, h, grid) + sobolev_distance(h, g, grid) + 1e-12);
  }
}

TEST_CASE("refining a nested grid never lowers the distance") {
  const RsnParamsd f = random_network(16, 4), g = random_network(16, 5);
  double previous = 0.0;
  for (int per_axis : {9, 17, 33, 65}) {
    const double d = sobolev_distance(f, g, make_eval_grid(unit_box(), per_axis));
    CHECK(d >= previous);
    previous = d;
  }
}

TEST_CASE("grid distance is within 2% of a ten times finer grid") {
  const RsnParamsd f = random_network(16, 6), g = random_network(16, 7);
  const double coarse = sobolev_distance(f, g, make_eval_grid(unit_box(), 32));
  const double fine = sobolev_distance(f, g, make_eval_grid(unit_box(), 320));
  CHECK(coarse <= fine);
  CHECK(coarse >= 0.98 * fine);
}

TEST_CASE("finite-difference mode agrees with analytic partials away from kinks") {
  // All kinks outside K: the networks are affine on K.
  RsnParamsd f = random_network(8, 8), g = random_network(8, 9);
  f.b.array() = f.V.rowwise().norm().array() * 3.0;
  g.b.array() = g.V.rowwise().norm().array() * 3.0;
  EvalGrid<double> grid = make_eval_grid(unit_box(), 11);
  const double analytic = sobolev_distance(f, g, grid);
  grid.fd_step = 1e-5;
  CHECK(sobolev_distance(f, g, grid) == doctest::Approx(analytic).epsilon(1e-8));
}

TEST_CASE("W^{1,inf} distance is at least the value distance and the gradient distance") {
  const RsnParamsd f = random_network(12, 10), g = random_network(12, 11);
  const EvalGrid<double> grid = make_eval_grid(unit_box(), 21);
  const Evaluation<double> ef = evaluate(f, grid.points), eg = evaluate(g, grid.points);
  const double dist = sobolev_distance(f, g, grid);
  CHECK(dist >= (ef.values - eg.values).cwiseAbs().maxCoeff());
  for (std::size_t a = 0; a < 2; ++a) CHECK(dist >= (ef.partials[a] - eg.partials[a]).cwiseAbs().maxCoeff());
}

TEST_CASE("loss_eval") {
  RsnParamsd f = random_network(6, 12);
  Datasetd data;
  data.X = MatrixXd::Zero(0, 2);
  data.Y = MatrixXd::Zero(0, 1);
  CHECK(loss_eval(data, f) == 0.0);

  std::mt19937_64 rng(13);
  data.X = oracle::random_matrix(5, 2, rng);
  data.Y = oracle::random_matrix(5, 1, rng);
  const MatrixXd out = forward(f, data.X);
  CHECK(loss_eval(data, f) == doctest::Approx((out - data.Y).squaredNorm()).epsilon(1e-14));

  f.link = LinkKind::logit;
  data.loss = LossKind::cross_entropy_binary;
  data.Y << 1, 0, 1, 1, 0;
  const MatrixXd p = forward(f, data.X);
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) expected -= data.Y(i, 0) * std::log(p(i, 0)) + (1 - data.Y(i, 0)) * std::log(1 - p(i, 0));
  CHECK(loss_eval(data, f) == doctest::Approx(expected).epsilon(1e-12));
}
