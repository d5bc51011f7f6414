// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include "igam/experiments.hpp"
#include "igam/gam.hpp"
#include "igam/rsn.hpp"
#include "igam/sphere.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

using namespace igam;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Median of `value` per distinct `key`, keys in ascending order.
std::map<double, double> medians_by(const Table &table, const std::string &key, const std::string &value) {
  std::map<double, std::vector<double>> groups;
  const auto k = table.values(key), v = table.values(value);
  for (std::size_t i = 0; i < k.size(); ++i) groups[k[i]].push_back(v[i]);
  std::map<double, double> out;
  for (auto &[key_value, vals] : groups) out[key_value] = median(vals);
  return out;
}

bool non_increasing_within(const std::vector<double> &v, double slack) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1.0 + slack)) return false;
  return true;
}

std::vector<double> map_values(const std::map<double, double> &m) {
  std::vector<double> out;
  for (const auto &[k, v] : m) out.push_back(v);
  return out;
}

std::string list(const std::map<double, double> &m) {
  std::ostringstream os;
  for (const auto &[k, v] : m) os << (os.tellp() > 0 ? " " : "") << k << ":" << v;
  return os.str();
}

Outcome ridge_against_kkt() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> samples(4, 64), neurons(4, 256), outputs(1, 3);
  std::uniform_real_distribution<double> log_lambda(-3.0, 1.0);
  double worst = 0.0, solve_time = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int N = samples(rng), n = neurons(rng), d_out = outputs(rng);
    const RsnParamsd p = sample_rsn(n, 2, d_out, InitDistribution::uniform_cube(1.0, 1000 + t));
    const MatrixXd X = oracle::random_matrix(N, 2, rng), Y = oracle::random_matrix(N, d_out, rng);
    const MatrixXd F = features(p, X);
    const double lt = std::pow(10.0, log_lambda(rng));
    const auto start = Clock::now();
    const TrainReport<double> r = ridge_solve(F, Y, lt);
    solve_time += seconds_since(start);
    const MatrixXd ref = oracle::ridge_kkt(F, Y, lt);
    worst = std::max(worst, (r.W - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-8 && solve_time < 5.0,
          fmt("50 instances, max relative deviation %.3g (<= 1e-8), solve time %.3f s (< 5 s)", worst, solve_time)};
}

Outcome agam_against_qp() {
  WeightingOptions o;
  o.n_samples = 200000;
  o.dir_grid = 128;
  o.pos_grid = 401;
  const WeightGrid grid2 = estimate_weighting(InitDistribution::kink_uniform(2.0, 0.5, 1.5, 7), 2, o);
  const WeightGrid grid1 = estimate_weighting(InitDistribution::kink_uniform(2.0, 0.5, 1.5, 8), 1, o);
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> samples(6, 32), cells(2, 12);
  std::uniform_real_distribution<double> log_lambda(-3.0, 0.0), u(-1.0, 1.0);
  double worst = 0.0, infeasible = 0.0, solve_time = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = t % 5 == 4 ? 1 : 2;
    const SpherePartition part = d == 1 ? partition_pm1() : partition_circle(cells(rng));
    const CellWeights w = cell_weights(d == 1 ? grid1 : grid2, part);
    Datasetd data;
    const int N = samples(rng), d_out = 1 + t % 2;
    data.X.resize(N, d);
    data.Y.resize(N, d_out);
    for (Eigen::Index i = 0; i < data.X.size(); ++i) data.X.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < data.Y.size(); ++i) data.Y.data()[i] = u(rng);
    const double lambda = std::pow(10.0, log_lambda(rng));
    const double h = 0.05;
    const auto start = Clock::now();
    const AgamSolution sol = solve_agam(data, part, w, lambda, h);
    solve_time += seconds_since(start);
    const auto layout = oracle::expected_layout(data, part, w, h);
    const auto ref = oracle::agam_qp(data, layout, w, lambda);
    infeasible = std::max(infeasible, oracle::constraint_violation(layout, ref));
    double scale = 1.0, diff = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      scale = std::max(scale, ref[k].cwiseAbs().maxCoeff());
      if (sol.profiles.profiles[k].values.rows() != ref[k].rows()) {
        diff = std::numeric_limits<double>::infinity();
        continue;
      }
      diff = std::max(diff, (sol.profiles.profiles[k].values - ref[k]).cwiseAbs().maxCoeff());
    }
    worst = std::max(worst, diff / scale);
  }
  return {worst <= 1e-8 && infeasible <= 1e-9 && solve_time < 10.0,
          fmt("20 instances, max relative node-value deviation %.3g (<= 1e-8), oracle constraint residual %.3g, "
              "solve time %.3f s (< 10 s)",
              worst, infeasible, solve_time)};
}

Outcome t_sweep() {
  const auto start = Clock::now();
  const ExperimentResult r = run_T_sweep(default_config("t-sweep"));
  const double elapsed = seconds_since(start);
  const auto med = medians_by(r.table, "T", "distance");
  const auto v = map_values(med);
  const double ratio = v.back() / v.front();
  const bool ok = non_increasing_within(v, 0.05) && ratio <= 0.1 && elapsed < 30.0;

  ExperimentConfig unit = default_config("t-sweep");
  unit.init = InitDistribution::uniform_cube(1.0);
  const auto unit_med = medians_by(run_T_sweep(unit).table, "T", "distance");
  std::printf("INFO [3] same sweep with uniform_cube(1): median distance by T %s\n", list(unit_med).c_str());
  return {ok, fmt("median distance by T %s; non-increasing within 5%%, last/first %.3g (<= 0.1), %.2f s (< 30 s)",
                  list(med).c_str(), ratio, elapsed)};
}

Outcome n_sweep() {
  const auto start = Clock::now();
  const ExperimentResult r = run_n_sweep(default_config("n-sweep"));
  const double elapsed = seconds_since(start);
  const auto med = medians_by(r.table, "n", "distance");
  const auto v = map_values(med);
  const double ratio = v.back() / v.front();
  const auto n = r.table.values("n"), lambda = r.table.values("lambda"), lt = r.table.values("lambda_tilde"),
             gbar = r.table.values("gbar");
  double coupling = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i)
    coupling = std::max(coupling, std::abs(lt[i] - lambda[i] * n[i] * gbar[i]) / lt[i]);
  return {ratio <= 0.6 && coupling <= 1e-12 && elapsed < 300.0,
          fmt("median distance by n %s; last/first %.3g (<= 0.6), coupling error %.3g (<= 1e-12), %.2f s (< 300 s)",
              list(med).c_str(), ratio, coupling, elapsed)};
}

Outcome direction_sweep() {
  const auto start = Clock::now();
  const ExperimentResult r = run_direction_sweep(default_config("dir-sweep"));
  const double elapsed = seconds_since(start);
  const auto dist = r.table.values("distance_to_refined"), gap = r.table.values("penalty_gap");
  const double ratio = gap.back() / gap.front();
  std::ostringstream ds, gs;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    ds << (i ? " " : "") << dist[i];
    gs << (i ? " " : "") << gap[i];
  }
  return {non_increasing_within(dist, 0.05) && ratio <= 0.25 && elapsed < 120.0,
          fmt("successive distances %s (decreasing within 5%%); penalty gaps %s, last/first %.3g (<= 0.25), %.2f s "
              "(< 120 s)",
              ds.str().c_str(), gs.str().c_str(), ratio, elapsed)};
}

Outcome quadratic2d() {
  const auto start = Clock::now();
  const ExperimentResult r = run_quadratic2d(default_config("quad2d"));
  const double elapsed = seconds_since(start);
  const double near = r.summary["near_median_grad_error"], cosine = r.summary["far_median_cosine"];
  return {near <= 0.5 && cosine >= 0.9 && elapsed < 1200.0,
          fmt("literal GD (2^15 steps): near-field median gradient error %.3f (<= 0.5), far-ring median cosine %.3f "
              "(>= 0.9), %.1f s (< 1200 s)",
              near, cosine, elapsed)};
}

Outcome invariants() {
  std::vector<std::string> failed;
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-1.0, 1.0), log_lambda(-3.0, 2.0);

  // Parameter-norm bound lambda |W|^2 <= L(0).
  for (int t = 0; t < 100; ++t) {
    const MatrixXd F = oracle::random_matrix(1 + t % 9, 1 + (t * 7) % 13, rng);
    const MatrixXd Y = oracle::random_matrix(F.rows(), 1 + t % 3, rng);
    const double lt = std::pow(10.0, log_lambda(rng));
    if (lt * ridge_solve(F, Y, lt).W.squaredNorm() > Y.squaredNorm() * (1 + 1e-12)) {
      failed.push_back("norm bound");
      break;
    }
  }

  // Flow loss is non-increasing in time.
  {
    const RsnParamsd p = sample_rsn(64, 2, 1, InitDistribution::uniform_cube(1.0, 9));
    const MatrixXd X = oracle::random_matrix(24, 2, rng), Y = oracle::random_matrix(24, 1, rng);
    const GradientFlow<double> flow(features(p, X), Y);
    double previous = flow.loss(0.0);
    for (double T = 0.01; T <= 1e4; T *= 1.5) {
      const double l = flow.loss(T);
      if (l > previous * (1 + 1e-12) + 1e-15) {
        failed.push_back("flow monotonicity");
        break;
      }
      previous = l;
    }
  }

  // Snapping keeps norms, kink positions and biases; |V - V~| <= mesh |V|.
  {
    const RsnParamsd p = sample_rsn(500, 2, 1, InitDistribution::uniform_cube(1.0, 10));
    for (int m : {4, 16, 64}) {
      const SpherePartition part = partition_circle(m);
      const RsnParamsd s = snap_directions(p, part);
      const auto g0 = kink_geometry(p), g1 = kink_geometry(s);
      if ((g0.vnorm - g1.vnorm).cwiseAbs().maxCoeff() > 1e-12 || (g0.xi - g1.xi).cwiseAbs().maxCoeff() > 1e-12 ||
          s.b != p.b || (p.V - s.V).norm() > part.mesh() * p.V.norm() + 1e-12) {
        failed.push_back("snap invariants");
        break;
      }
    }
  }

  // Curvature bound on profile slopes for solver outputs.
  {
    WeightingOptions o;
    o.n_samples = 200000;
    o.dir_grid = 128;
    o.pos_grid = 401;
    const WeightGrid grid = estimate_weighting(InitDistribution::kink_uniform(2.0, 0.5, 1.5, 11), 2, o);
    const double mass = grid.density_mass();
    if (mass < 0.97 || mass > 1.03) failed.push_back(fmt("weighting mass %.4f", mass));
    for (int m : {4, 8, 16}) {
      const SpherePartition part = partition_circle(m);
      const CellWeights w = cell_weights(grid, part);
      Datasetd data;
      data.X = oracle::random_matrix(20, 2, rng).cwiseMax(-1.0).cwiseMin(1.0);
      data.Y = oracle::random_matrix(20, 1, rng);
      if (oracle::poincare_ratio(solve_agam(data, part, w, 0.01, 0.05), w) > 1.0 + 1e-9) {
        failed.push_back("curvature bound");
        break;
      }
    }
  }

  // Network gradients agree with central differences off the kinks.
  {
    RsnParamsd p = sample_rsn(32, 3, 1, InitDistribution::uniform_cube(1.0, 12));
    p.W = oracle::random_matrix(1, 32, rng);
    const double h = 1e-6;
    double worst = 0.0;
    for (int checked = 0; checked < 50;) {
      VectorXd x(3);
      for (auto &c : x) c = u(rng);
      if ((p.V * x + p.b).cwiseAbs().minCoeff() < 1e-3) continue;
      const MatrixXd J = gradient(p, x);
      for (Eigen::Index a = 0; a < 3; ++a) {
        VectorXd xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const double fd = (forward(p, xp.transpose())(0, 0) - forward(p, xm.transpose())(0, 0)) / (2 * h);
        worst = std::max(worst, std::abs(J(0, a) - fd) / std::max(1.0, std::abs(fd)));
      }
      ++checked;
    }
    if (worst > 1e-5) failed.push_back(fmt("finite-difference gradient %.3g", worst));
  }

  std::string detail = "norm bound (100), flow monotonicity, snap invariants, curvature bound, FD gradients, "
                       "weighting mass";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto &f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ridge solver vs dense KKT oracle", ridge_against_kkt},
      {"additive-model solver vs dense QP oracle", agam_against_qp},
      {"ridge(1/T) approaches gradient flow as T grows", t_sweep},
      {"network approaches additive model as n grows", n_sweep},
      {"additive models converge as directions refine", direction_sweep},
      {"2-d quadratic: near fit and far-field behaviour", quadratic2d},
      {"invariant suites", invariants},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
