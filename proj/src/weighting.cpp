#include "igam/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace igam {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
  theta = std::fmod(theta, kTwoPi);
  return theta < 0.0 ? theta + kTwoPi : theta;
}

MatrixXd fibonacci_directions(int count) {
  MatrixXd dirs(count, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs(i, 0) = r * std::cos(golden * i);
    dirs(i, 1) = r * std::sin(golden * i);
    dirs(i, 2) = z;
  }
  return dirs;
}

// Normalised discrete Gaussian, offsets -half..half in units of `step`.
std::vector<double> gaussian_taps(double bandwidth, double step) {
  const int half = std::max(1, static_cast<int>(std::ceil(4.0 * bandwidth / step)));
  std::vector<double> taps(2 * half + 1);
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double t = k * step / bandwidth;
    taps[k + half] = std::exp(-0.5 * t * t);
    total += taps[k + half];
  }
  for (double &t : taps) t /= total;
  return taps;
}

// Smooths every row along the position axis, zero outside the grid.
MatrixXd smooth_positions(const MatrixXd &in, const std::vector<double> &taps) {
  const int half = static_cast<int>(taps.size() / 2);
  const Eigen::Index J = in.cols();
  MatrixXd out = MatrixXd::Zero(in.rows(), J);
  for (Eigen::Index j = 0; j < J; ++j)
    for (int k = -half; k <= half; ++k) {
      const Eigen::Index src = j + k;
      if (src < 0 || src >= J) continue;
      out.col(j) += taps[k + half] * in.col(src);
    }
  return out;
}

// Direction smoothing operator, applied as out = K * in (rows are direction nodes).
MatrixXd direction_kernel(int d, const MatrixXd &directions, double bandwidth) {
  const Eigen::Index G = directions.rows();
  if (d == 1) return MatrixXd::Identity(G, G);
  MatrixXd K = MatrixXd::Zero(G, G);
  if (d == 2) {
    const std::vector<double> taps = gaussian_taps(bandwidth, kTwoPi / G);
    const int half = static_cast<int>(taps.size() / 2);
    for (Eigen::Index g = 0; g < G; ++g)
      for (int k = -half; k <= half; ++k) K(g, ((g + k) % G + G) % G) += taps[k + half];
    return K;
  }
  // Geodesic Gaussian, each source node spreads unit mass over its neighbours.
  for (Eigen::Index src = 0; src < G; ++src) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < G; ++t) {
      const double angle = std::acos(std::clamp(directions.row(src).dot(directions.row(t)), -1.0, 1.0));
      if (angle > 4.0 * bandwidth) continue;
      const double w = std::exp(-0.5 * (angle / bandwidth) * (angle / bandwidth));
      K(t, src) = w;
      total += w;
    }
    K.col(src) /= total;
  }
  return K;
}

double robust_scale(std::vector<double> values) {
  const auto n = values.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  std::sort(values.begin(), values.end());
  const double iqr = values[(3 * n) / 4] - values[n / 4];
  const double scale = std::min(sd, iqr / 1.349);
  return scale > 0.0 ? scale : sd;
}

// Smallest interval holding `mass` of the total weight; pairs sorted by value.
Interval smallest_weighted_interval(const std::vector<std::pair<double, double>> &sorted, double mass) {
  double total = 0.0;
  for (const auto &[x, w] : sorted) total += w;
  if (!(total > 0.0)) return {sorted.front().first, sorted.back().first};
  const double need = mass * total;
  Interval best{sorted.front().first, sorted.back().first};
  double acc = 0.0;
  std::size_t left = 0;
  for (std::size_t right = 0; right < sorted.size(); ++right) {
    acc += sorted[right].second;
    while (left < right && acc - sorted[left].second >= need) acc -= sorted[left++].second;
    if (acc >= need && sorted[right].first - sorted[left].first < best.hi - best.lo)
      best = {sorted[left].first, sorted[right].first};
  }
  return best;
}

} // namespace

Interval smallest_interval(const std::vector<double> &sorted, double mass) {
  if (sorted.empty()) throw Error("smallest_interval: empty sample");
  const auto n = sorted.size();
  const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  if (window >= n) return {sorted.front(), sorted.back()};
  Interval best{sorted.front(), sorted[window - 1]};
  for (std::size_t i = 1; i + window <= n; ++i) {
    if (sorted[i + window - 1] - sorted[i] < best.hi - best.lo) best = {sorted[i], sorted[i + window - 1]};
  }
  return best;
}

std::vector<std::pair<Eigen::Index, double>> WeightGrid::direction_stencil(const Eigen::Ref<const VectorXd> &s) const {
  if (s.size() != d) throw Error("WeightGrid: direction dimension mismatch");
  if (d == 1) return {{s[0] >= 0.0 ? 0 : 1, 1.0}};
  if (d == 2) {
    const Eigen::Index G = num_directions();
    const double t = wrap_angle(std::atan2(s[1], s[0])) * static_cast<double>(G) / kTwoPi;
    const auto lo = static_cast<Eigen::Index>(std::floor(t));
    const double frac = t - static_cast<double>(lo);
    return {{lo % G, 1.0 - frac}, {(lo + 1) % G, frac}};
  }
  return {{nearest_direction(s), 1.0}};
}

Eigen::Index WeightGrid::nearest_direction(const Eigen::Ref<const VectorXd> &s) const {
  if (d == 1) return s[0] >= 0.0 ? 0 : 1;
  if (d == 2) {
    const Eigen::Index G = num_directions();
    const double t = wrap_angle(std::atan2(s[1], s[0])) * static_cast<double>(G) / kTwoPi;
    return static_cast<Eigen::Index>(std::llround(t)) % G;
  }
  Eigen::Index best = 0;
  (directions * s).maxCoeff(&best);
  return best;
}

double WeightGrid::row_value(const MatrixXd &table, Eigen::Index node, double r) const {
  const Eigen::Index J = num_positions();
  const double h = position_step();
  const double t = (r - positions[0]) / h;
  if (t < 0.0 || t > static_cast<double>(J - 1)) return 0.0;
  const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(t), J - 2);
  const double frac = t - static_cast<double>(j);
  return (1.0 - frac) * table(node, j) + frac * table(node, j + 1);
}

double WeightGrid::g(const Eigen::Ref<const VectorXd> &s, double r) const {
  double value = 0.0;
  for (const auto &[node, w] : direction_stencil(s)) value += w * row_value(g_table, node, r);
  return value;
}

double WeightGrid::p(const Eigen::Ref<const VectorXd> &s) const {
  double value = 0.0;
  for (const auto &[node, w] : direction_stencil(s)) value += w * direction_density[node];
  return value;
}

Interval WeightGrid::support_at(const Eigen::Ref<const VectorXd> &s) const { return support[nearest_direction(s)]; }

double WeightGrid::density_mass() const {
  return direction_weights.dot(joint_density.rowwise().sum()) * position_step();
}

WeightGrid estimate_weighting(const InitDistribution &init, int d, const WeightingOptions &opts) {
  if (d < 1 || d > 3) throw Error("estimate_weighting: only d = 1, 2, 3 are supported");
  if (opts.n_samples < 10000) throw Error("estimate_weighting: n_samples must be >= 1e4");
  if (opts.pos_grid < 8) throw Error("estimate_weighting: pos_grid must be >= 8");
  if (d > 1 && opts.dir_grid < 4) throw Error("estimate_weighting: dir_grid must be >= 4");

  WeightGrid grid;
  grid.d = d;
  grid.n_samples = opts.n_samples;
  grid.seed = init.seed;

  // Direction nodes.
  if (d == 1) {
    grid.directions = MatrixXd(2, 1);
    grid.directions << 1.0, -1.0;
    grid.direction_weights = VectorXd::Ones(2);
  } else if (d == 2) {
    grid.directions.resize(opts.dir_grid, 2);
    for (int g = 0; g < opts.dir_grid; ++g) {
      const double theta = kTwoPi * g / opts.dir_grid;
      grid.directions(g, 0) = std::cos(theta);
      grid.directions(g, 1) = std::sin(theta);
    }
    grid.direction_weights = VectorXd::Constant(opts.dir_grid, kTwoPi / opts.dir_grid);
  } else {
    grid.directions = fibonacci_directions(opts.dir_grid);
    grid.direction_weights = VectorXd::Constant(opts.dir_grid, 4.0 * std::numbers::pi / opts.dir_grid);
  }
  const Eigen::Index G = grid.num_directions();

  // Draw kink geometry.
  const auto n = static_cast<std::size_t>(opts.n_samples);
  std::vector<double> xi(n), q(n);
  MatrixXd dirs(static_cast<Eigen::Index>(n), d);
  {
    std::mt19937_64 rng(init.seed);
    VectorXd v(d);
    for (std::size_t i = 0; i < n; ++i) {
      double b = 0.0;
      draw_inner_weights(init, rng, v, b);
      const double norm = v.norm();
      xi[i] = -b / norm;
      q[i] = norm * norm;
      dirs.row(static_cast<Eigen::Index>(i)) = v.transpose() / norm;
    }
  }
  const double shrink = std::pow(static_cast<double>(n), -0.2);

  // Position grid: the bulk of the kink positions under the |v|^2-weighted
  // law, widened to hold 99% of the unweighted law.
  std::vector<double> sorted = xi;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> weighted(n);
  for (std::size_t i = 0; i < n; ++i) weighted[i] = {xi[i], q[i]};
  std::sort(weighted.begin(), weighted.end());
  double h_pos = opts.bandwidth > 0.0 ? opts.bandwidth : 1.06 * robust_scale(xi) * shrink;
  const Interval bulk = smallest_weighted_interval(weighted, 1.0 - 0.5 * (1.0 - opts.support_mass));
  const Interval plain = smallest_interval(sorted, 0.99);
  const double lo = std::min(bulk.lo, plain.lo) - 4.0 * h_pos, hi = std::max(bulk.hi, plain.hi) + 4.0 * h_pos;
  grid.positions = VectorXd::LinSpaced(opts.pos_grid, lo, hi);
  const double dr = grid.position_step();
  h_pos = std::max(h_pos, dr);
  grid.bandwidth_position = h_pos;

  // Direction bandwidth from the mean resultant length.
  double h_dir = 0.0;
  if (d > 1) {
    const double resultant = dirs.colwise().mean().norm();
    double spread = resultant > 1e-12 ? std::sqrt(-2.0 * std::log(resultant)) : 1e9;
    spread = std::min(spread, std::numbers::pi / std::sqrt(3.0));
    h_dir = opts.bandwidth > 0.0 ? opts.bandwidth : 1.06 * spread * shrink;
    const double spacing = d == 2 ? kTwoPi / G : std::sqrt(4.0 * std::numbers::pi / G);
    h_dir = std::max(h_dir, spacing);
  }
  grid.bandwidth_direction = h_dir;

  // Linear binning onto the (direction, position) grid.
  MatrixXd counts = MatrixXd::Zero(G, opts.pos_grid);
  MatrixXd moments = MatrixXd::Zero(G, opts.pos_grid);
  VectorXd dir_counts = VectorXd::Zero(G);
  std::vector<std::vector<double>> per_node(static_cast<std::size_t>(G));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto stencil = grid.direction_stencil(dirs.row(row).transpose());
    per_node[static_cast<std::size_t>(grid.nearest_direction(dirs.row(row).transpose()))].push_back(xi[i]);
    for (const auto &[node, w] : stencil) dir_counts[node] += w;
    const double t = (xi[i] - lo) / dr;
    if (t < 0.0 || t > static_cast<double>(opts.pos_grid - 1)) continue;
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(t), opts.pos_grid - 2);
    const double frac = t - static_cast<double>(j);
    for (const auto &[node, w] : stencil) {
      counts(node, j) += w * (1.0 - frac);
      counts(node, j + 1) += w * frac;
      moments(node, j) += w * (1.0 - frac) * q[i];
      moments(node, j + 1) += w * frac * q[i];
    }
  }

  const std::vector<double> taps = gaussian_taps(h_pos, dr);
  const MatrixXd K = direction_kernel(d, grid.directions, h_dir);
  const MatrixXd counts_s = K * smooth_positions(counts, taps);
  const MatrixXd moments_s = K * smooth_positions(moments, taps);

  const VectorXd cell = grid.direction_weights * (static_cast<double>(n) * dr);
  grid.joint_density = cell.cwiseInverse().asDiagonal() * counts_s;
  grid.g_table = cell.cwiseInverse().asDiagonal() * moments_s;
  grid.g_table = grid.g_table.cwiseMax(0.0);
  grid.joint_density = grid.joint_density.cwiseMax(0.0);
  const double floor = 1e-12 * counts_s.maxCoeff();
  grid.cond_second_moment = MatrixXd::Zero(G, opts.pos_grid);
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index j = 0; j < opts.pos_grid; ++j)
      if (counts_s(g, j) > floor) grid.cond_second_moment(g, j) = moments_s(g, j) / counts_s(g, j);
  grid.direction_density = (K * dir_counts).cwiseQuotient(grid.direction_weights) / static_cast<double>(n);

  if (!(grid.g_table.maxCoeff() > 0.0)) throw Error("degenerate weighting");

  // Per-direction support: smallest interval holding support_mass of the
  // kink positions near that direction, padded by one grid cell.
  constexpr std::size_t kMinSamples = 200;
  grid.support.resize(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    std::vector<double> pool = per_node[static_cast<std::size_t>(g)];
    if (pool.size() < kMinSamples) {
      // Widen to neighbouring nodes, nearest first.
      VectorXd closeness = grid.directions * grid.directions.row(g).transpose();
      std::vector<Eigen::Index> order(static_cast<std::size_t>(G));
      for (Eigen::Index t = 0; t < G; ++t) order[static_cast<std::size_t>(t)] = t;
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return closeness[a] > closeness[b]; });
      for (Eigen::Index t : order) {
        if (pool.size() >= kMinSamples) break;
        if (t == g) continue;
        const auto &extra = per_node[static_cast<std::size_t>(t)];
        pool.insert(pool.end(), extra.begin(), extra.end());
      }
    }
    Interval iv{0.0, 0.0};
    if (!pool.empty()) {
      std::sort(pool.begin(), pool.end());
      iv = smallest_interval(pool, opts.support_mass);
    }
    iv.lo = std::clamp(iv.lo - dr, lo, hi);
    iv.hi = std::clamp(iv.hi + dr, lo, hi);
    grid.support[static_cast<std::size_t>(g)] = iv;
  }

  grid.gbar = gbar(grid);
  return grid;
}

double gbar(const WeightGrid &grid) {
  double total = 0.0;
  for (Eigen::Index g = 0; g < grid.num_directions(); ++g)
    total += grid.direction_weights[g] * grid.row_value(grid.g_table, g, 0.0);
  if (!(total > 0.0)) throw Error("gbar must be positive");
  return total;
}

double CellWeights::value(Eigen::Index cell, double r) const {
  const Eigen::Index J = positions.size();
  const double h = positions[1] - positions[0];
  const double t = (r - positions[0]) / h;
  if (t < 0.0 || t > static_cast<double>(J - 1)) return 0.0;
  const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(t), J - 2);
  const double frac = t - static_cast<double>(j);
  return (1.0 - frac) * table(cell, j) + frac * table(cell, j + 1);
}

CellWeights cell_weights(const WeightGrid &grid, const SpherePartition &partition) {
  if (partition.dim() != grid.d) throw Error("cell_weights: partition and weighting grid disagree on dimension");
  const Eigen::Index m = partition.size();
  const Eigen::Index J = grid.num_positions();
  CellWeights out;
  out.positions = grid.positions;
  out.table = MatrixXd::Zero(m, J);
  out.cell_mass = VectorXd::Zero(m);
  out.gbar = grid.gbar;

  // Probability mass of every cell.
  if (grid.d == 1) {
    for (Eigen::Index c = 0; c < m; ++c) out.cell_mass[c] = grid.p(partition.center(c));
  } else if (grid.d == 2) {
    const Eigen::Index fine = 16 * std::max(grid.num_directions(), m);
    const double step = kTwoPi / static_cast<double>(fine);
    VectorXd s(2);
    for (Eigen::Index i = 0; i < fine; ++i) {
      const double theta = (static_cast<double>(i) + 0.5) * step;
      s << std::cos(theta), std::sin(theta);
      out.cell_mass[partition.assign(s)] += grid.p(s) * step;
    }
  } else {
    for (Eigen::Index g = 0; g < grid.num_directions(); ++g)
      out.cell_mass[partition.assign(grid.directions.row(g).transpose())] +=
          grid.direction_density[g] * grid.direction_weights[g];
  }

  out.zero_mass.assign(static_cast<std::size_t>(m), false);
  out.support.resize(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < m; ++c) {
    const VectorXd center = partition.center(c);
    out.support[static_cast<std::size_t>(c)] = grid.support_at(center);
    const double density = grid.p(center);
    if (!(out.cell_mass[c] > 0.0) || !(density > 0.0)) {
      out.zero_mass[static_cast<std::size_t>(c)] = true;
      continue;
    }
    const double scale = out.cell_mass[c] / density;
    for (Eigen::Index j = 0; j < J; ++j) {
      double value = 0.0;
      for (const auto &[node, w] : grid.direction_stencil(center)) value += w * grid.g_table(node, j);
      out.table(c, j) = value * scale;
    }
  }
  for (Eigen::Index c = 0; c < m; ++c) out.gbar_check += out.value(c, 0.0);
  if (!(out.gbar_check > 0.0)) throw Error("cell_weights: gbar_check must be positive");
  return out;
}

} // namespace igam
