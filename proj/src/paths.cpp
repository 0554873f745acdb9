#include "reflectsim/paths.hpp"

#include "reflectsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace reflectsim {

namespace {

double node_tolerance(double horizon) { return 1e-12 * std::max(1.0, std::abs(horizon)); }

// Index of the last node with time <= horizon (within tolerance).
std::size_t last_node(std::span<const double> times, double horizon) {
  const auto it = std::upper_bound(times.begin(), times.end(), horizon + node_tolerance(horizon));
  if (it == times.begin()) throw GridMismatch("horizon precedes the first grid node");
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

// 1 / (k h)^alpha for uniform grids, or an empty table.
std::vector<double> uniform_lag_weights(std::span<const double> times, std::size_t first, std::size_t last,
                                        double alpha) {
  const std::size_t n = last - first;
  if (n == 0) return {};
  const double h = (times[last] - times[first]) / static_cast<double>(n);
  for (std::size_t i = first; i <= last; ++i) {
    if (std::abs(times[i] - times[first] - h * static_cast<double>(i - first)) > 1e-9 * h) return {};
  }
  std::vector<double> weights(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) weights[k] = alpha == 0.0 ? 1.0 : std::pow(h * static_cast<double>(k), -alpha);
  return weights;
}

}  // namespace

SamplePath::SamplePath(std::vector<double> grid, Eigen::MatrixXd vals, Interpolation rule)
    : times(std::move(grid)), values(std::move(vals)), interpolation(rule) {}

Vector SamplePath::at(double t) const {
  if (t <= times.front()) return node(0);
  if (t >= times.back()) return node(size() - 1);
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  if (interpolation == Interpolation::piecewise_constant_left || t == times[lo]) return node(lo);
  const double weight = (t - times[lo]) / (times[hi] - times[lo]);
  return Vector((1.0 - weight) * values.col(static_cast<Eigen::Index>(lo)) +
                weight * values.col(static_cast<Eigen::Index>(hi)));
}

void validate(const SamplePath& path) {
  if (path.times.empty()) throw Error("sample path has no nodes");
  if (path.times.front() != 0.0) throw Error("sample path grid must start at t = 0");
  if (static_cast<std::size_t>(path.values.cols()) != path.times.size()) {
    throw Error("sample path: number of value columns differs from number of nodes");
  }
  for (std::size_t i = 1; i < path.times.size(); ++i) {
    if (!(path.times[i] > path.times[i - 1])) throw Error("sample path grid must be strictly increasing");
  }
}

std::vector<double> uniform_grid(double horizon, std::size_t cells) {
  if (cells == 0 || !(horizon > 0.0)) throw Error("uniform grid needs a positive horizon and at least one cell");
  std::vector<double> grid(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) grid[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
  return grid;
}

std::vector<double> dyadic_grid(double horizon, int level) {
  if (level < 0 || level > 40) throw Error("dyadic level out of range");
  return uniform_grid(horizon, std::size_t{1} << level);
}

std::vector<std::size_t> dyadic_indices(std::span<const double> times, int level, double horizon) {
  const std::size_t cells = std::size_t{1} << level;
  std::vector<std::size_t> out(cells + 1);
  const double tol = node_tolerance(horizon);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i <= cells; ++i) {
    const double target = horizon * static_cast<double>(i) / static_cast<double>(cells);
    const auto it = std::lower_bound(times.begin() + static_cast<std::ptrdiff_t>(cursor), times.end(), target - tol);
    if (it == times.end() || std::abs(*it - target) > tol) {
      throw GridMismatch("grid lacks dyadic node t = " + std::to_string(target) + " of level " + std::to_string(level));
    }
    cursor = static_cast<std::size_t>(it - times.begin());
    out[i] = cursor;
  }
  return out;
}

SamplePath restrict_to_level(const SamplePath& path, int level, double horizon) {
  const auto idx = dyadic_indices(path.times, level, horizon);
  Eigen::MatrixXd vals(path.dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) vals.col(static_cast<Eigen::Index>(i)) = path.values.col(static_cast<Eigen::Index>(idx[i]));
  return SamplePath(dyadic_grid(horizon, level), std::move(vals), path.interpolation);
}

SamplePath resample(const SamplePath& path, const std::vector<double>& grid) {
  return SamplePath(grid, evaluate_on_grid(path, grid), path.interpolation);
}

Eigen::MatrixXd evaluate_on_grid(const SamplePath& h, const std::vector<double>& grid) {
  Eigen::MatrixXd out(h.dim(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = h.at(grid[i]);
  return out;
}

SamplePath sample_brownian(int dim, const std::vector<double>& grid, std::uint64_t seed, std::uint64_t stream) {
  if (dim <= 0) throw Error("Brownian dimension must be positive");
  if (grid.empty() || grid.front() != 0.0) throw Error("Brownian grid must start at 0");
  const auto cells = static_cast<Eigen::Index>(grid.size()) - 1;
  Eigen::MatrixXd vals(dim, cells + 1);
  vals.col(0).setZero();
  if (cells > 0) {
    Eigen::MatrixXd z(dim, cells);
    RandomStream(seed, stream).fill_normals(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    for (Eigen::Index i = 0; i < cells; ++i) {
      const double dt = grid[static_cast<std::size_t>(i) + 1] - grid[static_cast<std::size_t>(i)];
      if (!(dt > 0.0)) throw Error("Brownian grid must be strictly increasing");
      vals.col(i + 1) = vals.col(i) + std::sqrt(dt) * z.col(i);
    }
  }
  return SamplePath(grid, std::move(vals));
}

SamplePath refine_bridge(const SamplePath& w, std::uint64_t seed, std::uint64_t stream) {
  validate(w);
  const std::size_t n = w.size();
  std::vector<double> grid;
  grid.reserve(2 * n - 1);
  Eigen::MatrixXd vals(w.dim(), static_cast<Eigen::Index>(2 * n - 1));
  const RandomStream rng(derive_seed(seed, 0xB21D6E), stream);
  for (std::size_t i = 0; i < n; ++i) {
    grid.push_back(w.times[i]);
    vals.col(static_cast<Eigen::Index>(2 * i)) = w.values.col(static_cast<Eigen::Index>(i));
    if (i + 1 == n) break;
    const double dt = w.times[i + 1] - w.times[i];
    grid.push_back(w.times[i] + 0.5 * dt);
    const double sd = std::sqrt(0.25 * dt);
    for (int k = 0; k < w.dim(); ++k) {
      const double mean = 0.5 * (w.values(k, static_cast<Eigen::Index>(i)) + w.values(k, static_cast<Eigen::Index>(i + 1)));
      vals(k, static_cast<Eigen::Index>(2 * i + 1)) = mean + sd * rng.normal(i * static_cast<std::uint64_t>(w.dim()) + static_cast<std::uint64_t>(k));
    }
  }
  return SamplePath(std::move(grid), std::move(vals));
}

SamplePath adapted_interpolation(const SamplePath& w, int level, double horizon) {
  const auto idx = dyadic_indices(w.times, level, horizon);
  const std::size_t cells = idx.size() - 1;
  Eigen::MatrixXd vals(w.dim(), static_cast<Eigen::Index>(cells + 1));
  vals.col(0) = w.values.col(static_cast<Eigen::Index>(idx[0]));
  for (std::size_t i = 0; i < cells; ++i) {
    // value at t_{i+1} is w(t_i); the first cell is flat at w_0
    vals.col(static_cast<Eigen::Index>(i + 1)) = w.values.col(static_cast<Eigen::Index>(idx[i]));
  }
  return SamplePath(dyadic_grid(horizon, level), std::move(vals));
}

Control make_control(SamplePath path) {
  validate(path);
  Control c;
  const auto cells = static_cast<Eigen::Index>(path.size()) - 1;
  c.derivative.resize(path.dim(), cells);
  c.energy.assign(path.size(), 0.0);
  for (Eigen::Index i = 0; i < cells; ++i) {
    const double dt = path.times[static_cast<std::size_t>(i) + 1] - path.times[static_cast<std::size_t>(i)];
    c.derivative.col(i) = (path.values.col(i + 1) - path.values.col(i)) / dt;
    c.energy[static_cast<std::size_t>(i) + 1] = c.energy[static_cast<std::size_t>(i)] + c.derivative.col(i).squaredNorm() * dt;
  }
  c.path = std::move(path);
  return c;
}

Control control_from_path(const SamplePath& w, int level, double horizon) {
  return make_control(adapted_interpolation(w, level, horizon));
}

Control zero_control(int dim, const std::vector<double>& grid) {
  return make_control(SamplePath(grid, Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(grid.size()))));
}

Control linear_control(const Vector& slope, const std::vector<double>& grid) {
  Eigen::MatrixXd vals(slope.size(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) vals.col(static_cast<Eigen::Index>(i)) = slope * grid[i];
  return make_control(SamplePath(grid, std::move(vals)));
}

Control sine_control(int dim, int axis, double amplitude, double frequency, const std::vector<double>& grid) {
  if (axis < 0 || axis >= dim) throw Error("sine control axis out of range");
  Eigen::MatrixXd vals = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vals(axis, static_cast<Eigen::Index>(i)) = amplitude * std::sin(2.0 * std::numbers::pi * frequency * grid[i]);
  }
  return make_control(SamplePath(grid, std::move(vals)));
}

double control_modulus(const Control& h, int level, double horizon) {
  // energy is piecewise linear in t between breakpoints, so interpolating the
  // cumulative energy is exact
  const SamplePath energy(h.path.times, Eigen::Map<const Eigen::MatrixXd>(h.energy.data(), 1,
                                                                         static_cast<Eigen::Index>(h.energy.size())));
  const std::size_t cells = std::size_t{1} << level;
  const double dt = horizon / static_cast<double>(cells);
  double best = 0.0;
  for (std::size_t k = 2; k <= cells; ++k) {
    const double e = energy.at(dt * static_cast<double>(k))(0) - energy.at(dt * static_cast<double>(k - 2))(0);
    best = std::max(best, e);
  }
  return best;
}

double sup_norm(const SamplePath& x, double horizon) {
  const std::size_t last = last_node(x.times, horizon);
  double best = 0.0;
  for (std::size_t i = 0; i <= last; ++i) best = std::max(best, x.values.col(static_cast<Eigen::Index>(i)).squaredNorm());
  return std::sqrt(best);
}

double sup_distance(const SamplePath& a, const SamplePath& b, double horizon) {
  std::vector<double> grid;
  grid.reserve(a.size() + b.size());
  std::merge(a.times.begin(), a.times.end(), b.times.begin(), b.times.end(), std::back_inserter(grid));
  const double tol = node_tolerance(horizon);
  double best = 0.0;
  double previous = -std::numeric_limits<double>::infinity();
  for (double t : grid) {
    if (t > horizon + tol) break;
    if (t - previous <= tol) continue;
    previous = t;
    best = std::max(best, (a.at(t) - b.at(t)).squaredNorm());
  }
  return std::sqrt(best);
}

HolderEstimate holder_seminorm(const SamplePath& x, std::size_t first, std::size_t last, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw Error("Holder exponent must lie in [0, 1]");
  if (last >= x.size() || first > last) throw Error("Holder range outside the path");
  HolderEstimate out;
  if (last == first) return out;
  const std::size_t n = last - first + 1;
  out.exact = n <= kExactHolderLimit;
  const auto weights = uniform_lag_weights(x.times, first, last, alpha);
  const int dim = x.dim();
  const double* data = x.values.data();
  double best = 0.0;  // max of squared ratio
  auto lag_scan = [&](std::size_t lag) {
    const double w = weights.empty() ? 0.0 : weights[lag] * weights[lag];
    for (std::size_t i = first; i + lag <= last; ++i) {
      double sq = 0.0;
      const double* p = data + static_cast<std::ptrdiff_t>(i) * dim;
      const double* q = data + static_cast<std::ptrdiff_t>(i + lag) * dim;
      for (int k = 0; k < dim; ++k) {
        const double diff = q[k] - p[k];
        sq += diff * diff;
      }
      const double scale =
          weights.empty() ? std::pow(x.times[i + lag] - x.times[i], -2.0 * alpha) : w;
      best = std::max(best, sq * scale);
    }
  };
  if (out.exact) {
    for (std::size_t lag = 1; lag < n; ++lag) lag_scan(lag);
  } else {
    for (std::size_t lag = 1; lag < n; lag *= 2) lag_scan(lag);
  }
  out.value = std::sqrt(best);
  return out;
}

HolderEstimate holder_seminorm(const SamplePath& x, double horizon, double alpha) {
  return holder_seminorm(x, 0, last_node(x.times, horizon), alpha);
}

HolderEstimate holder_norm(const SamplePath& x, double horizon, double alpha) {
  auto out = holder_seminorm(x, horizon, alpha);
  out.value += sup_norm(x, horizon);
  return out;
}

double oscillation(const SamplePath& x, std::size_t first, std::size_t last) {
  if (last >= x.size() || first > last) throw Error("oscillation range outside the path");
  const auto block = x.values.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first + 1));
  if (x.dim() == 1) return block.maxCoeff() - block.minCoeff();
  double best = 0.0;
  for (Eigen::Index i = 0; i < block.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < block.cols(); ++j) best = std::max(best, (block.col(j) - block.col(i)).squaredNorm());
  }
  return std::sqrt(best);
}

double variation(const SamplePath& x, std::size_t first, std::size_t last) {
  if (last >= x.size() || first > last) throw Error("variation range outside the path");
  double total = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    total += (x.values.col(static_cast<Eigen::Index>(i + 1)) - x.values.col(static_cast<Eigen::Index>(i))).norm();
  }
  return total;
}

namespace {

template <typename Visit>
void midpoint_sums(const SamplePath& w, double horizon, Visit&& visit) {
  const std::size_t last = last_node(w.times, horizon);
  const int d = w.dim();
  Eigen::MatrixXd zeta = Eigen::MatrixXd::Zero(d, d);
  visit(zeta);
  for (std::size_t k = 0; k < last; ++k) {
    const auto a = w.values.col(static_cast<Eigen::Index>(k));
    const auto b = w.values.col(static_cast<Eigen::Index>(k + 1));
    zeta.noalias() += 0.5 * (a + b) * (b - a).transpose();
    visit(zeta);
  }
}

}  // namespace

LevyFunctionals levy_functionals(const SamplePath& w, double horizon) {
  LevyFunctionals out;
  midpoint_sums(w, horizon, [&](const Eigen::MatrixXd& zeta) { out.zeta = zeta; });
  out.kappa = 0.5 * (out.zeta - out.zeta.transpose());
  return out;
}

LevyFunctionals levy_sup(const SamplePath& w, double horizon) {
  LevyFunctionals out;
  out.zeta = Eigen::MatrixXd::Zero(w.dim(), w.dim());
  out.kappa = Eigen::MatrixXd::Zero(w.dim(), w.dim());
  midpoint_sums(w, horizon, [&](const Eigen::MatrixXd& zeta) {
    out.zeta = out.zeta.cwiseMax(zeta.cwiseAbs());
    out.kappa = out.kappa.cwiseMax((0.5 * (zeta - zeta.transpose())).cwiseAbs());
  });
  return out;
}

std::optional<SamplePath> tube_attempt(const Eigen::MatrixXd& h_on_grid, double delta, const std::vector<double>& grid,
                                       std::uint64_t seed, std::uint64_t stream) {
  const int dim = static_cast<int>(h_on_grid.rows());
  const std::size_t n = grid.size();
  const double delta_sq = delta * delta;
  Eigen::MatrixXd vals(dim, static_cast<Eigen::Index>(n));
  vals.col(0).setZero();
  if ((vals.col(0) - h_on_grid.col(0)).squaredNorm() >= delta_sq) return std::nullopt;
  // same normal numbering as sample_brownian, so an accepted path equals the
  // unconditioned path of the same stream
  NormalSequence normals(seed, stream);
  for (std::size_t i = 1; i < n; ++i) {
    const double sd = std::sqrt(grid[i] - grid[i - 1]);
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double v = vals(k, static_cast<Eigen::Index>(i - 1)) + sd * normals.next();
      vals(k, static_cast<Eigen::Index>(i)) = v;
      const double gap = v - h_on_grid(k, static_cast<Eigen::Index>(i));
      sq += gap * gap;
    }
    if (sq >= delta_sq) return std::nullopt;
  }
  return SamplePath(grid, std::move(vals));
}

TubeSample tube_sample(const Control& h, double delta, const std::vector<double>& grid, std::uint64_t seed,
                       std::size_t max_attempts, std::uint64_t first_stream) {
  if (!(delta > 0.0)) throw Error("tube radius must be positive");
  const Eigen::MatrixXd h_on_grid = evaluate_on_grid(h.path, grid);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    if (auto w = tube_attempt(h_on_grid, delta, grid, seed, first_stream + attempt)) {
      return {std::move(*w), attempt + 1};
    }
  }
  throw TubeTooNarrow("tube of radius " + std::to_string(delta) + " not hit in " + std::to_string(max_attempts) +
                          " attempts",
                      0.0);
}

void write_csv(const SamplePath& path, std::ostream& out) {
  out << "t";
  for (int k = 1; k <= path.dim(); ++k) out << ",x" << k;
  out << "\n";
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < path.size(); ++i) {
    out << path.times[i];
    for (int k = 0; k < path.dim(); ++k) out << "," << path.values(k, static_cast<Eigen::Index>(i));
    out << "\n";
  }
  out.precision(precision);
}

std::uint64_t path_hash(const SamplePath& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  mix(path.times.data(), path.times.size() * sizeof(double));
  mix(path.values.data(), static_cast<std::size_t>(path.values.size()) * sizeof(double));
  return h;
}

}  // namespace reflectsim
