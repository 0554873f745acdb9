#include "reflectsim/rsde.hpp"

#include <cmath>

namespace reflectsim {

DriftSpec zero_drift(int d) { return {Vector::Zero(d), 0.0}; }

namespace {

std::function<Vector(const Vector&)> drift_function(const DriftSpec& spec) {
  if (spec.rate == 0.0) {
    return [offset = spec.offset](const Vector&) -> Vector { return offset; };
  }
  return [offset = spec.offset, rate = spec.rate](const Vector& x) -> Vector { return offset + rate * x; };
}

void check_dims(int d, int d1) {
  if (d < 1 || d > kMaxDim || d1 < 1 || d1 > kMaxDim) throw Error("coefficient dimensions must lie in [1, 8]");
}

}  // namespace

Coefficients make_constant_coefficients(const Matrix& sigma, const DriftSpec& drift) {
  Coefficients c;
  c.d = static_cast<int>(sigma.rows());
  c.d1 = static_cast<int>(sigma.cols());
  check_dims(c.d, c.d1);
  if (drift.offset.size() != c.d) throw Error("drift dimension differs from sigma rows");
  c.sigma = [sigma](const Vector&) -> Matrix { return sigma; };
  c.drift = drift_function(drift);
  const int d = c.d, d1 = c.d1;
  c.sigma_partial = [d, d1](const Vector&, int) -> Matrix { return Matrix::Zero(d, d1); };
  c.constant_sigma = true;
  c.bounds = RegularityBounds{sigma.norm(), 0.0, 0.0, drift.rate == 0.0 ? drift.offset.norm() : HUGE_VAL,
                              std::abs(drift.rate)};
  return c;
}

Coefficients make_affine_coefficients(int d, double a, double c, const DriftSpec& drift) {
  check_dims(d, d);
  Coefficients out;
  out.d = out.d1 = d;
  out.sigma = [a, c](const Vector& x) -> Matrix { return (a + c * x.array()).matrix().asDiagonal(); };
  out.sigma_partial = [c, d](const Vector&, int j) -> Matrix {
    Matrix m = Matrix::Zero(d, d);
    m(j, j) = c;
    return m;
  };
  out.drift = drift_function(drift);
  out.constant_sigma = c == 0.0;
  return out;
}

Coefficients make_sine_coefficients(int d, double a, double c, const DriftSpec& drift) {
  check_dims(d, d);
  Coefficients out;
  out.d = out.d1 = d;
  out.sigma = [a, c](const Vector& x) -> Matrix { return (a + c * x.array().sin()).matrix().asDiagonal(); };
  out.sigma_partial = [c, d](const Vector& x, int j) -> Matrix {
    Matrix m = Matrix::Zero(d, d);
    m(j, j) = c * std::cos(x(j));
    return m;
  };
  out.drift = drift_function(drift);
  out.constant_sigma = c == 0.0;
  out.bounds = RegularityBounds{std::sqrt(static_cast<double>(d)) * (std::abs(a) + std::abs(c)), std::abs(c),
                                std::abs(c), drift.rate == 0.0 ? drift.offset.norm() : HUGE_VAL,
                                std::abs(drift.rate)};
  return out;
}

Vector ito_correction(const Coefficients& coeffs, const Vector& x, const Matrix& sigma_x) {
  if (coeffs.constant_sigma) return Vector::Zero(coeffs.d);
  if (!coeffs.sigma_partial) return ito_correction_fd(coeffs, x, sigma_x);
  Vector out = Vector::Zero(coeffs.d);
  for (int j = 0; j < coeffs.d; ++j) {
    // sum_k (d_j sigma^i_k) sigma^j_k
    out.noalias() += coeffs.sigma_partial(x, j) * sigma_x.row(j).transpose();
  }
  return 0.5 * out;
}

Vector ito_correction_fd(const Coefficients& coeffs, const Vector& x, const Matrix& sigma_x) {
  const double step = 1e-6 * (1.0 + x.norm());
  Vector out = Vector::Zero(coeffs.d);
  for (int j = 0; j < coeffs.d; ++j) {
    Vector up = x, down = x;
    up(j) += step;
    down(j) -= step;
    const Matrix partial = (coeffs.sigma(up) - coeffs.sigma(down)) / (2.0 * step);
    out.noalias() += partial * sigma_x.row(j).transpose();
  }
  return 0.5 * out;
}

Vector btilde(const Coefficients& coeffs, const Vector& x) {
  const Matrix s = coeffs.sigma(x);
  return coeffs.drift(x) + ito_correction(coeffs, x, s);
}

std::string to_string(CellScheme scheme) { return scheme == CellScheme::heun ? "heun" : "euler"; }

CellScheme cell_scheme_from_string(const std::string& name) {
  if (name == "euler") return CellScheme::euler;
  if (name == "heun") return CellScheme::heun;
  throw Error("unknown cell scheme '" + name + "'");
}

std::vector<double> refine_grid(const std::vector<double>& times, int substeps) {
  if (substeps < 1) throw Error("substeps must be at least 1");
  if (times.empty()) return {};
  std::vector<double> out;
  out.reserve((times.size() - 1) * static_cast<std::size_t>(substeps) + 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    for (int s = 0; s < substeps; ++s) out.push_back(times[i] + dt * s / substeps);
  }
  out.push_back(times.back());
  return out;
}

namespace {

/// One projected step of dx = sigma(x) dv + b(x) dt.
ReflectedMove bv_step(const Domain& domain, const Coefficients& coeffs, const Vector& x, const Vector& dv, double dt,
                      CellScheme scheme) {
  const Matrix s = coeffs.sigma(x);
  const Vector b = coeffs.drift(x);
  if (scheme == CellScheme::euler) return reflected_move(domain, x, s * dv + b * dt);
  const Vector predictor = reflected_move(domain, x, s * dv + b * dt).point;
  const Vector slope = 0.5 * ((s + coeffs.sigma(predictor)) * dv + (b + coeffs.drift(predictor)) * dt);
  return reflected_move(domain, x, slope);
}

void check_problem(const Domain& domain, const Coefficients& coeffs, int driver_dim, const Vector& x0) {
  if (coeffs.d != domain.dim()) throw Error("coefficient state dimension differs from the domain dimension");
  if (coeffs.d1 != driver_dim) throw Error("driver dimension differs from the coefficient driver dimension");
  require_start_in_closure(domain, x0);
}

}  // namespace

SkorohodSolution euler_reflected(const Domain& domain, const Coefficients& coeffs, const SamplePath& w,
                                 const Vector& x0) {
  validate(w);
  check_problem(domain, coeffs, w.dim(), x0);
  TrajectoryRecorder rec(w.times, x0);
  Vector dw(coeffs.d1);
  for (std::size_t i = 1; i < w.size(); ++i) {
    const Vector& x = rec.state();
    const double dt = w.times[i] - w.times[i - 1];
    dw = w.values.col(static_cast<Eigen::Index>(i)) - w.values.col(static_cast<Eigen::Index>(i - 1));
    const Matrix s = coeffs.sigma(x);
    const Vector increment = s * dw + (coeffs.drift(x) + ito_correction(coeffs, x, s)) * dt;
    rec.record(i, reflected_move(domain, x, increment));
  }
  return std::move(rec).finish();
}

SkorohodSolution wong_zakai(const Domain& domain, const Coefficients& coeffs, const SamplePath& w, int level,
                            int substeps, double horizon, const Vector& x0, CellScheme scheme) {
  validate(w);
  check_problem(domain, coeffs, w.dim(), x0);
  if (substeps < 1) throw Error("substeps must be at least 1");
  const SamplePath wn = adapted_interpolation(w, level, horizon);
  std::vector<double> grid = refine_grid(wn.times, substeps);
  TrajectoryRecorder rec(grid, x0);
  std::size_t node = 0;
  Vector previous = wn.node(0);
  for (std::size_t cell = 0; cell + 1 < wn.size(); ++cell) {
    for (int s = 1; s <= substeps; ++s) {
      ++node;
      // increments of w^n taken from its values, not from the slope
      const Vector current = wn.at(grid[node]);
      const Vector dwn = current - previous;
      previous = current;
      const Vector& x = rec.state();
      const double dt = grid[node] - grid[node - 1];
      rec.record(node, bv_step(domain, coeffs, x, dwn, dt, scheme));
    }
  }
  return std::move(rec).finish();
}

SkorohodSolution skeleton(const Domain& domain, const Coefficients& coeffs, const Control& h, int substeps,
                          const Vector& x0, CellScheme scheme) {
  validate(h.path);
  check_problem(domain, coeffs, h.dim(), x0);
  std::vector<double> grid = refine_grid(h.path.times, substeps);
  TrajectoryRecorder rec(grid, x0);
  std::size_t node = 0;
  for (std::size_t cell = 0; cell + 1 < h.path.size(); ++cell) {
    const Vector slope = h.derivative.col(static_cast<Eigen::Index>(cell));
    for (int s = 1; s <= substeps; ++s) {
      ++node;
      const Vector& x = rec.state();
      const double dt = grid[node] - grid[node - 1];
      rec.record(node, bv_step(domain, coeffs, x, slope * dt, dt, scheme));
    }
  }
  return std::move(rec).finish();
}

SkorohodSolution shifted_driver(const Domain& domain, const Coefficients& coeffs, const SamplePath& w, int level,
                                const Control& h, double horizon, const Vector& x0) {
  validate(w);
  check_problem(domain, coeffs, w.dim(), x0);
  if (h.dim() != w.dim()) throw Error("control and driver dimensions differ");
  const SamplePath wn = adapted_interpolation(w, level, horizon);
  const Eigen::MatrixXd wn_on_grid = evaluate_on_grid(wn, w.times);
  const Eigen::MatrixXd h_on_grid = evaluate_on_grid(h.path, w.times);
  TrajectoryRecorder rec(w.times, x0);
  for (std::size_t i = 1; i < w.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Vector& y = rec.state();
    const double dt = w.times[i] - w.times[i - 1];
    const Vector shifted = (w.values.col(c) - w.values.col(c - 1)) - (wn_on_grid.col(c) - wn_on_grid.col(c - 1)) +
                           (h_on_grid.col(c) - h_on_grid.col(c - 1));
    const Matrix s = coeffs.sigma(y);
    const Vector increment = s * shifted + (coeffs.drift(y) + ito_correction(coeffs, y, s)) * dt;
    rec.record(i, reflected_move(domain, y, increment));
  }
  return std::move(rec).finish();
}

}  // namespace reflectsim
