#include "reflectsim/skorohod.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace reflectsim {

namespace {

void accumulate_move(const Domain& domain, const Vector& start, const Vector& increment, int depth,
                     ReflectedMove& out) {
  if (!domain.convex() && depth < 40 && increment.norm() > 0.5 * domain.r0) {
    const Vector half = 0.5 * increment;
    accumulate_move(domain, start, half, depth + 1, out);
    const Vector mid = out.point;
    accumulate_move(domain, mid, half, depth + 1, out);
    return;
  }
  const Vector target = start + increment;
  const Projection p = project(domain, target);
  out.point = p.point;
  out.correction += p.point - target;
  out.pushed += p.distance;
  if (p.distance > 0.0) out.normal = p.normal;
}

}  // namespace

ReflectedMove reflected_move(const Domain& domain, const Vector& start, const Vector& increment) {
  ReflectedMove out{start, Vector::Zero(start.size()), 0.0, Vector::Zero(start.size())};
  accumulate_move(domain, start, increment, 0, out);
  return out;
}

TrajectoryRecorder::TrajectoryRecorder(std::vector<double> times, const Vector& x0)
    : state_(x0), regulator_(Vector::Zero(x0.size())) {
  const auto n = static_cast<Eigen::Index>(times.size());
  const auto d = static_cast<Eigen::Index>(x0.size());
  sol_.x = SamplePath(times, Eigen::MatrixXd(d, n));
  sol_.k = SamplePath(std::move(times), Eigen::MatrixXd(d, n));
  sol_.tv.assign(static_cast<std::size_t>(n), 0.0);
  sol_.pushes = Eigen::MatrixXd::Zero(d, n);
  sol_.x.values.col(0) = x0;
  sol_.k.values.col(0).setZero();
}

void TrajectoryRecorder::record(std::size_t i, const ReflectedMove& move) {
  const auto col = static_cast<Eigen::Index>(i);
  state_ = move.point;
  regulator_ += move.correction;
  tv_ += move.pushed;
  sol_.x.values.col(col) = state_;
  sol_.k.values.col(col) = regulator_;
  sol_.tv[i] = tv_;
  sol_.pushes.col(col) = move.normal;
}

SkorohodSolution TrajectoryRecorder::finish() && { return std::move(sol_); }

void require_start_in_closure(const Domain& domain, const Vector& x0) {
  if (x0.size() != domain.dim()) throw StartOutsideDomain("start point dimension differs from the domain dimension");
  if (contains(domain, x0).location == Location::exterior) throw StartOutsideDomain("start point lies outside the closure");
}

SkorohodSolution solve(const Domain& domain, const SamplePath& driver, const Vector& x0) {
  validate(driver);
  require_start_in_closure(domain, x0);
  if (driver.dim() != domain.dim()) throw Error("driver dimension differs from the domain dimension");
  TrajectoryRecorder rec(driver.times, x0);
  for (std::size_t i = 1; i < driver.size(); ++i) {
    const Vector increment =
        driver.values.col(static_cast<Eigen::Index>(i)) - driver.values.col(static_cast<Eigen::Index>(i - 1));
    rec.record(i, reflected_move(domain, rec.state(), increment));
  }
  return std::move(rec).finish();
}

std::vector<IndexWindow> dyadic_windows(std::size_t nodes) {
  std::vector<IndexWindow> out;
  if (nodes < 2) return out;
  const std::size_t cells = nodes - 1;
  for (std::size_t parts = 1;; parts *= 2) {
    const std::size_t len = (cells + parts - 1) / parts;
    for (std::size_t first = 0; first < cells; first += len) out.push_back({first, std::min(first + len, cells)});
    if (len == 1) break;
  }
  return out;
}

TvBoundReport verify_tv_bound(const Domain& /*domain*/, const SkorohodSolution& sol, const SamplePath& driver,
                              double theta, const TvBoundExponents& exponents) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error("theta must lie in (0, 1]");
  if (driver.size() != sol.tv.size()) throw Error("driver and solution grids differ");
  TvBoundReport report;
  for (const auto& win : dyadic_windows(driver.size())) {
    ++report.windows;
    const double pushed = sol.tv[win.last] - sol.tv[win.first];
    if (pushed <= 0.0) continue;
    const double osc = oscillation(driver, win.first, win.last);
    if (osc <= 0.0) {
      ++report.violations;
      continue;
    }
    const double holder = holder_seminorm(driver, win.first, win.last, theta).value;
    const double span = driver.times[win.last] - driver.times[win.first];
    const double bound =
        (1.0 + std::pow(holder, exponents.c1) * span) * std::exp(exponents.c2 * osc) * osc;
    report.constant = std::max(report.constant, pushed / bound);
  }
  return report;
}

BvComparison verify_bv_comparison(const Domain& domain, const SamplePath& driver) {
  const auto sol = solve(domain, driver, driver.node(0));
  BvComparison out;
  for (const auto& win : dyadic_windows(driver.size())) {
    const double driven = variation(driver, win.first, win.last);
    if (driven <= 0.0) continue;
    ++out.windows;
    out.worst_ratio = std::max(out.worst_ratio, variation(sol.x, win.first, win.last) / driven);
  }
  return out;
}

void write_csv(const SkorohodSolution& sol, std::ostream& out) {
  const int d = sol.x.dim();
  out << "t";
  for (int k = 1; k <= d; ++k) out << ",x" << k;
  for (int k = 1; k <= d; ++k) out << ",k" << k;
  out << ",tv\n";
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < sol.x.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    out << sol.x.times[i];
    for (int k = 0; k < d; ++k) out << "," << sol.x.values(k, col);
    for (int k = 0; k < d; ++k) out << "," << sol.k.values(k, col);
    out << "," << sol.tv[i] << "\n";
  }
  out.precision(precision);
}

}  // namespace reflectsim
