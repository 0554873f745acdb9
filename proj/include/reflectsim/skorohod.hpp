#pragma once

#include "reflectsim/geometry.hpp"
#include "reflectsim/paths.hpp"

#include <iosfwd>
#include <numbers>
#include <vector>

namespace reflectsim {

/// Constrained path x, regulator k = x - (x0 + w - w0), cumulative total
/// variation |k| and the unit normal used at each node (zero when no push).
struct SkorohodSolution {
  SamplePath x;
  SamplePath k;
  std::vector<double> tv;
  Eigen::MatrixXd pushes;
};

/// Result of one projected move.
struct ReflectedMove {
  Vector point;
  Vector correction;  // point - (start + increment)
  double pushed = 0.0;  // total length of the projection corrections
  Vector normal;        // last nonzero normal, or zero
};

/// Moves `start` by `increment` and projects onto the closure. For nonconvex
/// domains an increment longer than r0/2 is bisected recursively first, which
/// keeps each projection inside the uniqueness tube.
ReflectedMove reflected_move(const Domain& domain, const Vector& start, const Vector& increment);

/// Preallocated storage for a reflected trajectory on a fixed grid.
class TrajectoryRecorder {
 public:
  TrajectoryRecorder(std::vector<double> times, const Vector& x0);

  /// Records node i (>= 1) after a move from node i - 1.
  void record(std::size_t i, const ReflectedMove& move);
  const Vector& state() const { return state_; }
  SkorohodSolution finish() &&;

 private:
  SkorohodSolution sol_;
  Vector state_;
  Vector regulator_;
  double tv_ = 0.0;
};

/// Throws StartOutsideDomain unless x0 lies in the closure.
void require_start_in_closure(const Domain& domain, const Vector& x0);

/// Recursive projection scheme x_{i+1} = P(x_i + w_{i+1} - w_i).
SkorohodSolution solve(const Domain& domain, const SamplePath& driver, const Vector& x0);

inline constexpr double kBvComparisonConstant = 2.0 * (std::numbers::sqrt2 + 1.0);

/// Index windows [first, last] of the dyadic subdivisions of the node range.
struct IndexWindow {
  std::size_t first;
  std::size_t last;
};
std::vector<IndexWindow> dyadic_windows(std::size_t nodes);

struct TvBoundExponents {
  double c1 = 1.0;
  double c2 = 1.0;
};

struct TvBoundReport {
  /// Smallest C with |k|_{[s,t]} <= C (1 + ||w||_{[s,t],theta}^c1 (t-s)) e^{c2 ||w||_{[s,t]}} ||w||_{[s,t]}
  /// over all dyadic windows.
  double constant = 0.0;
  std::size_t windows = 0;
  /// Windows with positive regulator variation but a driver without
  /// oscillation (the bound cannot hold there).
  std::size_t violations = 0;
};

TvBoundReport verify_tv_bound(const Domain& domain, const SkorohodSolution& sol, const SamplePath& driver, double theta,
                              const TvBoundExponents& exponents = {});

struct BvComparison {
  double worst_ratio = 0.0;
  std::size_t windows = 0;
};

/// Solves from x0 = w_0 and reports max |x|_{[s,t]} / |w|_{[s,t]} (total
/// variations) over dyadic windows.
BvComparison verify_bv_comparison(const Domain& domain, const SamplePath& driver);

/// CSV with columns t, x1..xd, k1..kd, tv.
void write_csv(const SkorohodSolution& sol, std::ostream& out);

}  // namespace reflectsim
