#pragma once

#include "reflectsim/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace reflectsim {

enum class Interpolation { piecewise_linear, piecewise_constant_left };

/// Values of an R^m-valued path on a strictly increasing time grid starting
/// at 0. Column i of `values` is the value at `times[i]`.
struct SamplePath {
  std::vector<double> times;
  Eigen::MatrixXd values;
  Interpolation interpolation = Interpolation::piecewise_linear;

  SamplePath() = default;
  SamplePath(std::vector<double> grid, Eigen::MatrixXd vals,
             Interpolation rule = Interpolation::piecewise_linear);

  std::size_t size() const { return times.size(); }
  int dim() const { return static_cast<int>(values.rows()); }
  double horizon() const { return times.back(); }
  Vector node(std::size_t i) const { return values.col(static_cast<Eigen::Index>(i)); }

  /// Exact value at t under the interpolation rule; t is clamped to the grid.
  Vector at(double t) const;
};

/// Throws Error unless the grid starts at 0, is strictly increasing and
/// matches the value columns.
void validate(const SamplePath& path);

std::vector<double> uniform_grid(double horizon, std::size_t cells);
std::vector<double> dyadic_grid(double horizon, int level);

/// Indices of the nodes t_i = i T 2^-level in `times`; throws GridMismatch if
/// one of them is missing.
std::vector<std::size_t> dyadic_indices(std::span<const double> times, int level, double horizon);

/// Same path restricted to the dyadic nodes of `level` (common random
/// numbers across levels are restrictions of one fine path).
SamplePath restrict_to_level(const SamplePath& path, int level, double horizon);

/// Path evaluated at the nodes of `grid`.
SamplePath resample(const SamplePath& path, const std::vector<double>& grid);

// ---------------------------------------------------------------------------
// Brownian sampling

/// Standard Brownian motion in R^dim on `grid`. Increment i, coordinate k uses
/// normal number i*dim + k of stream (seed, stream).
SamplePath sample_brownian(int dim, const std::vector<double>& grid, std::uint64_t seed, std::uint64_t stream);

/// Inserts the midpoint of every cell, drawn from the Brownian bridge law
/// between the two endpoint values.
SamplePath refine_bridge(const SamplePath& w, std::uint64_t seed, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Adapted interpolation and controls

/// One-cell-delayed piecewise-linear interpolation on the dyadic grid of
/// `level`: constant w_0 on the first cell and w^n(t_{i+1}) = w(t_i). The
/// result lives on the dyadic grid and depends on w only through its past.
SamplePath adapted_interpolation(const SamplePath& w, int level, double horizon);

/// Absolutely continuous control: piecewise-linear path, its per-cell
/// derivative and the cumulative energy int_0^t |h'|^2 ds at each node.
struct Control {
  SamplePath path;
  Eigen::MatrixXd derivative;  // dim x (nodes - 1)
  std::vector<double> energy;

  int dim() const { return path.dim(); }
};

Control make_control(SamplePath path);
Control control_from_path(const SamplePath& w, int level, double horizon);
Control zero_control(int dim, const std::vector<double>& grid);
/// h_t = slope * t.
Control linear_control(const Vector& slope, const std::vector<double>& grid);
/// h_t = amplitude sin(2 pi frequency t) e_axis.
Control sine_control(int dim, int axis, double amplitude, double frequency, const std::vector<double>& grid);

/// sup_k int_{t_{k-2}}^{t_k} |h'|^2 ds over the dyadic nodes of `level`.
double control_modulus(const Control& h, int level, double horizon);

// ---------------------------------------------------------------------------
// Norms and functionals

/// max over nodes with t <= T of |x_t|.
double sup_norm(const SamplePath& x, double horizon);

/// sup over nodes t <= T of |a(t) - b(t)|, both evaluated on the union grid.
double sup_distance(const SamplePath& a, const SamplePath& b, double horizon);

struct HolderEstimate {
  double value = 0.0;
  /// False when the dyadic-lag lower bound replaced the exhaustive pair scan.
  bool exact = true;
};

/// Node count above which holder_seminorm scans dyadic lags only.
inline constexpr std::size_t kExactHolderLimit = 4096;

/// sup_{s != t <= T} |x_t - x_s| / |t - s|^alpha over node pairs.
HolderEstimate holder_seminorm(const SamplePath& x, double horizon, double alpha);

/// Same on the node index range [first, last].
HolderEstimate holder_seminorm(const SamplePath& x, std::size_t first, std::size_t last, double alpha);

/// ||x||_{T,alpha} = sup norm + Holder seminorm.
HolderEstimate holder_norm(const SamplePath& x, double horizon, double alpha);

/// sup_{u,v in [first, last]} |x_u - x_v| over nodes.
double oscillation(const SamplePath& x, std::size_t first, std::size_t last);

/// Sum of |x_{i+1} - x_i| over nodes in [first, last].
double variation(const SamplePath& x, std::size_t first, std::size_t last);

struct LevyFunctionals {
  Eigen::MatrixXd zeta;   // zeta(i, j) = int_0^T w^i o dw^j
  Eigen::MatrixXd kappa;  // kappa(i, j) = (zeta(i, j) - zeta(j, i)) / 2
};

/// Stratonovich midpoint sums up to T.
LevyFunctionals levy_functionals(const SamplePath& w, double horizon);

/// sup over nodes t <= T of |zeta^{ij}(t)| and |kappa^{ij}(t)|.
LevyFunctionals levy_sup(const SamplePath& w, double horizon);

// ---------------------------------------------------------------------------
// Tube-conditioned sampling

struct TubeSample {
  SamplePath w;
  std::size_t attempts = 0;
};

/// One rejection attempt on stream `stream`: a Brownian path on `grid` kept
/// only if |w_t - h_t| < delta at every node. Generation stops at the first
/// node outside the tube.
std::optional<SamplePath> tube_attempt(const Eigen::MatrixXd& h_on_grid, double delta, const std::vector<double>& grid,
                                       std::uint64_t seed, std::uint64_t stream);

/// Rejection sampler over streams first_stream, first_stream + 1, ... Only
/// grid nodes are checked, so excursions between nodes are accepted (a bias
/// towards over-acceptance that vanishes with the mesh). Throws TubeTooNarrow
/// after max_attempts failures.
TubeSample tube_sample(const Control& h, double delta, const std::vector<double>& grid, std::uint64_t seed,
                       std::size_t max_attempts, std::uint64_t first_stream = 0);

/// h evaluated at the nodes of `grid` (dim x nodes).
Eigen::MatrixXd evaluate_on_grid(const SamplePath& h, const std::vector<double>& grid);

// ---------------------------------------------------------------------------

/// CSV with header `t,x1,...,xm` and 17 significant digits.
void write_csv(const SamplePath& path, std::ostream& out);

/// FNV-1a hash of the node values; used to assert common-random-number
/// restrictions.
std::uint64_t path_hash(const SamplePath& path);

}  // namespace reflectsim
