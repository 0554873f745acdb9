#pragma once

#include "reflectsim/geometry.hpp"
#include "reflectsim/paths.hpp"
#include "reflectsim/rsde.hpp"
#include "reflectsim/stats.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace reflectsim {

/// A reflected SDE started at x0 and observed on [0, horizon].
struct Problem {
  Domain domain;
  Coefficients coeffs;
  Vector x0;
  double horizon = 1.0;
};

struct RunContext {
  std::uint64_t seed = 1;
  int workers = 1;
};

/// Tags passed to derive_seed; each experiment family draws from its own
/// seed so that two experiments sharing a tag share their paths.
namespace seed_tags {
inline constexpr std::uint64_t brownian = 1;
inline constexpr std::uint64_t tube = 2;
inline constexpr std::uint64_t pilot = 3;
inline constexpr std::uint64_t small_ball = 4;
inline constexpr std::uint64_t levy = 5;
inline constexpr std::uint64_t reverse = 6;
inline constexpr std::uint64_t controls = 7;
}  // namespace seed_tags

/// Declarative description of a piecewise-linear control.
struct ControlSpec {
  enum class Kind { zero, linear, sine };
  Kind kind = Kind::zero;
  Vector slope;  // linear: h_t = slope * t (broadcast when of size 1)
  int axis = 0;  // sine: h_t = amplitude sin(2 pi frequency t) e_axis
  double amplitude = 1.0;
  double frequency = 1.0;
};

Control build_control(const ControlSpec& spec, int dim, const std::vector<double>& grid);
std::string to_string(const ControlSpec& spec);

/// Level-`fine_level` Brownian driver of path `index` in the common-random-number family of `seed`.
SamplePath crn_driver(const Problem& problem, int fine_level, std::uint64_t seed, std::size_t index);

// ---------------------------------------------------------------------------

struct WzParams {
  std::vector<int> levels{4, 5, 6, 7, 8, 9};
  std::size_t paths = 2000;
  /// Reference level for X; -1 means max level + 2.
  int fine_level = -1;
  int substeps = 4;
  CellScheme cell_scheme = CellScheme::euler;
  double theta = 0.2;
  /// Re-runs every level with twice the substeps on the same paths.
  bool substep_replicate = false;
};

/// Common-random-number estimates of E sup|X - X^n| per level and of the
/// theta-Holder distance at the level nodes.
ExperimentReport wz_convergence(const Problem& problem, const WzParams& params, const RunContext& ctx);

struct SkeletonParams {
  std::vector<int> levels{4, 5, 6, 7, 8, 9};
  std::size_t paths = 2000;
  int fine_level = -1;
  double theta = 0.5;
  ControlSpec control{ControlSpec::Kind::sine, {}, 0, 1.0, 1.0};
};

/// E sup|Y^n - Z(h)|^2 per level and the node statistic sup_k E|Y^n_{t_k} - Z_{t_k}|^2
/// against Delta^{theta/2} + (control modulus)^{1/2}.
ExperimentReport skeleton_convergence(const Problem& problem, const SkeletonParams& params, const RunContext& ctx);

/// Rejection-sampling budget shared by the tube-conditioned experiments.
struct TubeBudget {
  std::size_t target_accepted = 2000;
  std::size_t max_attempts = 20'000'000;
  std::size_t pilot_attempts = 20'000;
  std::size_t batch = 4096;
};

struct ApproxParams {
  ControlSpec control;
  double epsilon = 0.3;
  std::vector<double> deltas{0.8, 0.6, 0.5};
  int level = 8;
  TubeBudget budget;
};

/// P(||X - Y|| + ||K - l|| < eps | ||w - h|| < delta) and the regulator
/// channel P(||K - l|| < eps | tube) per delta.
ExperimentReport approx_continuity(const Problem& problem, const ApproxParams& params, const RunContext& ctx);

struct MomentParams {
  std::vector<std::pair<double, double>> windows{
      {0.0, 1.0 / 64}, {0.0, 1.0 / 32}, {0.0, 1.0 / 16}, {0.0, 1.0 / 8}, {0.0, 1.0 / 4}};
  int p = 1;
  std::size_t paths = 10000;
  /// The grid has 2^level cells on [0, largest window end].
  int level = 12;
};

/// Fitted exponents of E(||X||_{[s,t]})^{2p} and E(|K|_{[s,t]})^{2p} against t - s.
ExperimentReport moment_scaling(const Problem& problem, const MomentParams& params, const RunContext& ctx);

struct ExpTailParams {
  std::size_t paths = 100000;
  int level = 10;
  /// Survival range of the fit.
  double tail_upper = 0.1;
  double tail_lower = 1e-3;
  std::size_t fit_points = 20;
};

/// Slope of -log P(|K|_T > k) against k^2 over the upper tail.
ExperimentReport exp_tail(const Problem& problem, const ExpTailParams& params, const RunContext& ctx);

struct SmallBallParams {
  double horizon = 1.0;
  int dim = 1;
  std::vector<double> deltas{1.0, 0.8, 0.7, 0.6, 0.5};
  std::size_t paths = 100000;
  int level = 10;
  int levy_dim = 2;
  double levy_horizon = 0.5;
  std::vector<double> levy_deltas{0.8, 0.5};
  std::vector<double> m_values{1.0, 2.0, 4.0};
  double epsilon = 0.1;
  double alpha = 0.5;
  int levy_level = 10;
  TubeBudget budget;
};

/// Small-ball regression of log P(||w|| < delta) on 1/delta^2, and the
/// conditional exceedance proportions of the iterated integrals on the tube.
ExperimentReport smallball_and_levy(const SmallBallParams& params, const RunContext& ctx);

struct RegulatorParams {
  std::vector<double> deltas{0.8, 0.5};
  double c3 = 0.2;
  double epsilon = 0.5;
  int level = 10;
  TubeBudget budget;
};

/// P(|K|_T > c3 | tube) and P(|K|_T >= eps delta^{-1/2} | tube) per delta.
ExperimentReport regulator_conditional(const Problem& problem, const RegulatorParams& params, const RunContext& ctx);

struct HolderParams {
  double theta = 0.2;
  std::vector<int> levels{4, 5, 6, 7, 8};
  std::size_t paths = 2000;
  int substeps = 4;
  CellScheme cell_scheme = CellScheme::euler;
  bool include_shifted = true;
};

/// Per-level distribution of the theta-Holder norm of X^n (and Y^n with h = 0).
ExperimentReport holder_tightness(const Problem& problem, const HolderParams& params, const RunContext& ctx);

struct SupportParams {
  int level = 9;
  int fine_level = -1;
  int substeps = 4;
  CellScheme cell_scheme = CellScheme::euler;
  std::size_t paths = 2000;
  ControlSpec reverse_control{ControlSpec::Kind::linear, Vector::Constant(1, 0.5), 0, 1.0, 1.0};
  double epsilon = 0.5;
  std::size_t reverse_paths = 100000;
  int reverse_level = 8;
};

/// Forward: ||X(w) - Z(h^n(w))|| on the CRN paths of wz_convergence.
/// Reverse: hit count of ||X - Z(h)|| < eps among unconditioned paths.
ExperimentReport support_inclusions(const Problem& problem, const SupportParams& params, const RunContext& ctx);

}  // namespace reflectsim
