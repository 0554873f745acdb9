#pragma once

#include "reflectsim/montecarlo.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace reflectsim {

using ScalarFunction = std::function<double(const Vector&)>;

/// Endpoints Z_{t0}(x, h) of controlled skeletons started at `base`.
/// Entry 0 is the base point itself (t0 = 0, control 0).
struct ReachableCloud {
  Vector base;
  std::vector<Vector> points;
  std::vector<double> t0;
  std::vector<std::size_t> control_ids;
};

/// Random piecewise-linear controls: `segments` equal pieces on [0, T] with
/// slopes uniform in [-max_slope, max_slope]^d1, integrated with `substeps`
/// steps per piece.
struct ControlSampling {
  int segments = 3;
  double max_slope = 4.0;
  int substeps = 32;
};

/// Control i uses stream i, so the cloud for N controls is a prefix of the
/// cloud for any larger count.
ReachableCloud reachable_sample(const Domain& domain, const Coefficients& coeffs, const Vector& x,
                                std::size_t n_controls, double horizon, std::uint64_t seed, int workers = 1,
                                const ControlSampling& sampling = {});

/// CSV with columns y1..yd, t0, control_id.
void write_csv(const ReachableCloud& cloud, std::ostream& out);

/// Empirical t -> E u(X_t) on `times` (grid nodes of [0, max time] with
/// 2^level cells); passes when every consecutive pair is nondecreasing up to
/// CI overlap.
ExperimentReport submartingale_test(const Problem& problem, const ScalarFunction& u, const std::vector<double>& times,
                                    std::size_t paths, int level, const RunContext& ctx);

struct MaxPrincipleResult {
  Verdict verdict = Verdict::pass;
  double u_base = 0.0;
  double cloud_max = 0.0;
  double cloud_min = 0.0;
  double oscillation = 0.0;
  std::size_t points = 0;
};

/// When u(x) attains the cloud maximum (within tolerance), requires u to be
/// constant on the cloud (oscillation at most 2 tolerance); otherwise the
/// premise is not met.
MaxPrincipleResult max_principle_check(const ScalarFunction& u, const Vector& x, const ReachableCloud& cloud,
                                       double tolerance);

/// reachable_sample followed by max_principle_check, as a report.
ExperimentReport max_principle_report(const Problem& problem, const ScalarFunction& u, std::size_t n_controls,
                                      double tolerance, const ControlSampling& sampling, const RunContext& ctx);

}  // namespace reflectsim
