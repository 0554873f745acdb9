#include "reflectsim/maxprinciple.hpp"

#include "reflectsim/parallel.hpp"
#include "reflectsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace reflectsim {

namespace {

Vector controlled_endpoint(const Domain& domain, const Coefficients& coeffs, const Vector& x, double horizon,
                           std::uint64_t seed, std::size_t id, const ControlSampling& s, double& t0) {
  const RandomStream rng(seed, id);
  std::uint64_t u = 0;
  Eigen::MatrixXd slopes(coeffs.d1, s.segments);
  for (int k = 0; k < s.segments; ++k)
    for (int j = 0; j < coeffs.d1; ++j) slopes(j, k) = s.max_slope * (2.0 * rng.uniform(u++) - 1.0);
  t0 = horizon * (1.0 - rng.uniform(u++));

  const double piece = horizon / s.segments;
  std::vector<double> times{0.0};
  std::vector<Vector> values{Vector::Zero(coeffs.d1)};
  for (int k = 0; k < s.segments && times.back() < t0; ++k) {
    const double end = std::min(t0, piece * (k + 1));
    values.push_back(values.back() + slopes.col(k) * (end - times.back()));
    times.push_back(end);
  }
  Eigen::MatrixXd vals(coeffs.d1, static_cast<Eigen::Index>(times.size()));
  for (std::size_t i = 0; i < values.size(); ++i) vals.col(static_cast<Eigen::Index>(i)) = values[i];
  const auto Z = skeleton(domain, coeffs, make_control(SamplePath(std::move(times), std::move(vals))), s.substeps, x);
  return Z.x.values.col(Z.x.values.cols() - 1);
}

}  // namespace

ReachableCloud reachable_sample(const Domain& domain, const Coefficients& coeffs, const Vector& x,
                                std::size_t n_controls, double horizon, std::uint64_t seed, int workers,
                                const ControlSampling& sampling) {
  if (!(horizon > 0.0)) throw Error("horizon must be positive");
  if (sampling.segments < 1 || sampling.substeps < 1 || !(sampling.max_slope >= 0.0))
    throw Error("control sampling parameters must be positive");
  require_start_in_closure(domain, x);
  const auto cseed = derive_seed(seed, seed_tags::controls);
  struct Item {
    Vector y;
    double t0 = 0.0;
  };
  const auto items = parallel_map(n_controls, workers, [&](std::size_t i) {
    Item it;
    it.y = controlled_endpoint(domain, coeffs, x, horizon, cseed, i + 1, sampling, it.t0);
    return it;
  });
  ReachableCloud cloud;
  cloud.base = x;
  cloud.points.reserve(n_controls + 1);
  cloud.points.push_back(x);
  cloud.t0.push_back(0.0);
  cloud.control_ids.push_back(0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    cloud.points.push_back(items[i].y);
    cloud.t0.push_back(items[i].t0);
    cloud.control_ids.push_back(i + 1);
  }
  return cloud;
}

void write_csv(const ReachableCloud& cloud, std::ostream& out) {
  const auto d = cloud.base.size();
  for (Eigen::Index k = 1; k <= d; ++k) out << "y" << k << ",";
  out << "t0,control_id\n";
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out << cloud.points[i](k) << ",";
    out << cloud.t0[i] << "," << cloud.control_ids[i] << "\n";
  }
  out.precision(precision);
}

ExperimentReport submartingale_test(const Problem& pb, const ScalarFunction& u, const std::vector<double>& times,
                                    std::size_t paths, int level, const RunContext& ctx) {
  if (times.size() < 2) throw Error("at least two times are required");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1])) throw Error("times must be increasing and nonnegative");
  }
  if (paths < 2) throw Error("at least two paths are required");
  const double t_max = times.back();
  const auto grid = dyadic_grid(t_max, level);
  const auto cells = static_cast<double>(grid.size() - 1);
  std::vector<std::size_t> idx;
  for (double t : times) {
    const auto k = static_cast<std::size_t>(std::llround(t / t_max * cells));
    if (std::abs(grid[k] - t) > 1e-9 * t_max) throw GridMismatch("time " + std::to_string(t) + " is not a grid node");
    idx.push_back(k);
  }
  const auto bseed = derive_seed(ctx.seed, seed_tags::brownian);
  const auto rows = parallel_map(paths, ctx.workers, [&](std::size_t i) {
    const auto w = sample_brownian(pb.coeffs.d1, grid, bseed, i);
    const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    std::vector<double> r;
    r.reserve(idx.size());
    for (std::size_t k : idx) r.push_back(u(X.x.node(k)));
    return r;
  });

  ExperimentReport rep;
  rep.name = "submartingale_test";
  rep.parameters = {{"problem", {{"domain", to_string(pb.domain.kind())},
                                 {"dim", pb.domain.dim()},
                                 {"x0", std::vector<double>(pb.x0.data(), pb.x0.data() + pb.x0.size())}}},
                    {"times", times},
                    {"paths", paths},
                    {"level", level}};
  rep.seeds = {{"seed", ctx.seed}, {"brownian_seed", bseed}, {"streams", "path i uses stream i"}};
  rep.table.columns = {"t", "mean", "ci"};
  std::vector<MeanEstimate> means;
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[j]);
    const auto m = mean_ci(col);
    means.push_back(m);
    rep.add_estimate("mean_u[t=" + std::to_string(times[j]) + "]", m);
    rep.table.rows.push_back({times[j], m.mean, m.halfwidth});
  }
  bool ok = true;
  for (std::size_t j = 1; j < means.size(); ++j) {
    const auto& a = means[j - 1];
    const auto& b = means[j];
    if (b.mean < a.mean &&
        !intervals_overlap(a.mean - a.halfwidth, a.mean + a.halfwidth, b.mean - b.halfwidth, b.mean + b.halfwidth))
      ok = false;
  }
  rep.add_check("expectation_nondecreasing_within_ci", ok, Basis::paper);
  rep.settle();
  return rep;
}

MaxPrincipleResult max_principle_check(const ScalarFunction& u, const Vector& x, const ReachableCloud& cloud,
                                       double tolerance) {
  if (cloud.points.empty()) throw Error("empty reachable cloud");
  if (x.size() != cloud.base.size() || (x - cloud.base).norm() > 1e-12)
    throw Error("the cloud was sampled from a different base point");
  MaxPrincipleResult out;
  out.points = cloud.points.size();
  out.u_base = u(x);
  out.cloud_max = -std::numeric_limits<double>::infinity();
  out.cloud_min = std::numeric_limits<double>::infinity();
  for (const auto& y : cloud.points) {
    const double v = u(y);
    out.cloud_max = std::max(out.cloud_max, v);
    out.cloud_min = std::min(out.cloud_min, v);
  }
  out.oscillation = out.cloud_max - out.cloud_min;
  if (out.u_base < out.cloud_max - tolerance) {
    out.verdict = Verdict::premise_not_met;
  } else {
    out.verdict = out.oscillation <= 2.0 * tolerance ? Verdict::pass : Verdict::fail;
  }
  return out;
}

ExperimentReport max_principle_report(const Problem& pb, const ScalarFunction& u, std::size_t n_controls,
                                      double tolerance, const ControlSampling& sampling, const RunContext& ctx) {
  const auto cloud =
      reachable_sample(pb.domain, pb.coeffs, pb.x0, n_controls, pb.horizon, ctx.seed, ctx.workers, sampling);
  const auto r = max_principle_check(u, pb.x0, cloud, tolerance);
  ExperimentReport rep;
  rep.name = "max_principle_check";
  rep.parameters = {{"problem", {{"domain", to_string(pb.domain.kind())},
                                 {"dim", pb.domain.dim()},
                                 {"x0", std::vector<double>(pb.x0.data(), pb.x0.data() + pb.x0.size())},
                                 {"horizon", pb.horizon}}},
                    {"controls", n_controls},
                    {"tolerance", tolerance},
                    {"segments", sampling.segments},
                    {"max_slope", sampling.max_slope},
                    {"substeps", sampling.substeps}};
  rep.seeds = {{"seed", ctx.seed},
               {"control_seed", derive_seed(ctx.seed, seed_tags::controls)},
               {"streams", "control i uses stream i; point 0 is the base"}};
  rep.add_estimate("u_base", r.u_base);
  rep.add_estimate("cloud_max", r.cloud_max, r.points);
  rep.add_estimate("cloud_min", r.cloud_min, r.points);
  rep.add_estimate("oscillation", r.oscillation, r.points);
  rep.table.columns = {"u_base", "cloud_max", "cloud_min", "oscillation", "points"};
  rep.table.rows = {{r.u_base, r.cloud_max, r.cloud_min, r.oscillation, double(r.points)}};
  if (r.verdict != Verdict::premise_not_met) {
    rep.add_check("constant_on_reachable_set", r.verdict == Verdict::pass, Basis::paper,
                  "oscillation " + std::to_string(r.oscillation));
  }
  rep.verdict = r.verdict;
  return rep;
}

}  // namespace reflectsim
