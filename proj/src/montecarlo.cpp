#include "reflectsim/montecarlo.hpp"

#include "reflectsim/parallel.hpp"
#include "reflectsim/random.hpp"
#include "reflectsim/skorohod.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace reflectsim {

using nlohmann::json;

namespace {

constexpr double kTiny = 1e-14;

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string at_level(const std::string& label, int n) { return label + "[n=" + std::to_string(n) + "]"; }
std::string at_delta(const std::string& label, double delta) { return label + "[delta=" + fmt(delta) + "]"; }

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json describe(const Problem& p) {
  return {{"domain", to_string(p.domain.kind())},
          {"dim", p.domain.dim()},
          {"driver_dim", p.coeffs.d1},
          {"x0", to_std(p.x0)},
          {"horizon", p.horizon}};
}

void require_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw Error("at least one level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || levels[i] > 20) throw Error("levels must lie in [1, 20]");
    if (i > 0 && levels[i] <= levels[i - 1]) throw Error("levels must be strictly increasing");
  }
}

void require_paths(std::size_t paths) {
  if (paths < 2) throw Error("at least two paths are required");
}

void require_decreasing(const std::vector<double>& deltas) {
  if (deltas.empty()) throw Error("at least one delta is required");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw Error("deltas must be positive");
    if (i > 0 && deltas[i] >= deltas[i - 1]) throw Error("deltas must be strictly decreasing");
  }
}

int resolve_fine(int fine, int max_level) {
  const int out = fine < 0 ? max_level + 2 : fine;
  if (out < max_level) throw Error("fine level must be at least the largest level");
  if (out > 22) throw Error("fine level above 22 is not supported");
  return out;
}

double cell(double horizon, int level) { return horizon / static_cast<double>(std::size_t{1} << level); }

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

/// Proportions indexed by decreasing delta must not decrease, up to CI overlap.
bool nondecreasing_within_ci(const std::vector<ProportionEstimate>& p) {
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].p < p[i - 1].p && !intervals_overlap(p[i].lower, p[i].upper, p[i - 1].lower, p[i - 1].upper)) return false;
  }
  return true;
}

bool nonincreasing_within_ci(const std::vector<ProportionEstimate>& p) {
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].p > p[i - 1].p && !intervals_overlap(p[i].lower, p[i].upper, p[i - 1].lower, p[i - 1].upper)) return false;
  }
  return true;
}

LinearFit log2_fit(const std::vector<double>& scale, const std::vector<double>& estimate) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (estimate[i] > 0.0) {
      x.push_back(std::log2(scale[i]));
      y.push_back(std::log2(estimate[i]));
    }
  }
  return linear_fit(x, y);
}

json budget_json(const TubeBudget& b) {
  return {{"target_accepted", b.target_accepted},
          {"max_attempts", b.max_attempts},
          {"pilot_attempts", b.pilot_attempts},
          {"batch", b.batch}};
}

template <typename R>
struct TubeRun {
  std::vector<R> accepted;
  std::size_t attempts = 0;
  double pilot_acceptance = 0.0;
};

/// Rejection sampling of `target_accepted` tube paths. Attempts are made in
/// fixed batches and accepted in stream order, so the sample does not
/// depend on the worker count.
template <typename R, typename Fn>
TubeRun<R> run_tube(const Eigen::MatrixXd& h_on_grid, double delta, const std::vector<double>& grid,
                    std::uint64_t seed, std::uint64_t pilot_seed, const TubeBudget& budget, int workers, Fn&& fn) {
  if (budget.target_accepted == 0 || budget.batch == 0) throw Error("tube budget must be positive");
  TubeRun<R> run;
  if (budget.pilot_attempts > 0) {
    const auto pilot = parallel_map(budget.pilot_attempts, workers, [&](std::size_t i) -> char {
      return tube_attempt(h_on_grid, delta, grid, pilot_seed, i).has_value() ? 1 : 0;
    });
    std::size_t hits = 0;
    for (char c : pilot) hits += static_cast<std::size_t>(c);
    run.pilot_acceptance = static_cast<double>(hits) / static_cast<double>(budget.pilot_attempts);
    const double needed = hits == 0 ? std::numeric_limits<double>::infinity()
                                    : static_cast<double>(budget.target_accepted) / run.pilot_acceptance;
    if (needed > static_cast<double>(budget.max_attempts)) {
      throw TubeTooNarrow("tube of radius " + fmt(delta) + ": pilot acceptance " + fmt(run.pilot_acceptance) +
                              " cannot reach " + std::to_string(budget.target_accepted) + " paths in " +
                              std::to_string(budget.max_attempts) + " attempts",
                          run.pilot_acceptance);
    }
  }
  std::size_t next = 0;
  while (run.accepted.size() < budget.target_accepted) {
    if (next >= budget.max_attempts) {
      throw TubeTooNarrow("tube of radius " + fmt(delta) + " exhausted " + std::to_string(budget.max_attempts) +
                              " attempts",
                          run.pilot_acceptance);
    }
    const std::size_t count = std::min(budget.batch, budget.max_attempts - next);
    auto results = parallel_map(count, workers, [&](std::size_t i) -> std::optional<R> {
      auto w = tube_attempt(h_on_grid, delta, grid, seed, next + i);
      if (!w) return std::nullopt;
      return fn(*w);
    });
    for (std::size_t i = 0; i < results.size() && run.accepted.size() < budget.target_accepted; ++i) {
      if (results[i]) {
        run.accepted.push_back(std::move(*results[i]));
        run.attempts = next + i + 1;
      }
    }
    next += count;
  }
  return run;
}

std::uint64_t indexed_seed(std::uint64_t seed, std::uint64_t tag, std::size_t index) {
  return derive_seed(derive_seed(seed, tag), index);
}

bool one_dim_half_line_constant(const Problem& p, double& sigma) {
  if (p.domain.dim() != 1 || p.domain.kind() != DomainKind::half_space || p.coeffs.d1 != 1 || !p.coeffs.constant_sigma)
    return false;
  Vector probe = p.x0;
  if (p.coeffs.drift(probe).norm() != 0.0) return false;
  probe(0) += 1.0;
  if (p.coeffs.drift(probe).norm() != 0.0) return false;
  sigma = p.coeffs.sigma(p.x0)(0, 0);
  return true;
}

}  // namespace

Control build_control(const ControlSpec& spec, int dim, const std::vector<double>& grid) {
  switch (spec.kind) {
    case ControlSpec::Kind::zero: return zero_control(dim, grid);
    case ControlSpec::Kind::linear: {
      if (spec.slope.size() == 1) return linear_control(Vector::Constant(dim, spec.slope(0)), grid);
      if (spec.slope.size() != dim) throw Error("linear control slope has the wrong dimension");
      return linear_control(spec.slope, grid);
    }
    case ControlSpec::Kind::sine: return sine_control(dim, spec.axis, spec.amplitude, spec.frequency, grid);
  }
  throw Error("unknown control kind");
}

std::string to_string(const ControlSpec& spec) {
  switch (spec.kind) {
    case ControlSpec::Kind::zero: return "zero";
    case ControlSpec::Kind::linear: {
      std::string s = "linear:";
      for (Eigen::Index i = 0; i < spec.slope.size(); ++i) s += (i ? "," : "") + fmt(spec.slope(i));
      return s;
    }
    case ControlSpec::Kind::sine:
      return "sine:axis=" + std::to_string(spec.axis) + ",amplitude=" + fmt(spec.amplitude) +
             ",frequency=" + fmt(spec.frequency);
  }
  return "zero";
}

SamplePath crn_driver(const Problem& problem, int fine_level, std::uint64_t seed, std::size_t index) {
  return sample_brownian(problem.coeffs.d1, dyadic_grid(problem.horizon, fine_level),
                         derive_seed(seed, seed_tags::brownian), index);
}

// ---------------------------------------------------------------------------

ExperimentReport wz_convergence(const Problem& pb, const WzParams& prm, const RunContext& ctx) {
  require_levels(prm.levels);
  require_paths(prm.paths);
  const int fine = resolve_fine(prm.fine_level, prm.levels.back());
  const double T = pb.horizon;
  const std::size_t L = prm.levels.size();
  const std::size_t per_level = prm.substep_replicate ? 3 : 2;

  const auto rows = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    std::vector<double> r(L * per_level);
    const SamplePath w = crn_driver(pb, fine, ctx.seed, i);
    const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    for (std::size_t l = 0; l < L; ++l) {
      const int n = prm.levels[l];
      const auto Xn = wong_zakai(pb.domain, pb.coeffs, w, n, prm.substeps, T, pb.x0, prm.cell_scheme);
      r[l * per_level] = sup_distance(X.x, Xn.x, T);
      const SamplePath a = restrict_to_level(X.x, n, T);
      const SamplePath b = restrict_to_level(Xn.x, n, T);
      r[l * per_level + 1] = holder_norm(SamplePath(a.times, a.values - b.values), T, prm.theta).value;
      if (prm.substep_replicate) {
        const auto Xn2 = wong_zakai(pb.domain, pb.coeffs, w, n, 2 * prm.substeps, T, pb.x0, prm.cell_scheme);
        r[l * per_level + 2] = sup_distance(X.x, Xn2.x, T);
      }
    }
    return r;
  });

  ExperimentReport rep;
  rep.name = "wz_convergence";
  rep.parameters = {{"problem", describe(pb)},     {"levels", prm.levels},
                    {"paths", prm.paths},          {"fine_level", fine},
                    {"substeps", prm.substeps},    {"cell_scheme", to_string(prm.cell_scheme)},
                    {"theta", prm.theta},
                    {"substep_replicate", prm.substep_replicate}};
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", derive_seed(ctx.seed, seed_tags::brownian)},
               {"streams", "path i uses stream i; coarse drivers are restrictions of the fine path"}};
  rep.table.columns = {"level", "delta", "sup_error", "sup_ci", "holder_error", "holder_ci"};
  if (prm.substep_replicate) rep.table.columns.insert(rep.table.columns.end(), {"sup_error_2x", "sup_ci_2x"});

  std::vector<double> scale, sup_means;
  std::vector<MeanEstimate> sup, sup2;
  for (std::size_t l = 0; l < L; ++l) {
    const int n = prm.levels[l];
    const auto s = mean_ci(column(rows, l * per_level));
    const auto h = mean_ci(column(rows, l * per_level + 1));
    rep.add_estimate(at_level("sup_error", n), s);
    rep.add_estimate(at_level("holder_error", n), h);
    std::vector<double> row{double(n), cell(T, n), s.mean, s.halfwidth, h.mean, h.halfwidth};
    if (prm.substep_replicate) {
      const auto s2 = mean_ci(column(rows, l * per_level + 2));
      rep.add_estimate(at_level("sup_error_2x_substeps", n), s2);
      row.insert(row.end(), {s2.mean, s2.halfwidth});
      sup2.push_back(s2);
    }
    rep.table.rows.push_back(std::move(row));
    scale.push_back(cell(T, n));
    sup_means.push_back(s.mean);
    sup.push_back(s);
  }

  if (*std::max_element(sup_means.begin(), sup_means.end()) <= kTiny) {
    rep.verdict = Verdict::degenerate;
    return rep;
  }
  rep.add_check("sup_error_strictly_decreasing", strictly_decreasing(sup_means), Basis::paper);
  if (L >= 2) {
    rep.rate_fit = log2_fit(scale, sup_means);
    rep.add_check("rate_slope_at_least_0.25", rep.rate_fit->slope >= 0.25, Basis::policy,
                  "slope " + fmt(rep.rate_fit->slope));
    rep.add_check("rate_r2_at_least_0.9", rep.rate_fit->r2 >= 0.9, Basis::policy, "r2 " + fmt(rep.rate_fit->r2));
  }
  if (prm.substep_replicate) {
    bool ok = true;
    for (std::size_t l = 0; l < L; ++l) ok = ok && std::abs(sup2[l].mean - sup[l].mean) < sup[l].halfwidth;
    rep.add_check("substep_doubling_within_ci", ok, Basis::policy);
  }
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport skeleton_convergence(const Problem& pb, const SkeletonParams& prm, const RunContext& ctx) {
  require_levels(prm.levels);
  require_paths(prm.paths);
  const int fine = resolve_fine(prm.fine_level, prm.levels.back());
  const double T = pb.horizon;
  const std::size_t L = prm.levels.size();
  const auto grid = dyadic_grid(T, fine);
  const Control h = build_control(prm.control, pb.coeffs.d1, grid);
  const auto Z = skeleton(pb.domain, pb.coeffs, h, 1, pb.x0);
  std::vector<std::vector<std::size_t>> nodes(L);
  std::size_t width = 0;
  for (std::size_t l = 0; l < L; ++l) {
    nodes[l] = dyadic_indices(grid, prm.levels[l], T);
    width += 1 + nodes[l].size();
  }

  // per path: for each level, sup |Y - Z|^2 followed by |Y - Z|^2 at the level nodes
  const auto rows = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    std::vector<double> r;
    r.reserve(width);
    const SamplePath w = crn_driver(pb, fine, ctx.seed, i);
    for (std::size_t l = 0; l < L; ++l) {
      const auto Y = shifted_driver(pb.domain, pb.coeffs, w, prm.levels[l], h, T, pb.x0);
      const Eigen::MatrixXd diff = Y.x.values - Z.x.values;
      r.push_back(diff.colwise().squaredNorm().maxCoeff());
      for (std::size_t k : nodes[l]) r.push_back(diff.col(static_cast<Eigen::Index>(k)).squaredNorm());
    }
    return r;
  });

  ExperimentReport rep;
  rep.name = "skeleton_convergence";
  rep.parameters = {{"problem", describe(pb)}, {"levels", prm.levels}, {"paths", prm.paths},
                    {"fine_level", fine},      {"theta", prm.theta},   {"control", to_string(prm.control)}};
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", derive_seed(ctx.seed, seed_tags::brownian)},
               {"streams", "path i uses stream i; all levels share the fine path"}};
  rep.table.columns = {"level", "delta", "sup_sq_error", "sup_sq_ci", "node_stat", "control_modulus", "bound",
                       "constant"};

  std::vector<double> scale, sup_means, constants;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const int n = prm.levels[l];
    const auto s = mean_ci(column(rows, offset));
    double node_stat = 0.0;
    for (std::size_t k = 0; k < nodes[l].size(); ++k) {
      node_stat = std::max(node_stat, mean_ci(column(rows, offset + 1 + k)).mean);
    }
    offset += 1 + nodes[l].size();
    const double dt = cell(T, n);
    const double modulus = control_modulus(h, n, T);
    const double bound = std::pow(dt, prm.theta / 2.0) + std::sqrt(modulus);
    const double constant = node_stat / bound;
    rep.add_estimate(at_level("sup_sq_error", n), s);
    rep.add_estimate(at_level("node_stat", n), node_stat, prm.paths);
    rep.add_estimate(at_level("control_modulus", n), modulus);
    rep.add_estimate(at_level("constant", n), constant);
    rep.table.rows.push_back({double(n), dt, s.mean, s.halfwidth, node_stat, modulus, bound, constant});
    scale.push_back(dt);
    sup_means.push_back(s.mean);
    constants.push_back(constant);
  }

  if (sup_means.front() <= kTiny) {
    rep.verdict = Verdict::degenerate;
    return rep;
  }
  if (L >= 2) rep.rate_fit = log2_fit(scale, sup_means);
  const double ratio = sup_means.back() / sup_means.front();
  rep.add_estimate("last_to_first_ratio", ratio);
  rep.add_check("last_level_at_most_half_first", ratio <= 0.5, Basis::policy, "ratio " + fmt(ratio));
  const double worst = *std::max_element(constants.begin(), constants.end());
  rep.add_check("node_constant_stable_x2", worst <= 2.0 * constants.front(), Basis::policy,
                "max constant " + fmt(worst) + ", first " + fmt(constants.front()));
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport approx_continuity(const Problem& pb, const ApproxParams& prm, const RunContext& ctx) {
  require_decreasing(prm.deltas);
  if (!(prm.epsilon > 0.0)) throw Error("epsilon must be positive");
  const double T = pb.horizon;
  const auto grid = dyadic_grid(T, prm.level);
  const Control h = build_control(prm.control, pb.coeffs.d1, grid);
  const auto Y = skeleton(pb.domain, pb.coeffs, h, 1, pb.x0);

  ExperimentReport rep;
  rep.name = "approx_continuity";
  rep.parameters = {{"problem", describe(pb)},  {"control", to_string(prm.control)}, {"epsilon", prm.epsilon},
                    {"deltas", prm.deltas},     {"level", prm.level},                {"budget", budget_json(prm.budget)}};
  rep.seeds = {{"seed", ctx.seed},
               {"tube_seeds", "derive_seed(derive_seed(seed, tube), delta index), attempt j uses stream j"},
               {"pilot_seeds", "derive_seed(derive_seed(seed, pilot), delta index)"}};
  rep.table.columns = {"delta",   "accepted", "attempts", "pilot_acceptance", "joint",
                       "joint_lo", "joint_hi", "regulator", "regulator_lo",    "regulator_hi"};

  std::vector<ProportionEstimate> joint, regulator;
  for (std::size_t j = 0; j < prm.deltas.size(); ++j) {
    const double delta = prm.deltas[j];
    auto run = run_tube<std::pair<double, double>>(
        h.path.values, delta, grid, indexed_seed(ctx.seed, seed_tags::tube, j),
        indexed_seed(ctx.seed, seed_tags::pilot, j), prm.budget, ctx.workers, [&](const SamplePath& w) {
          const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
          return std::make_pair(sup_distance(X.x, Y.x, T), sup_distance(X.k, Y.k, T));
        });
    std::size_t hits = 0, khits = 0;
    for (const auto& [dx, dk] : run.accepted) {
      if (dx + dk < prm.epsilon) ++hits;
      if (dk < prm.epsilon) ++khits;
    }
    const auto pj = wilson(hits, run.accepted.size());
    const auto pk = wilson(khits, run.accepted.size());
    joint.push_back(pj);
    regulator.push_back(pk);
    rep.add_estimate(at_delta("joint", delta), pj);
    rep.add_estimate(at_delta("regulator", delta), pk);
    rep.add_estimate(at_delta("pilot_acceptance", delta), run.pilot_acceptance, prm.budget.pilot_attempts);
    rep.table.rows.push_back({delta, double(run.accepted.size()), double(run.attempts), run.pilot_acceptance, pj.p,
                              pj.lower, pj.upper, pk.p, pk.lower, pk.upper});
  }
  rep.add_check("joint_nondecreasing_as_delta_shrinks", nondecreasing_within_ci(joint), Basis::paper);
  rep.add_check("joint_at_least_0.9_at_smallest_delta", joint.back().p >= 0.9, Basis::policy,
                "proportion " + fmt(joint.back().p));
  rep.add_check("regulator_nondecreasing_as_delta_shrinks", nondecreasing_within_ci(regulator), Basis::paper);
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport moment_scaling(const Problem& pb, const MomentParams& prm, const RunContext& ctx) {
  require_paths(prm.paths);
  if (prm.windows.size() < 2) throw Error("at least two windows are required");
  if (prm.p < 1) throw Error("moment order p must be at least 1");
  double t_max = 0.0;
  for (const auto& [s, t] : prm.windows) {
    if (!(s >= 0.0 && t > s)) throw Error("windows must satisfy 0 <= s < t");
    t_max = std::max(t_max, t);
  }
  const auto grid = dyadic_grid(t_max, prm.level);
  const auto cells = static_cast<double>(grid.size() - 1);
  auto node = [&](double t) {
    const auto k = static_cast<std::size_t>(std::llround(t / t_max * cells));
    if (std::abs(grid[k] - t) > 1e-9 * t_max) throw GridMismatch("window endpoint " + fmt(t) + " is not a grid node");
    return k;
  };
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& [s, t] : prm.windows) idx.emplace_back(node(s), node(t));
  const std::size_t W = idx.size();
  const double power = 2.0 * prm.p;
  const auto bseed = derive_seed(ctx.seed, seed_tags::brownian);

  const auto rows = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    std::vector<double> r(2 * W);
    const auto w = sample_brownian(pb.coeffs.d1, grid, bseed, i);
    const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    for (std::size_t k = 0; k < W; ++k) {
      const auto [a, b] = idx[k];
      r[2 * k] = std::pow(oscillation(X.x, a, b), power);
      r[2 * k + 1] = std::pow(X.tv[b] - X.tv[a], power);
    }
    return r;
  });

  ExperimentReport rep;
  rep.name = "moment_scaling";
  json windows = json::array();
  for (const auto& [s, t] : prm.windows) windows.push_back({s, t});
  rep.parameters = {{"problem", describe(pb)}, {"windows", windows}, {"p", prm.p}, {"paths", prm.paths},
                    {"level", prm.level}};
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", bseed},
               {"streams", "path i uses stream i on the grid of [0, largest window end]"}};
  rep.table.columns = {"s", "t", "x_moment", "x_ci", "k_moment", "k_ci"};
  std::vector<double> spans, xm, km;
  for (std::size_t k = 0; k < W; ++k) {
    const auto [s, t] = prm.windows[k];
    const auto mx = mean_ci(column(rows, 2 * k));
    const auto mk = mean_ci(column(rows, 2 * k + 1));
    rep.add_estimate("x_moment[" + fmt(s) + "," + fmt(t) + "]", mx);
    rep.add_estimate("k_moment[" + fmt(s) + "," + fmt(t) + "]", mk);
    rep.table.rows.push_back({s, t, mx.mean, mx.halfwidth, mk.mean, mk.halfwidth});
    spans.push_back(t - s);
    xm.push_back(mx.mean);
    km.push_back(mk.mean);
  }
  const double p = prm.p;
  auto all_zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x <= kTiny; });
  };
  if (all_zero(xm)) {
    rep.verdict = Verdict::degenerate;
    return rep;
  }
  rep.rate_fit = log2_fit(spans, xm);
  const double ex = rep.rate_fit->slope;
  rep.add_estimate("x_exponent", ex);
  rep.add_check("x_exponent_at_least_0.8p", ex >= 0.8 * p, Basis::paper, "exponent " + fmt(ex));
  rep.add_check("x_exponent_at_most_1.2p", ex <= 1.2 * p, Basis::policy, "exponent " + fmt(ex));
  if (std::all_of(km.begin(), km.end(), [](double x) { return x > 0.0; })) {
    const auto kf = log2_fit(spans, km);
    rep.add_estimate("k_exponent", kf.slope);
    rep.add_estimate("k_exponent_r2", kf.r2);
    rep.add_check("k_exponent_at_least_0.8p", kf.slope >= 0.8 * p, Basis::paper, "exponent " + fmt(kf.slope));
    rep.add_check("k_exponent_at_most_1.2p", kf.slope <= 1.2 * p, Basis::policy, "exponent " + fmt(kf.slope));
  } else {
    rep.add_estimate("k_windows_without_reflection",
                     double(std::count_if(km.begin(), km.end(), [](double x) { return x <= 0.0; })));
  }
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_tail(const Problem& pb, const ExpTailParams& prm, const RunContext& ctx) {
  require_paths(prm.paths);
  if (!(prm.tail_lower > 0.0 && prm.tail_lower < prm.tail_upper && prm.tail_upper < 1.0))
    throw Error("tail range must satisfy 0 < tail_lower < tail_upper < 1");
  if (prm.fit_points < 3) throw Error("at least three fit points are required");
  const double T = pb.horizon;
  const auto grid = dyadic_grid(T, prm.level);
  const auto bseed = derive_seed(ctx.seed, seed_tags::brownian);
  auto values = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    const auto w = sample_brownian(pb.coeffs.d1, grid, bseed, i);
    return euler_reflected(pb.domain, pb.coeffs, w, pb.x0).tv.back();
  });

  ExperimentReport rep;
  rep.name = "exp_tail";
  rep.parameters = {{"problem", describe(pb)},        {"paths", prm.paths},           {"level", prm.level},
                    {"tail_upper", prm.tail_upper},   {"tail_lower", prm.tail_lower}, {"fit_points", prm.fit_points}};
  rep.seeds = {{"seed", ctx.seed}, {"brownian_seed", bseed}, {"streams", "path i uses stream i"}};
  rep.table.columns = {"k", "k_squared", "survival", "minus_log_survival"};

  const auto m = mean_ci(values);
  rep.add_estimate("regulator_mean", m);
  std::sort(values.begin(), values.end());
  const std::size_t N = values.size();
  if (values.back() - values.front() <= 1e-12) {
    rep.verdict = Verdict::degenerate;
    return rep;
  }
  std::vector<double> x, y;
  double last_k = -1.0;
  for (std::size_t j = 0; j < prm.fit_points; ++j) {
    const double target =
        prm.tail_upper * std::pow(prm.tail_lower / prm.tail_upper, double(j) / double(prm.fit_points - 1));
    const auto r = static_cast<std::size_t>(std::ceil(target * double(N)));
    if (r == 0 || r >= N) continue;
    const double k = values[N - r - 1];
    if (k <= last_k || k <= 0.0) continue;
    const auto above = static_cast<std::size_t>(values.end() - std::upper_bound(values.begin(), values.end(), k));
    if (above == 0) continue;
    last_k = k;
    const double surv = double(above) / double(N);
    x.push_back(k * k);
    y.push_back(-std::log(surv));
    rep.table.rows.push_back({k, k * k, surv, -std::log(surv)});
  }
  if (x.size() < 3) {
    rep.add_check("enough_tail_points", false, Basis::policy, "only " + std::to_string(x.size()) + " distinct points");
    rep.settle();
    return rep;
  }
  rep.rate_fit = linear_fit(x, y);
  const double slope = rep.rate_fit->slope;
  const double half = 1.96 * rep.rate_fit->slope_se;
  rep.add_estimate("quadratic_coefficient", slope);
  rep.estimates.back().halfwidth = half;
  rep.estimates.back().samples = N;
  rep.add_check("quadratic_coefficient_positive_ci", slope - half > 0.0, Basis::paper,
                "coefficient " + fmt(slope) + " +- " + fmt(half));
  double sigma = 0.0;
  if (one_dim_half_line_constant(pb, sigma) && std::abs(contains(pb.domain, pb.x0).signed_distance) <= 1e-12 &&
      sigma != 0.0) {
    const double oracle = 1.0 / (2.0 * sigma * sigma * T);
    rep.add_estimate("oracle_coefficient", oracle);
    const double ratio = slope / oracle;
    rep.add_check("within_x2_of_oracle", ratio >= 0.5 && ratio <= 2.0, Basis::policy, "ratio " + fmt(ratio));
  }
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport smallball_and_levy(const SmallBallParams& prm, const RunContext& ctx) {
  require_decreasing(prm.deltas);
  require_decreasing(prm.levy_deltas);
  require_paths(prm.paths);
  if (prm.dim < 1 || prm.dim > kMaxDim || prm.levy_dim < 2 || prm.levy_dim > kMaxDim)
    throw Error("small-ball dimension must lie in [1, 8] and the iterated-integral dimension in [2, 8]");
  for (std::size_t i = 1; i < prm.m_values.size(); ++i)
    if (!(prm.m_values[i] > prm.m_values[i - 1])) throw Error("M values must be strictly increasing");
  if (prm.m_values.empty() || !(prm.m_values.front() > 0.0)) throw Error("M values must be positive");

  ExperimentReport rep;
  rep.name = "smallball_and_levy";
  rep.parameters = {{"horizon", prm.horizon},
                    {"dim", prm.dim},
                    {"deltas", prm.deltas},
                    {"paths", prm.paths},
                    {"level", prm.level},
                    {"levy_dim", prm.levy_dim},
                    {"levy_horizon", prm.levy_horizon},
                    {"levy_deltas", prm.levy_deltas},
                    {"m_values", prm.m_values},
                    {"epsilon", prm.epsilon},
                    {"alpha", prm.alpha},
                    {"levy_level", prm.levy_level},
                    {"budget", budget_json(prm.budget)}};
  rep.seeds = {{"seed", ctx.seed},
               {"small_ball_seed", derive_seed(ctx.seed, seed_tags::small_ball)},
               {"levy_seeds", "derive_seed(derive_seed(seed, levy), delta index)"},
               {"pilot_seeds", "derive_seed(derive_seed(seed, pilot), 100 + delta index)"}};
  // channel: 0 small ball, 1 exceedance of M delta, 2 exceedance of eps delta^alpha
  rep.table.columns = {"channel", "delta", "m", "proportion", "lower", "upper", "samples"};

  // small ball
  const auto grid = dyadic_grid(prm.horizon, prm.level);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(prm.dim, static_cast<Eigen::Index>(grid.size()));
  const double widest = prm.deltas.front();
  const auto sb_seed = derive_seed(ctx.seed, seed_tags::small_ball);
  const auto sups = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    const auto w = tube_attempt(zero, widest, grid, sb_seed, i);
    return w ? sup_norm(*w, prm.horizon) : std::numeric_limits<double>::infinity();
  });
  std::vector<double> x, y;
  for (double delta : prm.deltas) {
    const auto hits = static_cast<std::size_t>(std::count_if(sups.begin(), sups.end(), [&](double s) { return s < delta; }));
    const auto p = wilson(hits, prm.paths);
    rep.add_estimate(at_delta("small_ball", delta), p);
    rep.table.rows.push_back({0.0, delta, std::nan(""), p.p, p.lower, p.upper, double(prm.paths)});
    if (hits > 0) {
      x.push_back(1.0 / (delta * delta));
      y.push_back(std::log(p.p));
    }
  }
  if (x.size() >= 3) {
    rep.rate_fit = linear_fit(x, y);
    const double slope = rep.rate_fit->slope;
    rep.add_check("small_ball_slope_negative", slope < 0.0, Basis::paper, "slope " + fmt(slope));
    rep.add_check("small_ball_r2_at_least_0.95", rep.rate_fit->r2 >= 0.95, Basis::policy,
                  "r2 " + fmt(rep.rate_fit->r2));
    double c2 = 0.0;
    if (prm.dim == 1) c2 = std::numbers::pi * std::numbers::pi / 8.0;
    if (prm.dim == 2) c2 = 2.404825557695773 * 2.404825557695773 / 2.0;
    if (c2 > 0.0) {
      const double oracle = -c2 * prm.horizon;
      rep.add_estimate("small_ball_oracle_slope", oracle);
      const double ratio = slope / oracle;
      rep.add_check("small_ball_slope_within_x1.5_of_oracle", ratio >= 1.0 / 1.5 && ratio <= 1.5, Basis::policy,
                    "ratio " + fmt(ratio));
    }
  } else {
    rep.add_check("small_ball_enough_points", false, Basis::policy,
                  "only " + std::to_string(x.size()) + " deltas with hits");
  }

  // iterated integrals on the tube
  const auto lgrid = dyadic_grid(prm.levy_horizon, prm.levy_level);
  const Eigen::MatrixXd lzero = Eigen::MatrixXd::Zero(prm.levy_dim, static_cast<Eigen::Index>(lgrid.size()));
  std::vector<double> eps_props;
  bool strict_in_m = true;
  for (std::size_t j = 0; j < prm.levy_deltas.size(); ++j) {
    const double delta = prm.levy_deltas[j];
    auto run = run_tube<double>(lzero, delta, lgrid, indexed_seed(ctx.seed, seed_tags::levy, j),
                                indexed_seed(ctx.seed, seed_tags::pilot, 100 + j), prm.budget, ctx.workers,
                                [&](const SamplePath& w) {
                                  const auto sup = levy_sup(w, prm.levy_horizon);
                                  double z = 0.0;
                                  for (int a = 0; a < prm.levy_dim; ++a)
                                    for (int b = 0; b < prm.levy_dim; ++b)
                                      if (a != b) z = std::max(z, sup.zeta(a, b));
                                  return z;
                                });
    const std::size_t n = run.accepted.size();
    rep.add_estimate(at_delta("levy_pilot_acceptance", delta), run.pilot_acceptance, prm.budget.pilot_attempts);
    const auto zm = mean_ci(run.accepted);
    rep.add_estimate(at_delta("levy_sup_over_delta_mean", delta), MeanEstimate{zm.mean / delta, zm.sd / delta,
                                                                               zm.halfwidth / delta, zm.n});
    std::vector<double> props;
    for (double M : prm.m_values) {
      const auto hits = static_cast<std::size_t>(
          std::count_if(run.accepted.begin(), run.accepted.end(), [&](double z) { return z > M * delta; }));
      const auto p = wilson(hits, n);
      props.push_back(p.p);
      rep.add_estimate(at_delta("levy_exceeds_M" + fmt(M), delta), p);
      rep.table.rows.push_back({1.0, delta, M, p.p, p.lower, p.upper, double(n)});
    }
    if (!strictly_decreasing(props)) strict_in_m = false;
    const double level = prm.epsilon * std::pow(delta, prm.alpha);
    const auto hits = static_cast<std::size_t>(
        std::count_if(run.accepted.begin(), run.accepted.end(), [&](double z) { return z > level; }));
    const auto p = wilson(hits, n);
    eps_props.push_back(p.p);
    rep.add_estimate(at_delta("levy_exceeds_eps_delta_alpha", delta), p);
    rep.table.rows.push_back({2.0, delta, std::nan(""), p.p, p.lower, p.upper, double(n)});
  }
  rep.add_check("levy_strictly_decreasing_in_M", strict_in_m, Basis::paper);
  rep.add_check("levy_eps_event_decreasing_as_delta_shrinks", strictly_decreasing(eps_props), Basis::paper);
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport regulator_conditional(const Problem& pb, const RegulatorParams& prm, const RunContext& ctx) {
  require_decreasing(prm.deltas);
  const double T = pb.horizon;
  const auto grid = dyadic_grid(T, prm.level);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(pb.coeffs.d1, static_cast<Eigen::Index>(grid.size()));
  double sigma = 0.0;
  const bool explicit_formula = one_dim_half_line_constant(pb, sigma);
  double normal = 1.0, offset = 0.0;
  if (explicit_formula) {
    const auto& hs = std::get<HalfSpace>(pb.domain.shape);
    normal = hs.normal(0);
    offset = hs.offset;
  }

  ExperimentReport rep;
  rep.name = "regulator_conditional";
  rep.parameters = {{"problem", describe(pb)}, {"deltas", prm.deltas}, {"c3", prm.c3}, {"epsilon", prm.epsilon},
                    {"level", prm.level},      {"budget", budget_json(prm.budget)}};
  rep.seeds = {{"seed", ctx.seed},
               {"tube_seeds", "derive_seed(derive_seed(seed, tube), 200 + delta index)"},
               {"pilot_seeds", "derive_seed(derive_seed(seed, pilot), 200 + delta index)"}};
  rep.table.columns = {"delta", "accepted", "attempts", "p_c3", "c3_lo", "c3_hi", "p_eps", "eps_lo", "eps_hi"};

  std::vector<ProportionEstimate> pc, pe;
  double formula_gap = 0.0;
  for (std::size_t j = 0; j < prm.deltas.size(); ++j) {
    const double delta = prm.deltas[j];
    auto run = run_tube<std::pair<double, double>>(
        zero, delta, grid, indexed_seed(ctx.seed, seed_tags::tube, 200 + j),
        indexed_seed(ctx.seed, seed_tags::pilot, 200 + j), prm.budget, ctx.workers, [&](const SamplePath& w) {
          const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
          double gap = 0.0;
          if (explicit_formula) {
            double push = 0.0;
            for (Eigen::Index i = 0; i < w.values.cols(); ++i)
              push = std::max(push, offset - normal * (pb.x0(0) + sigma * w.values(0, i)));
            gap = std::abs(push - X.tv.back());
          }
          return std::make_pair(X.tv.back(), gap);
        });
    const double level = prm.epsilon / std::sqrt(delta);
    std::size_t hc = 0, he = 0;
    for (const auto& [tv, gap] : run.accepted) {
      if (tv > prm.c3) ++hc;
      if (tv >= level) ++he;
      formula_gap = std::max(formula_gap, gap);
    }
    const auto a = wilson(hc, run.accepted.size());
    const auto b = wilson(he, run.accepted.size());
    pc.push_back(a);
    pe.push_back(b);
    rep.add_estimate(at_delta("regulator_exceeds_c3", delta), a);
    rep.add_estimate(at_delta("regulator_exceeds_eps_delta_-1/2", delta), b);
    rep.table.rows.push_back(
        {delta, double(run.accepted.size()), double(run.attempts), a.p, a.lower, a.upper, b.p, b.lower, b.upper});
  }
  rep.add_check("c3_event_nonincreasing_as_delta_shrinks", nonincreasing_within_ci(pc), Basis::paper);
  rep.add_check("eps_event_nonincreasing_as_delta_shrinks", nonincreasing_within_ci(pe), Basis::paper);
  if (explicit_formula) {
    rep.add_estimate("explicit_formula_max_gap", formula_gap);
    rep.add_check("explicit_formula_agrees", formula_gap <= 1e-9, Basis::policy, "max gap " + fmt(formula_gap));
  }
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport holder_tightness(const Problem& pb, const HolderParams& prm, const RunContext& ctx) {
  require_levels(prm.levels);
  require_paths(prm.paths);
  if (!(prm.theta > 0.0 && prm.theta < 0.5)) throw Error("theta must lie in (0, 1/2)");
  const double T = pb.horizon;
  const int top = prm.levels.back();
  const std::size_t L = prm.levels.size();
  const std::size_t per_level = prm.include_shifted ? 2 : 1;
  const Control h0 = zero_control(pb.coeffs.d1, dyadic_grid(T, top));

  const auto rows = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    std::vector<double> r(L * per_level);
    const SamplePath w = crn_driver(pb, top, ctx.seed, i);
    for (std::size_t l = 0; l < L; ++l) {
      const int n = prm.levels[l];
      const auto Xn = wong_zakai(pb.domain, pb.coeffs, w, n, prm.substeps, T, pb.x0, prm.cell_scheme);
      r[l * per_level] = holder_norm(Xn.x, T, prm.theta).value;
      if (prm.include_shifted) {
        const auto Y = shifted_driver(pb.domain, pb.coeffs, w, n, h0, T, pb.x0);
        r[l * per_level + 1] = holder_norm(Y.x, T, prm.theta).value;
      }
    }
    return r;
  });

  ExperimentReport rep;
  rep.name = "holder_tightness";
  rep.parameters = {{"problem", describe(pb)}, {"theta", prm.theta},       {"levels", prm.levels},
                    {"paths", prm.paths},      {"substeps", prm.substeps}, {"include_shifted", prm.include_shifted},
                    {"cell_scheme", to_string(prm.cell_scheme)}};
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", derive_seed(ctx.seed, seed_tags::brownian)},
               {"streams", "path i uses stream i at the largest level"}};
  rep.table.columns = {"level", "x_mean", "x_ci", "x_q90", "x_q99"};
  if (prm.include_shifted) rep.table.columns.insert(rep.table.columns.end(), {"y_mean", "y_ci", "y_q90", "y_q99"});

  std::vector<double> xmeans, ymeans;
  for (std::size_t l = 0; l < L; ++l) {
    const int n = prm.levels[l];
    const auto xs = column(rows, l * per_level);
    const auto mx = mean_ci(xs);
    rep.add_estimate(at_level("x_holder_norm", n), mx);
    std::vector<double> row{double(n), mx.mean, mx.halfwidth, quantile(xs, 0.9), quantile(xs, 0.99)};
    xmeans.push_back(mx.mean);
    if (prm.include_shifted) {
      const auto ys = column(rows, l * per_level + 1);
      const auto my = mean_ci(ys);
      rep.add_estimate(at_level("y_holder_norm", n), my);
      row.insert(row.end(), {my.mean, my.halfwidth, quantile(ys, 0.9), quantile(ys, 0.99)});
      ymeans.push_back(my.mean);
    }
    rep.table.rows.push_back(std::move(row));
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  };
  const double xs = spread(xmeans);
  rep.add_estimate("x_max_min_ratio", xs);
  if (prm.include_shifted) rep.add_estimate("y_max_min_ratio", spread(ymeans));
  if (prm.theta >= 0.25) {
    // the moment bound is only claimed below 1/4
    rep.verdict = Verdict::near_critical;
    return rep;
  }
  rep.add_check("x_level_means_within_x2", xs <= 2.0, Basis::policy, "max/min " + fmt(xs));
  if (prm.include_shifted) {
    // w - w^n vanishes as n grows, so only an upper bound is meaningful for Y^n
    const double worst = *std::max_element(ymeans.begin(), ymeans.end());
    rep.add_check("y_level_means_bounded_by_2x_first", worst <= 2.0 * ymeans.front(), Basis::policy,
                  "max " + fmt(worst) + ", first " + fmt(ymeans.front()));
  }
  rep.settle();
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport support_inclusions(const Problem& pb, const SupportParams& prm, const RunContext& ctx) {
  require_levels({prm.level});
  require_paths(prm.paths);
  if (!(prm.epsilon > 0.0)) throw Error("epsilon must be positive");
  const int fine = resolve_fine(prm.fine_level, prm.level);
  const double T = pb.horizon;

  // forward: distance, Wong-Zakai distance, identity gap
  const auto fwd = parallel_map(prm.paths, ctx.workers, [&](std::size_t i) {
    const SamplePath w = crn_driver(pb, fine, ctx.seed, i);
    const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    const auto Xn = wong_zakai(pb.domain, pb.coeffs, w, prm.level, prm.substeps, T, pb.x0, prm.cell_scheme);
    const auto Z = skeleton(pb.domain, pb.coeffs, control_from_path(w, prm.level, T), prm.substeps, pb.x0,
                                  prm.cell_scheme);
    return std::vector<double>{sup_distance(X.x, Z.x, T), sup_distance(X.x, Xn.x, T), sup_distance(Z.x, Xn.x, T)};
  });

  const auto rgrid = dyadic_grid(T, prm.reverse_level);
  const Control h = build_control(prm.reverse_control, pb.coeffs.d1, rgrid);
  const auto Zh = skeleton(pb.domain, pb.coeffs, h, 1, pb.x0);
  const auto rseed = derive_seed(ctx.seed, seed_tags::reverse);
  const auto hits = parallel_map(prm.reverse_paths, ctx.workers, [&](std::size_t i) -> char {
    const auto w = sample_brownian(pb.coeffs.d1, rgrid, rseed, i);
    const auto X = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    return sup_distance(X.x, Zh.x, T) < prm.epsilon ? 1 : 0;
  });

  ExperimentReport rep;
  rep.name = "support_inclusions";
  rep.parameters = {{"problem", describe(pb)},
                    {"level", prm.level},
                    {"fine_level", fine},
                    {"substeps", prm.substeps},
                    {"cell_scheme", to_string(prm.cell_scheme)},
                    {"paths", prm.paths},
                    {"reverse_control", to_string(prm.reverse_control)},
                    {"epsilon", prm.epsilon},
                    {"reverse_paths", prm.reverse_paths},
                    {"reverse_level", prm.reverse_level}};
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", derive_seed(ctx.seed, seed_tags::brownian)},
               {"reverse_seed", rseed},
               {"streams", "forward path i uses stream i of the wz_convergence family; reverse path i stream i"}};
  rep.table.columns = {"forward_mean", "forward_q95", "wz_mean", "identity_gap", "reverse_hits", "reverse_proportion"};

  const auto d = column(fwd, 0);
  const auto dwz = column(fwd, 1);
  const auto gaps = column(fwd, 2);
  const auto md = mean_ci(d);
  const auto mwz = mean_ci(dwz);
  const double q95 = quantile(d, 0.95);
  const double gap = *std::max_element(gaps.begin(), gaps.end());
  std::size_t count = 0;
  for (char c : hits) count += static_cast<std::size_t>(c);
  const auto p = wilson(count, prm.reverse_paths);

  rep.add_estimate("forward_distance", md);
  rep.add_estimate("forward_q95", q95, prm.paths);
  rep.add_estimate("wz_distance", mwz);
  rep.add_estimate("wz_skeleton_identity_gap", gap, prm.paths);
  rep.add_estimate("reverse_hit_count", double(count), prm.reverse_paths);
  rep.add_estimate("reverse_hit_proportion", p);
  rep.table.rows = {{md.mean, q95, mwz.mean, gap, double(count), p.p}};

  if (mwz.mean <= kTiny && md.mean <= kTiny) {
    rep.add_check("forward_distance_zero", q95 <= kTiny, Basis::paper);
  } else {
    rep.add_check("forward_q95_below_3x_wz_mean", q95 < 3.0 * mwz.mean, Basis::policy,
                  "q95 " + fmt(q95) + ", wz mean " + fmt(mwz.mean));
  }
  rep.add_check("wz_skeleton_identity", gap <= 1e-9, Basis::policy, "max gap " + fmt(gap));
  rep.add_check("reverse_hits_positive", count > 0, Basis::paper, std::to_string(count) + " hits");
  rep.settle();
  return rep;
}

}  // namespace reflectsim
