// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--strict] [criterion ...]
//
// Without --strict the exit code ignores the criteria listed in kKnownFailures.

#include "reflectsim/cli.hpp"
#include "reflectsim/geometry.hpp"
#include "reflectsim/paths.hpp"
#include "reflectsim/skorohod.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace reflectsim;
namespace fs = std::filesystem;

namespace {

const std::set<int> kKnownFailures{8};

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit;
  std::function<Outcome()> body;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string config_path(const std::string& name) { return std::string(REFLECTSIM_CONFIG_DIR) + "/" + name + ".ini"; }

ExperimentReport run_config(const std::string& name) {
  cli::Options o;
  o.workers = 1;
  return cli::execute(cli::prepare(cli::parse_config_file(config_path(name)), o)).report;
}

double value(const ExperimentReport& r, const std::string& label) {
  const auto* e = r.find(label);
  if (!e) throw std::runtime_error(r.name + " has no estimate " + label);
  return e->value;
}

bool check(const ExperimentReport& r, const std::string& name) {
  const auto* c = r.find_check(name);
  if (!c) throw std::runtime_error(r.name + " has no check " + name);
  return c->passed;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s;
}

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// ---------------------------------------------------------------------------

Outcome half_line_oracle() {
  const auto dom = make_half_space(Vector::Constant(1, 1.0), 0.0);
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pieces(2, 400);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = pieces(gen);
    std::vector<double> times{0.0};
    for (int i = 0; i < m; ++i) times.push_back(times.back() + 0.01 + unit(gen) / m);
    Eigen::MatrixXd w(1, m + 1);
    w(0, 0) = 0.0;
    for (int i = 1; i <= m; ++i) w(0, i) = w(0, i - 1) + z(gen) * std::sqrt(times[i] - times[i - 1]);
    const double x0 = 2.0 * unit(gen);
    const auto sol = solve(dom, SamplePath(times, w), Vector::Constant(1, x0));
    double running = 0.0;
    for (int i = 0; i <= m; ++i) {
      running = std::max(running, -(x0 + w(0, i)));
      worst = std::max(worst, std::abs(sol.x.values(0, i) - (x0 + w(0, i) + running)));
    }
  }
  return {worst <= 1e-12, "max node error " + num(worst) + " over 1000 drivers (tol 1e-12)"};
}

Outcome bv_constant() {
  const Domain domains[] = {make_axis_box(v2(0, 0), v2(1, 1)), make_ball(v2(0, 0), 1.0)};
  const Vector starts[] = {v2(0.5, 0.5), v2(0, 0)};
  const char* names[] = {"square", "disc"};
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto grid = dyadic_grid(1.0, 7);
  std::string detail;
  bool ok = true;
  for (int d = 0; d < 2; ++d) {
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const double step = 0.02 + 0.3 * unit(gen);
      Eigen::MatrixXd w(2, grid.size());
      w.col(0) = Eigen::VectorXd(starts[d]);
      for (Eigen::Index i = 1; i < w.cols(); ++i) w.col(i) = w.col(i - 1) + step * Eigen::Vector2d(z(gen), z(gen));
      worst = std::max(worst, verify_bv_comparison(domains[d], SamplePath(grid, w)).worst_ratio);
    }
    ok = ok && worst <= kBvComparisonConstant + 1e-6;
    detail += std::string(d ? ", " : "") + names[d] + " worst ratio " + num(worst);
  }
  return {ok, detail + " (bound " + num(kBvComparisonConstant) + ")"};
}

ExperimentReport wz_report;
bool wz_report_ready = false;

Outcome wz_decrease() {
  wz_report = run_config("wz_convergence");
  wz_report_ready = true;
  std::vector<double> means;
  for (int n = 4; n <= 9; ++n) means.push_back(value(wz_report, "sup_error[n=" + std::to_string(n) + "]"));
  const auto& fit = *wz_report.rate_fit;
  const bool ok = strictly_decreasing(means) && fit.slope >= 0.25 && fit.r2 >= 0.9;
  return {ok, "means " + join(means) + "; slope " + num(fit.slope) + " (>= 0.25), r2 " + num(fit.r2) + " (>= 0.9)"};
}

Outcome skeleton_rate() {
  const auto r = run_config("skeleton_convergence");
  const double first = value(r, "sup_sq_error[n=4]");
  const double last = value(r, "sup_sq_error[n=9]");
  std::vector<double> constants;
  for (int n = 4; n <= 9; ++n) constants.push_back(value(r, "constant[n=" + std::to_string(n) + "]"));
  const double worst = *std::max_element(constants.begin(), constants.end());
  const bool ok = last <= 0.5 * first && worst <= 2.0 * constants.front();
  return {ok, "level 9 / level 4 = " + num(last / first) + " (<= 0.5); constants " + join(constants) +
                  " (max <= 2 x first)"};
}

Outcome approx_continuity() {
  const auto r = run_config("approx_continuity");
  std::vector<double> joint, reg;
  for (const char* d : {"0.8", "0.6", "0.5"}) {
    joint.push_back(value(r, std::string("joint[delta=") + d + "]"));
    reg.push_back(value(r, std::string("regulator[delta=") + d + "]"));
  }
  const bool ok = check(r, "joint_nondecreasing_as_delta_shrinks") && joint.back() >= 0.9 &&
                  check(r, "regulator_nondecreasing_as_delta_shrinks");
  return {ok, "joint " + join(joint) + " (nondecreasing within Wilson CI, >= 0.9 at 0.5); regulator " + join(reg)};
}

Outcome moments() {
  const auto r = run_config("moment_scaling");
  const double ex = value(r, "x_exponent");
  const double ek = value(r, "k_exponent");
  const bool ok = ex >= 0.8 && ex <= 1.2 && ek >= 0.8 && ek <= 1.2;
  return {ok, "path exponent " + num(ex) + ", regulator exponent " + num(ek) + " (in [0.8, 1.2])"};
}

Outcome tail() {
  const auto r = run_config("exp_tail");
  const double c = value(r, "quadratic_coefficient");
  const double oracle = 0.5;
  const bool ok = check(r, "quadratic_coefficient_positive_ci") && c >= oracle / 2.0 && c <= oracle * 2.0;
  return {ok, "coefficient " + num(c) + " (CI above 0, within x2 of " + num(oracle) + ")"};
}

Outcome small_ball_levy() {
  const auto r = run_config("smallball_and_levy");
  const auto& fit = *r.rate_fit;
  const double oracle = -std::numbers::pi * std::numbers::pi / 8.0;
  const double ratio = fit.slope / oracle;
  const bool ball = fit.slope < 0.0 && fit.r2 >= 0.95 && ratio >= 1.0 / 1.5 && ratio <= 1.5;
  bool in_m = true;
  std::string m_detail;
  for (const char* d : {"0.8", "0.5"}) {
    std::vector<double> p;
    for (const char* m : {"1", "2", "4"})
      p.push_back(value(r, std::string("levy_exceeds_M") + m + "[delta=" + d + "]"));
    in_m = in_m && strictly_decreasing(p);
    m_detail += std::string(" delta ") + d + ": " + join(p) + ";";
  }
  const std::vector<double> eps{value(r, "levy_exceeds_eps_delta_alpha[delta=0.8]"),
                                value(r, "levy_exceeds_eps_delta_alpha[delta=0.5]")};
  const bool in_delta = strictly_decreasing(eps);
  return {ball && in_m && in_delta,
          "small-ball slope " + num(fit.slope) + " (oracle " + num(oracle) + ", ratio " + num(ratio) + "), r2 " +
              num(fit.r2) + "; exceedances by M" + m_detail + " eps event " + join(eps)};
}

Outcome holder() {
  const auto r = run_config("holder_tightness");
  std::vector<double> means;
  for (int n = 4; n <= 8; ++n) means.push_back(value(r, "x_holder_norm[n=" + std::to_string(n) + "]"));
  const double spread =
      *std::max_element(means.begin(), means.end()) / *std::min_element(means.begin(), means.end());
  return {spread <= 2.0, "level means " + join(means) + "; max/min " + num(spread) + " (<= 2)"};
}

Outcome support() {
  const auto r = run_config("support_inclusions");
  const double q95 = value(r, "forward_q95");
  const double wz9 = wz_report_ready ? value(wz_report, "sup_error[n=9]") : value(r, "wz_distance");
  const double hits = value(r, "reverse_hit_count");
  const bool ok = q95 < 3.0 * wz9 && hits > 0.0;
  return {ok, "forward q95 " + num(q95) + " (< 3 x " + num(wz9) + "); reverse hits " + num(hits) + " of 1e5"};
}

Outcome max_principle() {
  const auto constant = run_config("max_principle_constant");
  const auto center = run_config("max_principle_norm_squared");
  const auto up = run_config("submartingale_norm_squared");
  const auto down = run_config("submartingale_neg_norm_squared");
  const double osc = value(constant, "oscillation");
  const bool ok = constant.verdict == Verdict::pass && osc == 0.0 && center.verdict == Verdict::premise_not_met &&
                  up.verdict == Verdict::pass && down.verdict == Verdict::fail;
  return {ok, "constant " + to_string(constant.verdict) + " (oscillation " + num(osc) + "); |x|^2 at center " +
                  to_string(center.verdict) + "; submartingale |x|^2 " + to_string(up.verdict) + ", -|x|^2 " +
                  to_string(down.verdict)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("reflectsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::string detail;
  bool ok = true;
  for (const char* name : {"wz_convergence", "approx_continuity", "smallball_and_levy", "submartingale_norm_squared",
                           "max_principle_constant"}) {
    std::string bytes[2];
    for (int k = 0; k < 2; ++k) {
      cli::Options o;
      o.workers = k == 0 ? 1 : 8;
      o.output = (root / name / std::to_string(*o.workers)).string();
      std::ostringstream out, err;
      const int code = cli::run(config_path(name), {}, o, out, err);
      if (code != cli::exit_ok && code != cli::exit_failed) throw std::runtime_error(err.str());
      std::ifstream in(fs::path(*o.output) / "report.json", std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      bytes[k] = s.str();
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  fs::remove_all(root);
  return {ok, detail + " (workers 1 vs 8)"};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") strict = true;
    else only.insert(std::stoi(a));
  }

  const std::vector<Criterion> criteria{
      {1, "half-line reflection oracle", 5, half_line_oracle},
      {2, "bounded-variation comparison constant", 30, bv_constant},
      {3, "wong-zakai decrease", 180, wz_decrease},
      {4, "skeleton convergence", 240, skeleton_rate},
      {5, "approximate continuity", 300, approx_continuity},
      {6, "moment scaling", 120, moments},
      {7, "exponential integrability", 120, tail},
      {8, "small-ball and iterated-integral conditionals", 180, small_ball_levy},
      {9, "holder tightness", 120, holder},
      {10, "support inclusions", 180, support},
      {11, "maximum principle", 120, max_principle},
      {12, "determinism across worker counts", 600, determinism},
  };

  int passed = 0, ran = 0;
  std::vector<int> unexpected, known;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit;
    const bool ok = o.passed && in_time;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.title << ": " << o.detail << "; " << num(secs)
              << " s (limit " << num(c.time_limit) << " s)" << (in_time ? "" : " TOO SLOW") << std::endl;
    if (ok) ++passed;
    else if (kKnownFailures.count(c.id)) known.push_back(c.id);
    else unexpected.push_back(c.id);
  }
  std::cout << passed << "/" << ran << " criteria passed";
  if (!known.empty()) {
    std::cout << "; documented failures:";
    for (int k : known) std::cout << " " << k;
  }
  std::cout << std::endl;
  if (!unexpected.empty()) return 1;
  return strict && !known.empty() ? 1 : 0;
}
