#include "reflectsim/stats.hpp"

#include "reflectsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace reflectsim {

namespace {
constexpr double kZ = 1.96;
}

MeanEstimate mean_ci(std::span<const double> values) {
  MeanEstimate out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  out.halfwidth = kZ * out.sd / std::sqrt(static_cast<double>(out.n));
  return out;
}

ProportionEstimate wilson(std::size_t successes, std::size_t n) {
  ProportionEstimate out;
  out.successes = successes;
  out.n = n;
  if (n == 0) {
    out.upper = 1.0;
    return out;
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = kZ * kZ;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = kZ * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  out.p = p;
  out.lower = std::clamp(centre - half, 0.0, 1.0);
  out.upper = std::clamp(centre + half, 0.0, 1.0);
  return out;
}

bool intervals_overlap(double lo1, double hi1, double lo2, double hi2) { return lo1 <= hi2 && lo2 <= hi1; }

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("linear_fit: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw Error("linear_fit: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw Error("linear_fit: x values are all equal");
  LinearFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) fit.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return fit;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::degenerate: return "degenerate";
    case Verdict::near_critical: return "near_critical";
    case Verdict::premise_not_met: return "premise_not_met";
  }
  return "fail";
}

void ExperimentReport::add_estimate(std::string label, const MeanEstimate& m) {
  estimates.push_back({std::move(label), m.mean, m.halfwidth, m.n});
}

void ExperimentReport::add_estimate(std::string label, const ProportionEstimate& p) {
  estimates.push_back({std::move(label), p.p, 0.5 * (p.upper - p.lower), p.n});
}

void ExperimentReport::add_estimate(std::string label, double value, std::size_t samples) {
  estimates.push_back({std::move(label), value, 0.0, samples});
}

void ExperimentReport::add_check(std::string name, bool passed, Basis basis, std::string detail) {
  checks.push_back({std::move(name), passed, basis, std::move(detail)});
}

void ExperimentReport::settle() {
  verdict = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; }) ? Verdict::pass
                                                                                                : Verdict::fail;
}

const Estimate* ExperimentReport::find(const std::string& label) const {
  for (const auto& e : estimates)
    if (e.label == label) return &e;
  return nullptr;
}

const Check* ExperimentReport::find_check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["parameters"] = report.parameters;
  auto& estimates = j["estimates"] = nlohmann::json::array();
  for (const auto& e : report.estimates) {
    estimates.push_back(
        {{"label", e.label}, {"estimate", number(e.value)}, {"ci_halfwidth", number(e.halfwidth)}, {"samples", e.samples}});
  }
  if (report.rate_fit) {
    const auto& f = *report.rate_fit;
    j["rate_fit"] = {{"slope", number(f.slope)},
                     {"intercept", number(f.intercept)},
                     {"r2", number(f.r2)},
                     {"slope_se", number(f.slope_se)},
                     {"points", f.points}};
  } else {
    j["rate_fit"] = nullptr;
  }
  auto& checks = j["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"basis", c.basis == Basis::paper ? "paper" : "policy"},
                      {"detail", c.detail}});
  }
  j["verdict"] = to_string(report.verdict);
  j["seeds"] = report.seeds;
  return j;
}

void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << "\n";
  const auto precision = out.precision(17);
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
  out.precision(precision);
}

}  // namespace reflectsim
