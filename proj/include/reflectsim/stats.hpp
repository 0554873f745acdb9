#pragma once

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reflectsim {

struct MeanEstimate {
  double mean = 0.0;
  double sd = 0.0;
  /// 1.96 sd / sqrt(n)
  double halfwidth = 0.0;
  std::size_t n = 0;
};

MeanEstimate mean_ci(std::span<const double> values);

struct ProportionEstimate {
  double p = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t successes = 0;
  std::size_t n = 0;
};

/// Wilson score interval at 95%.
ProportionEstimate wilson(std::size_t successes, std::size_t n);

bool intervals_overlap(double lo1, double hi1, double lo2, double hi2);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// Standard error of the slope from the residuals (0 with two points).
  double slope_se = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of y on x; needs at least two distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------

enum class Verdict { pass, fail, degenerate, near_critical, premise_not_met };

std::string to_string(Verdict verdict);

/// Whether a threshold comes from a statement of the theory or is a harness
/// choice.
enum class Basis { paper, policy };

struct Estimate {
  std::string label;
  double value = 0.0;
  double halfwidth = 0.0;
  std::size_t samples = 0;
};

struct Check {
  std::string name;
  bool passed = false;
  Basis basis = Basis::policy;
  std::string detail;
};

/// Per-level table written as the flat CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string name;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<Estimate> estimates;
  std::optional<LinearFit> rate_fit;
  std::vector<Check> checks;
  Verdict verdict = Verdict::pass;
  nlohmann::json seeds = nlohmann::json::object();
  Table table;

  void add_estimate(std::string label, const MeanEstimate& m);
  void add_estimate(std::string label, const ProportionEstimate& p);
  void add_estimate(std::string label, double value, std::size_t samples = 0);
  void add_check(std::string name, bool passed, Basis basis, std::string detail = {});

  /// pass iff every check passed, fail otherwise.
  void settle();
  const Estimate* find(const std::string& label) const;
  const Check* find_check(const std::string& name) const;
};

nlohmann::json to_json(const ExperimentReport& report);
void write_csv(const Table& table, std::ostream& out);

}  // namespace reflectsim
