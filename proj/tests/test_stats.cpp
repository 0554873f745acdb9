#include "reflectsim/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace reflectsim;

TEST_CASE("mean and confidence interval") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_ci(v);
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.halfwidth == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(m.n == 4);
}

TEST_CASE("wilson interval") {
  const double z = 1.96;
  const double n = 10.0, p = 0.5;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  const auto w = wilson(5, 10);
  CHECK(w.p == 0.5);
  CHECK(w.lower == doctest::Approx(center - half));
  CHECK(w.upper == doctest::Approx(center + half));
  CHECK(wilson(0, 10).lower == doctest::Approx(0.0));
  CHECK(wilson(10, 10).upper == doctest::Approx(1.0));
  CHECK(wilson(0, 10).upper > 0.0);
}

TEST_CASE("interval overlap") {
  CHECK(intervals_overlap(0, 1, 0.5, 2));
  CHECK(intervals_overlap(0, 1, 1, 2));
  CHECK_FALSE(intervals_overlap(0, 1, 1.1, 2));
}

TEST_CASE("least squares recovers an exact line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double t : x) y.push_back(3.0 - 0.5 * t);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(-0.5));
  CHECK(f.intercept == doctest::Approx(3.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.slope_se == doctest::Approx(0.0));
  CHECK(f.points == 5);
}

TEST_CASE("least squares on noisy data") {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{0, 1, 1, 2};
  const auto f = linear_fit(x, y);
  // Normal equations by hand: slope = Sxy / Sxx = 3 / 5.
  CHECK(f.slope == doctest::Approx(0.6));
  CHECK(f.intercept == doctest::Approx(0.1));
  CHECK(f.r2 == doctest::Approx(0.9));
  CHECK_THROWS_AS(linear_fit(std::vector<double>{1, 1}, std::vector<double>{0, 1}), std::exception);
}

TEST_CASE("type 7 quantiles") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.95) == doctest::Approx(3.85));
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
}

TEST_CASE("report verdicts and json") {
  ExperimentReport r;
  r.name = "demo";
  r.add_estimate("a", 1.5, 10);
  r.add_estimate("nan", std::numeric_limits<double>::quiet_NaN());
  r.add_check("ok", true, Basis::paper);
  r.settle();
  CHECK(r.verdict == Verdict::pass);
  r.add_check("bad", false, Basis::policy, "detail");
  r.settle();
  CHECK(r.verdict == Verdict::fail);
  CHECK(r.find("a")->value == 1.5);
  CHECK(r.find("missing") == nullptr);
  CHECK_FALSE(r.find_check("bad")->passed);

  const auto j = to_json(r);
  CHECK(j["name"] == "demo");
  CHECK(j["verdict"] == "fail");
  CHECK(j["rate_fit"].is_null());
  CHECK(j["estimates"][1]["estimate"].is_null());
  CHECK(j["checks"][1]["basis"] == "policy");
  CHECK(to_string(Verdict::premise_not_met) == "premise_not_met");
}

TEST_CASE("table csv") {
  Table t{{"n", "value"}, {{4, 0.5}, {5, 0.25}}};
  std::ostringstream out;
  write_csv(t, out);
  CHECK(out.str() == "n,value\n4,0.5\n5,0.25\n");
}
