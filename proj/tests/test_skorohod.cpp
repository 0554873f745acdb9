#include "reflectsim/paths.hpp"
#include "reflectsim/random.hpp"
#include "reflectsim/skorohod.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace reflectsim;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

SamplePath random_walk(std::mt19937_64& gen, int dim, int level, double step, const Vector& start) {
  const auto grid = dyadic_grid(1.0, level);
  std::normal_distribution<double> z(0.0, step);
  Eigen::MatrixXd v(dim, grid.size());
  v.col(0) = Eigen::VectorXd(start);
  for (Eigen::Index i = 1; i < v.cols(); ++i)
    for (int k = 0; k < dim; ++k) v(k, i) = v(k, i - 1) + z(gen);
  return SamplePath(grid, v);
}

}  // namespace

TEST_CASE("half-line reflection matches the explicit formula") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x0 = u(gen);
    auto w = random_walk(gen, 1, 7, 0.2, v1(0.0));
    const auto sol = solve(dom, w, v1(x0));
    double running = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      running = std::max(running, -(x0 + w.values(0, i)));
      CHECK(std::abs(sol.x.values(0, i) - (x0 + w.values(0, i) + running)) <= 1e-12);
      CHECK(std::abs(sol.k.values(0, i) - running) <= 1e-12);
      CHECK(sol.tv[i] == doctest::Approx(running).epsilon(1e-12));
    }
  }
}

TEST_CASE("a driver that stays inside is not reflected") {
  const auto dom = make_ball(v2(0, 0), 1.0);
  const auto grid = dyadic_grid(1.0, 4);
  Eigen::MatrixXd v(2, grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v.col(static_cast<Eigen::Index>(i)) << 0.5 * grid[i], 0.0;
  const auto sol = solve(dom, SamplePath(grid, v), v2(0, 0));
  CHECK(sol.tv.back() == 0.0);
  CHECK(sol.k.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.x.values.isApprox(v));
}

TEST_CASE("solutions stay in the closure with a nondecreasing regulator") {
  std::mt19937_64 gen(3);
  const Domain domains[] = {make_ball(v2(0, 0), 1.0), make_axis_box(v2(0, 0), v2(1, 1)),
                            make_notched_disc(v2(-1, -1), v2(1, 1), v2(0, -1), 0.25)};
  for (const auto& dom : domains) {
    for (int trial = 0; trial < 30; ++trial) {
      const auto w = random_walk(gen, 2, 7, 0.1, v2(0, 0));
      const auto sol = solve(dom, w, v2(0.5, 0.5));
      for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(contains(dom, sol.x.node(i)).signed_distance <= 1e-9);
        if (i) CHECK(sol.tv[i] >= sol.tv[i - 1]);
        const Vector expected = v2(0.5, 0.5) + w.node(i) - w.node(0) + sol.k.node(i);
        CHECK((sol.x.node(i) - expected).norm() < 1e-12);
      }
      CHECK(sol.k.node(w.size() - 1).norm() <= sol.tv.back() + 1e-12);
    }
  }
}

TEST_CASE("the regulator pushes along inward normals") {
  const auto dom = make_ball(v2(0, 0), 1.0);
  std::mt19937_64 gen(5);
  const auto w = random_walk(gen, 2, 8, 0.15, v2(0, 0));
  const auto sol = solve(dom, w, v2(0, 0));
  for (Eigen::Index i = 1; i < sol.pushes.cols(); ++i) {
    const Vector n = sol.pushes.col(i);
    if (n.norm() == 0.0) continue;
    CHECK(n.norm() == doctest::Approx(1.0));
    CHECK((n + sol.x.node(static_cast<std::size_t>(i))).norm() < 1e-9);
  }
}

TEST_CASE("start outside the closure is rejected") {
  const auto dom = make_ball(v2(0, 0), 1.0);
  const auto w = sample_brownian(2, dyadic_grid(1.0, 3), 1, 0);
  CHECK_THROWS_AS(solve(dom, w, v2(2, 0)), StartOutsideDomain);
  CHECK_NOTHROW(require_start_in_closure(dom, v2(1, 0)));
}

TEST_CASE("dyadic windows cover the node range at every scale") {
  const auto windows = dyadic_windows(17);
  REQUIRE_FALSE(windows.empty());
  bool whole = false;
  for (const auto& w : windows) {
    CHECK(w.first < w.last);
    CHECK(w.last <= 16);
    whole = whole || (w.first == 0 && w.last == 16);
  }
  CHECK(whole);
}

TEST_CASE("bounded-variation comparison constant holds") {
  std::mt19937_64 gen(11);
  const Domain domains[] = {make_axis_box(v2(0, 0), v2(1, 1)), make_ball(v2(0, 0), 1.0)};
  for (const auto& dom : domains) {
    const Vector start = dom.kind() == DomainKind::ball ? v2(0, 0) : v2(0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
      const auto w = random_walk(gen, 2, 6, 0.3, start);
      const auto r = verify_bv_comparison(dom, w);
      CHECK(r.windows > 0);
      CHECK(r.worst_ratio <= kBvComparisonConstant + 1e-6);
    }
  }
}

TEST_CASE("variation bound constant is finite on the half-line") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  const auto w = sample_brownian(1, dyadic_grid(1.0, 8), 2, 0);
  const auto sol = solve(dom, w, v1(0.0));
  const auto r = verify_tv_bound(dom, sol, w, 0.3);
  CHECK(r.violations == 0);
  CHECK(std::isfinite(r.constant));
  CHECK(r.constant >= 0.0);
}

TEST_CASE("reflected moves on the nonconvex domain stay unique") {
  const auto dom = make_notched_disc(v2(-1, -1), v2(1, 1), v2(0, -1), 0.25);
  const auto m = reflected_move(dom, v2(-0.5, -0.6), v2(0.9, -0.3));
  CHECK(contains(dom, m.point).signed_distance <= 1e-9);
}
