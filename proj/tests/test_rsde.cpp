#include "reflectsim/paths.hpp"
#include "reflectsim/rsde.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace reflectsim;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

double node_gap(const SkorohodSolution& a, const SkorohodSolution& b) {
  REQUIRE(a.x.size() == b.x.size());
  return (a.x.values - b.x.values).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("ito drift of the sine and affine diagonal coefficients") {
  const double a = 0.5, c = 0.25;
  const auto sine = make_sine_coefficients(2, a, c, zero_drift(2));
  const auto affine = make_affine_coefficients(2, a, c, zero_drift(2));
  for (const Vector& x : {v2(0.3, -1.2), v2(2.0, 0.0), v2(-0.7, 0.9)}) {
    const Vector bs = btilde(sine, x);
    const Vector ba = btilde(affine, x);
    for (int i = 0; i < 2; ++i) {
      CHECK(bs(i) == doctest::Approx(0.5 * (a + c * std::sin(x(i))) * c * std::cos(x(i))).epsilon(1e-12));
      CHECK(ba(i) == doctest::Approx(0.5 * (a + c * x(i)) * c).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant diffusion has no correction") {
  Matrix s(2, 3);
  s << 1, 0.5, 0, 0, 1, -0.2;
  DriftSpec b{v2(0.1, -0.3), 0.5};
  const auto coeffs = make_constant_coefficients(s, b);
  CHECK(coeffs.d == 2);
  CHECK(coeffs.d1 == 3);
  const Vector x = v2(1.0, 2.0);
  CHECK((btilde(coeffs, x) - (b.offset + 0.5 * x)).norm() < 1e-15);
}

TEST_CASE("finite-difference correction agrees with the analytic one") {
  const auto sine = make_sine_coefficients(3, 0.4, 0.3, zero_drift(3));
  Vector x(3);
  x << 0.2, -0.8, 1.9;
  const Matrix s = sine.sigma(x);
  CHECK((ito_correction(sine, x, s) - ito_correction_fd(sine, x, s)).norm() < 1e-8);
}

TEST_CASE("coefficients without a jacobian fall back to differences") {
  // sigma(x) = [x2, 1; 0, x1]: correction_i = 1/2 sum_k sum_j d_j sigma^i_k sigma^j_k
  Coefficients c;
  c.d = 2;
  c.d1 = 2;
  c.sigma = [](const Vector& x) {
    Matrix m(2, 2);
    m << x(1), 1.0, 0.0, x(0);
    return m;
  };
  c.drift = [](const Vector&) { return Vector(Vector::Zero(2)); };
  const Vector x = v2(0.7, -0.4);
  // d_2 sigma^1_1 = 1 pairs with sigma^2_1 = 0; d_1 sigma^2_2 = 1 pairs with sigma^1_2 = 1.
  const Vector expected = v2(0.0, 0.5);
  CHECK((btilde(c, x) - expected).norm() < 1e-8);
}

TEST_CASE("refined grids") {
  const auto g = refine_grid(dyadic_grid(1.0, 2), 4);
  CHECK(g.size() == 17);
  CHECK(g[4] == doctest::Approx(0.25));
}

TEST_CASE("cell scheme names") {
  CHECK(cell_scheme_from_string(to_string(CellScheme::heun)) == CellScheme::heun);
  CHECK(cell_scheme_from_string("euler") == CellScheme::euler);
  CHECK_THROWS_AS(cell_scheme_from_string("rk4"), Error);
}

TEST_CASE("degenerate diffusion follows the projected drift") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  const auto coeffs = make_constant_coefficients(Matrix::Zero(1, 1), DriftSpec{v1(-1.0), 0.0});
  const auto w = sample_brownian(1, dyadic_grid(1.0, 6), 1, 0);
  const auto X = euler_reflected(dom, coeffs, w, v1(0.5));
  for (std::size_t i = 0; i < X.x.size(); ++i)
    CHECK(X.x.values(0, i) == doctest::Approx(std::max(0.0, 0.5 - X.x.times[i])).epsilon(1e-12));
  CHECK(X.tv.back() == doctest::Approx(0.5).epsilon(1e-12));

  const auto still = make_constant_coefficients(Matrix::Zero(1, 1), zero_drift(1));
  const auto Z = skeleton(dom, still, sine_control(1, 0, 1.0, 1.0, dyadic_grid(1.0, 5)), 4, v1(0.3));
  CHECK(Z.x.values.cwiseAbs().maxCoeff() == doctest::Approx(0.3));
  CHECK(Z.tv.back() == 0.0);
}

TEST_CASE("wong-zakai with constant diffusion is the reflected interpolation") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  const double sigma = 0.7;
  const auto coeffs = make_constant_coefficients(Matrix::Constant(1, 1, sigma), zero_drift(1));
  const auto w = sample_brownian(1, dyadic_grid(1.0, 9), 4, 0);
  const int level = 5, sub = 4;
  const auto X = wong_zakai(dom, coeffs, w, level, sub, 1.0, v1(0.2));
  const auto wn = adapted_interpolation(w, level, 1.0);
  double running = 0.0;
  for (std::size_t i = 0; i < wn.size(); ++i) {
    const double free = 0.2 + sigma * wn.values(0, i);
    running = std::max(running, -free);
    CHECK(std::abs(X.x.values(0, i * sub) - (free + running)) < 1e-12);
  }
}

TEST_CASE("wong-zakai equals the skeleton of the adapted interpolation") {
  const auto dom = make_ball(v2(0, 0), 1.0);
  const auto coeffs = make_sine_coefficients(2, 0.5, 0.25, DriftSpec{v2(0.1, 0.0), -0.2});
  const auto w = sample_brownian(2, dyadic_grid(1.0, 8), 9, 0);
  for (auto scheme : {CellScheme::euler, CellScheme::heun}) {
    const auto X = wong_zakai(dom, coeffs, w, 6, 4, 1.0, v2(0.1, 0.2), scheme);
    const auto Z = skeleton(dom, coeffs, control_from_path(w, 6, 1.0), 4, v2(0.1, 0.2), scheme);
    CHECK(node_gap(X, Z) < 1e-12);
  }
}

TEST_CASE("heun cells are insensitive to substep doubling") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  const auto coeffs = make_sine_coefficients(1, 0.5, 0.25, zero_drift(1));
  const auto w = sample_brownian(1, dyadic_grid(1.0, 10), 2, 0);
  auto end_gap = [&](CellScheme s) {
    const auto a = wong_zakai(dom, coeffs, w, 6, 4, 1.0, v1(1.0), s);
    const auto b = wong_zakai(dom, coeffs, w, 6, 8, 1.0, v1(1.0), s);
    return std::abs(a.x.values(0, a.x.values.cols() - 1) - b.x.values(0, b.x.values.cols() - 1));
  };
  const double heun = end_gap(CellScheme::heun);
  const double euler = end_gap(CellScheme::euler);
  CHECK(heun < 1e-4);
  CHECK(heun < euler);
}

TEST_CASE("shifted driver with constant diffusion reflects w - w^n + h") {
  const auto dom = make_half_space(v1(1.0), 0.0);
  const auto coeffs = make_constant_coefficients(Matrix::Constant(1, 1, 1.0), zero_drift(1));
  const auto grid = dyadic_grid(1.0, 9);
  const auto w = sample_brownian(1, grid, 12, 0);
  const auto h = linear_control(v1(0.5), grid);
  const auto Y = shifted_driver(dom, coeffs, w, 4, h, 1.0, v1(0.1));
  const auto wn = adapted_interpolation(w, 4, 1.0);
  Eigen::MatrixXd drv(1, grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    drv(0, static_cast<Eigen::Index>(i)) = w.values(0, i) - wn.at(grid[i])(0) + 0.5 * grid[i];
  const auto ref = solve(dom, SamplePath(grid, drv), v1(0.1));
  CHECK(node_gap(Y, ref) < 1e-12);
}

TEST_CASE("euler scheme stays in the closure of a nonconvex domain") {
  const auto dom = make_notched_disc(v2(-1, -1), v2(1, 1), v2(0, -1), 0.25);
  const auto coeffs = make_affine_coefficients(2, 0.5, 0.25, zero_drift(2));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto X = euler_reflected(dom, coeffs, sample_brownian(2, dyadic_grid(1.0, 8), 3, s), v2(0.3, -0.5));
    for (std::size_t i = 0; i < X.x.size(); ++i) CHECK(contains(dom, X.x.node(i)).signed_distance <= 1e-9);
  }
}
