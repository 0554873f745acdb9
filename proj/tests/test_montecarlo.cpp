#include "reflectsim/montecarlo.hpp"
#include "reflectsim/random.hpp"

#include <doctest.h>

using namespace reflectsim;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Problem half_line(const Coefficients& c, double x0) {
  return {make_half_space(v1(1.0), 0.0), c, v1(x0), 1.0};
}

Problem sine_half_line() { return half_line(make_sine_coefficients(1, 0.5, 0.25, zero_drift(1)), 1.0); }

WzParams small_wz() {
  WzParams p;
  p.levels = {3, 4, 5};
  p.paths = 60;
  return p;
}

}  // namespace

TEST_CASE("common random numbers come from one seeded family") {
  const auto pb = sine_half_line();
  const auto w = crn_driver(pb, 7, 42, 5);
  const auto ref = sample_brownian(1, dyadic_grid(1.0, 7), derive_seed(42, seed_tags::brownian), 5);
  CHECK(path_hash(w) == path_hash(ref));
  CHECK(path_hash(crn_driver(pb, 7, 42, 6)) != path_hash(w));
}

TEST_CASE("control specs") {
  const auto grid = dyadic_grid(1.0, 4);
  ControlSpec lin{ControlSpec::Kind::linear, v1(0.5), 0, 1.0, 1.0};
  CHECK(to_string(lin) == "linear:0.5");
  const auto h = build_control(lin, 2, grid);
  CHECK(h.dim() == 2);
  CHECK(h.path.at(1.0)(1) == doctest::Approx(0.5));
  CHECK(to_string(ControlSpec{}) == "zero");
  ControlSpec sine{ControlSpec::Kind::sine, {}, 0, 2.0, 1.0};
  CHECK(to_string(sine) == "sine:axis=0,amplitude=2,frequency=1");
}

TEST_CASE("reports do not depend on the worker count") {
  const auto pb = sine_half_line();
  const auto a = to_json(wz_convergence(pb, small_wz(), {7, 1})).dump();
  const auto b = to_json(wz_convergence(pb, small_wz(), {7, 3})).dump();
  CHECK(a == b);
  const auto c = to_json(wz_convergence(pb, small_wz(), {8, 1})).dump();
  CHECK(a != c);
}

TEST_CASE("wong-zakai report layout") {
  const auto r = wz_convergence(sine_half_line(), small_wz(), {1, 1});
  CHECK(r.table.rows.size() == 3);
  REQUIRE(r.rate_fit.has_value());
  CHECK(r.rate_fit->points == 3);
  CHECK(r.find("sup_error[n=5]") != nullptr);
  CHECK(r.find_check("sup_error_strictly_decreasing") != nullptr);
}

TEST_CASE("zero diffusion is reported as degenerate") {
  const auto pb = half_line(make_constant_coefficients(Matrix::Zero(1, 1), zero_drift(1)), 1.0);
  const auto r = wz_convergence(pb, small_wz(), {1, 1});
  CHECK(r.verdict == Verdict::degenerate);
}

TEST_CASE("invalid experiment parameters") {
  auto p = small_wz();
  p.levels = {5, 4};
  CHECK_THROWS_AS(wz_convergence(sine_half_line(), p, {1, 1}), Error);
  p = small_wz();
  p.paths = 1;
  CHECK_THROWS_AS(wz_convergence(sine_half_line(), p, {1, 1}), Error);
  MomentParams m;
  m.windows = {{0.0, 0.3}, {0.0, 0.25}};
  m.paths = 10;
  m.level = 4;
  CHECK_THROWS_AS(moment_scaling(sine_half_line(), m, {1, 1}), GridMismatch);
}

TEST_CASE("an infeasible tube is refused after the pilot run") {
  const auto pb = half_line(make_constant_coefficients(Matrix::Constant(1, 1, 0.5), zero_drift(1)), 1.0);
  ApproxParams p;
  p.deltas = {0.2};
  p.level = 6;
  p.budget.max_attempts = 10000;
  p.budget.pilot_attempts = 2000;
  CHECK_THROWS_AS(approx_continuity(pb, p, {1, 1}), TubeTooNarrow);
}

TEST_CASE("tube-conditioned sample is deterministic") {
  const auto pb = half_line(make_constant_coefficients(Matrix::Constant(1, 1, 0.5), zero_drift(1)), 1.0);
  ApproxParams p;
  p.deltas = {0.8};
  p.level = 6;
  p.budget.target_accepted = 100;
  p.budget.pilot_attempts = 500;
  p.budget.batch = 64;
  const auto a = approx_continuity(pb, p, {3, 1});
  const auto b = approx_continuity(pb, p, {3, 4});
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.find("joint[delta=0.8]") != nullptr);
}

TEST_CASE("skeleton convergence shrinks with the level") {
  const Problem pb{make_ball(Vector::Zero(2), 1.0), make_constant_coefficients(0.5 * Matrix::Identity(2, 2), zero_drift(2)),
                   Vector::Zero(2), 1.0};
  SkeletonParams p;
  p.levels = {3, 6};
  p.paths = 40;
  const auto r = skeleton_convergence(pb, p, {2, 1});
  CHECK(r.find_check("last_level_at_most_half_first")->passed);
}

TEST_CASE("forward support distance equals the wong-zakai error on shared paths") {
  const auto pb = sine_half_line();
  SupportParams s;
  s.level = 5;
  s.paths = 40;
  s.reverse_paths = 200;
  s.reverse_level = 5;
  const auto sup = support_inclusions(pb, s, {5, 1});
  CHECK(sup.find_check("wz_skeleton_identity")->passed);
  auto w = small_wz();
  w.paths = 40;
  w.fine_level = 7;
  const auto wz = wz_convergence(pb, w, {5, 1});
  CHECK(sup.find("wz_distance")->value == doctest::Approx(wz.find("sup_error[n=5]")->value).epsilon(1e-12));
}
