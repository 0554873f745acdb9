#pragma once

#include "reflectsim/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace reflectsim {

enum class DomainKind { half_space, ball, axis_box, convex_polytope, notched_disc };

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

/// {x : <normal, x> > offset}; `normal` is the unit inward normal.
struct HalfSpace {
  Vector normal;
  double offset = 0.0;
};

struct Ball {
  Vector center;
  double radius = 1.0;
};

struct AxisBox {
  Vector lower;
  Vector upper;
};

/// Half-space {x : <normal, x> <= offset} with unit outward `normal`.
struct Facet {
  Vector normal;
  double offset = 0.0;
};

struct ConvexPolytope {
  std::vector<Facet> facets;
};

/// Planar axis box with an open disc removed. The disc is centered on (or
/// near) the box boundary, which leaves a concave notch in the domain.
struct NotchedBox {
  AxisBox box;
  Vector notch_center;
  double notch_radius = 0.2;
};

/// Scalar field with gradient, used for the Lyapunov-type function of the
/// boundary conditions and for test functions of the maximum principle.
struct ScalarField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Interior-cone metadata: for every boundary x a unit l_x exists with
/// <l_x, n> >= 1/beta for all normals n at boundary points within delta.
struct ConeCondition {
  double delta = 0.0;
  double beta = 1.0;
};

/// One ball B(center, radius) of a finite boundary cover with a uniform
/// direction: n . direction >= lambda for normals inside B(center, 2 radius).
struct CoverPatch {
  Vector center;
  Vector direction;
  double lambda = 0.0;
  double radius = 0.0;
};

/// Domain descriptor: shape plus the constants of the boundary conditions.
/// Factories fill every constant with a value that the sampled condition
/// checker confirms for the shipped shapes.
struct Domain {
  using Shape = std::variant<HalfSpace, Ball, AxisBox, ConvexPolytope, NotchedBox>;

  Shape shape;
  double r0 = 1e6;     // exterior-sphere radius
  double c0 = 0.5;     // constant of the (y-x, n) + c0|x-y|^2 >= 0 condition
  double gamma = 1.0;  // constant pairing with phi
  ScalarField phi;
  std::optional<ConeCondition> cone;
  std::vector<CoverPatch> cover;

  DomainKind kind() const;
  int dim() const;
  bool convex() const { return kind() != DomainKind::notched_disc; }
};

Domain make_half_space(Vector inward_normal, double offset);
Domain make_ball(Vector center, double radius);
Domain make_axis_box(Vector lower, Vector upper);
Domain make_convex_polytope(std::vector<Facet> facets);
Domain make_notched_disc(Vector lower, Vector upper, Vector notch_center, double notch_radius);

enum class Location { interior, boundary, exterior };

struct Membership {
  Location location;
  /// Negative inside, zero on the boundary, positive outside.
  double signed_distance;
};

/// Absolute tolerance (scaled by max(1, |x|)) within which a point counts as
/// lying on the boundary.
inline constexpr double kBoundaryTolerance = 1e-12;

Membership contains(const Domain& domain, const Vector& x);

struct Projection {
  Vector point;
  /// Unit inward normal at `point` along the correction, or zero if y was
  /// already in the closure.
  Vector normal;
  double distance = 0.0;
};

/// Nearest point of the closure. Throws AmbiguousProjection for nonconvex
/// kinds when two distinct candidates are equally near (relative 1e-9).
Projection project(const Domain& domain, const Vector& y);

/// Generators of the normal cone at boundary point x: the unit inward normals
/// of every boundary piece active within `tolerance`.
std::vector<Vector> active_normals(const Domain& domain, const Vector& x, double tolerance = 1e-9);

/// A single element of the normal cone at x with no direction hint: the
/// normalized average of the active normals.
Vector inward_normal(const Domain& domain, const Vector& x);

/// Vertices of a bounded convex polytope (empty if none can be found).
std::vector<Vector> polytope_vertices(const ConvexPolytope& polytope);

// ---------------------------------------------------------------------------
// Sampled verification of the boundary conditions.

enum class Condition { A, B, C, D, H1, H2 };

std::string to_string(Condition condition);

struct ConditionResult {
  bool passed = false;
  /// Minimum of the defining inequality's left side over all samples.
  double margin = 0.0;
  std::size_t evaluations = 0;
};

struct ConditionReport {
  std::map<Condition, ConditionResult> results;
  bool all_passed() const;
};

struct ConditionSampling {
  std::size_t boundary_samples = 1000;
  std::size_t pair_samples = 1000;
  std::uint64_t seed = 1;
  /// Conditions to evaluate. Empty means all whose metadata is available.
  std::vector<Condition> conditions;
};

/// Pass threshold on the sampled margins.
inline constexpr double kConditionSlack = 1e-9;

/// Throws UnsupportedKind if an explicitly requested condition needs metadata
/// the domain does not carry (cone for B, cover for D).
ConditionReport check_conditions(const Domain& domain, const ConditionSampling& sampling);

/// Boundary points drawn for the condition checks (exposed for tests).
std::vector<Vector> sample_boundary(const Domain& domain, std::size_t count, std::uint64_t seed);

/// Points of the closure drawn for the condition checks.
std::vector<Vector> sample_closure(const Domain& domain, std::size_t count, std::uint64_t seed);

}  // namespace reflectsim
