#include "reflectsim/geometry.hpp"

#include "reflectsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace reflectsim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double boundary_tolerance(const Vector& x) { return kBoundaryTolerance * std::max(1.0, x.norm()); }

Membership classify(double sd, const Vector& x) {
  const double tol = boundary_tolerance(x);
  if (sd > tol) return {Location::exterior, sd};
  if (sd < -tol) return {Location::interior, sd};
  return {Location::boundary, sd};
}

double box_signed_distance(const AxisBox& box, const Vector& x) {
  const Vector q = (box.lower - x).cwiseMax(x - box.upper);
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vector clamp_to_box(const AxisBox& box, const Vector& y) { return y.cwiseMax(box.lower).cwiseMin(box.upper); }

bool in_box(const AxisBox& box, const Vector& x, double tol) {
  return ((x - box.lower).array() >= -tol).all() && ((box.upper - x).array() >= -tol).all();
}

// Polytope projection by active-set enumeration: for each facet subset of
// size <= d with independent normals, project onto the intersection of the
// facet hyperplanes and keep the KKT point (nonnegative multipliers, primal
// feasible). Exact and adequate for the handful of facets used here.
template <typename Visit>
void for_each_subset(int m, int max_size, Visit&& visit) {
  std::vector<int> idx;
  auto rec = [&](auto&& self, int start) -> void {
    if (!idx.empty()) visit(idx);
    if (static_cast<int>(idx.size()) == max_size) return;
    for (int i = start; i < m; ++i) {
      idx.push_back(i);
      self(self, i + 1);
      idx.pop_back();
    }
  };
  rec(rec, 0);
}

bool polytope_feasible(const ConvexPolytope& p, const Vector& x, double tol) {
  for (const auto& f : p.facets) {
    if (f.normal.dot(x) - f.offset > tol) return false;
  }
  return true;
}

double polytope_interior_sd(const ConvexPolytope& p, const Vector& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& f : p.facets) worst = std::max(worst, f.normal.dot(x) - f.offset);
  return worst;
}

Vector polytope_project(const ConvexPolytope& p, const Vector& y) {
  const int d = static_cast<int>(y.size());
  const int m = static_cast<int>(p.facets.size());
  const double tol = 1e-10 * std::max(1.0, y.norm());
  Vector best = y;
  double best_dist = std::numeric_limits<double>::infinity();
  for_each_subset(m, d, [&](const std::vector<int>& subset) {
    const int s = static_cast<int>(subset.size());
    Matrix a(s, d);
    Vector r(s);
    for (int k = 0; k < s; ++k) {
      a.row(k) = p.facets[subset[k]].normal.transpose();
      r(k) = p.facets[subset[k]].normal.dot(y) - p.facets[subset[k]].offset;
    }
    const Matrix gram = a * a.transpose();
    Eigen::FullPivLU<Matrix> lu(gram);
    if (lu.rank() < s) return;
    const Vector multipliers = lu.solve(r);
    if ((multipliers.array() < -tol).any()) return;
    const Vector x = y - a.transpose() * multipliers;
    if (!polytope_feasible(p, x, tol)) return;
    const double dist = (x - y).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = x;
    }
  });
  if (!std::isfinite(best_dist)) throw Error("polytope projection failed: empty or degenerate polytope");
  return best;
}

bool notched_in_closure(const NotchedBox& nb, const Vector& x, double tol) {
  return in_box(nb.box, x, tol) && (x - nb.notch_center).norm() >= nb.notch_radius - tol;
}

// Candidate nearest points on every boundary piece of the notched box: the
// radial point of the arc, arc/edge intersections, clamped edge projections
// and box corners. The projection is the nearest admissible candidate.
std::vector<Vector> notched_candidates(const NotchedBox& nb, const Vector& y) {
  const AxisBox& box = nb.box;
  const Vector& c = nb.notch_center;
  const double rho = nb.notch_radius;
  const double tol = 1e-12 * std::max(1.0, y.norm());
  std::vector<Vector> out;
  auto admit = [&](const Vector& p) {
    if (notched_in_closure(nb, p, 1e-12)) out.push_back(p);
  };
  const double ry = (y - c).norm();
  if (ry > 0.0) admit(c + rho * (y - c) / ry);
  for (int axis = 0; axis < 2; ++axis) {
    const int other = 1 - axis;
    for (double level : {box.lower(axis), box.upper(axis)}) {
      // edge {x_axis = level}, other coordinate in [lower, upper]
      Vector p = y;
      p(axis) = level;
      p(other) = std::clamp(y(other), box.lower(other), box.upper(other));
      if ((p - c).norm() >= rho - tol) out.push_back(p);
      const double gap = level - c(axis);
      if (std::abs(gap) <= rho) {
        const double half = std::sqrt(std::max(0.0, rho * rho - gap * gap));
        for (double sign : {-1.0, 1.0}) {
          Vector q(2);
          q(axis) = level;
          q(other) = c(other) + sign * half;
          if (q(other) >= box.lower(other) - tol && q(other) <= box.upper(other) + tol) out.push_back(q);
        }
      }
    }
  }
  for (int corner = 0; corner < 4; ++corner) {
    Vector q(2);
    q(0) = (corner & 1) ? box.upper(0) : box.lower(0);
    q(1) = (corner & 2) ? box.upper(1) : box.lower(1);
    admit(q);
  }
  return out;
}

Projection notched_project(const NotchedBox& nb, const Vector& y, bool check_ambiguity) {
  if (notched_in_closure(nb, y, 0.0)) return {y, Vector::Zero(y.size()), 0.0};
  const auto candidates = notched_candidates(nb, y);
  if (candidates.empty()) throw Error("notched projection found no candidate");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double dist = (candidates[i] - y).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (check_ambiguity) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (i == best) continue;
      const double dist = (candidates[i] - y).norm();
      const bool distinct = (candidates[i] - candidates[best]).norm() > 1e-9 * std::max(1.0, best_dist);
      if (distinct && dist - best_dist <= 1e-9 * std::max(best_dist, 1e-300)) {
        std::ostringstream msg;
        msg << "ambiguous projection onto notched domain at distance " << best_dist
            << "; driver increment too large relative to r0";
        throw AmbiguousProjection(msg.str());
      }
    }
  }
  const Vector x = candidates[best];
  return {x, (x - y) / best_dist, best_dist};
}

ScalarField quadratic_well(Vector center) {
  // phi(x) = -|x - center|^2 / 2: increases towards the center
  return {[center](const Vector& x) { return -0.5 * (x - center).squaredNorm(); },
          [center](const Vector& x) -> Vector { return center - x; }};
}

}  // namespace

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::half_space: return "half_space";
    case DomainKind::ball: return "ball";
    case DomainKind::axis_box: return "axis_box";
    case DomainKind::convex_polytope: return "convex_polytope";
    case DomainKind::notched_disc: return "notched_disc";
  }
  return "unknown";
}

DomainKind domain_kind_from_string(const std::string& name) {
  for (auto kind : {DomainKind::half_space, DomainKind::ball, DomainKind::axis_box, DomainKind::convex_polytope,
                    DomainKind::notched_disc}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown domain kind '" + name + "'");
}

DomainKind Domain::kind() const { return static_cast<DomainKind>(shape.index()); }

int Domain::dim() const {
  return std::visit(Overloaded{[](const HalfSpace& s) { return static_cast<int>(s.normal.size()); },
                               [](const Ball& s) { return static_cast<int>(s.center.size()); },
                               [](const AxisBox& s) { return static_cast<int>(s.lower.size()); },
                               [](const ConvexPolytope& s) {
                                 return s.facets.empty() ? 0 : static_cast<int>(s.facets.front().normal.size());
                               },
                               [](const NotchedBox&) { return 2; }},
                    shape);
}

Domain make_half_space(Vector inward_normal, double offset) {
  const double norm = inward_normal.norm();
  if (!(norm > 0.0)) throw Error("half_space normal must be nonzero");
  Vector n = inward_normal / norm;
  Domain d;
  d.shape = HalfSpace{n, offset / norm};
  d.r0 = 1e6;
  d.c0 = 0.5;
  d.gamma = 1.0;
  d.phi = {[n](const Vector& x) { return n.dot(x); }, [n](const Vector&) -> Vector { return n; }};
  d.cone = ConeCondition{1.0, 1.0};
  return d;
}

Domain make_ball(Vector center, double radius) {
  if (!(radius > 0.0)) throw Error("ball radius must be positive");
  Domain d;
  const int dim = static_cast<int>(center.size());
  d.shape = Ball{center, radius};
  d.r0 = 1e6;
  d.c0 = 0.5;
  d.gamma = 1.0;
  d.phi = quadratic_well(center);
  // normals at boundary points within delta differ by at most the angle
  // subtended by a chord of length delta
  const double delta = 0.25 * radius;
  d.cone = ConeCondition{delta, 1.01 / (1.0 - 0.5 * (delta / radius) * (delta / radius))};
  if (dim == 2) {
    const int patches = 16;
    const double cover_radius = 1.01 * 2.0 * radius * std::sin(std::numbers::pi / (2.0 * patches));
    const double ratio = cover_radius / radius;
    for (int i = 0; i < patches; ++i) {
      const double angle = 2.0 * std::numbers::pi * i / patches;
      Vector u(2);
      u << std::cos(angle), std::sin(angle);
      d.cover.push_back({center + radius * u, -u, 0.98 * (1.0 - 2.0 * ratio * ratio), cover_radius});
    }
  }
  return d;
}

Domain make_axis_box(Vector lower, Vector upper) {
  if (lower.size() != upper.size() || !((upper - lower).array() > 0.0).all()) {
    throw Error("axis_box requires lower < upper componentwise");
  }
  Domain d;
  const int dim = static_cast<int>(lower.size());
  d.shape = AxisBox{lower, upper};
  d.r0 = 1e6;
  d.c0 = 0.5;
  d.gamma = 1.0;
  d.phi = quadratic_well(0.5 * (lower + upper));
  const double side = (upper - lower).minCoeff();
  d.cone = ConeCondition{0.25 * side, 1.01 * std::sqrt(static_cast<double>(dim))};
  if (dim == 2) {
    // corner patches with the diagonal direction, edge patches with the face
    // normal kept at distance >= 2R from the neighbouring edges
    const double radius = side / 8.0;
    for (int corner = 0; corner < 4; ++corner) {
      Vector x(2), a(2);
      x << ((corner & 1) ? upper(0) : lower(0)), ((corner & 2) ? upper(1) : lower(1));
      a << ((corner & 1) ? -1.0 : 1.0), ((corner & 2) ? -1.0 : 1.0);
      d.cover.push_back({x, a.normalized(), 0.7, radius});
    }
    for (int axis = 0; axis < 2; ++axis) {
      const int other = 1 - axis;
      for (int side_index = 0; side_index < 2; ++side_index) {
        const double level = side_index == 0 ? lower(axis) : upper(axis);
        Vector a = Vector::Zero(2);
        a(axis) = side_index == 0 ? 1.0 : -1.0;
        const double from = lower(other) + 2.0 * radius;
        const double to = upper(other) - 2.0 * radius;
        const int count = std::max(1, static_cast<int>(std::ceil((to - from) / (1.5 * radius))) + 1);
        for (int k = 0; k < count; ++k) {
          Vector x(2);
          x(axis) = level;
          x(other) = count == 1 ? 0.5 * (from + to) : from + (to - from) * k / (count - 1);
          d.cover.push_back({x, a, 0.99, radius});
        }
      }
    }
  }
  return d;
}

Domain make_convex_polytope(std::vector<Facet> facets) {
  if (facets.empty()) throw Error("convex_polytope needs at least one facet");
  for (auto& f : facets) {
    const double norm = f.normal.norm();
    if (!(norm > 0.0)) throw Error("convex_polytope facet normal must be nonzero");
    f.normal /= norm;
    f.offset /= norm;
  }
  Domain d;
  ConvexPolytope poly{std::move(facets)};
  const auto vertices = polytope_vertices(poly);
  Vector center = Vector::Zero(poly.facets.front().normal.size());
  for (const auto& v : vertices) center += v;
  if (!vertices.empty()) center /= static_cast<double>(vertices.size());
  d.shape = std::move(poly);
  d.r0 = 1e6;
  d.c0 = 0.5;
  d.gamma = 1.0;
  d.phi = quadratic_well(center);
  return d;
}

Domain make_notched_disc(Vector lower, Vector upper, Vector notch_center, double notch_radius) {
  if (lower.size() != 2 || upper.size() != 2 || notch_center.size() != 2) {
    throw Error("notched_disc is planar: lower, upper and notch center must have 2 coordinates");
  }
  if (!((upper - lower).array() > 2.0 * notch_radius).all() || !(notch_radius > 0.0)) {
    throw Error("notched_disc requires a positive notch radius smaller than half the box sides");
  }
  Domain d;
  const double rho = notch_radius;
  d.shape = NotchedBox{AxisBox{lower, upper}, notch_center, rho};
  d.r0 = rho;
  d.c0 = 1.0 / (2.0 * rho);
  // phi = -|x - m|^2/2 - rho exp(-|x - c|^2 / (2 rho^2)); the second term
  // makes <D phi, n> positive along the arc, including at the arc/edge
  // junctions where the box part alone is negative
  const Vector middle = 0.5 * (lower + upper);
  const double amplitude = rho;
  d.phi = {[=](const Vector& x) {
             return -0.5 * (x - middle).squaredNorm() -
                    amplitude * std::exp(-(x - notch_center).squaredNorm() / (2.0 * rho * rho));
           },
           [=](const Vector& x) -> Vector {
             const Vector r = x - notch_center;
             const double bump = amplitude * std::exp(-r.squaredNorm() / (2.0 * rho * rho)) / (rho * rho);
             return (middle - x) + bump * r;
           }};
  d.gamma = 0.1;
  d.cone = ConeCondition{0.25 * rho, 2.0};
  return d;
}

Membership contains(const Domain& domain, const Vector& x) {
  const double sd = std::visit(
      Overloaded{[&](const HalfSpace& s) { return s.offset - s.normal.dot(x); },
                 [&](const Ball& s) { return (x - s.center).norm() - s.radius; },
                 [&](const AxisBox& s) { return box_signed_distance(s, x); },
                 [&](const ConvexPolytope& s) {
                   const double inner = polytope_interior_sd(s, x);
                   if (inner <= 0.0) return inner;
                   return (polytope_project(s, x) - x).norm();
                 },
                 [&](const NotchedBox& s) {
                   const double box_sd = box_signed_distance(s.box, x);
                   const double disc_sd = s.notch_radius - (x - s.notch_center).norm();
                   if (box_sd <= 0.0 && disc_sd <= 0.0) return std::max(box_sd, disc_sd);
                   return notched_project(s, x, false).distance;
                 }},
      domain.shape);
  return classify(sd, x);
}

Projection project(const Domain& domain, const Vector& y) {
  const auto n = y.size();
  return std::visit(
      Overloaded{[&](const HalfSpace& s) -> Projection {
                   const double gap = s.normal.dot(y) - s.offset;
                   if (gap >= 0.0) return {y, Vector::Zero(n), 0.0};
                   return {y - gap * s.normal, s.normal, -gap};
                 },
                 [&](const Ball& s) -> Projection {
                   const Vector r = y - s.center;
                   const double norm = r.norm();
                   if (norm <= s.radius) return {y, Vector::Zero(n), 0.0};
                   const Vector u = r / norm;
                   return {s.center + s.radius * u, -u, norm - s.radius};
                 },
                 [&](const AxisBox& s) -> Projection {
                   const Vector x = clamp_to_box(s, y);
                   const double dist = (x - y).norm();
                   if (dist == 0.0) return {y, Vector::Zero(n), 0.0};
                   return {x, (x - y) / dist, dist};
                 },
                 [&](const ConvexPolytope& s) -> Projection {
                   if (polytope_feasible(s, y, 0.0)) return {y, Vector::Zero(n), 0.0};
                   const Vector x = polytope_project(s, y);
                   const double dist = (x - y).norm();
                   if (dist == 0.0) return {y, Vector::Zero(n), 0.0};
                   return {x, (x - y) / dist, dist};
                 },
                 [&](const NotchedBox& s) -> Projection { return notched_project(s, y, true); }},
      domain.shape);
}

std::vector<Vector> active_normals(const Domain& domain, const Vector& x, double tolerance) {
  std::vector<Vector> out;
  std::visit(Overloaded{[&](const HalfSpace& s) {
                          if (std::abs(s.normal.dot(x) - s.offset) <= tolerance) out.push_back(s.normal);
                        },
                        [&](const Ball& s) {
                          const Vector r = x - s.center;
                          if (std::abs(r.norm() - s.radius) <= tolerance) out.push_back(-r.normalized());
                        },
                        [&](const AxisBox& s) {
                          for (int k = 0; k < x.size(); ++k) {
                            if (std::abs(x(k) - s.lower(k)) <= tolerance) out.push_back(Vector::Unit(x.size(), k));
                            if (std::abs(x(k) - s.upper(k)) <= tolerance) out.push_back(-Vector::Unit(x.size(), k));
                          }
                        },
                        [&](const ConvexPolytope& s) {
                          for (const auto& f : s.facets) {
                            if (std::abs(f.normal.dot(x) - f.offset) <= tolerance) out.push_back(-f.normal);
                          }
                        },
                        [&](const NotchedBox& s) {
                          for (int k = 0; k < 2; ++k) {
                            if (std::abs(x(k) - s.box.lower(k)) <= tolerance) out.push_back(Vector::Unit(2, k));
                            if (std::abs(x(k) - s.box.upper(k)) <= tolerance) out.push_back(-Vector::Unit(2, k));
                          }
                          const Vector r = x - s.notch_center;
                          if (std::abs(r.norm() - s.notch_radius) <= tolerance && in_box(s.box, x, tolerance)) {
                            out.push_back(r.normalized());
                          }
                        }},
             domain.shape);
  return out;
}

Vector inward_normal(const Domain& domain, const Vector& x) {
  const auto normals = active_normals(domain, x);
  if (normals.empty()) return Vector::Zero(x.size());
  Vector sum = Vector::Zero(x.size());
  for (const auto& n : normals) sum += n;
  const double norm = sum.norm();
  return norm > 0.0 ? Vector(sum / norm) : normals.front();
}

std::vector<Vector> polytope_vertices(const ConvexPolytope& polytope) {
  std::vector<Vector> vertices;
  if (polytope.facets.empty()) return vertices;
  const int d = static_cast<int>(polytope.facets.front().normal.size());
  const int m = static_cast<int>(polytope.facets.size());
  for_each_subset(m, d, [&](const std::vector<int>& subset) {
    if (static_cast<int>(subset.size()) != d) return;
    Matrix a(d, d);
    Vector b(d);
    for (int k = 0; k < d; ++k) {
      a.row(k) = polytope.facets[subset[k]].normal.transpose();
      b(k) = polytope.facets[subset[k]].offset;
    }
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.rank() < d) return;
    const Vector v = lu.solve(b);
    if (!polytope_feasible(polytope, v, 1e-9 * std::max(1.0, v.norm()))) return;
    for (const auto& existing : vertices) {
      if ((existing - v).norm() <= 1e-9) return;
    }
    vertices.push_back(v);
  });
  return vertices;
}

// ---------------------------------------------------------------------------

std::string to_string(Condition condition) {
  switch (condition) {
    case Condition::A: return "A";
    case Condition::B: return "B";
    case Condition::C: return "C";
    case Condition::D: return "D";
    case Condition::H1: return "H1";
    case Condition::H2: return "H2";
  }
  return "?";
}

bool ConditionReport::all_passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& kv) { return kv.second.passed; });
}

namespace {

class UniformDraws {
 public:
  UniformDraws(std::uint64_t seed, std::uint64_t tag) : stream_(seed, tag) {}
  double next() { return stream_.uniform(index_++); }
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }
  double normal() { return stream_.normal(index_++); }
  Vector direction(int d) {
    Vector v(d);
    do {
      for (int k = 0; k < d; ++k) v(k) = normal();
    } while (v.norm() < 1e-12);
    return v.normalized();
  }

 private:
  RandomStream stream_;
  std::uint64_t index_ = 0;
};

struct Window {
  Vector lower;
  Vector upper;
};

// Bounding box used for sampling; half-spaces are cut to a window around
// the boundary point nearest to the origin.
Window sampling_window(const Domain& domain) {
  constexpr double kHalfWidth = 5.0;
  return std::visit(Overloaded{[&](const HalfSpace& s) -> Window {
                                 const Vector base = s.offset * s.normal;
                                 return {base.array() - kHalfWidth, base.array() + kHalfWidth};
                               },
                               [&](const Ball& s) -> Window {
                                 return {s.center.array() - s.radius, s.center.array() + s.radius};
                               },
                               [&](const AxisBox& s) -> Window { return {s.lower, s.upper}; },
                               [&](const ConvexPolytope& s) -> Window {
                                 const auto vertices = polytope_vertices(s);
                                 const int d = static_cast<int>(s.facets.front().normal.size());
                                 if (vertices.empty()) {
                                   return {Vector::Constant(d, -kHalfWidth), Vector::Constant(d, kHalfWidth)};
                                 }
                                 Vector lo = vertices.front(), hi = vertices.front();
                                 for (const auto& v : vertices) {
                                   lo = lo.cwiseMin(v);
                                   hi = hi.cwiseMax(v);
                                 }
                                 return {lo, hi};
                               },
                               [&](const NotchedBox& s) -> Window { return {s.box.lower, s.box.upper}; }},
                    domain.shape);
}

std::vector<Vector> cone_samples(const Domain& domain, const Vector& x, UniformDraws& draws) {
  auto generators = active_normals(domain, x, 1e-9);
  if (generators.size() <= 1) return generators;
  std::vector<Vector> out = generators;
  for (int k = 0; k < 6; ++k) {
    Vector combo = Vector::Zero(x.size());
    for (const auto& g : generators) combo += draws.next() * g;
    if (combo.norm() > 1e-12) out.push_back(combo.normalized());
  }
  return out;
}

}  // namespace

std::vector<Vector> sample_boundary(const Domain& domain, std::size_t count, std::uint64_t seed) {
  UniformDraws draws(seed, 0xB0B);
  std::vector<Vector> out;
  out.reserve(count);
  const int d = domain.dim();
  std::visit(
      Overloaded{[&](const HalfSpace& s) {
                   // orthonormal basis of the hyperplane from a QR of the normal
                   Eigen::MatrixXd n(d, 1);
                   n.col(0) = s.normal;
                   const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(n).householderQ();
                   while (out.size() < count) {
                     Vector p = s.offset * s.normal;
                     for (int k = 1; k < d; ++k) p += draws.next(-5.0, 5.0) * Vector(q.col(k));
                     out.push_back(p);
                   }
                 },
                 [&](const Ball& s) {
                   while (out.size() < count) out.push_back(s.center + s.radius * draws.direction(d));
                 },
                 [&](const AxisBox& s) {
                   for (int corner = 0; corner < (1 << d) && out.size() < count; ++corner) {
                     Vector p(d);
                     for (int k = 0; k < d; ++k) p(k) = (corner >> k) & 1 ? s.upper(k) : s.lower(k);
                     out.push_back(p);
                   }
                   while (out.size() < count) {
                     Vector p(d);
                     for (int k = 0; k < d; ++k) p(k) = draws.next(s.lower(k), s.upper(k));
                     const int face = std::min(2 * d - 1, static_cast<int>(draws.next() * 2 * d));
                     p(face / 2) = face % 2 == 0 ? s.lower(face / 2) : s.upper(face / 2);
                     out.push_back(p);
                   }
                 },
                 [&](const ConvexPolytope& s) {
                   const auto vertices = polytope_vertices(s);
                   for (const auto& v : vertices) {
                     if (out.size() < count) out.push_back(v);
                   }
                   Vector center = Vector::Zero(d);
                   for (const auto& v : vertices) center += v;
                   if (!vertices.empty()) center /= static_cast<double>(vertices.size());
                   // ray casting from the vertex centroid
                   std::size_t guard = 0;
                   while (out.size() < count && guard++ < 100 * count + 100) {
                     const Vector u = draws.direction(d);
                     double t = std::numeric_limits<double>::infinity();
                     for (const auto& f : s.facets) {
                       const double rate = f.normal.dot(u);
                       if (rate > 1e-14) t = std::min(t, (f.offset - f.normal.dot(center)) / rate);
                     }
                     if (std::isfinite(t)) out.push_back(center + t * u);
                   }
                 },
                 [&](const NotchedBox& s) {
                   const AxisBox& box = s.box;
                   for (int corner = 0; corner < 4 && out.size() < count; ++corner) {
                     Vector q(2);
                     q << ((corner & 1) ? box.upper(0) : box.lower(0)), ((corner & 2) ? box.upper(1) : box.lower(1));
                     if ((q - s.notch_center).norm() >= s.notch_radius) out.push_back(q);
                   }
                   for (const auto& q : notched_candidates(s, s.notch_center + Vector::Constant(2, 1e-7))) {
                     // arc/edge junctions are among the candidates of a point near the center
                     const bool on_edge = std::abs(box_signed_distance(box, q)) < 1e-12;
                     const bool on_arc = std::abs((q - s.notch_center).norm() - s.notch_radius) < 1e-12;
                     if (on_edge && on_arc && out.size() < count) out.push_back(q);
                   }
                   while (out.size() < count) {
                     const int piece = std::min(4, static_cast<int>(draws.next() * 5));
                     Vector p(2);
                     if (piece < 4) {
                       const int axis = piece / 2;
                       p(axis) = piece % 2 == 0 ? box.lower(axis) : box.upper(axis);
                       p(1 - axis) = draws.next(box.lower(1 - axis), box.upper(1 - axis));
                       if ((p - s.notch_center).norm() < s.notch_radius) continue;
                     } else {
                       const double angle = draws.next(0.0, 2.0 * std::numbers::pi);
                       p << s.notch_center(0) + s.notch_radius * std::cos(angle),
                           s.notch_center(1) + s.notch_radius * std::sin(angle);
                       if (!in_box(box, p, 0.0)) continue;
                     }
                     out.push_back(p);
                   }
                 }},
      domain.shape);
  return out;
}

std::vector<Vector> sample_closure(const Domain& domain, std::size_t count, std::uint64_t seed) {
  UniformDraws draws(seed, 0xC10);
  const int d = domain.dim();
  std::vector<Vector> out;
  out.reserve(count);
  if (const auto* s = std::get_if<HalfSpace>(&domain.shape)) {
    const auto base = sample_boundary(domain, count, derive_seed(seed, 1));
    for (const auto& p : base) out.push_back(p + draws.next(0.0, 5.0) * s->normal);
    return out;
  }
  const Window window = sampling_window(domain);
  std::size_t guard = 0;
  while (out.size() < count && guard++ < 1000 * count + 1000) {
    Vector p(d);
    for (int k = 0; k < d; ++k) p(k) = draws.next(window.lower(k), window.upper(k));
    if (contains(domain, p).location != Location::exterior) out.push_back(p);
  }
  return out;
}

ConditionReport check_conditions(const Domain& domain, const ConditionSampling& sampling) {
  if (sampling.boundary_samples == 0 || sampling.pair_samples == 0) {
    throw Error("check_conditions needs at least one boundary and one pair sample");
  }
  std::vector<Condition> wanted = sampling.conditions;
  if (wanted.empty()) {
    wanted = {Condition::A, Condition::C, Condition::H1, Condition::H2};
    if (domain.cone) wanted.push_back(Condition::B);
    if (!domain.cover.empty()) wanted.push_back(Condition::D);
  }
  auto requested = [&](Condition c) { return std::find(wanted.begin(), wanted.end(), c) != wanted.end(); };
  if (requested(Condition::B) && !domain.cone) throw UnsupportedKind("condition B needs cone metadata (delta, beta)");
  if (requested(Condition::D) && domain.cover.empty()) throw UnsupportedKind("condition D needs boundary cover metadata");
  if ((requested(Condition::C) || requested(Condition::H2)) && !domain.phi.gradient) {
    throw UnsupportedKind("conditions C and H2 need the function phi");
  }

  const auto boundary = sample_boundary(domain, sampling.boundary_samples, sampling.seed);
  const auto closure = sample_closure(domain, sampling.pair_samples, derive_seed(sampling.seed, 2));
  UniformDraws draws(sampling.seed, 0xC0E);

  std::vector<std::vector<Vector>> cones(boundary.size());
  for (std::size_t i = 0; i < boundary.size(); ++i) cones[i] = cone_samples(domain, boundary[i], draws);

  ConditionReport report;
  auto update = [&](Condition c, double value) {
    auto& r = report.results[c];
    if (r.evaluations == 0 || value < r.margin) r.margin = value;
    ++r.evaluations;
  };
  for (Condition c : wanted) report.results[c] = ConditionResult{};

  // pairwise inequalities in (x, y, n)
  const double window = [&] {
    const Window w = sampling_window(domain);
    return (w.upper - w.lower).maxCoeff();
  }();
  auto pair_checks = [&](const Vector& x, const Vector& y, const std::vector<Vector>& normals) {
    const Vector diff = y - x;
    const double sq = diff.squaredNorm();
    const Vector grad = domain.phi.gradient ? domain.phi.gradient(x) : Vector::Zero(x.size());
    for (const auto& n : normals) {
      const double inner = diff.dot(n);
      if (requested(Condition::A)) update(Condition::A, inner + sq / (2.0 * domain.r0));
      if (requested(Condition::H1)) update(Condition::H1, inner + domain.c0 * sq);
      if (requested(Condition::C)) update(Condition::C, inner + grad.dot(n) * sq / domain.gamma);
    }
  };
  for (std::size_t j = 0; j < sampling.pair_samples; ++j) {
    const std::size_t i = j % boundary.size();
    const Vector& x = boundary[i];
    if (cones[i].empty()) continue;
    pair_checks(x, closure[j % closure.size()], cones[i]);
    pair_checks(x, boundary[(i * 7919 + j) % boundary.size()], cones[i]);
    // a nearby closure point, the binding case near concave boundary pieces
    const Vector local = project(domain, Vector(x + draws.next(0.0, 0.3 * window) * draws.direction(x.size()))).point;
    pair_checks(x, local, cones[i]);
  }

  for (std::size_t i = 0; i < boundary.size(); ++i) {
    if (requested(Condition::H2)) {
      const Vector grad = domain.phi.gradient(boundary[i]);
      for (const auto& n : cones[i]) update(Condition::H2, grad.dot(n));
    }
    if (requested(Condition::D)) {
      double covered = -std::numeric_limits<double>::infinity();
      for (const auto& patch : domain.cover) {
        const double dist = (boundary[i] - patch.center).norm();
        covered = std::max(covered, patch.radius - dist);
        if (dist < 2.0 * patch.radius) {
          for (const auto& n : cones[i]) update(Condition::D, n.dot(patch.direction) - patch.lambda);
        }
      }
      update(Condition::D, covered);
    }
  }

  if (requested(Condition::B)) {
    const double delta = domain.cone->delta;
    const std::size_t limit = std::min<std::size_t>(boundary.size(), 1500);
    const int d = domain.dim();
    for (std::size_t i = 0; i < limit; ++i) {
      std::vector<Vector> near;
      for (std::size_t k = 0; k < limit; ++k) {
        if ((boundary[k] - boundary[i]).norm() < delta) near.insert(near.end(), cones[k].begin(), cones[k].end());
      }
      if (near.empty()) continue;
      std::vector<Vector> candidates = near;
      Vector mean = Vector::Zero(d);
      for (const auto& n : near) mean += n;
      if (mean.norm() > 1e-12) candidates.push_back(mean.normalized());
      if (d == 2) {
        for (int a = 0; a < 720; ++a) {
          Vector u(2);
          u << std::cos(a * std::numbers::pi / 360.0), std::sin(a * std::numbers::pi / 360.0);
          candidates.push_back(u);
        }
      }
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& l : candidates) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& n : near) worst = std::min(worst, l.dot(n));
        best = std::max(best, worst);
      }
      update(Condition::B, best - 1.0 / domain.cone->beta);
    }
  }

  for (auto& [condition, result] : report.results) {
    if (result.evaluations == 0) {
      result.passed = false;
      continue;
    }
    // H2 asks for some alpha > 0 with D phi . n >= alpha c0, i.e. a strictly
    // positive minimum
    result.passed = condition == Condition::H2 ? result.margin > 0.0 : result.margin >= -kConditionSlack;
  }
  return report;
}

}  // namespace reflectsim
