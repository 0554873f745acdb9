#include "reflectsim/cli.hpp"

#include "reflectsim/geometry.hpp"
#include "reflectsim/maxprinciple.hpp"
#include "reflectsim/montecarlo.hpp"
#include "reflectsim/random.hpp"
#include "reflectsim/rsde.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace reflectsim::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  long long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
  return out;
}

Vector to_vector(const std::string& key, const std::string& text, int dim) {
  const auto v = to_doubles(key, text);
  if (v.size() == 1) return Vector::Constant(dim, v[0]);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(key, "expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()));
  Vector out(dim);
  for (int i = 0; i < dim; ++i) out(i) = v[i];
  return out;
}

Vector to_free_vector(const std::string& key, const std::string& text) {
  const auto v = to_doubles(key, text);
  if (v.size() > static_cast<std::size_t>(kMaxDim)) throw ConfigError(key, "dimension exceeds " + std::to_string(kMaxDim));
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::string vector_text(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v(i));
  return s;
}

/// "name=value; name=value" with names restricted to `allowed`.
std::map<std::string, std::string> parse_params(const std::string& key, const std::string& text,
                                                const std::set<std::string>& allowed) {
  std::map<std::string, std::string> out;
  for (const auto& item : split(text, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(key, "expected name=value, got '" + item + "'");
    const auto name = trim(item.substr(0, eq));
    if (!allowed.count(name)) throw ConfigError(key, "unknown parameter '" + name + "'");
    if (!out.emplace(name, trim(item.substr(eq + 1))).second)
      throw ConfigError(key, "parameter '" + name + "' given twice");
  }
  return out;
}

std::string param_or(const std::map<std::string, std::string>& p, const std::string& name, const std::string& fallback) {
  const auto it = p.find(name);
  return it == p.end() ? fallback : it->second;
}

/// Reads one section, records every value it hands out (defaults included)
/// and rejects the keys nobody asked for.
class Section {
 public:
  Section(std::string name, const RawConfig& raw, ResolvedConfig& out) : name_(std::move(name)), out_(out) {
    const auto it = raw.find(name_);
    if (it != raw.end()) values_ = &it->second;
  }

  std::string key(const std::string& k) const { return name_ + "." + k; }

  std::optional<std::string> maybe(const std::string& k) {
    used_.insert(k);
    if (!values_) return std::nullopt;
    const auto it = values_->find(k);
    if (it == values_->end()) return std::nullopt;
    return trim(it->second);
  }

  std::string text(const std::string& k, const std::string& fallback) {
    const auto v = maybe(k).value_or(fallback);
    record(k, v);
    return v;
  }

  void record(const std::string& k, const std::string& value) { out_.entries.push_back({name_, k, value}); }

  double real(const std::string& k, const std::string& fallback) { return to_double(key(k), text(k, fallback)); }

  double positive(const std::string& k, const std::string& fallback) {
    const double v = real(k, fallback);
    if (!(v > 0.0)) throw ConfigError(key(k), "must be positive");
    return v;
  }

  int integer(const std::string& k, const std::string& fallback, long long lo, long long hi) {
    const auto v = to_integer(key(k), text(k, fallback));
    if (v < lo || v > hi)
      throw ConfigError(key(k), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

  std::size_t count(const std::string& k, const std::string& fallback, std::size_t lo) {
    const auto v = to_integer(key(k), text(k, fallback));
    if (v < static_cast<long long>(lo)) throw ConfigError(key(k), "must be at least " + std::to_string(lo));
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& k, const std::string& fallback) {
    const auto v = text(k, fallback);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(key(k), "expected true or false, got '" + v + "'");
  }

  std::vector<double> positives(const std::string& k, const std::string& fallback) {
    auto v = to_doubles(key(k), text(k, fallback));
    for (double x : v)
      if (!(x > 0.0)) throw ConfigError(key(k), "every entry must be positive, got " + fmt(x));
    return v;
  }

  std::vector<double> decreasing(const std::string& k, const std::string& fallback) {
    auto v = positives(k, fallback);
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] < v[i - 1])) throw ConfigError(key(k), "must be strictly decreasing");
    return v;
  }

  std::vector<int> levels(const std::string& k, const std::string& fallback) {
    std::vector<int> out;
    for (const auto& item : split(text(k, fallback), ',')) {
      const auto v = to_integer(key(k), item);
      if (v < 1 || v > 24) throw ConfigError(key(k), "levels must lie in [1, 24]");
      if (!out.empty() && v <= out.back()) throw ConfigError(key(k), "levels must be strictly increasing");
      out.push_back(static_cast<int>(v));
    }
    if (out.size() < 2) throw ConfigError(key(k), "at least two levels are required");
    return out;
  }

  void finish() const {
    if (!values_) return;
    for (const auto& [k, v] : *values_) {
      if (used_.count(k)) continue;
      for (const auto& known : used_)
        if (known.size() > k.size() && known.compare(0, k.size(), k) == 0)
          throw ConfigError(key(k), "unknown key (did you mean '" + known + "'?)");
      throw ConfigError(key(k), "unknown key");
    }
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* values_ = nullptr;
  std::set<std::string> used_;
  ResolvedConfig& out_;
};

// ---------------------------------------------------------------------------
// Domain and coefficients.

std::string default_domain_params(const std::string& kind) {
  if (kind == "half_space") return "normal=1; offset=0";
  if (kind == "ball") return "center=0,0; radius=1";
  if (kind == "axis_box") return "lower=0,0; upper=1,1";
  if (kind == "convex_polytope") return "facets=1,0,1 | -1,0,0 | 0,1,1 | 0,-1,0";
  if (kind == "notched_disc") return "lower=-1,-1; upper=1,1; notch_center=0,-1; notch_radius=0.25";
  throw ConfigError("domain.kind", "unknown domain kind '" + kind + "'");
}

Domain build_domain(Section& s) {
  const auto kind = s.text("kind", "half_space");
  const auto text = s.text("params", default_domain_params(kind));
  const auto key = s.key("params");
  Domain dom;
  auto need = [&](const std::map<std::string, std::string>& p, const std::string& name) {
    const auto it = p.find(name);
    if (it == p.end()) throw ConfigError(key, "missing parameter '" + name + "'");
    return it->second;
  };
  if (kind == "half_space") {
    const auto p = parse_params(key, text, {"normal", "offset"});
    const auto n = to_free_vector(key, need(p, "normal"));
    if (!(n.norm() > 0.0)) throw ConfigError(key, "normal must be nonzero");
    dom = make_half_space(n, to_double(key, param_or(p, "offset", "0")));
  } else if (kind == "ball") {
    const auto p = parse_params(key, text, {"center", "radius"});
    const double r = to_double(key, need(p, "radius"));
    if (!(r > 0.0)) throw ConfigError(key, "radius must be positive");
    dom = make_ball(to_free_vector(key, need(p, "center")), r);
  } else if (kind == "axis_box") {
    const auto p = parse_params(key, text, {"lower", "upper"});
    const auto lo = to_free_vector(key, need(p, "lower"));
    const auto hi = to_free_vector(key, need(p, "upper"));
    if (lo.size() != hi.size() || !((hi - lo).minCoeff() > 0.0))
      throw ConfigError(key, "need lower < upper componentwise");
    dom = make_axis_box(lo, hi);
  } else if (kind == "convex_polytope") {
    const auto p = parse_params(key, text, {"facets"});
    std::vector<Facet> facets;
    for (const auto& f : split(need(p, "facets"), '|')) {
      const auto v = to_free_vector(key, f);
      if (v.size() < 2) throw ConfigError(key, "a facet is n1,...,nd,offset");
      Facet facet{v.head(v.size() - 1), v(v.size() - 1)};
      if (!(facet.normal.norm() > 0.0)) throw ConfigError(key, "facet normals must be nonzero");
      if (!facets.empty() && facet.normal.size() != facets.front().normal.size())
        throw ConfigError(key, "facets have different dimensions");
      facets.push_back(facet);
    }
    if (facets.empty()) throw ConfigError(key, "no facets");
    dom = make_convex_polytope(std::move(facets));
  } else if (kind == "notched_disc") {
    const auto p = parse_params(key, text, {"lower", "upper", "notch_center", "notch_radius"});
    const double r = to_double(key, need(p, "notch_radius"));
    if (!(r > 0.0)) throw ConfigError(key, "notch_radius must be positive");
    dom = make_notched_disc(to_vector(key, need(p, "lower"), 2), to_vector(key, need(p, "upper"), 2),
                            to_vector(key, need(p, "notch_center"), 2), r);
  } else {
    throw ConfigError(s.key("kind"), "unknown domain kind '" + kind + "'");
  }
  if (dom.dim() > kMaxDim) throw ConfigError(key, "dimension exceeds " + std::to_string(kMaxDim));

  auto constant = [&](const char* name, double& slot) {
    if (const auto v = s.maybe(name)) {
      slot = to_double(s.key(name), *v);
      if (!(slot > 0.0)) throw ConfigError(s.key(name), "must be positive");
    }
    s.record(name, fmt(slot));
  };
  constant("r0", dom.r0);
  constant("c0", dom.c0);
  constant("gamma", dom.gamma);
  return dom;
}

Coefficients build_coefficients(Section& s, int d) {
  const auto kind = s.text("sigma", "const");
  const auto key = s.key("params");
  std::string fallback = "diag=1";
  if (kind == "affine" || kind == "sin") fallback = "a=0.5; c=0.25";
  else if (kind != "const") throw ConfigError(s.key("sigma"), "unknown sigma kind '" + kind + "' (const, affine, sin)");
  const auto params = s.text("params", fallback);
  const auto drift_kind = s.text("drift", "zero");
  const auto dkey = s.key("drift_params");

  DriftSpec drift = zero_drift(d);
  if (drift_kind == "zero") {
    const auto p = parse_params(dkey, s.text("drift_params", ""), {});
    (void)p;
  } else if (drift_kind == "const" || drift_kind == "linear") {
    const bool linear = drift_kind == "linear";
    const auto p = parse_params(dkey, s.text("drift_params", linear ? "offset=0; rate=0" : "offset=0"),
                                linear ? std::set<std::string>{"offset", "rate"} : std::set<std::string>{"offset"});
    drift.offset = to_vector(dkey, param_or(p, "offset", "0"), d);
    drift.rate = linear ? to_double(dkey, param_or(p, "rate", "0")) : 0.0;
  } else {
    throw ConfigError(s.key("drift"), "unknown drift kind '" + drift_kind + "' (zero, const, linear)");
  }

  if (kind == "const") {
    const auto p = parse_params(key, params, {"diag", "matrix"});
    if (p.size() != 1) throw ConfigError(key, "give exactly one of diag or matrix");
    Matrix m;
    if (p.count("diag")) {
      m = to_vector(key, p.at("diag"), d).asDiagonal();
    } else {
      const auto rows = split(p.at("matrix"), '|');
      if (static_cast<int>(rows.size()) != d) throw ConfigError(key, "matrix needs " + std::to_string(d) + " rows");
      const auto first = to_free_vector(key, rows[0]);
      m.resize(d, first.size());
      for (int i = 0; i < d; ++i) {
        const auto r = to_free_vector(key, rows[static_cast<std::size_t>(i)]);
        if (r.size() != first.size()) throw ConfigError(key, "matrix rows have different lengths");
        m.row(i) = r.transpose();
      }
    }
    return make_constant_coefficients(m, drift);
  }
  if (kind == "affine" || kind == "sin") {
    const auto p = parse_params(key, params, {"a", "c"});
    const double a = to_double(key, param_or(p, "a", "0.5"));
    const double c = to_double(key, param_or(p, "c", "0.25"));
    return kind == "affine" ? make_affine_coefficients(d, a, c, drift) : make_sine_coefficients(d, a, c, drift);
  }
  throw ConfigError(s.key("sigma"), "unknown sigma kind '" + kind + "' (const, affine, sin)");
}

ControlSpec parse_control(const std::string& key, const std::string& text) {
  ControlSpec c;
  const auto colon = text.find(':');
  const auto head = trim(text.substr(0, colon));
  const auto tail = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
  if (head == "zero" && tail.empty()) return c;
  if (head == "linear") {
    c.kind = ControlSpec::Kind::linear;
    c.slope = to_free_vector(key, tail);
    return c;
  }
  if (head == "sine") {
    c.kind = ControlSpec::Kind::sine;
    std::string spec = tail;
    std::replace(spec.begin(), spec.end(), ',', ';');
    const auto p = parse_params(key, spec, {"axis", "amplitude", "frequency"});
    const auto axis = to_integer(key, param_or(p, "axis", "0"));
    if (axis < 0 || axis >= kMaxDim) throw ConfigError(key, "sine axis out of range");
    c.axis = static_cast<int>(axis);
    c.amplitude = to_double(key, param_or(p, "amplitude", "1"));
    c.frequency = to_double(key, param_or(p, "frequency", "1"));
    return c;
  }
  throw ConfigError(key, "expected zero, linear:<slope> or sine:axis=..,amplitude=..,frequency=.., got '" + text + "'");
}

ControlSpec control(Section& s, const std::string& k, const std::string& fallback, int d1) {
  const auto text = s.maybe(k).value_or(fallback);
  const auto c = parse_control(s.key(k), text);
  if (c.kind == ControlSpec::Kind::linear && c.slope.size() != 1 && c.slope.size() != d1)
    throw ConfigError(s.key(k), "linear slope needs 1 or " + std::to_string(d1) + " components");
  if (c.kind == ControlSpec::Kind::sine && c.axis >= d1)
    throw ConfigError(s.key(k), "sine axis must be below the driver dimension " + std::to_string(d1));
  s.record(k, to_string(c));
  return c;
}

CellScheme cell_scheme(Section& s) {
  const auto v = s.text("cell_scheme", "euler");
  if (v != "euler" && v != "heun") throw ConfigError(s.key("cell_scheme"), "expected euler or heun");
  return cell_scheme_from_string(v);
}

int fine_level(Section& s, const std::vector<int>& levels) {
  const int f = s.integer("fine_level", "-1", -1, 24);
  if (f == 0 || (f > 0 && f < levels.back()))
    throw ConfigError(s.key("fine_level"), "must be -1 or at least the largest level");
  return f;
}

TubeBudget budget(Section& s) {
  TubeBudget b;
  b.target_accepted = s.count("target_accepted", "2000", 2);
  b.max_attempts = s.count("max_attempts", "20000000", 1);
  b.pilot_attempts = s.count("pilot_attempts", "20000", 1);
  b.batch = s.count("batch", "4096", 1);
  return b;
}

Vector start_point(Section& s, const Domain& dom) {
  const auto x0 = to_vector(s.key("x0"), s.maybe("x0").value_or("0"), dom.dim());
  Membership m;
  try {
    m = contains(dom, x0);
  } catch (const Error& e) {
    throw ConfigError("domain.params", e.what());
  }
  if (m.location == Location::exterior)
    throw ConfigError(s.key("x0"), "start point lies outside the closed domain");
  s.record("x0", vector_text(x0));
  return x0;
}

std::vector<std::pair<double, double>> windows(Section& s) {
  const auto key = s.key("windows");
  std::vector<std::pair<double, double>> out;
  for (const auto& item : split(s.text("windows", "0:0.015625,0:0.03125,0:0.0625,0:0.125,0:0.25"), ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(key, "windows are s:t pairs");
    const double a = to_double(key, parts[0]);
    const double b = to_double(key, parts[1]);
    if (!(a >= 0.0 && b > a)) throw ConfigError(key, "windows must satisfy 0 <= s < t");
    out.emplace_back(a, b);
  }
  if (out.size() < 2) throw ConfigError(key, "at least two windows are required");
  return out;
}

std::vector<Condition> conditions(Section& s) {
  const auto v = s.text("conditions", "auto");
  std::vector<Condition> out;
  if (v == "auto") return out;
  for (const auto& item : split(v, ',')) {
    if (item == "A") out.push_back(Condition::A);
    else if (item == "B") out.push_back(Condition::B);
    else if (item == "C") out.push_back(Condition::C);
    else if (item == "D") out.push_back(Condition::D);
    else if (item == "H1") out.push_back(Condition::H1);
    else if (item == "H2") out.push_back(Condition::H2);
    else throw ConfigError(s.key("conditions"), "unknown condition '" + item + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments without a Monte Carlo loop of their own.

ExperimentReport conditions_report(const Domain& dom, const ConditionSampling& sampling) {
  const auto r = check_conditions(dom, sampling);
  ExperimentReport rep;
  rep.name = "check_conditions";
  rep.seeds = {{"seed", sampling.seed}};
  rep.table.columns = {"margin", "evaluations", "passed"};
  for (const auto& [c, res] : r.results) {
    rep.add_estimate("margin[" + to_string(c) + "]", res.margin, res.evaluations);
    rep.add_check("condition_" + to_string(c), res.passed, Basis::paper, "margin " + fmt(res.margin));
    rep.table.rows.push_back({res.margin, double(res.evaluations), res.passed ? 1.0 : 0.0});
  }
  rep.settle();
  return rep;
}

struct PathSettings {
  std::string scheme;
  int level = 8;
  int wz_level = 4;
  int substeps = 4;
  CellScheme cells = CellScheme::euler;
  ControlSpec control;
};

Outcome sample_path_outcome(const Problem& pb, const PathSettings& ps, const RunContext& ctx) {
  const auto grid = dyadic_grid(pb.horizon, ps.level);
  SkorohodSolution sol;
  if (ps.scheme == "skeleton") {
    sol = skeleton(pb.domain, pb.coeffs, build_control(ps.control, pb.coeffs.d1, grid),
                   ps.substeps, pb.x0, ps.cells);
  } else {
    const auto w = crn_driver(pb, ps.level, ctx.seed, 0);
    if (ps.scheme == "euler") sol = euler_reflected(pb.domain, pb.coeffs, w, pb.x0);
    else if (ps.scheme == "wong_zakai")
      sol = wong_zakai(pb.domain, pb.coeffs, w, ps.wz_level, ps.substeps, pb.horizon, pb.x0, ps.cells);
    else
      sol = shifted_driver(pb.domain, pb.coeffs, w, ps.wz_level, build_control(ps.control, pb.coeffs.d1, grid),
                           pb.horizon, pb.x0);
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < sol.x.values.cols(); ++i)
    worst = std::max(worst, contains(pb.domain, sol.x.values.col(i)).signed_distance);
  const auto last = sol.x.values.cols() - 1;

  Outcome o;
  auto& rep = o.report;
  rep.name = "sample_path";
  rep.seeds = {{"seed", ctx.seed},
               {"brownian_seed", derive_seed(ctx.seed, seed_tags::brownian)},
               {"streams", "stream 0"}};
  rep.add_estimate("total_variation", sol.tv.back());
  rep.add_estimate("max_signed_distance", worst);
  for (Eigen::Index k = 0; k < sol.x.values.rows(); ++k)
    rep.add_estimate("final_x[" + std::to_string(k + 1) + "]", sol.x.values(k, last));
  rep.table.columns = {"nodes", "total_variation", "max_signed_distance"};
  rep.table.rows = {{double(sol.x.times.size()), sol.tv.back(), worst}};
  rep.add_check("path_in_closure", worst <= 1e-9, Basis::policy, "max signed distance " + fmt(worst));
  rep.settle();
  std::ostringstream csv;
  write_csv(sol, csv);
  o.artifacts.push_back({"trajectory.csv", csv.str()});
  return o;
}

Outcome plain(ExperimentReport r) { return Outcome{std::move(r), {}}; }

RunContext context(const ResolvedConfig& c) { return {c.seed, c.workers}; }

}  // namespace

// ---------------------------------------------------------------------------

std::function<double(const Vector&)> scalar_function(const std::string& name) {
  if (name == "constant") return [](const Vector&) { return 1.0; };
  if (name == "norm_squared") return [](const Vector& x) { return x.squaredNorm(); };
  if (name == "neg_norm_squared") return [](const Vector& x) { return -x.squaredNorm(); };
  throw ConfigError("parameters.u", "unknown function '" + name + "' (constant, norm_squared, neg_norm_squared)");
}

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries{
      {"wz_convergence", "§3.2 Eq. (wzk)",
       "E sup|X - X^n| per level with common random numbers, rate fit and Holder distance", true,
       {"x0", "horizon", "levels", "paths", "fine_level", "substeps", "cell_scheme", "theta", "substep_replicate"}},
      {"skeleton_convergence", "Prop. 3.16",
       "E sup|Y^n - Z(h)|^2 per level and the node statistic against its bound", true,
       {"x0", "horizon", "levels", "paths", "fine_level", "theta", "control"}},
      {"approx_continuity", "Theorem 2.6",
       "P(|X - Y| + |K - l| < eps | |w - h| < delta) for shrinking delta", true,
       {"x0", "horizon", "control", "epsilon", "deltas", "level", "target_accepted", "max_attempts",
        "pilot_attempts", "batch"}},
      {"moment_scaling", "Lemma 3.3", "Exponents of the 2p-th moments of the path and regulator oscillations", true,
       {"x0", "windows", "p", "paths", "level"}},
      {"exp_tail", "Prop. 2.2", "Quadratic exponential tail of the regulator variation", true,
       {"x0", "horizon", "paths", "level", "tail_upper", "tail_lower", "fit_points"}},
      {"smallball_and_levy", "Lemma 2.1",
       "Brownian small-ball rate and tube-conditioned iterated integral exceedances", false,
       {"horizon", "dim", "deltas", "paths", "level", "levy_dim", "levy_horizon", "levy_deltas", "m_values",
        "epsilon", "alpha", "levy_level", "target_accepted", "max_attempts", "pilot_attempts", "batch"}},
      {"regulator_conditional", "Lemma 2.3",
       "Tube-conditioned exceedances of the regulator variation", true,
       {"x0", "horizon", "deltas", "c3", "epsilon", "level", "target_accepted", "max_attempts", "pilot_attempts",
        "batch"}},
      {"holder_tightness", "Prop. 3.6", "Per-level Holder norms of X^n and Y^n", true,
       {"x0", "horizon", "theta", "levels", "paths", "substeps", "cell_scheme", "include_shifted"}},
      {"support_inclusions", "Theorem 3.4", "Forward and reverse support inclusions", true,
       {"x0", "horizon", "level", "fine_level", "substeps", "cell_scheme", "paths", "reverse_control", "epsilon",
        "reverse_paths", "reverse_level"}},
      {"submartingale_test", "Definition 4.1", "Empirical monotonicity of t -> E u(X_t)", true,
       {"x0", "u", "times", "paths", "level"}},
      {"max_principle_check", "Theorem 4.2", "u constant on the sampled reachable set when maximal at x", true,
       {"x0", "horizon", "u", "controls", "tolerance", "segments", "max_slope", "substeps"}},
      {"check_conditions", "§2 (H1)", "Sampled verification of the boundary conditions", false,
       {"boundary_samples", "pair_samples", "conditions"}},
      {"sample_path", "Eq. (msde1)", "One reflected trajectory written as CSV", true,
       {"x0", "horizon", "scheme", "level", "wz_level", "substeps", "cell_scheme", "control"}},
  };
  return entries;
}

void list_experiments(std::ostream& out, bool as_json) {
  if (as_json) {
    json arr = json::array();
    for (const auto& e : catalog())
      arr.push_back({{"name", e.name}, {"anchor", e.anchor}, {"summary", e.summary}, {"keys", e.keys}});
    out << arr.dump(2) << "\n";
    return;
  }
  for (const auto& e : catalog()) {
    out << e.name << "  [" << e.anchor << "]  keys:";
    for (std::size_t i = 0; i < e.keys.size(); ++i) out << (i ? "," : " ") << e.keys[i];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------

RawConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  RawConfig raw;
  raw[""];
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      raw[""][name] = node.data();
    } else {
      auto& section = raw[name];
      for (const auto& [k, v] : node) section[k] = v.data();
    }
  }
  return raw;
}

RawConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open configuration file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_override(RawConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must be section.key=value");
  const auto path = trim(assignment.substr(0, eq));
  const auto dot = path.find('.');
  const auto section = dot == std::string::npos ? std::string{} : path.substr(0, dot);
  const auto key = dot == std::string::npos ? path : path.substr(dot + 1);
  if (key.empty()) throw ConfigError(path, "override must be section.key=value");
  config[section][key] = trim(assignment.substr(eq + 1));
}

const std::string* ResolvedConfig::find(const std::string& section, const std::string& key) const {
  for (const auto& e : entries)
    if (e.section == section && e.key == key) return &e.value;
  return nullptr;
}

nlohmann::json ResolvedConfig::parameters() const {
  json sections = json::object();
  for (const auto& e : entries) sections[e.section][e.key] = e.value;
  return {{"experiment", experiment}, {"seed", seed}, {"sections", sections}};
}

void ResolvedConfig::write_ini(std::ostream& out) const {
  out << "experiment = " << experiment << "\nseed = " << seed << "\nworkers = " << workers << "\noutput = " << output
      << "\n";
  std::vector<std::string> order;
  for (const auto& e : entries)
    if (std::find(order.begin(), order.end(), e.section) == order.end()) order.push_back(e.section);
  for (const auto& s : order) {
    out << "\n[" << s << "]\n";
    for (const auto& e : entries)
      if (e.section == s) out << e.key << " = " << e.value << "\n";
  }
}

PreparedRun prepare(const RawConfig& raw, const Options& options) {
  for (const auto& [name, keys] : raw)
    if (!name.empty() && name != "domain" && name != "coefficients" && name != "parameters")
      throw ConfigError(name, "unknown section");

  PreparedRun run;
  auto& cfg = run.config;
  Section top("", raw, cfg);
  const auto experiment = top.maybe("experiment");
  if (!experiment || experiment->empty()) throw ConfigError("experiment", "missing experiment name");
  cfg.experiment = *experiment;
  const auto entry = std::find_if(catalog().begin(), catalog().end(),
                                  [&](const CatalogEntry& e) { return e.name == cfg.experiment; });
  if (entry == catalog().end()) throw ConfigError("experiment", "unknown experiment '" + cfg.experiment + "'");

  const auto seed_text = top.maybe("seed");
  if (options.seed) {
    cfg.seed = *options.seed;
  } else if (seed_text) {
    const auto t = *seed_text;
    std::uint64_t v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size())
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    cfg.seed = v;
  }

  const auto workers_text = top.maybe("workers");
  if (options.workers) {
    cfg.workers = *options.workers;
  } else if (workers_text) {
    cfg.workers = static_cast<int>(to_integer("workers", *workers_text));
  } else if (const char* env = std::getenv("REFLECTSIM_WORKERS"); env && *env) {
    cfg.workers = static_cast<int>(to_integer("REFLECTSIM_WORKERS", env));
  }
  if (cfg.workers < 1 || cfg.workers > 1024) throw ConfigError("workers", "must lie in [1, 1024]");

  if (options.output) cfg.output = *options.output;
  else if (const auto o = top.maybe("output")) cfg.output = *o;
  if (cfg.output.empty()) throw ConfigError("output", "must not be empty");
  top.finish();

  const auto& name = cfg.experiment;
  const bool has_domain = entry->uses_problem || name == "check_conditions";
  if (!has_domain && raw.count("domain")) throw ConfigError("domain", name + " takes no domain section");
  if (!entry->uses_problem && raw.count("coefficients"))
    throw ConfigError("coefficients", name + " takes no coefficients section");

  Domain dom;
  if (has_domain) {
    Section ds("domain", raw, cfg);
    try {
      dom = build_domain(ds);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("domain.params", e.what());
    }
    ds.finish();
  }
  Problem pb;
  if (entry->uses_problem) {
    Section cs("coefficients", raw, cfg);
    pb.coeffs = build_coefficients(cs, dom.dim());
    cs.finish();
    pb.domain = dom;
  }

  Section s("parameters", raw, cfg);
  if (entry->uses_problem) pb.x0 = start_point(s, dom);
  auto horizon = [&] { pb.horizon = s.positive("horizon", "1"); };

  if (name == "wz_convergence") {
    horizon();
    WzParams p;
    p.levels = s.levels("levels", "4,5,6,7,8,9");
    p.paths = s.count("paths", "2000", 2);
    p.fine_level = fine_level(s, p.levels);
    p.substeps = s.integer("substeps", "4", 1, 1024);
    p.cell_scheme = cell_scheme(s);
    p.theta = s.positive("theta", "0.2");
    p.substep_replicate = s.flag("substep_replicate", "false");
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(wz_convergence(pb, p, context(c))); };
  } else if (name == "skeleton_convergence") {
    horizon();
    SkeletonParams p;
    p.levels = s.levels("levels", "4,5,6,7,8,9");
    p.paths = s.count("paths", "2000", 2);
    p.fine_level = fine_level(s, p.levels);
    p.theta = s.positive("theta", "0.5");
    p.control = control(s, "control", "sine:axis=0,amplitude=1,frequency=1", pb.coeffs.d1);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(skeleton_convergence(pb, p, context(c))); };
  } else if (name == "approx_continuity") {
    horizon();
    ApproxParams p;
    p.control = control(s, "control", "zero", pb.coeffs.d1);
    p.epsilon = s.positive("epsilon", "0.3");
    p.deltas = s.decreasing("deltas", "0.8,0.6,0.5");
    p.level = s.integer("level", "8", 1, 20);
    p.budget = budget(s);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(approx_continuity(pb, p, context(c))); };
  } else if (name == "moment_scaling") {
    MomentParams p;
    p.windows = windows(s);
    p.p = s.integer("p", "1", 1, 16);
    p.paths = s.count("paths", "10000", 2);
    p.level = s.integer("level", "12", 1, 20);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(moment_scaling(pb, p, context(c))); };
  } else if (name == "exp_tail") {
    horizon();
    ExpTailParams p;
    p.paths = s.count("paths", "100000", 2);
    p.level = s.integer("level", "10", 1, 20);
    p.tail_upper = s.positive("tail_upper", "0.1");
    p.tail_lower = s.positive("tail_lower", "0.001");
    if (!(p.tail_lower < p.tail_upper && p.tail_upper < 1.0))
      throw ConfigError(s.key("tail_lower"), "need tail_lower < tail_upper < 1");
    p.fit_points = s.count("fit_points", "20", 2);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(exp_tail(pb, p, context(c))); };
  } else if (name == "smallball_and_levy") {
    SmallBallParams p;
    p.horizon = s.positive("horizon", "1");
    p.dim = s.integer("dim", "1", 1, kMaxDim);
    p.deltas = s.decreasing("deltas", "1,0.8,0.7,0.6,0.5");
    p.paths = s.count("paths", "100000", 2);
    p.level = s.integer("level", "10", 1, 20);
    p.levy_dim = s.integer("levy_dim", "2", 2, kMaxDim);
    p.levy_horizon = s.positive("levy_horizon", "0.5");
    p.levy_deltas = s.decreasing("levy_deltas", "0.8,0.5");
    p.m_values = s.positives("m_values", "1,2,4");
    p.epsilon = s.positive("epsilon", "0.1");
    p.alpha = s.positive("alpha", "0.5");
    p.levy_level = s.integer("levy_level", "10", 1, 20);
    p.budget = budget(s);
    run.execute = [p](const ResolvedConfig& c) { return plain(smallball_and_levy(p, context(c))); };
  } else if (name == "regulator_conditional") {
    horizon();
    RegulatorParams p;
    p.deltas = s.decreasing("deltas", "0.8,0.5");
    p.c3 = s.positive("c3", "0.2");
    p.epsilon = s.positive("epsilon", "0.5");
    p.level = s.integer("level", "10", 1, 20);
    p.budget = budget(s);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(regulator_conditional(pb, p, context(c))); };
  } else if (name == "holder_tightness") {
    horizon();
    HolderParams p;
    p.theta = s.positive("theta", "0.2");
    p.levels = s.levels("levels", "4,5,6,7,8");
    p.paths = s.count("paths", "2000", 2);
    p.substeps = s.integer("substeps", "4", 1, 1024);
    p.cell_scheme = cell_scheme(s);
    p.include_shifted = s.flag("include_shifted", "true");
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(holder_tightness(pb, p, context(c))); };
  } else if (name == "support_inclusions") {
    horizon();
    SupportParams p;
    p.level = s.integer("level", "9", 1, 20);
    p.fine_level = fine_level(s, {p.level});
    p.substeps = s.integer("substeps", "4", 1, 1024);
    p.cell_scheme = cell_scheme(s);
    p.paths = s.count("paths", "2000", 2);
    p.reverse_control = control(s, "reverse_control", "linear:0.5", pb.coeffs.d1);
    p.epsilon = s.positive("epsilon", "0.5");
    p.reverse_paths = s.count("reverse_paths", "100000", 1);
    p.reverse_level = s.integer("reverse_level", "8", 1, 20);
    run.execute = [pb, p](const ResolvedConfig& c) { return plain(support_inclusions(pb, p, context(c))); };
  } else if (name == "submartingale_test") {
    const auto u_name = s.text("u", "norm_squared");
    const auto u = scalar_function(u_name);
    const auto times = to_doubles(s.key("times"), s.text("times", "0,0.05,0.1,0.2"));
    for (std::size_t i = 0; i < times.size(); ++i)
      if (times[i] < 0.0 || (i && times[i] <= times[i - 1]))
        throw ConfigError(s.key("times"), "times must be nonnegative and strictly increasing");
    if (times.size() < 2) throw ConfigError(s.key("times"), "at least two times are required");
    pb.horizon = times.back();
    const auto paths = s.count("paths", "10000", 2);
    const int level = s.integer("level", "8", 1, 20);
    run.execute = [pb, u, times, paths, level](const ResolvedConfig& c) {
      return plain(submartingale_test(pb, u, times, paths, level, context(c)));
    };
  } else if (name == "max_principle_check") {
    horizon();
    const auto u = scalar_function(s.text("u", "constant"));
    const auto n = s.count("controls", "500", 1);
    const double tol = s.real("tolerance", "1e-9");
    if (!(tol >= 0.0)) throw ConfigError(s.key("tolerance"), "must be nonnegative");
    ControlSampling cs;
    cs.segments = s.integer("segments", "3", 1, 1024);
    cs.max_slope = s.positive("max_slope", "4");
    cs.substeps = s.integer("substeps", "32", 1, 4096);
    run.execute = [pb, u, n, tol, cs](const ResolvedConfig& c) {
      const auto ctx = context(c);
      Outcome o{max_principle_report(pb, u, n, tol, cs, ctx), {}};
      std::ostringstream csv;
      write_csv(reachable_sample(pb.domain, pb.coeffs, pb.x0, n, pb.horizon, ctx.seed, ctx.workers, cs), csv);
      o.artifacts.push_back({"cloud.csv", csv.str()});
      return o;
    };
  } else if (name == "check_conditions") {
    ConditionSampling cs;
    cs.boundary_samples = s.count("boundary_samples", "1000", 1);
    cs.pair_samples = s.count("pair_samples", "1000", 1);
    cs.conditions = conditions(s);
    run.execute = [dom, cs](const ResolvedConfig& c) {
      auto sampling = cs;
      sampling.seed = c.seed;
      return plain(conditions_report(dom, sampling));
    };
  } else if (name == "sample_path") {
    horizon();
    PathSettings ps;
    ps.scheme = s.text("scheme", "euler");
    if (ps.scheme != "euler" && ps.scheme != "wong_zakai" && ps.scheme != "skeleton" && ps.scheme != "shifted")
      throw ConfigError(s.key("scheme"), "expected euler, wong_zakai, skeleton or shifted");
    ps.level = s.integer("level", "8", 1, 20);
    ps.wz_level = s.integer("wz_level", "4", 0, 20);
    if (ps.wz_level > ps.level) throw ConfigError(s.key("wz_level"), "must not exceed level");
    ps.substeps = s.integer("substeps", "4", 1, 1024);
    ps.cells = cell_scheme(s);
    ps.control = control(s, "control", "zero", pb.coeffs.d1);
    run.execute = [pb, ps](const ResolvedConfig& c) { return sample_path_outcome(pb, ps, context(c)); };
  }
  s.finish();
  return run;
}

Outcome execute(const PreparedRun& run) { return run.execute(run.config); }

nlohmann::json report_json(const ResolvedConfig& config, const ExperimentReport& report) {
  auto j = to_json(report);
  j["parameters"] = config.parameters();
  j["parameters"]["derived"] = report.parameters;
  return j;
}

void write_outputs(const std::string& directory, const ResolvedConfig& config, const Outcome& outcome) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    f << report_json(config, outcome.report).dump(2) << "\n";
  }
  {
    auto f = open("levels.csv");
    write_csv(outcome.report.table, f);
  }
  {
    auto f = open("resolved_config.ini");
    config.write_ini(f);
  }
  for (const auto& a : outcome.artifacts) {
    auto f = open(a.filename);
    f << a.content;
  }
}

int run(const std::string& config_path, const std::vector<std::string>& overrides, const Options& options,
        std::ostream& out, std::ostream& err) {
  try {
    auto raw = parse_config_file(config_path);
    for (const auto& o : overrides) apply_override(raw, o);
    const auto prepared = prepare(raw, options);
    if (options.dry_run) {
      prepared.config.write_ini(out);
      return exit_ok;
    }
    const auto outcome = execute(prepared);
    write_outputs(prepared.config.output, prepared.config, outcome);
    const auto& rep = outcome.report;
    for (const auto& c : rep.checks) out << (c.passed ? "  ok    " : "  FAIL  ") << c.name << "\n";
    out << rep.name << ": " << to_string(rep.verdict) << " (" << prepared.config.output << ")\n";
    return rep.verdict == Verdict::fail ? exit_failed : exit_ok;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const TubeTooNarrow& e) {
    err << "tube too narrow: " << e.what() << "\n";
    return exit_tube;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_numeric;
  }
}

}  // namespace reflectsim::cli
