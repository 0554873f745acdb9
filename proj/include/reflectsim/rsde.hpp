#pragma once

#include "reflectsim/geometry.hpp"
#include "reflectsim/paths.hpp"
#include "reflectsim/skorohod.hpp"

#include <functional>
#include <optional>
#include <string>

namespace reflectsim {

/// Sup bounds on the coefficients and their derivatives; carried for
/// reporting only.
struct RegularityBounds {
  double sigma = 0.0;
  double sigma_gradient = 0.0;
  double sigma_hessian = 0.0;
  double drift = 0.0;
  double drift_gradient = 0.0;
};

/// Diffusion sigma: R^d -> R^{d x d1} and drift b: R^d -> R^d of
/// dX = sigma(X) o dw + b(X) dt + dK.
struct Coefficients {
  int d = 1;
  int d1 = 1;
  std::function<Matrix(const Vector&)> sigma;
  std::function<Vector(const Vector&)> drift;
  /// Optional analytic partial derivative d sigma / d x_j (a d x d1 matrix).
  std::function<Matrix(const Vector&, int)> sigma_partial;
  bool constant_sigma = false;
  std::optional<RegularityBounds> bounds;
};

/// b(x) = offset + rate * x.
struct DriftSpec {
  Vector offset;
  double rate = 0.0;
};

DriftSpec zero_drift(int d);

Coefficients make_constant_coefficients(const Matrix& sigma, const DriftSpec& drift);
/// sigma(x) = diag(a + c x_i), d1 = d.
Coefficients make_affine_coefficients(int d, double a, double c, const DriftSpec& drift);
/// sigma(x) = diag(a + c sin x_i), d1 = d.
Coefficients make_sine_coefficients(int d, double a, double c, const DriftSpec& drift);

/// Ito correction 1/2 sum_j sum_k (d_j sigma^i_k) sigma^j_k, given sigma(x).
Vector ito_correction(const Coefficients& coeffs, const Vector& x, const Matrix& sigma_x);

/// Same correction from central differences with step 1e-6 (1 + |x|).
Vector ito_correction_fd(const Coefficients& coeffs, const Vector& x, const Matrix& sigma_x);

/// Ito drift b~ = b + correction; analytic Jacobian when available.
Vector btilde(const Coefficients& coeffs, const Vector& x);

/// Grid with every cell split into `substeps` equal parts.
std::vector<double> refine_grid(const std::vector<double>& times, int substeps);

/// Projected Euler for the Ito form: X_{i+1} = P(X_i + sigma(X_i) dw_i + b~(X_i) dt_i).
SkorohodSolution euler_reflected(const Domain& domain, const Coefficients& coeffs, const SamplePath& w,
                                 const Vector& x0);

/// Integrator for the bounded-variation driven equations. Explicit Euler
/// reproduces only (1 - 1/substeps) of the Stratonovich correction on each
/// cell; Heun (projected predictor, trapezoidal corrector) removes that bias.
enum class CellScheme { euler, heun };

std::string to_string(CellScheme scheme);
CellScheme cell_scheme_from_string(const std::string& name);

/// Reflected ODE driven by the adapted interpolation w^n of `level`; each
/// dyadic cell is integrated with `substeps` projected steps with the
/// Stratonovich coefficients (no correction, w^n has bounded variation).
SkorohodSolution wong_zakai(const Domain& domain, const Coefficients& coeffs, const SamplePath& w, int level,
                            int substeps, double horizon, const Vector& x0, CellScheme scheme = CellScheme::euler);

/// Deterministic skeleton Z(h): dZ = sigma(Z) h' dt + b(Z) dt + d psi, by
/// projected steps on h's breakpoint grid refined by `substeps`.
SkorohodSolution skeleton(const Domain& domain, const Coefficients& coeffs, const Control& h, int substeps,
                          const Vector& x0, CellScheme scheme = CellScheme::euler);

/// Y^n = X(w - w^n + h): projected Euler on w's grid with increments
/// sigma(Y)(dw - dw^n + dh) + b~(Y) dt.
SkorohodSolution shifted_driver(const Domain& domain, const Coefficients& coeffs, const SamplePath& w, int level,
                                const Control& h, double horizon, const Vector& x0);

}  // namespace reflectsim
