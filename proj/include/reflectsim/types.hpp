#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace reflectsim {

/// Largest state or driver dimension supported. Vectors and matrices keep
/// their coefficients inline up to this size so integrator inner loops never
/// touch the heap.
inline constexpr int kMaxDim = 8;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two nearest-point candidates are (numerically) equally close; the step
/// fed to a nonconvex projection was too large for the uniqueness tube.
class AmbiguousProjection : public Error {
 public:
  using Error::Error;
};

class StartOutsideDomain : public Error {
 public:
  using Error::Error;
};

/// A path grid does not contain the dyadic nodes an operation needs.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling of a tube event exhausted its attempt budget.
class TubeTooNarrow : public Error {
 public:
  TubeTooNarrow(const std::string& what, double pilot_acceptance)
      : Error(what), pilot_acceptance_(pilot_acceptance) {}
  double pilot_acceptance() const { return pilot_acceptance_; }

 private:
  double pilot_acceptance_;
};

/// A requested check needs domain metadata that is not available.
class UnsupportedKind : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace reflectsim
