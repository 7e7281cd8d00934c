#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace pmsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Raised when a configuration file or parameter set fails validation.
/// The message names the offending key or quantity.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Motion limits cannot produce a profile with a constant-velocity phase.
struct InfeasibleProfile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tracking error exceeded the divergence guard; the partial log is kept
/// by callers that can salvage it.
struct NumericalDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Backtracking exhausted the step size without ever improving the objective.
struct NoDescent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gram matrix failed to factorize even after jitter escalation.
struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fit-quality denominator is zero (constant targets).
struct DegenerateTargets : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input series shorter than the filter window.
struct SeriesTooShort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pmsim
