#pragma once

#include "pmsim/common.hpp"

#include <cstdint>
#include <vector>

namespace pmsim::plant {

/// Rigid-body mover parameters. The wrench acts at the center of gravity;
/// gravity pulls on -z.
struct PlantParams {
  double mass_kg = 10.0;
  Vec3 damping_ns_per_m = Vec3::Zero();
  Vec3 stiffness_n_per_m = Vec3::Zero();
  double gravity_m_s2 = 9.81;
  double coil_pitch_m = 0.04;
  double cross_coupling = 1.0;  // dimensionless leakage strength
  double dt_s = 1e-4;

  void validate() const;  // throws ConfigError
};

struct PlantState {
  Vec3 q = Vec3::Zero();  // position in the metrology frame [m]
  Vec3 v = Vec3::Zero();  // velocity [m/s]
};

struct Harmonic {
  Vec2 amplitude_m = Vec2::Zero();
  double pitch_m = 0.04;
  Vec2 phase_rad = Vec2::Zero();
};

struct Bump {
  Vec2 center_m = Vec2::Zero();
  double width_m = 0.03;
  Vec2 height_m = Vec2::Zero();
};

/// Ranges for randomized field instantiation; all draws come from the
/// field seed so a (spec, seed) pair always builds the same field.
struct RandomFieldSpec {
  std::uint64_t seed = 42;
  Vec2 offset_max_m = {1.5e-3, 1.5e-3};
  std::vector<double> harmonic_pitches_m = {0.04, 0.1};
  double harmonic_amp_min_m = 1.0e-4;
  double harmonic_amp_max_m = 4.0e-4;
  int num_bumps = 2;
  double bump_width_min_m = 0.025;
  double bump_width_max_m = 0.05;
  double bump_height_max_m = 4.0e-4;
};

/// Spatial discrepancy between commutation frame and metrology frame:
/// constant offset + per-axis periodic content + smooth residual bumps.
/// Construction verifies sup-norm < coil_pitch/4 over the workspace so
/// the coupling stays in its monotone regime.
class MismatchField {
 public:
  MismatchField() = default;  // zero field

  static MismatchField make(const Vec2& offset_m, std::vector<Harmonic> harmonics,
                            std::vector<Bump> bumps, const Vec2& workspace_half_m,
                            double coil_pitch_m, std::uint64_t seed = 0);

  static MismatchField randomized(const RandomFieldSpec& spec,
                                  const Vec2& workspace_half_m,
                                  double coil_pitch_m);

  /// Delta(q): the frame discrepancy at planar position q = (x, y).
  Vec2 eval(const Vec2& q_xy) const;

  /// Max |Delta| over a 100x100 workspace grid (the construction check).
  double max_abs(double* out_sup = nullptr) const;

  bool empty() const {
    return offset_m_.isZero() && harmonics_.empty() && bumps_.empty();
  }

  const Vec2& offset_m() const { return offset_m_; }
  const std::vector<Harmonic>& harmonics() const { return harmonics_; }
  const std::vector<Bump>& bumps() const { return bumps_; }
  const Vec2& workspace_half_m() const { return workspace_half_m_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Vec2 offset_m_ = Vec2::Zero();
  std::vector<Harmonic> harmonics_;
  std::vector<Bump> bumps_;
  Vec2 workspace_half_m_ = {0.1, 0.1};
  std::uint64_t seed_ = 0;
};

/// Delta(q) as a free function, mirroring the field accessor.
inline Vec2 delta_field(const MismatchField& field, const Vec2& q_xy) {
  return field.eval(q_xy);
}

/// Force coupling produced by a commutation frame error e = Delta - eta:
/// cosine gain loss on the diagonal, sine leakage between the planar axes
/// and the levitation axis. C(0) = I exactly.
Mat3 coupling_matrix(const Vec2& e_m, double coil_pitch_m,
                     double cross_coupling);

/// Physical wrench produced when F_ref is commanded through the mismatched
/// commutation with frame correction eta.
Vec3 apply_wrench(const PlantState& state, const Vec3& f_ref_n,
                  const MismatchField& field, const Vec2& eta_m,
                  const PlantParams& params);

/// One sample of the mover dynamics m*q'' + d*q' + k*q = F_m - m*g*ez,
/// integrated with the exact zero-order-hold map of the per-axis linear
/// system (closed forms for the free, damped and stiff cases).
PlantState step_dynamics(const PlantState& state, const Vec3& f_m_n,
                         const PlantParams& params);

}  // namespace pmsim::plant
