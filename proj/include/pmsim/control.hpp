#pragma once

#include "pmsim/common.hpp"

#include <array>

namespace pmsim::control {

/// Loop-shaping parameters of the per-axis rigid-body position controller:
/// PI with a lead section, gain set so the open loop over 1/(m s^2)
/// crosses 0 dB at bandwidth_hz.
struct PositionLoopParams {
  double bandwidth_hz = 150.0;
  double integrator_corner_hz = 15.0;  // bandwidth/10
  double lead_span = 3.0;              // zero at bw/span, pole at bw*span
  double mass_kg = 10.0;
  double gravity_m_s2 = 9.81;
  double dt_s = 1e-4;

  void validate() const;

  /// Proportional gain that places the open-loop crossover at bandwidth_hz.
  double proportional_gain() const;
};

/// Three decoupled position loops. Integrators are forward-Euler, the lead
/// section is discretized with Tustin.
class PositionController {
 public:
  explicit PositionController(const PositionLoopParams& params);

  /// F_c from the position error r - q. Call once per sample.
  Vec3 update(const Vec3& e_pos_m);

  void reset();

 private:
  struct AxisState {
    double integrator = 0.0;
    double lead_u1 = 0.0;
    double lead_y1 = 0.0;
  };
  PositionLoopParams params_;
  double kp_ = 0.0;
  double wi_ = 0.0;
  double lead_b0_ = 0.0, lead_b1_ = 0.0, lead_a1_ = 0.0;
  std::array<AxisState, 3> axes_;
};

/// F_ff = m*a_ref + gravity hold on z.
Vec3 rigid_body_feedforward(const Vec3& a_ref_m_s2,
                            const PositionLoopParams& params);

struct CommutationLoopParams {
  Vec2 bandwidth_hz = {1.5, 1.5};
  double sensitivity_n_per_m = 0.0;  // static force per meter of frame error
  Vec2 sign = {-1.0, -1.0};
  double dt_s = 1e-4;
  double clamp_m = 0.01;  // coil_pitch/4

  void validate() const;

  /// Nominal sensitivity kappa*(2*pi/pitch)*m*g of the surrogate coupling.
  static double nominal_sensitivity(double cross_coupling, double coil_pitch_m,
                                    double mass_kg, double gravity_m_s2);
};

/// Integrator state of the commutation frame regulator.
struct CommutationState {
  Vec2 eta = Vec2::Zero();          // current frame correction [m]
  Vec2 accumulator = Vec2::Zero();  // integrator state [m]
  bool enabled = true;
  bool saturated = false;  // clamp active during the last step
};

/// One forward-Euler step of the diagonal integrator regulator
/// eta_j += sign_j * (2*pi*f_bw_j / s_eta) * F_c,j * dt for j in {x, y}.
/// The accumulator freezes instead of leaving the +-clamp_m box.
CommutationState commutation_regulator_step(const Vec3& f_c_n,
                                            const CommutationState& state,
                                            const CommutationLoopParams& params);

/// eta = eta_fb + eta_ff clamped to +-clamp_m; *saturated reports clamping.
Vec2 total_frame_correction(const CommutationState& state, const Vec2& eta_ff_m,
                            double clamp_m, bool* saturated = nullptr);

}  // namespace pmsim::control
