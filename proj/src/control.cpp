#include "pmsim/control.hpp"

#include <algorithm>
#include <cmath>

namespace pmsim::control {

void PositionLoopParams::validate() const {
  if (!(bandwidth_hz > 0.0)) throw ConfigError("position_loop.bandwidth_hz must be > 0");
  if (!(integrator_corner_hz > 0.0))
    throw ConfigError("position_loop.integrator_corner_hz must be > 0");
  if (!(lead_span > 1.0)) throw ConfigError("position_loop.lead_span must be > 1");
  if (!(mass_kg > 0.0)) throw ConfigError("position_loop.mass_kg must be > 0");
  if (!(dt_s > 0.0)) throw ConfigError("position_loop.dt_s must be > 0");
  if (bandwidth_hz * lead_span >= 0.5 / dt_s)
    throw ConfigError("position_loop: lead pole beyond Nyquist");
}

double PositionLoopParams::proportional_gain() const {
  const double wc = kTwoPi * bandwidth_hz;
  const double wi = kTwoPi * integrator_corner_hz;
  const double wz = wc / lead_span;
  const double wp = wc * lead_span;
  const double pi_mag = std::sqrt(1.0 + (wi / wc) * (wi / wc));
  const double lead_mag = std::sqrt(1.0 + (wc / wz) * (wc / wz)) /
                          std::sqrt(1.0 + (wc / wp) * (wc / wp));
  return mass_kg * wc * wc / (pi_mag * lead_mag);
}

PositionController::PositionController(const PositionLoopParams& params)
    : params_(params) {
  params_.validate();
  kp_ = params_.proportional_gain();
  wi_ = kTwoPi * params_.integrator_corner_hz;
  const double wc = kTwoPi * params_.bandwidth_hz;
  const double wz = wc / params_.lead_span;
  const double wp = wc * params_.lead_span;
  // Tustin of (1 + s/wz)/(1 + s/wp)
  const double a = 2.0 / params_.dt_s;
  const double den = a + wp;
  const double scale = wp / wz;
  lead_b0_ = scale * (a + wz) / den;
  lead_b1_ = scale * (wz - a) / den;
  lead_a1_ = (wp - a) / den;
}

void PositionController::reset() { axes_.fill({}); }

Vec3 PositionController::update(const Vec3& e_pos_m) {
  Vec3 f_c;
  for (int i = 0; i < 3; ++i) {
    AxisState& ax = axes_[i];
    const double e = e_pos_m[i];
    const double pi_out = kp_ * (e + wi_ * ax.integrator);
    ax.integrator += e * params_.dt_s;
    const double y =
        lead_b0_ * pi_out + lead_b1_ * ax.lead_u1 - lead_a1_ * ax.lead_y1;
    ax.lead_u1 = pi_out;
    ax.lead_y1 = y;
    f_c[i] = y;
  }
  return f_c;
}

Vec3 rigid_body_feedforward(const Vec3& a_ref_m_s2,
                            const PositionLoopParams& params) {
  Vec3 f = params.mass_kg * a_ref_m_s2;
  f.z() += params.mass_kg * params.gravity_m_s2;
  return f;
}

void CommutationLoopParams::validate() const {
  if (!(bandwidth_hz.x() > 0.0 && bandwidth_hz.y() > 0.0))
    throw ConfigError("commutation_loop.bandwidth_hz must be > 0");
  if (!(sensitivity_n_per_m > 0.0))
    throw ConfigError("commutation_loop.sensitivity_n_per_m must be > 0");
  if (!(dt_s > 0.0)) throw ConfigError("commutation_loop.dt_s must be > 0");
  if (!(clamp_m > 0.0)) throw ConfigError("commutation_loop.clamp_m must be > 0");
  if (std::abs(sign.x()) != 1.0 || std::abs(sign.y()) != 1.0)
    throw ConfigError("commutation_loop.sign entries must be +1 or -1");
}

double CommutationLoopParams::nominal_sensitivity(double cross_coupling,
                                                  double coil_pitch_m,
                                                  double mass_kg,
                                                  double gravity_m_s2) {
  return cross_coupling * (kTwoPi / coil_pitch_m) * mass_kg * gravity_m_s2;
}

CommutationState commutation_regulator_step(const Vec3& f_c_n,
                                            const CommutationState& state,
                                            const CommutationLoopParams& params) {
  CommutationState next = state;
  next.saturated = false;
  if (!state.enabled) return next;
  for (int j = 0; j < 2; ++j) {
    const double gain =
        params.sign[j] * kTwoPi * params.bandwidth_hz[j] / params.sensitivity_n_per_m;
    const double incr = gain * f_c_n[j] * params.dt_s;
    const double acc = state.accumulator[j];
    // conditional integration: frozen against pushes further out of the box,
    // free to move back in
    if ((incr > 0.0 && acc >= params.clamp_m) ||
        (incr < 0.0 && acc <= -params.clamp_m)) {
      next.saturated = true;
    } else {
      const double candidate = acc + incr;
      next.accumulator[j] =
          std::clamp(candidate, -params.clamp_m, params.clamp_m);
      if (candidate != next.accumulator[j]) next.saturated = true;
    }
    next.eta[j] = next.accumulator[j];
  }
  return next;
}

Vec2 total_frame_correction(const CommutationState& state, const Vec2& eta_ff_m,
                            double clamp_m, bool* saturated) {
  Vec2 eta = state.eta + eta_ff_m;
  bool sat = false;
  for (int j = 0; j < 2; ++j) {
    if (std::abs(eta[j]) > clamp_m) {
      eta[j] = std::clamp(eta[j], -clamp_m, clamp_m);
      sat = true;
    }
  }
  if (saturated) *saturated = sat;
  return eta;
}

}  // namespace pmsim::control
