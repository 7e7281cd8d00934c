#pragma once

#include "pmsim/common.hpp"

#include <array>
#include <vector>

namespace pmsim::traj {

struct ProfileParams {
  double stroke_m = 0.05;
  double v_max_m_s = 0.1;
  double a_max_m_s2 = 5.0;
  double j_max_m_s3 = 500.0;
  double s_max_m_s4 = 5.0e4;
  double dt_s = 1e-4;
  int axis = 1;  // 0 = x, 1 = y (scan axis)

  void validate() const;
};

/// Sampled point-to-point scan profile: rest -> snap-limited acceleration ->
/// constant-velocity exposure interval -> mirrored deceleration -> rest.
struct Profile {
  std::vector<double> t_s;
  std::vector<double> pos_m;
  std::vector<double> vel_m_s;
  std::vector<double> acc_m_s2;
  std::vector<double> jerk_m_s3;
  std::vector<double> snap_m_s4;
  double dt_s = 1e-4;
  double duration_s = 0.0;
  double cruise_start_s = 0.0;
  double cruise_end_s = 0.0;
  int axis = 1;

  /// (position, velocity, acceleration) at time t via linear interpolation.
  /// Throws std::out_of_range outside [0, duration_s].
  std::array<double, 3> at(double t) const;
};

/// Plans the symmetric snap-bang profile. Phase durations are solved so the
/// velocity, acceleration, jerk and snap limits are each respected and the
/// cruise velocity equals v_max. Throws InfeasibleProfile when the stroke
/// cannot contain a constant-velocity phase.
Profile plan_fourth_order(const ProfileParams& params);

}  // namespace pmsim::traj
