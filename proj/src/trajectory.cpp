#include "pmsim/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace pmsim::traj {

void ProfileParams::validate() const {
  if (!(stroke_m >= 0.0)) throw ConfigError("profile.stroke_m must be >= 0");
  if (!(v_max_m_s > 0.0)) throw ConfigError("profile.v_max_m_s must be > 0");
  if (!(a_max_m_s2 > 0.0)) throw ConfigError("profile.a_max_m_s2 must be > 0");
  if (!(j_max_m_s3 > 0.0)) throw ConfigError("profile.j_max_m_s3 must be > 0");
  if (!(s_max_m_s4 > 0.0)) throw ConfigError("profile.s_max_m_s4 must be > 0");
  if (!(dt_s > 0.0)) throw ConfigError("profile.dt_s must be > 0");
  if (axis != 0 && axis != 1) throw ConfigError("profile.axis must be 0 or 1");
}

namespace {

struct Segment {
  double start_s;
  double duration_s;
  double snap;
  // state at segment entry
  double r, v, a, j;
};

struct Kin {
  double r = 0.0, v = 0.0, a = 0.0, j = 0.0;
};

Kin advance(const Kin& k, double s, double t) {
  Kin n;
  n.j = k.j + s * t;
  n.a = k.a + k.j * t + 0.5 * s * t * t;
  n.v = k.v + k.a * t + 0.5 * k.j * t * t + s * t * t * t / 6.0;
  n.r = k.r + k.v * t + 0.5 * k.a * t * t + k.j * t * t * t / 6.0 +
        s * t * t * t * t / 24.0;
  return n;
}

}  // namespace

Profile plan_fourth_order(const ProfileParams& params) {
  params.validate();
  const double s_max = params.s_max_m_s4;
  const double j_max = params.j_max_m_s3;
  const double a_max = params.a_max_m_s2;
  const double v_max = params.v_max_m_s;

  // Binding-limit cascade for the snap pulse width.
  const double t1 = std::min({j_max / s_max, std::sqrt(a_max / s_max),
                              std::cbrt(v_max / (2.0 * s_max))});
  const double j_pk = s_max * t1;
  // Constant-jerk time: stop early if v_max binds before a_max is reached.
  const double t2_a = a_max / j_pk - t1;
  const double t2_v =
      0.5 * (-3.0 * t1 + std::sqrt(t1 * t1 + 4.0 * v_max / j_pk));
  const double t2 = std::max(0.0, std::min(t2_a, t2_v));
  const double a_pk = j_pk * (t1 + t2);
  const double t3 = std::max(0.0, v_max / a_pk - (2.0 * t1 + t2));

  // Acceleration half: jerk up, hold, jerk down, accel hold, mirrored ramp-out.
  const double durations[7] = {t1, t2, t1, t3, t1, t2, t1};
  const double snaps[7] = {s_max, 0.0, -s_max, 0.0, -s_max, 0.0, s_max};

  Kin k;
  std::vector<Segment> segments;
  double clock = 0.0;
  for (int i = 0; i < 7; ++i) {
    if (durations[i] <= 0.0) continue;
    segments.push_back({clock, durations[i], snaps[i], k.r, k.v, k.a, k.j});
    k = advance(k, snaps[i], durations[i]);
    clock += durations[i];
  }
  const double v_cruise = k.v;
  const double d_acc = k.r;
  const double t_acc = clock;

  const double cruise_dist = params.stroke_m - 2.0 * d_acc;
  if (!(cruise_dist > 0.0) || !(v_cruise > 0.0)) {
    throw InfeasibleProfile(
        "profile: stroke too short for a constant-velocity phase with the "
        "given limits");
  }
  const double t4 = cruise_dist / v_cruise;
  segments.push_back({clock, t4, 0.0, k.r, k.v, k.a, k.j});
  k = advance(k, 0.0, t4);
  clock += t4;

  for (int i = 0; i < 7; ++i) {
    if (durations[i] <= 0.0) continue;
    segments.push_back({clock, durations[i], -snaps[i], k.r, k.v, k.a, k.j});
    k = advance(k, -snaps[i], durations[i]);
    clock += durations[i];
  }

  Profile p;
  p.dt_s = params.dt_s;
  p.duration_s = clock;
  p.cruise_start_s = t_acc;
  p.cruise_end_s = t_acc + t4;
  p.axis = params.axis;

  const std::size_t n =
      static_cast<std::size_t>(std::ceil(clock / params.dt_s)) + 1;
  p.t_s.resize(n);
  p.pos_m.resize(n);
  p.vel_m_s.resize(n);
  p.acc_m_s2.resize(n);
  p.jerk_m_s3.resize(n);
  p.snap_m_s4.resize(n);

  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * params.dt_s;
    p.t_s[i] = t;
    if (t >= clock) {  // hold the end state
      p.pos_m[i] = k.r;
      p.vel_m_s[i] = 0.0;
      p.acc_m_s2[i] = 0.0;
      p.jerk_m_s3[i] = 0.0;
      p.snap_m_s4[i] = 0.0;
      continue;
    }
    while (seg + 1 < segments.size() &&
           t >= segments[seg].start_s + segments[seg].duration_s) {
      ++seg;
    }
    const Segment& sg = segments[seg];
    const double u = t - sg.start_s;
    Kin at{sg.r, sg.v, sg.a, sg.j};
    at = advance(at, sg.snap, u);
    p.pos_m[i] = at.r;
    p.vel_m_s[i] = at.v;
    p.acc_m_s2[i] = at.a;
    p.jerk_m_s3[i] = at.j;
    p.snap_m_s4[i] = sg.snap;
  }
  return p;
}

std::array<double, 3> Profile::at(double t) const {
  if (t < 0.0 || t > duration_s + 1e-12) {
    throw std::out_of_range("profile query outside [0, duration]");
  }
  t = std::min(t, duration_s);
  const double idx = t / dt_s;
  const std::size_t i0 =
      std::min(static_cast<std::size_t>(idx), t_s.size() - 1);
  if (i0 + 1 >= t_s.size()) {
    return {pos_m[i0], vel_m_s[i0], acc_m_s2[i0]};
  }
  const double w = idx - static_cast<double>(i0);
  return {pos_m[i0] + w * (pos_m[i0 + 1] - pos_m[i0]),
          vel_m_s[i0] + w * (vel_m_s[i0 + 1] - vel_m_s[i0]),
          acc_m_s2[i0] + w * (acc_m_s2[i0 + 1] - acc_m_s2[i0])};
}

}  // namespace pmsim::traj
