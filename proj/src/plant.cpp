#include "pmsim/plant.hpp"

#include "pmsim/rng.hpp"

#include <cmath>
#include <utility>

namespace pmsim::plant {

void PlantParams::validate() const {
  if (!(mass_kg > 0.0)) throw ConfigError("plant.mass_kg must be > 0");
  if (!(coil_pitch_m > 0.0)) throw ConfigError("plant.coil_pitch_m must be > 0");
  if (!(dt_s > 0.0)) throw ConfigError("plant.dt_s must be > 0");
  if (!(cross_coupling >= 0.0))
    throw ConfigError("plant.cross_coupling must be >= 0");
  for (int i = 0; i < 3; ++i) {
    if (!(damping_ns_per_m[i] >= 0.0))
      throw ConfigError("plant.damping_ns_per_m must be >= 0");
    if (!(stiffness_n_per_m[i] >= 0.0))
      throw ConfigError("plant.stiffness_n_per_m must be >= 0");
  }
}

Vec2 MismatchField::eval(const Vec2& q_xy) const {
  Vec2 d = offset_m_;
  for (const Harmonic& h : harmonics_) {
    const double w = kTwoPi / h.pitch_m;
    d.x() += h.amplitude_m.x() * std::sin(w * q_xy.x() + h.phase_rad.x());
    d.y() += h.amplitude_m.y() * std::sin(w * q_xy.y() + h.phase_rad.y());
  }
  for (const Bump& b : bumps_) {
    const double r2 = (q_xy - b.center_m).squaredNorm();
    const double g = std::exp(-r2 / (2.0 * b.width_m * b.width_m));
    d += b.height_m * g;
  }
  return d;
}

double MismatchField::max_abs(double* out_sup) const {
  double sup = 0.0;
  constexpr int kGrid = 100;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const Vec2 q(-workspace_half_m_.x() +
                       2.0 * workspace_half_m_.x() * i / (kGrid - 1),
                   -workspace_half_m_.y() +
                       2.0 * workspace_half_m_.y() * j / (kGrid - 1));
      sup = std::max(sup, eval(q).cwiseAbs().maxCoeff());
    }
  }
  if (out_sup) *out_sup = sup;
  return sup;
}

MismatchField MismatchField::make(const Vec2& offset_m,
                                  std::vector<Harmonic> harmonics,
                                  std::vector<Bump> bumps,
                                  const Vec2& workspace_half_m,
                                  double coil_pitch_m, std::uint64_t seed) {
  MismatchField f;
  f.offset_m_ = offset_m;
  f.harmonics_ = std::move(harmonics);
  f.bumps_ = std::move(bumps);
  f.workspace_half_m_ = workspace_half_m;
  f.seed_ = seed;
  for (const Harmonic& h : f.harmonics_) {
    if (!(h.pitch_m > 0.0)) throw ConfigError("field harmonic pitch_m must be > 0");
  }
  for (const Bump& b : f.bumps_) {
    if (!(b.width_m > 0.0)) throw ConfigError("field bump width_m must be > 0");
  }
  const double limit = coil_pitch_m / 4.0;
  if (f.max_abs() >= limit) {
    throw ConfigError(
        "field: sup |Delta| over the workspace exceeds coil_pitch/4; "
        "coupling would leave the monotone regime");
  }
  return f;
}

MismatchField MismatchField::randomized(const RandomFieldSpec& spec,
                                        const Vec2& workspace_half_m,
                                        double coil_pitch_m) {
  Rng rng(spec.seed);
  Vec2 offset(rng.uniform(-spec.offset_max_m.x(), spec.offset_max_m.x()),
              rng.uniform(-spec.offset_max_m.y(), spec.offset_max_m.y()));
  std::vector<Harmonic> harmonics;
  for (double pitch : spec.harmonic_pitches_m) {
    Harmonic h;
    h.pitch_m = pitch;
    h.amplitude_m =
        Vec2(rng.uniform(spec.harmonic_amp_min_m, spec.harmonic_amp_max_m),
             rng.uniform(spec.harmonic_amp_min_m, spec.harmonic_amp_max_m));
    h.phase_rad = Vec2(rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi));
    harmonics.push_back(h);
  }
  std::vector<Bump> bumps;
  for (int i = 0; i < spec.num_bumps; ++i) {
    Bump b;
    b.center_m =
        Vec2(rng.uniform(-0.8 * workspace_half_m.x(), 0.8 * workspace_half_m.x()),
             rng.uniform(-0.8 * workspace_half_m.y(), 0.8 * workspace_half_m.y()));
    b.width_m = rng.uniform(spec.bump_width_min_m, spec.bump_width_max_m);
    b.height_m = Vec2(rng.uniform(-spec.bump_height_max_m, spec.bump_height_max_m),
                      rng.uniform(-spec.bump_height_max_m, spec.bump_height_max_m));
    bumps.push_back(b);
  }
  return make(offset, std::move(harmonics), std::move(bumps), workspace_half_m,
              coil_pitch_m, spec.seed);
}

Mat3 coupling_matrix(const Vec2& e_m, double coil_pitch_m,
                     double cross_coupling) {
  const double k = kTwoPi / coil_pitch_m;
  const double cx = std::cos(k * e_m.x());
  const double cy = std::cos(k * e_m.y());
  const double sx = std::sin(k * e_m.x());
  const double sy = std::sin(k * e_m.y());
  const double kappa = cross_coupling;
  Mat3 c;
  c << cx, 0.0, kappa * sx,
       0.0, cy, kappa * sy,
       -kappa * sx, -kappa * sy, cx * cy;
  return c;
}

Vec3 apply_wrench(const PlantState& state, const Vec3& f_ref_n,
                  const MismatchField& field, const Vec2& eta_m,
                  const PlantParams& params) {
  const Vec2 e = field.eval(state.q.head<2>()) - eta_m;
  return coupling_matrix(e, params.coil_pitch_m, params.cross_coupling) *
         f_ref_n;
}

namespace {

// Exact ZOH update of m*x'' + d*x' + k*x = f over one sample.
std::pair<double, double> axis_step(double q0, double v0, double f, double m,
                                    double d, double k, double dt) {
  if (k <= 0.0 && d <= 0.0) {
    const double a = f / m;
    return {q0 + v0 * dt + 0.5 * a * dt * dt, v0 + a * dt};
  }
  if (k <= 0.0) {
    const double gamma = d / m;
    const double v_ss = f / d;
    const double em1 = std::expm1(-gamma * dt);  // e^{-g t} - 1
    const double q1 = q0 + v_ss * dt - (v0 - v_ss) * em1 / gamma;
    const double v1 = v_ss + (v0 - v_ss) * (em1 + 1.0);
    return {q1, v1};
  }
  const double w0 = std::sqrt(k / m);
  const double alpha = d / (2.0 * m);
  const double q_ss = f / k;
  const double x0 = q0 - q_ss;
  const double disc = w0 * w0 - alpha * alpha;
  double x1, v1;
  if (disc > 1e-12 * w0 * w0) {  // underdamped
    const double wd = std::sqrt(disc);
    const double c = std::cos(wd * dt), s = std::sin(wd * dt);
    const double ea = std::exp(-alpha * dt);
    x1 = ea * (x0 * c + (v0 + alpha * x0) / wd * s);
    v1 = ea * (v0 * c - (alpha * v0 + w0 * w0 * x0) / wd * s);
  } else if (disc < -1e-12 * w0 * w0) {  // overdamped
    const double beta = std::sqrt(-disc);
    const double ch = std::cosh(beta * dt), sh = std::sinh(beta * dt);
    const double ea = std::exp(-alpha * dt);
    x1 = ea * (x0 * ch + (v0 + alpha * x0) / beta * sh);
    v1 = ea * (v0 * ch - (alpha * v0 + w0 * w0 * x0) / beta * sh);
  } else {  // critically damped
    const double ea = std::exp(-alpha * dt);
    x1 = ea * (x0 + (v0 + alpha * x0) * dt);
    v1 = ea * (v0 - (alpha * v0 + w0 * w0 * x0) * dt);
  }
  return {x1 + q_ss, v1};
}

}  // namespace

PlantState step_dynamics(const PlantState& state, const Vec3& f_m_n,
                         const PlantParams& params) {
  PlantState next;
  const Vec3 gravity(0.0, 0.0, -params.mass_kg * params.gravity_m_s2);
  const Vec3 f = f_m_n + gravity;
  for (int i = 0; i < 3; ++i) {
    auto [q, v] = axis_step(state.q[i], state.v[i], f[i], params.mass_kg,
                            params.damping_ns_per_m[i],
                            params.stiffness_n_per_m[i], params.dt_s);
    next.q[i] = q;
    next.v[i] = v;
  }
  return next;
}

}  // namespace pmsim::plant
