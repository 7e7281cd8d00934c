#include "pmsim/sim.hpp"

#include "pmsim/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace pmsim::sim {

namespace {
constexpr double kDivergenceLimit_m = 10e-3;
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::static_calibrated: return "static-calibrated";
    case Mode::dynamic: return "dynamic";
    case Mode::dynamic_ff: return "dynamic+ff";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "baseline") return Mode::baseline;
  if (name == "static-calibrated") return Mode::static_calibrated;
  if (name == "dynamic") return Mode::dynamic;
  if (name == "dynamic+ff") return Mode::dynamic_ff;
  throw ConfigError("unknown mode '" + name +
                    "' (expected baseline | static-calibrated | dynamic | "
                    "dynamic+ff)");
}

void ScenarioConfig::validate() const {
  plant.validate();
  pos_loop.validate();
  comm_loop.validate();
  profile.validate();
  if (!(lead_in_s >= 0.0)) throw ConfigError("scenario.lead_in_s must be >= 0");
  if (!(tail_s >= 0.0)) throw ConfigError("scenario.tail_s must be >= 0");
  if (!(noise_std_m >= 0.0)) throw ConfigError("scenario.noise_std_m must be >= 0");
  if (mode == Mode::dynamic_ff && feedforward == nullptr) {
    throw ConfigError("scenario: mode dynamic+ff requires a fitted GP model");
  }
}

SimLog run_scenario(const ScenarioConfig& config) {
  config.validate();
  const traj::Profile profile = traj::plan_fourth_order(config.profile);

  const double dt = config.plant.dt_s;
  double duration = config.duration_s;
  if (duration <= 0.0) {
    duration = config.lead_in_s + profile.duration_s + config.tail_s;
  } else if (duration < config.lead_in_s + profile.duration_s) {
    throw ConfigError("scenario.duration_s does not cover the scan profile");
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));

  SimLog log;
  log.dt_s = dt;
  log.scan_axis = profile.axis;
  log.cruise_start_s = config.lead_in_s + profile.cruise_start_s;
  log.cruise_end_s = config.lead_in_s + profile.cruise_end_s;
  log.mode = mode_name(config.mode);
  log.config_hash = config.config_hash;
  log.header_json = config.header_json;
  log.rows.reserve(steps);

  const bool regulate =
      config.mode == Mode::dynamic || config.mode == Mode::dynamic_ff;
  const bool use_ff = config.mode == Mode::dynamic_ff;

  control::PositionController pc(config.pos_loop);
  control::CommutationState cstate;
  cstate.accumulator = config.eta_initial_m;
  cstate.eta = config.eta_initial_m;
  cstate.enabled = regulate;

  plant::PlantState state;
  state.q = Vec3(config.x_setpoint_m, 0.0, 0.0);
  if (profile.axis == 0) state.q = Vec3(0.0, config.x_setpoint_m, 0.0);

  Rng noise_rng(config.seed);
  const bool noisy = config.noise_std_m > 0.0;

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double ts =
        std::clamp(t - config.lead_in_s, 0.0, profile.duration_s);
    const auto [r1, v1, a1] = profile.at(ts);

    Vec3 r = Vec3::Zero(), a_ref = Vec3::Zero();
    const int scan = profile.axis;
    const int cross = 1 - scan;
    r[scan] = r1;
    r[cross] = config.x_setpoint_m;
    a_ref[scan] = a1;

    Vec3 q_meas = state.q;
    if (noisy) {
      q_meas += config.noise_std_m *
                Vec3(noise_rng.normal(), noise_rng.normal(), noise_rng.normal());
    }
    const Vec3 e_pos = r - q_meas;

    const Vec3 f_c = pc.update(e_pos);
    const Vec3 f_ff = control::rigid_body_feedforward(a_ref, config.pos_loop);
    const Vec3 f_ref = f_c + f_ff;

    if (regulate) {
      cstate = control::commutation_regulator_step(f_c, cstate, config.comm_loop);
    }
    Vec2 eta_ff = Vec2::Zero();
    bool out_of_hull = false;
    if (use_ff) {
      eta_ff = config.feedforward->eval(r.head<2>(), &out_of_hull);
    }
    bool sum_saturated = false;
    const Vec2 eta = control::total_frame_correction(
        cstate, eta_ff, config.comm_loop.clamp_m, &sum_saturated);

    const Vec3 f_m = plant::apply_wrench(state, f_ref, config.field, eta,
                                         config.plant);

    LogRow row;
    row.t_s = t;
    row.r = r;
    row.q = state.q;
    row.e_pos = e_pos;
    row.f_c = f_c;
    row.f_ff = f_ff;
    row.f_m = f_m;
    row.eta_fb = cstate.eta;
    row.eta_ff = eta_ff;
    row.saturated = (cstate.saturated || sum_saturated) ? 1 : 0;
    row.ff_out_of_hull = out_of_hull ? 1 : 0;
    log.rows.push_back(row);

    if (e_pos.cwiseAbs().maxCoeff() > kDivergenceLimit_m) {
      log.diverged = true;
      break;
    }

    state = plant::step_dynamics(state, f_m, config.plant);
  }
  return log;
}

Vec3 measure_steady_state_force(const HoldConfig& config, const Vec2& q_hold_m,
                                const Vec2& eta_m, double t_settle_s,
                                double t_avg_s) {
  config.plant.validate();
  config.pos_loop.validate();
  if (!(t_settle_s >= 20.0 / config.pos_loop.bandwidth_hz)) {
    throw ConfigError("measure: t_settle_s below 20 / position bandwidth");
  }
  if (!(t_avg_s >= 10.0 / config.pos_loop.bandwidth_hz)) {
    throw ConfigError("measure: t_avg_s below 10 / position bandwidth");
  }
  const double dt = config.plant.dt_s;
  const auto settle = static_cast<std::size_t>(std::llround(t_settle_s / dt));
  const auto avg = static_cast<std::size_t>(std::llround(t_avg_s / dt));

  control::PositionController pc(config.pos_loop);
  plant::PlantState state;
  state.q = Vec3(q_hold_m.x(), q_hold_m.y(), 0.0);
  const Vec3 r = state.q;

  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 0; i < settle + avg; ++i) {
    const Vec3 e_pos = r - state.q;
    const Vec3 f_c = pc.update(e_pos);
    const Vec3 f_ff =
        control::rigid_body_feedforward(Vec3::Zero(), config.pos_loop);
    const Vec3 f_m =
        plant::apply_wrench(state, f_c + f_ff, config.field, eta_m, config.plant);
    if (e_pos.cwiseAbs().maxCoeff() > kDivergenceLimit_m) {
      throw NumericalDivergence("steady-state hold diverged");
    }
    if (i >= settle) acc += f_c;
    state = plant::step_dynamics(state, f_m, config.plant);
  }
  return acc / static_cast<double>(avg);
}

std::vector<Vec2> EtaDataset::positions(bool ok_only) const {
  std::vector<Vec2> out;
  for (const auto& p : points) {
    if (!ok_only || p.ok) out.push_back(p.position_m);
  }
  return out;
}

std::vector<Vec2> EtaDataset::eta_values(bool ok_only) const {
  std::vector<Vec2> out;
  for (const auto& p : points) {
    if (!ok_only || p.ok) out.push_back(p.eta_star_m);
  }
  return out;
}

namespace {

EtaPoint collect_one(const CollectConfig& config, const Vec2& w, int index) {
  const double dt = config.plant.dt_s;
  const double f_bw_min =
      std::min(config.comm_loop.bandwidth_hz.x(), config.comm_loop.bandwidth_hz.y());
  double t_hold = config.t_hold_s;
  if (t_hold <= 0.0) t_hold = 5.0 / f_bw_min;
  if (t_hold < 5.0 / f_bw_min - 1e-12) {
    throw ConfigError("collect: t_hold_s below 5 / commutation bandwidth");
  }
  const auto steps = static_cast<std::size_t>(std::llround(t_hold / dt));
  const std::size_t avg_start =
      steps - std::max<std::size_t>(std::size_t(1), steps / 10);

  control::PositionController pc(config.pos_loop);
  control::CommutationState cstate;
  cstate.accumulator = config.eta_initial_m;
  cstate.eta = config.eta_initial_m;
  cstate.enabled = true;

  plant::PlantState state;
  state.q = Vec3(w.x(), w.y(), 0.0);
  const Vec3 r = state.q;

  Rng noise_rng(Rng::derive_seed(config.seed, static_cast<std::uint64_t>(index)));
  const bool noisy = config.noise_std_m > 0.0;

  EtaPoint point;
  point.index = index;
  point.position_m = w;

  Vec2 acc = Vec2::Zero();
  std::size_t acc_n = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    Vec3 q_meas = state.q;
    if (noisy) {
      q_meas += config.noise_std_m *
                Vec3(noise_rng.normal(), noise_rng.normal(), noise_rng.normal());
    }
    const Vec3 e_pos = r - q_meas;
    if (e_pos.cwiseAbs().maxCoeff() > kDivergenceLimit_m) {
      point.ok = false;
      return point;
    }
    const Vec3 f_c = pc.update(e_pos);
    const Vec3 f_ff =
        control::rigid_body_feedforward(Vec3::Zero(), config.pos_loop);
    cstate = control::commutation_regulator_step(f_c, cstate, config.comm_loop);
    const Vec3 f_m = plant::apply_wrench(state, f_c + f_ff, config.field,
                                         cstate.eta, config.plant);
    if (i >= avg_start) {
      acc += cstate.eta;
      ++acc_n;
    }
    state = plant::step_dynamics(state, f_m, config.plant);
  }
  point.eta_star_m = acc / static_cast<double>(acc_n);
  return point;
}

}  // namespace

EtaDataset collect_eta_grid(const CollectConfig& config,
                            const std::vector<Vec2>& grid_m, int workers) {
  config.plant.validate();
  config.pos_loop.validate();
  config.comm_loop.validate();

  EtaDataset dataset;
  dataset.points.resize(grid_m.size());

  const int n_workers = std::max(
      1, std::min<int>(workers, static_cast<int>(
                                    std::max<std::size_t>(1, grid_m.size()))));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < grid_m.size(); ++i) {
      dataset.points[i] = collect_one(config, grid_m[i], static_cast<int>(i));
    }
    return dataset;
  }

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= grid_m.size()) return;
      dataset.points[i] = collect_one(config, grid_m[i], static_cast<int>(i));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return dataset;
}

std::vector<Vec2> uniform_grid(const Vec2& center_m, const Vec2& span_m,
                               int nx, int ny) {
  if (nx < 1 || ny < 1) throw ConfigError("grid: counts must be >= 1");
  std::vector<Vec2> grid;
  grid.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const double fx = nx == 1 ? 0.5 : static_cast<double>(ix) / (nx - 1);
      const double fy = ny == 1 ? 0.5 : static_cast<double>(iy) / (ny - 1);
      grid.emplace_back(center_m.x() - 0.5 * span_m.x() + span_m.x() * fx,
                        center_m.y() - 0.5 * span_m.y() + span_m.y() * fy);
    }
  }
  return grid;
}

}  // namespace pmsim::sim
