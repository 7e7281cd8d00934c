#pragma once

#include "pmsim/calibrate.hpp"
#include "pmsim/common.hpp"
#include "pmsim/control.hpp"
#include "pmsim/gp.hpp"
#include "pmsim/plant.hpp"
#include "pmsim/sim.hpp"
#include "pmsim/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace pmsim::io {

using Json = nlohmann::ordered_json;

/// Fully resolved run configuration. Every derived default (loop ratios,
/// drawn field parameters, sensitivities) is materialized into `resolved`
/// so the config hash covers exactly what the run will use.
struct AppConfig {
  plant::PlantParams plant;
  plant::MismatchField field;
  control::PositionLoopParams pos_loop;
  control::CommutationLoopParams comm_loop;
  traj::ProfileParams profile;

  sim::Mode mode = sim::Mode::baseline;
  double x_setpoint_m = 0.0;
  Vec2 eta_initial_m = Vec2::Zero();
  double lead_in_s = 1.0;
  double tail_s = 0.1;
  double duration_s = 0.0;
  std::uint64_t seed = 1;
  double noise_std_m = 0.0;

  int collect_nx = 24, collect_ny = 24;
  Vec2 collect_center_m = Vec2::Zero();
  Vec2 collect_span_m = {0.2, 0.2};
  double t_hold_s = 0.0;  // 0 = 5 / commutation bandwidth
  int workers = 0;        // 0 = hardware concurrency

  int cal_nx = 6, cal_ny = 6;
  Vec2 cal_center_m = Vec2::Zero();
  Vec2 cal_span_m = {0.18, 0.18};
  cal::GdConfig gd;  // positions filled from the calibration grid
  double t_settle_s = 0.0;
  double t_avg_s = 0.0;

  int tune_budget = 3;
  double split = 0.8;
  double bfr_floor_pct = 0.0;
  std::uint64_t gp_seed = 7;
  gp::KernelParams gp_init_x;
  gp::KernelParams gp_init_y;
  bool gp_init_given = false;

  Json resolved;         // canonical resolved config
  std::string hash_hex;  // fnv1a-64 of resolved.dump()

  sim::ScenarioConfig scenario_config(
      const gp::FeedforwardModel* ff = nullptr) const;
  sim::CollectConfig collect_config() const;
  sim::HoldConfig hold_config() const;
};

/// Parses and resolves a config document. Unknown keys and invalid values
/// raise ConfigError naming the offending key.
AppConfig parse_config(const Json& doc);

/// Reads a config file; JSON syntax errors are reported with line numbers.
AppConfig load_config(const std::string& path);

Json field_to_json(const plant::MismatchField& field);
plant::MismatchField field_from_json(const Json& j, double coil_pitch_m);

}  // namespace pmsim::io
