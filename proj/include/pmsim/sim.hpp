#pragma once

#include "pmsim/common.hpp"
#include "pmsim/control.hpp"
#include "pmsim/gp.hpp"
#include "pmsim/plant.hpp"
#include "pmsim/sim_log.hpp"
#include "pmsim/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pmsim::sim {

enum class Mode { baseline, static_calibrated, dynamic, dynamic_ff };

const char* mode_name(Mode mode);
Mode parse_mode(const std::string& name);  // throws ConfigError

/// Everything one scenario run needs. `mode` decides which of
/// {fixed eta, regulator, feedforward} are active:
///   baseline / static-calibrated : eta fixed at eta_initial_m
///   dynamic                      : regulator integrates from eta_initial_m
///   dynamic+ff                   : regulator + GP feedforward at the reference
struct ScenarioConfig {
  Mode mode = Mode::baseline;
  plant::PlantParams plant;
  plant::MismatchField field;
  control::PositionLoopParams pos_loop;
  control::CommutationLoopParams comm_loop;
  traj::ProfileParams profile;
  double x_setpoint_m = 0.0;
  Vec2 eta_initial_m = Vec2::Zero();
  double lead_in_s = 1.0;  // pre-roll hold before the scan starts
  double tail_s = 0.1;
  double duration_s = 0.0;  // 0 = lead_in + profile + tail
  std::uint64_t seed = 1;
  double noise_std_m = 0.0;  // additive measurement noise
  const gp::FeedforwardModel* feedforward = nullptr;
  std::string config_hash;
  std::string header_json;

  void validate() const;
};

/// Fixed-rate closed loop: read q, form the feedback and feedforward
/// forces, update the frame correction per mode, push the commanded wrench
/// through the mismatched coupling, integrate the mover. On divergence
/// (|e_pos| > 10 mm) the partial log is returned with `diverged` set.
SimLog run_scenario(const ScenarioConfig& config);

struct HoldConfig {
  plant::PlantParams plant;
  plant::MismatchField field;
  control::PositionLoopParams pos_loop;
};

/// Average feedback force while holding q_hold with a fixed frame
/// correction (regulator off): settle for t_settle_s, then average F_c over
/// t_avg_s. Throws NumericalDivergence if the hold blows up.
Vec3 measure_steady_state_force(const HoldConfig& config, const Vec2& q_hold_m,
                                const Vec2& eta_m, double t_settle_s,
                                double t_avg_s);

struct EtaPoint {
  int index = 0;
  Vec2 position_m = Vec2::Zero();
  Vec2 eta_star_m = Vec2::Zero();
  bool ok = true;
};

struct EtaDataset {
  std::vector<EtaPoint> points;

  std::vector<Vec2> positions(bool ok_only = true) const;
  std::vector<Vec2> eta_values(bool ok_only = true) const;
};

struct CollectConfig {
  plant::PlantParams plant;
  plant::MismatchField field;
  control::PositionLoopParams pos_loop;
  control::CommutationLoopParams comm_loop;
  Vec2 eta_initial_m = Vec2::Zero();
  double t_hold_s = 0.0;  // 0 = 5 / min bandwidth
  std::uint64_t seed = 1;
  double noise_std_m = 0.0;
};

/// Set-point hold at every grid position with the regulator active; the
/// settled correction (mean over the final 10% of the hold) becomes the
/// training target. Points are independent, so `workers` threads may split
/// them; results are merged by index and do not depend on scheduling.
/// Diverged points are kept with ok = false.
EtaDataset collect_eta_grid(const CollectConfig& config,
                            const std::vector<Vec2>& grid_m, int workers = 1);

/// Row-major uniform grid over a centered rectangle.
std::vector<Vec2> uniform_grid(const Vec2& center_m, const Vec2& span_m,
                               int nx, int ny);

}  // namespace pmsim::sim
