#pragma once

#include "pmsim/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pmsim::sim {

struct LogRow {
  double t_s = 0.0;
  Vec3 r = Vec3::Zero();      // reference position [m]
  Vec3 q = Vec3::Zero();      // measured/true position [m]
  Vec3 e_pos = Vec3::Zero();  // tracking error r - q_meas [m]
  Vec3 f_c = Vec3::Zero();    // feedback force [N]
  Vec3 f_ff = Vec3::Zero();   // feedforward force [N]
  Vec3 f_m = Vec3::Zero();    // physical wrench on the mover [N]
  Vec2 eta_fb = Vec2::Zero(); // regulator frame correction [m]
  Vec2 eta_ff = Vec2::Zero(); // feedforward frame correction [m]
  std::uint8_t saturated = 0;
  std::uint8_t ff_out_of_hull = 0;
};

struct SimLog {
  std::vector<LogRow> rows;
  double dt_s = 1e-4;
  double cruise_start_s = 0.0;  // constant-velocity window, absolute time
  double cruise_end_s = 0.0;
  int scan_axis = 1;
  bool diverged = false;
  std::string mode;
  std::string config_hash;   // hash of the resolved scenario config
  std::string header_json;   // resolved config, serialized
};

}  // namespace pmsim::sim
