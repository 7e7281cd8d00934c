#pragma once

// Shared test fixtures: the default randomized field and baseline loop
// parameter sets used across the unit and acceptance suites.

#include "pmsim/control.hpp"
#include "pmsim/plant.hpp"
#include "pmsim/sim.hpp"

namespace pmsim::testfix {

inline plant::PlantParams default_plant() { return plant::PlantParams{}; }

inline plant::MismatchField acceptance_field(std::uint64_t seed = 42) {
  plant::RandomFieldSpec spec;
  spec.seed = seed;
  return plant::MismatchField::randomized(spec, {0.1, 0.1},
                                          default_plant().coil_pitch_m);
}

inline control::PositionLoopParams default_pos_loop() {
  return control::PositionLoopParams{};
}

inline control::CommutationLoopParams default_comm_loop() {
  const auto pp = default_plant();
  control::CommutationLoopParams p;
  p.bandwidth_hz = {1.5, 1.5};
  p.sensitivity_n_per_m = control::CommutationLoopParams::nominal_sensitivity(
      pp.cross_coupling, pp.coil_pitch_m, pp.mass_kg, pp.gravity_m_s2);
  p.sign = {-1.0, -1.0};
  p.dt_s = pp.dt_s;
  p.clamp_m = pp.coil_pitch_m / 4.0;
  return p;
}

inline sim::HoldConfig default_hold(const plant::MismatchField& field) {
  return {default_plant(), field, default_pos_loop()};
}

inline sim::CollectConfig default_collect(const plant::MismatchField& field) {
  sim::CollectConfig cc;
  cc.plant = default_plant();
  cc.field = field;
  cc.pos_loop = default_pos_loop();
  cc.comm_loop = default_comm_loop();
  return cc;
}

inline sim::ScenarioConfig default_scenario(const plant::MismatchField& field,
                                            sim::Mode mode) {
  sim::ScenarioConfig sc;
  sc.mode = mode;
  sc.plant = default_plant();
  sc.field = field;
  sc.pos_loop = default_pos_loop();
  sc.comm_loop = default_comm_loop();
  sc.profile = traj::ProfileParams{};
  return sc;
}

}  // namespace pmsim::testfix
