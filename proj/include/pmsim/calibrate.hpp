#pragma once

#include "pmsim/common.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pmsim::cal {

/// Measurement channel: averaged steady-state feedback force while holding
/// q with frame correction eta. Production code wraps
/// sim::measure_steady_state_force; tests may substitute analytic stubs.
using ForceProbe = std::function<Vec3(const Vec2& q_hold_m, const Vec2& eta_m)>;

struct GdConfig {
  std::vector<Vec2> positions_m;       // local measurement positions q_i
  Vec2 eta0_m = Vec2::Zero();
  double initial_step_m_per_n = 0.0;   // 0 = auto so the first step hits the cap
  double step_cap_m = 2e-3;            // coil_pitch / 20
  Vec2 perturbation_m = {8e-4, 8e-4};  // coil_pitch / 50
  double min_perturbation_m = 2e-5;    // coil_pitch / 2000
  int max_iterations = 50;
  double step_tolerance_m = 2e-5;      // coil_pitch / 2000
  double objective_floor_n = 1e-6;
  double backtrack = 0.5;              // applied to both step and perturbation
  double growth = 1.5;
  double stagnation_rel = 1e-6;

  void validate() const;
};

struct GdIteration {
  int k = 0;
  Vec2 eta_m = Vec2::Zero();  // candidate evaluated this iteration
  double objective_n = 0.0;
  std::vector<double> force_norms_n;  // per-position |F_c|
  double step_m_per_n = 0.0;          // learning rate in effect
  Vec2 perturbation_m = Vec2::Zero();
  bool accepted = false;
  long measurements = 0;
};

struct GdTrace {
  std::vector<GdIteration> iterations;
  long total_measurements = 0;
  bool converged = false;
  std::string stop_reason;
};

struct GdResult {
  Vec2 eta_star_m = Vec2::Zero();
  GdTrace trace;
};

/// Sum over positions of the steady-state feedback force norm.
double objective(const Vec2& eta_m, const GdConfig& config,
                 const ForceProbe& probe);

/// One-sided finite differences, (n_eta + 1) measurements per position:
/// g_i[j] = (|F(q_i, eta + xi_j e_j)| - |F(q_i, eta)|) / xi_j.
/// `clamped` (optional) marks positions whose perturbed correction left the
/// +-coil_pitch/4 box implied by min over perturbations; `base_norms`
/// (optional) receives |F(q_i, eta)|.
std::vector<Vec2> estimate_gradient(const Vec2& eta_m, const GdConfig& config,
                                    const ForceProbe& probe,
                                    std::vector<double>* base_norms = nullptr,
                                    long* measurements = nullptr);

/// Backtracking gradient descent on the stacked per-position gradients
/// (uniform averaging). A candidate is accepted when its objective does not
/// exceed the best seen; rejection shrinks both the learning rate and the
/// perturbation. Throws NoDescent when the learning rate underflows without
/// any improvement over the starting point.
GdResult gd_calibrate(const GdConfig& config, const ForceProbe& probe);

}  // namespace pmsim::cal
