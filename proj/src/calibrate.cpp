#include "pmsim/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmsim::cal {

void GdConfig::validate() const {
  if (positions_m.empty()) throw ConfigError("calibrate: needs >= 1 position");
  if (!(perturbation_m.x() != 0.0 && perturbation_m.y() != 0.0))
    throw ConfigError("calibrate: perturbation_m components must be nonzero");
  if (!(min_perturbation_m > 0.0))
    throw ConfigError("calibrate: min_perturbation_m must be > 0");
  if (max_iterations < 1) throw ConfigError("calibrate: max_iterations >= 1");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw ConfigError("calibrate: backtrack must be in (0, 1)");
  if (!(growth >= 1.0)) throw ConfigError("calibrate: growth must be >= 1");
  if (!(step_cap_m > 0.0)) throw ConfigError("calibrate: step_cap_m must be > 0");
  if (!(step_tolerance_m > 0.0))
    throw ConfigError("calibrate: step_tolerance_m must be > 0");
}

double objective(const Vec2& eta_m, const GdConfig& config,
                 const ForceProbe& probe) {
  double j = 0.0;
  for (const Vec2& q : config.positions_m) j += probe(q, eta_m).norm();
  return j;
}

namespace {

std::vector<double> measure_base_norms(const Vec2& eta, const GdConfig& config,
                                       const ForceProbe& probe) {
  std::vector<double> norms;
  norms.reserve(config.positions_m.size());
  for (const Vec2& q : config.positions_m) norms.push_back(probe(q, eta).norm());
  return norms;
}

// One-sided differences against already-measured base norms; n_eta
// measurements per position.
std::vector<Vec2> measure_gradients(const Vec2& eta, const Vec2& xi,
                                    const std::vector<double>& base_norms,
                                    const GdConfig& config,
                                    const ForceProbe& probe) {
  std::vector<Vec2> grads;
  grads.reserve(config.positions_m.size());
  for (std::size_t i = 0; i < config.positions_m.size(); ++i) {
    const Vec2& q = config.positions_m[i];
    Vec2 g;
    for (int j = 0; j < 2; ++j) {
      Vec2 eta_pert = eta;
      eta_pert[j] += xi[j];
      g[j] = (probe(q, eta_pert).norm() - base_norms[i]) / xi[j];
    }
    grads.push_back(g);
  }
  return grads;
}

double shrink_perturbation(double xi, double factor, double floor) {
  const double mag = std::max(std::abs(xi) * factor, floor);
  return std::copysign(mag, xi);
}

}  // namespace

std::vector<Vec2> estimate_gradient(const Vec2& eta_m, const GdConfig& config,
                                    const ForceProbe& probe,
                                    std::vector<double>* base_norms,
                                    long* measurements) {
  config.validate();
  const std::vector<double> base = measure_base_norms(eta_m, config, probe);
  const std::vector<Vec2> grads =
      measure_gradients(eta_m, config.perturbation_m, base, config, probe);
  if (base_norms) *base_norms = base;
  if (measurements) {
    *measurements = static_cast<long>(config.positions_m.size()) * 3;
  }
  return grads;
}

GdResult gd_calibrate(const GdConfig& config, const ForceProbe& probe) {
  config.validate();

  const auto n_p = static_cast<long>(config.positions_m.size());
  GdResult result;
  GdTrace& trace = result.trace;

  Vec2 eta_cur = config.eta0_m;
  Vec2 xi = config.perturbation_m;
  double lambda = config.initial_step_m_per_n;  // 0 = auto after first gradient
  double lambda_ref = lambda;

  Vec2 eta_best = eta_cur;
  Vec2 g_mean = Vec2::Zero();
  double j_best = std::numeric_limits<double>::infinity();
  double j_start = std::numeric_limits<double>::infinity();
  double last_improvement = std::numeric_limits<double>::infinity();

  for (int k = 1; k <= config.max_iterations; ++k) {
    GdIteration it;
    it.k = k;
    it.eta_m = eta_cur;
    it.perturbation_m = xi;

    const std::vector<double> base = measure_base_norms(eta_cur, config, probe);
    double j_cur = 0.0;
    for (double n : base) j_cur += n;
    it.objective_n = j_cur;
    it.force_norms_n = base;

    if (j_cur < config.objective_floor_n) {
      it.accepted = j_cur <= j_best;
      it.step_m_per_n = lambda;
      it.measurements = n_p;
      trace.total_measurements += it.measurements;
      trace.iterations.push_back(std::move(it));
      if (j_cur <= j_best) eta_best = eta_cur;
      trace.converged = true;
      trace.stop_reason = "objective below floor";
      break;
    }

    const std::vector<Vec2> grads =
        measure_gradients(eta_cur, xi, base, config, probe);
    it.measurements = n_p * 3;
    trace.total_measurements += it.measurements;

    const bool accepted = j_cur <= j_best;
    it.accepted = accepted;
    if (k == 1) j_start = j_cur;
    if (accepted) {
      last_improvement = (k == 1) ? std::numeric_limits<double>::infinity()
                                  : j_best - j_cur;
      eta_best = eta_cur;
      j_best = j_cur;
      g_mean = Vec2::Zero();
      for (const Vec2& g : grads) g_mean += g;
      g_mean /= static_cast<double>(grads.size());
      if (k > 1) lambda *= config.growth;
    } else {
      lambda *= config.backtrack;
      xi.x() = shrink_perturbation(xi.x(), config.backtrack,
                                   config.min_perturbation_m);
      xi.y() = shrink_perturbation(xi.y(), config.backtrack,
                                   config.min_perturbation_m);
    }

    if (lambda <= 0.0) {
      const double g_norm = g_mean.norm();
      lambda = g_norm > 0.0 ? config.step_cap_m / g_norm : 1.0;
      lambda_ref = lambda;
    }
    if (lambda_ref <= 0.0) lambda_ref = lambda;
    it.step_m_per_n = lambda;
    trace.iterations.push_back(std::move(it));

    if (lambda < lambda_ref * 1e-9) {
      if (!(j_best < j_start)) {
        throw NoDescent("calibrate: step size underflow without improvement");
      }
      trace.converged = true;
      trace.stop_reason = "step size underflow after improvement";
      break;
    }

    Vec2 step_vec = lambda * g_mean;
    const double step_norm = step_vec.norm();
    if (step_norm > config.step_cap_m) {
      step_vec *= config.step_cap_m / step_norm;
    }

    if (step_vec.norm() < config.step_tolerance_m &&
        last_improvement <= config.stagnation_rel *
                                    std::max(j_best, config.objective_floor_n) +
                                config.objective_floor_n) {
      trace.converged = true;
      trace.stop_reason = "step below tolerance with stagnant objective";
      break;
    }

    eta_cur = eta_best - step_vec;
  }

  if (trace.stop_reason.empty()) trace.stop_reason = "max iterations";
  result.eta_star_m = eta_best;
  return result;
}

}  // namespace pmsim::cal
