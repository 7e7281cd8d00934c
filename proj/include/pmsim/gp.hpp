#pragma once

#include "pmsim/common.hpp"

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pmsim::gp {

/// Hyperparameters of the composite covariance for one output axis:
///   k(w, w') = s1 * exp( -sum_v |w_v - w'_v|^2 / s_{v+1}
///                        -sum_v 2 sin^2(pi (w_v - w'_v) / period) / s_{v+3} )
/// The first pair of denominators is the squared-exponential part (units m^2),
/// the second pair scales the periodic part (dimensionless). `period_m` maps
/// position differences to phase; default is the coil pitch.
struct KernelParams {
  double signal_var_m2 = 1e-6;  // s1
  double rbf_x_m2 = 4e-3;       // s2
  double rbf_y_m2 = 4e-3;       // s3
  double periodic_x = 1.0;      // s4
  double periodic_y = 1.0;      // s5
  double noise_var_m2 = 1e-12;  // measurement noise variance
  double period_m = 0.04;

  void validate() const;  // throws ConfigError on non-positive variances
};

double kernel_eval(const Vec2& w, const Vec2& wp, const KernelParams& params);

/// One scalar GP over planar positions, trained on settled frame corrections.
/// Fitting factorizes K + noise*I once (lower Cholesky) and caches
/// alpha = (K + noise*I)^{-1} y; prediction reuses the factor.
class GpModel {
 public:
  GpModel() = default;

  /// Throws NotPositiveDefinite when the Gram matrix cannot be factorized
  /// even after jitter escalation up to 1e-8 * signal variance.
  static GpModel fit(const std::vector<Vec2>& inputs,
                     const std::vector<double>& targets,
                     const KernelParams& params);

  /// Posterior mean [m] and variance [m^2] at w.
  std::pair<double, double> predict(const Vec2& w) const;

  /// Posterior means for a batch of queries.
  std::vector<double> predict_mean(const std::vector<Vec2>& ws) const;

  /// Mean-only evaluation for per-sample feedforward use; `scratch` avoids
  /// reallocating the kernel row.
  double mean_at(const Vec2& w, std::vector<double>& scratch) const;

  double log_marginal_likelihood() const;

  const KernelParams& params() const { return params_; }
  std::size_t size() const { return targets_.size(); }
  bool fitted() const { return !targets_.empty(); }
  const std::vector<double>& input_x() const { return xs_; }
  const std::vector<double>& input_y() const { return ys_; }
  const std::vector<double>& targets() const { return targets_; }
  double applied_jitter() const { return jitter_; }

 private:
  KernelParams params_;
  std::vector<double> xs_, ys_;  // training inputs, contiguous per coordinate
  std::vector<double> targets_;
  Eigen::MatrixXd chol_l_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd y_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

/// Maximizes the log marginal likelihood over log-hyperparameters with
/// multi-start simplex search; `budget` counts starts (the initial point is
/// always one of them), so the result is never worse than `init`.
KernelParams tune_hyperparams(const std::vector<Vec2>& inputs,
                              const std::vector<double>& targets,
                              const KernelParams& init, int budget,
                              std::uint64_t seed = 0x9e3779b9ull);

/// Best Fit Ratio in percent: 100 * max(1 - |y - yhat| / |y - mean(y)|, 0).
/// Throws DegenerateTargets when the targets are constant.
double bfr_percent(const std::vector<double>& targets,
                   const std::vector<double>& predictions);

/// Two independent scalar GPs driving the commutation feedforward.
struct FeedforwardModel {
  GpModel axis_x;
  GpModel axis_y;
  Vec2 hull_lo = Vec2::Zero();  // training-input bounding box
  Vec2 hull_hi = Vec2::Zero();

  /// eta_ff = (mean_x(r), mean_y(r)); flags queries outside the training hull.
  Vec2 eval(const Vec2& r, bool* out_of_hull = nullptr) const;
};

FeedforwardModel make_feedforward(const std::vector<Vec2>& inputs,
                                  const std::vector<Vec2>& eta_targets,
                                  const KernelParams& params_x,
                                  const KernelParams& params_y);

}  // namespace pmsim::gp
