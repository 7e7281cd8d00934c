#include "pmsim/gp.hpp"

#include "pmsim/nelder_mead.hpp"
#include "pmsim/rng.hpp"
#include "pmsim/simd/ops.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace pmsim::gp {

void KernelParams::validate() const {
  const double vals[6] = {signal_var_m2, rbf_x_m2,    rbf_y_m2,
                          periodic_x,    periodic_y, noise_var_m2};
  for (double v : vals) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("gp kernel: all variances must be positive and finite");
    }
  }
  if (!(period_m > 0.0)) throw ConfigError("gp kernel: period_m must be > 0");
}

namespace {

simd::KernelRowParams row_params(const KernelParams& p) {
  simd::KernelRowParams rp;
  rp.signal_var = p.signal_var_m2;
  rp.inv_rbf_x = 1.0 / p.rbf_x_m2;
  rp.inv_rbf_y = 1.0 / p.rbf_y_m2;
  rp.two_inv_per_x = 2.0 / p.periodic_x;
  rp.two_inv_per_y = 2.0 / p.periodic_y;
  rp.pi_over_period = kPi / p.period_m;
  return rp;
}

}  // namespace

double kernel_eval(const Vec2& w, const Vec2& wp, const KernelParams& params) {
  const double dx = w.x() - wp.x();
  const double dy = w.y() - wp.y();
  double arg = dx * dx / params.rbf_x_m2 + dy * dy / params.rbf_y_m2;
  const double sx = std::sin(kPi * dx / params.period_m);
  const double sy = std::sin(kPi * dy / params.period_m);
  arg += 2.0 * sx * sx / params.periodic_x + 2.0 * sy * sy / params.periodic_y;
  return params.signal_var_m2 * std::exp(-arg);
}

GpModel GpModel::fit(const std::vector<Vec2>& inputs,
                     const std::vector<double>& targets,
                     const KernelParams& params) {
  params.validate();
  if (inputs.size() != targets.size()) {
    throw ConfigError("gp fit: inputs and targets differ in length");
  }
  const std::size_t n = inputs.size();
  if (n < 1) throw ConfigError("gp fit: empty dataset");

  GpModel m;
  m.params_ = params;
  m.xs_.resize(n);
  m.ys_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.xs_[i] = inputs[i].x();
    m.ys_[i] = inputs[i].y();
  }
  m.targets_ = targets;
  m.y_ = Eigen::Map<const Eigen::VectorXd>(targets.data(),
                                           static_cast<Eigen::Index>(n));

  Eigen::MatrixXd gram(n, n);
  const simd::KernelRowParams rp = row_params(params);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    simd::kernel_row(m.xs_.data(), m.ys_.data(), n, m.xs_[i], m.ys_[i], rp,
                     row.data());
    for (std::size_t j = 0; j < n; ++j) {
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  // enforce exact symmetry regardless of row-evaluation rounding
  gram = 0.5 * (gram + gram.transpose()).eval();

  const double jitters[] = {0.0, 1e-12, 1e-10, 1e-8};
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
  for (double j : jitters) {
    const double add = params.noise_var_m2 + j * params.signal_var_m2;
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += add;
    llt.compute(k);
    if (llt.info() == Eigen::Success) {
      m.jitter_ = j * params.signal_var_m2;
      ok = true;
      break;
    }
  }
  if (!ok) {
    throw NotPositiveDefinite(
        "gp fit: Gram matrix not positive definite after jitter escalation; "
        "degenerate hyperparameters");
  }
  m.chol_l_ = llt.matrixL();
  m.alpha_ = llt.solve(m.y_);

  const double n_d = static_cast<double>(n);
  m.lml_ = -0.5 * m.y_.dot(m.alpha_) -
           m.chol_l_.diagonal().array().log().sum() -
           0.5 * n_d * std::log(2.0 * kPi);
  return m;
}

std::pair<double, double> GpModel::predict(const Vec2& w) const {
  const std::size_t n = y_.size();
  Eigen::VectorXd k(n);
  simd::kernel_row(xs_.data(), ys_.data(), n, w.x(), w.y(),
                   row_params(params_), k.data());
  const double mean =
      simd::dot(k.data(), alpha_.data(), static_cast<std::size_t>(n));
  const Eigen::VectorXd v =
      chol_l_.triangularView<Eigen::Lower>().solve(k);
  double var = params_.signal_var_m2 - v.squaredNorm();
  var = std::max(var, 0.0);
  return {mean, var};
}

std::vector<double> GpModel::predict_mean(const std::vector<Vec2>& ws) const {
  std::vector<double> scratch;
  std::vector<double> out(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) out[i] = mean_at(ws[i], scratch);
  return out;
}

double GpModel::mean_at(const Vec2& w, std::vector<double>& scratch) const {
  const std::size_t n = y_.size();
  scratch.resize(n);
  simd::kernel_row(xs_.data(), ys_.data(), n, w.x(), w.y(),
                   row_params(params_), scratch.data());
  return simd::dot(scratch.data(), alpha_.data(), n);
}

double GpModel::log_marginal_likelihood() const { return lml_; }

KernelParams tune_hyperparams(const std::vector<Vec2>& inputs,
                              const std::vector<double>& targets,
                              const KernelParams& init, int budget,
                              std::uint64_t seed) {
  if (budget < 1) throw ConfigError("gp tune: budget must be >= 1");
  init.validate();

  auto pack = [](const KernelParams& p) {
    Eigen::VectorXd t(6);
    t << std::log(p.signal_var_m2), std::log(p.rbf_x_m2), std::log(p.rbf_y_m2),
        std::log(p.periodic_x), std::log(p.periodic_y),
        std::log(p.noise_var_m2);
    return t;
  };
  auto unpack = [&](const Eigen::VectorXd& t) {
    KernelParams p = init;  // keeps period_m
    p.signal_var_m2 = std::exp(t[0]);
    p.rbf_x_m2 = std::exp(t[1]);
    p.rbf_y_m2 = std::exp(t[2]);
    p.periodic_x = std::exp(t[3]);
    p.periodic_y = std::exp(t[4]);
    p.noise_var_m2 = std::exp(t[5]);
    return p;
  };

  auto objective = [&](const Eigen::VectorXd& t) -> double {
    for (int i = 0; i < 6; ++i) {
      if (t[i] < -46.0 || t[i] > 14.0) return 1e100;  // e^-46 .. e^14
    }
    try {
      return -GpModel::fit(inputs, targets, unpack(t))
                  .log_marginal_likelihood();
    } catch (const NotPositiveDefinite&) {
      return 1e100;
    }
  };

  Eigen::VectorXd best_x = pack(init);
  double best_f = objective(best_x);

  Rng rng(seed);
  num::NmOptions opts;
  opts.max_evals = 300;
  for (int start = 0; start < budget; ++start) {
    Eigen::VectorXd x0 = pack(init);
    if (start > 0) {
      for (int i = 0; i < 6; ++i) x0[i] += rng.uniform(-1.5, 1.5);
    }
    const num::NmResult r = num::nelder_mead(objective, x0, 0.7, opts);
    if (r.f < best_f) {
      best_f = r.f;
      best_x = r.x;
    }
  }
  return unpack(best_x);
}

double bfr_percent(const std::vector<double>& targets,
                   const std::vector<double>& predictions) {
  if (targets.size() != predictions.size()) {
    throw ConfigError("bfr: targets and predictions differ in length");
  }
  if (targets.size() < 2) throw ConfigError("bfr: need at least 2 samples");
  const auto n = static_cast<Eigen::Index>(targets.size());
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  const Eigen::Map<const Eigen::VectorXd> yhat(predictions.data(), n);
  const double denom = (y.array() - y.mean()).matrix().norm();
  if (denom == 0.0) {
    throw DegenerateTargets("bfr: constant targets (zero denominator)");
  }
  return 100.0 * std::max(0.0, 1.0 - (y - yhat).norm() / denom);
}

Vec2 FeedforwardModel::eval(const Vec2& r, bool* out_of_hull) const {
  if (out_of_hull) {
    *out_of_hull = r.x() < hull_lo.x() || r.x() > hull_hi.x() ||
                   r.y() < hull_lo.y() || r.y() > hull_hi.y();
  }
  thread_local std::vector<double> scratch;
  return {axis_x.mean_at(r, scratch), axis_y.mean_at(r, scratch)};
}

FeedforwardModel make_feedforward(const std::vector<Vec2>& inputs,
                                  const std::vector<Vec2>& eta_targets,
                                  const KernelParams& params_x,
                                  const KernelParams& params_y) {
  if (inputs.size() != eta_targets.size() || inputs.size() < 2) {
    throw ConfigError("feedforward: need matching inputs/targets, N >= 2");
  }
  std::vector<double> tx(inputs.size()), ty(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    tx[i] = eta_targets[i].x();
    ty[i] = eta_targets[i].y();
  }
  FeedforwardModel ff;
  ff.axis_x = GpModel::fit(inputs, tx, params_x);
  ff.axis_y = GpModel::fit(inputs, ty, params_y);
  ff.hull_lo = inputs[0];
  ff.hull_hi = inputs[0];
  for (const Vec2& w : inputs) {
    ff.hull_lo = ff.hull_lo.cwiseMin(w);
    ff.hull_hi = ff.hull_hi.cwiseMax(w);
  }
  return ff;
}

}  // namespace pmsim::gp
