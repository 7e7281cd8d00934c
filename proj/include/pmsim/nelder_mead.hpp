#pragma once

#include <Eigen/Core>

#include <functional>

namespace pmsim::num {

struct NmOptions {
  int max_evals = 600;
  double x_tol = 1e-7;
  double f_tol = 1e-10;
};

struct NmResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
};

/// Derivative-free simplex minimizer (standard reflect/expand/contract/shrink
/// coefficients). `scale` sets the initial simplex edge per coordinate.
NmResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                     const Eigen::VectorXd& x0, double scale,
                     const NmOptions& opts = {});

}  // namespace pmsim::num
