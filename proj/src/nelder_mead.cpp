#include "pmsim/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pmsim::num {

NmResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                     const Eigen::VectorXd& x0, double scale,
                     const NmOptions& opts) {
  const int n = static_cast<int>(x0.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 1; i <= n; ++i) xs[i][i - 1] += scale;
  int evals = 0;
  for (int i = 0; i <= n; ++i) {
    fs[i] = f(xs[i]);
    ++evals;
  }

  std::vector<int> order(n + 1);
  while (evals < opts.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fs[a] < fs[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];

    double spread = 0.0;
    for (int i = 0; i <= n; ++i) {
      spread = std::max(spread, (xs[i] - xs[best]).lpNorm<Eigen::Infinity>());
    }
    if (spread < opts.x_tol && std::abs(fs[worst] - fs[best]) < opts.f_tol) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += xs[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + alpha * (centroid - xs[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < fs[best]) {
      const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      xs[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    const Eigen::VectorXd base = outside ? xr : xs[worst];
    const Eigen::VectorXd xc = centroid + rho * (base - centroid);
    const double fc = f(xc);
    ++evals;
    if (fc < (outside ? fr : fs[worst])) {
      xs[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {  // shrink toward the best vertex
      if (i == best) continue;
      xs[i] = xs[best] + sigma * (xs[i] - xs[best]);
      fs[i] = f(xs[i]);
      ++evals;
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (fs[i] < fs[best]) best = i;
  }
  return {xs[best], fs[best], evals};
}

}  // namespace pmsim::num
