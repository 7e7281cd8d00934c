#include "pmsim/metrics.hpp"

#include "pmsim/simd/ops.hpp"

#include <algorithm>
#include <cmath>

namespace pmsim::metrics {

std::size_t MaConfig::window_samples() const {
  if (!(window_s > dt_s)) throw ConfigError("ma.window_s must exceed dt_s");
  auto n = static_cast<long long>(std::llround(window_s / dt_s));
  if (n % 2 == 0) ++n;  // exact centering
  return static_cast<std::size_t>(std::max(1ll, n));
}

MaSeries ma_filter(const std::vector<double>& e, const MaConfig& config) {
  const std::size_t w = config.window_samples();
  if (e.size() < w) {
    throw SeriesTooShort("ma_filter: series shorter than the window");
  }
  MaSeries out;
  out.first_index = (w - 1) / 2;
  out.value.resize(e.size() - w + 1);
  simd::windowed_mean(e.data(), e.size(), w, out.value.data());
  return out;
}

namespace {

std::vector<double> error_component(const sim::SimLog& log, int axis) {
  std::vector<double> e(log.rows.size());
  for (std::size_t i = 0; i < log.rows.size(); ++i) e[i] = log.rows[i].e_pos[axis];
  return e;
}

}  // namespace

double peak_ma_error(const sim::SimLog& log, int axis, const MaConfig& config) {
  const std::vector<double> e = error_component(log, axis);
  const MaSeries ma = ma_filter(e, config);
  const double dt = log.dt_s;
  double peak = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < ma.value.size(); ++k) {
    const double t = static_cast<double>(ma.first_index + k) * dt;
    if (t < log.cruise_start_s || t > log.cruise_end_s) continue;
    peak = std::max(peak, std::abs(ma.value[k]));
    any = true;
  }
  if (!any) {
    throw SeriesTooShort("peak_ma_error: log does not cover the cruise window");
  }
  return peak;
}

double cruise_rms_error(const sim::SimLog& log, int axis) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& row : log.rows) {
    if (row.t_s < log.cruise_start_s || row.t_s > log.cruise_end_s) continue;
    acc += row.e_pos[axis] * row.e_pos[axis];
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

}  // namespace pmsim::metrics
