#pragma once

#include "pmsim/common.hpp"
#include "pmsim/sim_log.hpp"

#include <cstddef>
#include <vector>

namespace pmsim::metrics {

/// Moving-average window of the exposure metric. The discrete window is
/// round(window_s/dt_s) samples, forced odd so the average is exactly
/// centered.
struct MaConfig {
  double window_s = 0.0144;
  double dt_s = 1e-4;

  std::size_t window_samples() const;
};

/// Centered moving average; defined only where the full window fits.
/// value[k] averages input samples [first_index + k - h, first_index + k + h]
/// with h = (window-1)/2; first_index == h.
struct MaSeries {
  std::vector<double> value;
  std::size_t first_index = 0;
};

/// Throws SeriesTooShort when the input is shorter than the window.
MaSeries ma_filter(const std::vector<double>& e, const MaConfig& config);

/// Peak |MA| of the tracking-error component `axis` over the log's
/// constant-velocity window.
double peak_ma_error(const sim::SimLog& log, int axis, const MaConfig& config);

/// RMS of the raw error component over the constant-velocity window.
double cruise_rms_error(const sim::SimLog& log, int axis);

}  // namespace pmsim::metrics
