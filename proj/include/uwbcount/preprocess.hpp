#pragma once

#include <vector>

#include "uwbcount/common.hpp"

namespace uwbcount {

struct FilterConfig {
  double passband_low = 5.65e9;
  double passband_high = 7.95e9;
  int taps = 129;
  double alpha = 0.9;  // clutter forgetting factor
  double sample_rate = kSpeedOfLight / (2.0 * 0.0039);

  void validate() const;
};

/// Subtracts each frame's fast-time mean.
RadarMatrix remove_dc(const RadarMatrix& m);

/// Hamming-windowed FIR bandpass kernel, odd length, centered (zero phase).
/// Normalized to unit gain at the passband center.
std::vector<double> design_bandpass(const FilterConfig& cfg);

/// Magnitude of the kernel's frequency response at `freq_hz`.
double kernel_response(const std::vector<double>& kernel, double freq_hz, double sample_rate);

/// Convolves every frame with the bandpass kernel, reflection-padded at the edges.
RadarMatrix bandpass_filter(const RadarMatrix& m, const FilterConfig& cfg,
                            Execution exec = Execution::Parallel);

/// Running-average clutter removal along slow time:
/// c_k = alpha c_{k-1} + (1 - alpha) r_k with c_0 = r_0; output r_k - c_k.
RadarMatrix remove_clutter(const RadarMatrix& m, double alpha);

}  // namespace uwbcount
