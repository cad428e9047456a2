#include "uwbcount/preprocess.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace uwbcount {

void FilterConfig::validate() const {
  if (!(sample_rate > 0.0)) throw DomainError("sample_rate must be positive");
  if (!(passband_low > 0.0 && passband_low < passband_high && passband_high < sample_rate / 2.0))
    throw DomainError("passband must satisfy 0 < low < high < Nyquist");
  if (taps < 3 || taps % 2 == 0) throw DomainError("taps must be odd and >= 3");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0,1)");
}

RadarMatrix remove_dc(const RadarMatrix& m) {
  RadarMatrix out = m;
  for (std::size_t r = 0; r < out.frames(); ++r) {
    auto row = out.data.row(r);
    if (row.empty()) continue;
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    for (double& x : row) x -= mean;
  }
  return out;
}

std::vector<double> design_bandpass(const FilterConfig& cfg) {
  cfg.validate();
  const int n = cfg.taps;
  const double half = (n - 1) / 2.0;
  const double fl = cfg.passband_low / cfg.sample_rate;
  const double fh = cfg.passband_high / cfg.sample_rate;
  auto ideal_lowpass = [](double fc, double m) {
    if (m == 0.0) return 2.0 * fc;
    return std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
  };
  std::vector<double> h(static_cast<std::size_t>(n));
  std::vector<double> window(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double m = i - half;
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
    h[i] = window[i] * (ideal_lowpass(fh, m) - ideal_lowpass(fl, m));
  }
  // Enforce an exact zero at DC by removing the residual window-shaped offset.
  const double dc = std::accumulate(h.begin(), h.end(), 0.0);
  const double wsum = std::accumulate(window.begin(), window.end(), 0.0);
  for (int i = 0; i < n; ++i) h[i] -= dc * window[i] / wsum;

  const double center = 0.5 * (cfg.passband_low + cfg.passband_high);
  const double gain = kernel_response(h, center, cfg.sample_rate);
  for (double& x : h) x /= gain;
  return h;
}

double kernel_response(const std::vector<double>& kernel, double freq_hz, double sample_rate) {
  const double half = (static_cast<double>(kernel.size()) - 1.0) / 2.0;
  std::complex<double> acc{};
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
  for (std::size_t i = 0; i < kernel.size(); ++i)
    acc += kernel[i] * std::polar(1.0, -w * (static_cast<double>(i) - half));
  return std::abs(acc);
}

namespace {

// Reflection about the edge sample: index -1 maps to 1, n maps to n-2.
std::size_t reflect(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long k = i % period;
  if (k < 0) k += period;
  return static_cast<std::size_t>(k < n ? k : period - k);
}

void filter_row(std::span<const double> in, std::span<double> out, const std::vector<double>& h) {
  const long n = static_cast<long>(in.size());
  const long half = static_cast<long>(h.size() / 2);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    if (i >= half && i + half < n) {
      const double* x = in.data() + (i - half);
      for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * x[h.size() - 1 - k];
    } else {
      for (long k = 0; k < static_cast<long>(h.size()); ++k) acc += h[k] * in[reflect(i + half - k, n)];
    }
    out[i] = acc;
  }
}

}  // namespace

RadarMatrix bandpass_filter(const RadarMatrix& m, const FilterConfig& cfg, Execution exec) {
  const std::vector<double> h = design_bandpass(cfg);
  RadarMatrix out;
  out.data = Matrix(m.frames(), m.bins());
  out.stage = Stage::Bandpass;
  out.label = m.label;
  for_each_index(m.frames(), exec, [&](std::size_t r) { filter_row(m.data.row(r), out.data.row(r), h); });
  return out;
}

RadarMatrix remove_clutter(const RadarMatrix& m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0,1)");
  RadarMatrix out;
  out.data = Matrix(m.frames(), m.bins());
  out.stage = Stage::Refined;
  out.label = m.label;
  if (m.frames() == 0) return out;
  std::vector<double> clutter(m.data.row(0).begin(), m.data.row(0).end());
  for (std::size_t k = 0; k < m.frames(); ++k) {
    const auto in = m.data.row(k);
    auto y = out.data.row(k);
    for (std::size_t n = 0; n < in.size(); ++n) {
      if (k > 0) clutter[n] = alpha * clutter[n] + (1.0 - alpha) * in[n];
      y[n] = in[n] - clutter[n];
    }
  }
  return out;
}

}  // namespace uwbcount
