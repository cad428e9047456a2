#include "uwbcount/curvelet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "fft.hpp"

namespace uwbcount {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Meyer auxiliary polynomial: 0 below 0, 1 above 1, nu(x) + nu(1-x) = 1.
double meyer_nu(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * x * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x);
}

// Smooth lowpass in the max-norm radius: 1 below 2s/3, 0 above 4s/3.
double lowpass(double r, double s) {
  const double lo = 2.0 * s / 3.0;
  if (r <= lo) return 1.0;
  if (r >= 2.0 * lo) return 0.0;
  return std::cos(0.5 * kPi * meyer_nu((r - lo) / lo));
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// Frequency-plane direction of the center of panel p (1-based). Panels run
// clockwise; panels 1 and L straddle the 45-degree orientation.
double panel_center(int p, int n_angles) {
  const double step = 2.0 * kPi / n_angles;
  return wrap_angle(-kPi / 4.0 - step / 2.0 - step * (p - 1));
}

double panel_orientation_deg(int p, int n_angles) {
  double deg = panel_center(p, n_angles) * 180.0 / kPi + 90.0;
  deg = std::fmod(deg, 180.0);
  if (deg < 0.0) deg += 180.0;
  return deg;
}

double angular_window(double phi, int p, int n_angles) {
  const double step = 2.0 * kPi / n_angles;
  const double half = step / 2.0;
  const double delta = step / 4.0;
  const double d = std::abs(wrap_angle(phi - panel_center(p, n_angles)));
  if (d <= half - delta) return 1.0;
  if (d >= half + delta) return 0.0;
  return std::cos(0.5 * kPi * meyer_nu((d - (half - delta)) / (2.0 * delta)));
}

struct SupportEntry {
  std::uint32_t grid;
  std::uint32_t slot;
  double weight;
};

struct BandPlan {
  BandInfo info;
  std::vector<SupportEntry> support;
};

struct Plan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  CurveletConfig cfg;
  std::vector<BandPlan> bands;
};

struct RawEntry {
  long k1, k2;
  std::uint32_t grid;
  double weight;
};

// Wraps a band's support into the smallest rectangle that keeps every
// line of the support injective: lines run along one axis unwrapped, the
// other axis is folded modulo the longest per-line span.
BandPlan wrap_band(int scale, int angle, double orientation, const std::vector<RawEntry>& raw) {
  BandPlan band;
  band.info.scale = scale;
  band.info.angle = angle;
  band.info.orientation_deg = orientation;
  if (raw.empty()) {
    band.info.rows = band.info.cols = 1;
    return band;
  }
  auto layout = [&](bool lines_along_rows) {
    std::map<long, std::pair<long, long>> spans;
    long lo = raw.front().k1, hi = raw.front().k1;
    for (const auto& e : raw) {
      const long line = lines_along_rows ? e.k1 : e.k2;
      const long pos = lines_along_rows ? e.k2 : e.k1;
      lo = std::min(lo, line);
      hi = std::max(hi, line);
      auto [it, fresh] = spans.try_emplace(line, pos, pos);
      if (!fresh) {
        it->second.first = std::min(it->second.first, pos);
        it->second.second = std::max(it->second.second, pos);
      }
    }
    long widest = 0;
    for (const auto& [line, s] : spans) widest = std::max(widest, s.second - s.first + 1);
    lo = spans.begin()->first;
    hi = spans.rbegin()->first;
    return std::make_tuple(lo, detail::next_smooth(static_cast<std::size_t>(hi - lo + 1)),
                           detail::next_smooth(static_cast<std::size_t>(widest)));
  };
  const auto [lo_a, lines_a, fold_a] = layout(true);
  const auto [lo_b, lines_b, fold_b] = layout(false);
  const bool use_a = lines_a * fold_a <= lines_b * fold_b;
  band.info.rows = use_a ? lines_a : fold_b;
  band.info.cols = use_a ? fold_a : lines_b;
  const long rows = static_cast<long>(band.info.rows);
  const long cols = static_cast<long>(band.info.cols);
  auto fold = [](long v, long m) { return ((v % m) + m) % m; };
  double w2 = 0.0;
  band.support.reserve(raw.size());
  for (const auto& e : raw) {
    const long r = use_a ? e.k1 - lo_a : fold(e.k1, rows);
    const long c = use_a ? fold(e.k2, cols) : e.k2 - lo_b;
    band.support.push_back({e.grid, static_cast<std::uint32_t>(r * cols + c), e.weight});
    w2 += e.weight * e.weight;
  }
  band.info.noise_gain = std::sqrt(w2 / static_cast<double>(rows * cols));
  return band;
}

long centered(std::size_t i, std::size_t n) {
  return static_cast<long>(i) < static_cast<long>((n + 1) / 2) ? static_cast<long>(i)
                                                                  : static_cast<long>(i) - static_cast<long>(n);
}

std::shared_ptr<const Plan> build_plan(std::size_t rows, std::size_t cols, const CurveletConfig& cfg) {
  auto plan = std::make_shared<Plan>();
  plan->rows = rows;
  plan->cols = cols;
  plan->cfg = cfg;
  const int J = cfg.n_scales;
  const int L = cfg.n_angles_detail;
  // lowpass cutoffs s_j for j = 0..J-2, dyadic, outermost 0.5
  std::vector<double> cutoff;
  for (int j = 0; j <= J - 2; ++j) cutoff.push_back(0.5 * std::ldexp(1.0, j - (J - 2)));

  std::vector<std::vector<RawEntry>> raw(static_cast<std::size_t>(2 + (J - 2) * L));
  for (std::size_t i1 = 0; i1 < rows; ++i1) {
    const long k1 = centered(i1, rows);
    const double xi1 = 2.0 * static_cast<double>(k1) / static_cast<double>(rows);
    for (std::size_t i2 = 0; i2 < cols; ++i2) {
      const long k2 = centered(i2, cols);
      const double xi2 = 2.0 * static_cast<double>(k2) / static_cast<double>(cols);
      const auto grid = static_cast<std::uint32_t>(i1 * cols + i2);
      const double r = std::max(std::abs(xi1), std::abs(xi2));
      const double phi = std::atan2(xi1, xi2);
      double prev = lowpass(r, cutoff[0]);
      if (prev > 0.0) raw[0].push_back({k1, k2, grid, prev});
      for (int j = 1; j <= J - 2; ++j) {
        const double cur = lowpass(r, cutoff[static_cast<std::size_t>(j)]);
        const double radial = std::sqrt(std::max(0.0, cur * cur - prev * prev));
        prev = cur;
        if (radial <= 0.0) continue;
        for (int p = 1; p <= L; ++p) {
          const double v = angular_window(phi, p, L);
          if (v > 0.0) raw[static_cast<std::size_t>(1 + (j - 1) * L + (p - 1))].push_back({k1, k2, grid, radial * v});
        }
      }
      const double fine = std::sqrt(std::max(0.0, 1.0 - prev * prev));
      if (fine > 0.0) raw.back().push_back({k1, k2, grid, fine});
    }
  }
  plan->bands.push_back(wrap_band(0, 0, -1.0, raw[0]));
  for (int j = 1; j <= J - 2; ++j)
    for (int p = 1; p <= L; ++p)
      plan->bands.push_back(wrap_band(j, p, panel_orientation_deg(p, L),
                                      raw[static_cast<std::size_t>(1 + (j - 1) * L + (p - 1))]));
  plan->bands.push_back(wrap_band(J - 1, 0, -1.0, raw.back()));
  return plan;
}

std::shared_ptr<const Plan> get_plan(std::size_t rows, std::size_t cols, const CurveletConfig& cfg) {
  cfg.validate();
  const std::size_t min_dim = std::size_t{1} << (cfg.n_scales + 2);
  if (rows < min_dim || cols < min_dim)
    throw DomainError("matrix too small for " + std::to_string(cfg.n_scales) + " scales (need >= " +
                      std::to_string(min_dim) + " per side)");
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, int, int>, std::shared_ptr<const Plan>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(rows, cols, cfg.n_scales, cfg.n_angles_detail);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_plan(rows, cols, cfg)).first;
  return it->second;
}

void check_shapes(const CurveletCoeffs& c, const Plan& plan) {
  if (c.bands.size() != plan.bands.size()) throw DomainError("coefficient band count does not match config");
  for (std::size_t b = 0; b < plan.bands.size(); ++b) {
    const auto& info = plan.bands[b].info;
    const auto& band = c.bands[b];
    if (band.rows != info.rows || band.cols != info.cols || band.coeffs.size() != info.rows * info.cols ||
        band.scale != info.scale || band.angle != info.angle)
      throw DomainError("coefficient band " + std::to_string(b) + " has inconsistent shape");
  }
}

// Adjoint restricted to bands with keep[b] true.
std::vector<cplx> adjoint_subset(const CurveletCoeffs& c, const std::vector<bool>& keep, Execution exec) {
  auto plan = get_plan(c.source_rows, c.source_cols, c.config);
  check_shapes(c, *plan);
  const std::size_t n_bands = plan->bands.size();
  std::vector<std::vector<cplx>> spectra(n_bands);
  auto band_spectrum = [&](std::size_t b) {
    if (!keep[b]) return;
    const auto& info = plan->bands[b].info;
    spectra[b] = c.bands[b].coeffs;
    detail::fft2_unitary(spectra[b].data(), info.rows, info.cols, false);
  };
  for_each_index(n_bands, exec, band_spectrum);
  std::vector<cplx> grid(plan->rows * plan->cols);
  for (std::size_t b = 0; b < n_bands; ++b) {
    if (!keep[b]) continue;
    for (const auto& e : plan->bands[b].support) grid[e.grid] += e.weight * spectra[b][e.slot];
  }
  detail::fft2_unitary(grid.data(), plan->rows, plan->cols, true);
  return grid;
}

RadarMatrix real_part(const std::vector<cplx>& img, std::size_t rows, std::size_t cols) {
  RadarMatrix out;
  out.data = Matrix(rows, cols);
  for (std::size_t i = 0; i < img.size(); ++i) out.data.values()[i] = img[i].real();
  return out;
}

}  // namespace

void CurveletConfig::validate() const {
  if (n_scales < 2) throw DomainError("n_scales must be >= 2");
  if (n_scales > 8) throw DomainError("n_scales must be <= 8");
  if (n_angles_detail < 4 || n_angles_detail % 4 != 0) throw DomainError("n_angles_detail must be a positive multiple of 4");
}

double CurveletBand::energy() const {
  double e = 0.0;
  for (const auto& v : coeffs) e += std::norm(v);
  return e;
}

double CurveletCoeffs::energy() const {
  double e = 0.0;
  for (const auto& b : bands) e += b.energy();
  return e;
}

std::size_t CurveletCoeffs::band_index(int scale, int panel) const {
  if (scale < 1 || scale > config.n_scales - 2 || panel < 1 || panel > config.n_angles_detail)
    throw DomainError("no directional band (scale " + std::to_string(scale) + ", panel " + std::to_string(panel) + ")");
  return static_cast<std::size_t>(1 + (scale - 1) * config.n_angles_detail + (panel - 1));
}

std::vector<BandInfo> band_layout(std::size_t rows, std::size_t cols, const CurveletConfig& cfg) {
  auto plan = get_plan(rows, cols, cfg);
  std::vector<BandInfo> out;
  for (const auto& b : plan->bands) out.push_back(b.info);
  return out;
}

int detail_scale(const CurveletConfig& cfg) {
  if (cfg.n_scales < 3) throw DomainError("configuration has no directional scale");
  return cfg.n_scales - 2;
}

CurveletCoeffs forward(const Matrix& m, const CurveletConfig& cfg, Execution exec) {
  if (!all_finite(m.values())) throw DomainError("curvelet input contains non-finite values");
  auto plan = get_plan(m.rows(), m.cols(), cfg);
  std::vector<cplx> spectrum(m.values().begin(), m.values().end());
  detail::fft2_unitary(spectrum.data(), m.rows(), m.cols(), false);

  CurveletCoeffs out;
  out.source_rows = m.rows();
  out.source_cols = m.cols();
  out.config = cfg;
  out.bands.resize(plan->bands.size());
  auto one_band = [&](std::size_t b) {
    const auto& bp = plan->bands[b];
    CurveletBand& band = out.bands[b];
    band.scale = bp.info.scale;
    band.angle = bp.info.angle;
    band.rows = bp.info.rows;
    band.cols = bp.info.cols;
    band.coeffs.assign(band.rows * band.cols, cplx{});
    for (const auto& e : bp.support) band.coeffs[e.slot] = e.weight * spectrum[e.grid];
    detail::fft2_unitary(band.coeffs.data(), band.rows, band.cols, true);
  };
  for_each_index(plan->bands.size(), exec, one_band);
  return out;
}

CurveletCoeffs forward(const RadarMatrix& m, const CurveletConfig& cfg, Execution exec) {
  return forward(m.data, cfg, exec);
}

std::vector<std::complex<double>> adjoint(const CurveletCoeffs& c, Execution exec) {
  return adjoint_subset(c, std::vector<bool>(c.bands.size(), true), exec);
}

RadarMatrix inverse(const CurveletCoeffs& c, Execution exec) {
  return real_part(adjoint(c, exec), c.source_rows, c.source_cols);
}

const char* to_string(PanelGroupKind k) {
  switch (k) {
    case PanelGroupKind::Deg45: return "deg45";
    case PanelGroupKind::Deg90: return "deg90";
    case PanelGroupKind::Deg135: return "deg135";
  }
  return "unknown";
}

PanelGroup panel_group(PanelGroupKind kind, const CurveletConfig& cfg) {
  cfg.validate();
  const double nominal = kind == PanelGroupKind::Deg45 ? 45.0 : kind == PanelGroupKind::Deg90 ? 90.0 : 135.0;
  PanelGroup g{kind, {}};
  for (int p = 1; p <= cfg.n_angles_detail; ++p) {
    double d = std::abs(panel_orientation_deg(p, cfg.n_angles_detail) - nominal);
    d = std::min(d, 180.0 - d);
    if (d < 22.5) g.panel_indices.push_back(p);
  }
  return g;
}

std::vector<int> ungrouped_panels(const CurveletConfig& cfg) {
  std::vector<bool> used(static_cast<std::size_t>(cfg.n_angles_detail) + 1, false);
  for (auto kind : kPanelGroups)
    for (int p : panel_group(kind, cfg).panel_indices) used[static_cast<std::size_t>(p)] = true;
  std::vector<int> out;
  for (int p = 1; p <= cfg.n_angles_detail; ++p)
    if (!used[static_cast<std::size_t>(p)]) out.push_back(p);
  return out;
}

RadarMatrix reconstruct_group(const CurveletCoeffs& c, const PanelGroup& g, Execution exec) {
  const int scale = detail_scale(c.config);
  std::vector<bool> keep(c.bands.size(), false);
  for (int p : g.panel_indices) keep[c.band_index(scale, p)] = true;
  return real_part(adjoint_subset(c, keep, exec), c.source_rows, c.source_cols);
}

RadarMatrix reconstruct_scale(const CurveletCoeffs& c, int scale, Execution exec) {
  if (scale < 0 || scale >= c.config.n_scales) throw DomainError("scale out of range");
  std::vector<bool> keep(c.bands.size());
  for (std::size_t b = 0; b < c.bands.size(); ++b) keep[b] = c.bands[b].scale == scale;
  return real_part(adjoint_subset(c, keep, exec), c.source_rows, c.source_cols);
}

double estimate_noise_sigma(const CurveletCoeffs& c) {
  const auto layout = band_layout(c.source_rows, c.source_cols, c.config);
  const CurveletBand& fine = c.fine();
  std::vector<double> mags;
  mags.reserve(fine.coeffs.size());
  for (const auto& v : fine.coeffs) mags.push_back(std::abs(v));
  if (mags.empty()) return 0.0;
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  // The fine band of a real input is real valued, so |c| is half-normal.
  return *mid / 0.6745 / layout.back().noise_gain;
}

RadarMatrix hard_threshold_denoise(const RadarMatrix& m, double lambda, std::optional<double> sigma,
                                   const CurveletConfig& cfg, Execution exec) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (sigma && !(*sigma >= 0.0)) throw DomainError("sigma must be non-negative");
  CurveletCoeffs c = forward(m.data, cfg, exec);
  const double s = sigma ? *sigma : estimate_noise_sigma(c);
  const auto layout = band_layout(c.source_rows, c.source_cols, c.config);
  for (std::size_t b = 1; b < c.bands.size(); ++b) {
    const double threshold = lambda * s * layout[b].noise_gain;
    for (auto& v : c.bands[b].coeffs)
      if (std::abs(v) < threshold) v = {};
  }
  RadarMatrix out = inverse(c, exec);
  out.stage = Stage::Denoised;
  out.label = m.label;
  return out;
}

nlohmann::json describe(const CurveletCoeffs& c) {
  nlohmann::json bands = nlohmann::json::array();
  for (std::size_t b = 0; b < c.bands.size(); ++b) {
    const auto& band = c.bands[b];
    bands.push_back({{"index", b},
                     {"scale", band.scale},
                     {"angle", band.angle},
                     {"rows", band.rows},
                     {"cols", band.cols},
                     {"energy", band.energy()}});
  }
  return {{"source_rows", c.source_rows},
          {"source_cols", c.source_cols},
          {"n_scales", c.config.n_scales},
          {"n_angles_detail", c.config.n_angles_detail},
          {"bands", bands}};
}

}  // namespace uwbcount
