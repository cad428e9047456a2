#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "uwbcount/common.hpp"

namespace uwbcount {

enum class FinestKind { Wavelet };

struct CurveletConfig {
  int n_scales = 3;           // coarse, detail..., fine
  int n_angles_detail = 16;   // wedges per directional scale
  FinestKind finest_scale_kind = FinestKind::Wavelet;

  void validate() const;
  bool operator==(const CurveletConfig&) const = default;
};

/// One coefficient band. `angle` is the 1-based panel number on directional
/// scales and 0 on the coarse and fine scales.
struct CurveletBand {
  int scale = 0;
  int angle = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> coeffs;

  double energy() const;
};

struct CurveletCoeffs {
  std::vector<CurveletBand> bands;  // coarse, directional scales by panel, fine
  std::size_t source_rows = 0;
  std::size_t source_cols = 0;
  CurveletConfig config;

  const CurveletBand& coarse() const { return bands.front(); }
  const CurveletBand& fine() const { return bands.back(); }
  CurveletBand& coarse() { return bands.front(); }
  CurveletBand& fine() { return bands.back(); }
  /// Band index of a directional panel, or throws DomainError.
  std::size_t band_index(int scale, int panel) const;
  double energy() const;
};

/// Static description of a band for given dims and config.
struct BandInfo {
  int scale = 0;
  int angle = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// RMS coefficient magnitude produced by unit-variance white input noise.
  double noise_gain = 0.0;
  /// Image-domain orientation of structures this panel captures, degrees in
  /// [0,180): 90 is a vertical (static-in-range) line, 45 a line whose range
  /// grows with time. Negative for non-directional bands.
  double orientation_deg = -1.0;
};

std::vector<BandInfo> band_layout(std::size_t rows, std::size_t cols, const CurveletConfig& cfg);

/// Index of the outermost directional scale (the "detail layer").
int detail_scale(const CurveletConfig& cfg);

CurveletCoeffs forward(const Matrix& m, const CurveletConfig& cfg = {}, Execution exec = Execution::Parallel);
CurveletCoeffs forward(const RadarMatrix& m, const CurveletConfig& cfg = {}, Execution exec = Execution::Parallel);

/// Exact adjoint of `forward` over complex images. For a tight frame it is
/// also the inverse.
std::vector<std::complex<double>> adjoint(const CurveletCoeffs& c, Execution exec = Execution::Parallel);

/// Real part of the adjoint, tagged with the requested stage.
RadarMatrix inverse(const CurveletCoeffs& c, Execution exec = Execution::Parallel);

enum class PanelGroupKind { Deg45, Deg90, Deg135 };

inline constexpr PanelGroupKind kPanelGroups[] = {PanelGroupKind::Deg90, PanelGroupKind::Deg45,
                                                  PanelGroupKind::Deg135};

const char* to_string(PanelGroupKind k);

struct PanelGroup {
  PanelGroupKind kind = PanelGroupKind::Deg90;
  std::vector<int> panel_indices;  // 1-based panel numbers
};

/// Panels whose center orientation lies within 22.5 degrees of the group's
/// nominal line direction.
PanelGroup panel_group(PanelGroupKind kind, const CurveletConfig& cfg = {});
std::vector<int> ungrouped_panels(const CurveletConfig& cfg = {});

/// Inverse of only the detail-scale bands listed in `g`.
RadarMatrix reconstruct_group(const CurveletCoeffs& c, const PanelGroup& g, Execution exec = Execution::Parallel);
/// Inverse of every band at one scale.
RadarMatrix reconstruct_scale(const CurveletCoeffs& c, int scale, Execution exec = Execution::Parallel);

/// Hard-threshold denoising. sigma is the input-domain noise standard
/// deviation; std::nullopt estimates it from the fine band. The coarse band
/// is never thresholded.
RadarMatrix hard_threshold_denoise(const RadarMatrix& m, double lambda, std::optional<double> sigma = std::nullopt,
                                   const CurveletConfig& cfg = {}, Execution exec = Execution::Parallel);

/// Noise estimate used by Auto sigma: median(|c|)/0.6745 over the fine band,
/// divided by the fine band's noise gain.
double estimate_noise_sigma(const CurveletCoeffs& c);

/// Band shapes and energies for inspection.
nlohmann::json describe(const CurveletCoeffs& c);

}  // namespace uwbcount
