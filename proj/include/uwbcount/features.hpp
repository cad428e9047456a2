#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uwbcount/common.hpp"
#include "uwbcount/curvelet.hpp"
#include "uwbcount/preprocess.hpp"

namespace uwbcount {

/// Bumped whenever the order or meaning of FeatureVector entries changes.
inline constexpr int kFeatureLayoutVersion = 1;
inline constexpr std::size_t kCtfFeatureCount = 14;
inline constexpr std::size_t kHybridFeatureCount = 294;
inline constexpr std::array<int, 3> kDefaultBinSizes{32, 64, 128};

/// Curvelet-domain statistics. Directional arrays are ordered Deg90, Deg45, Deg135.
struct CtfFeatures {
  double coarse_mean = 0.0;
  double coarse_energy = 0.0;
  std::array<double, 5> fine_top5{};
  double fine_energy = 0.0;
  std::array<double, 3> detail_energy_curvelet{};
  std::array<double, 3> detail_energy_recon{};

  bool operator==(const CtfFeatures&) const = default;
};

/// Frame-averaged per-bin statistics for one bin size.
struct DbfBlock {
  int bin_size = 0;
  std::vector<double> ak, ek;  // refined signal
  std::vector<double> ad, ed;  // denoised signal

  bool operator==(const DbfBlock&) const = default;
};

struct DbfFeatures {
  std::vector<DbfBlock> blocks;  // in bin_sizes order

  std::size_t size() const;
  bool operator==(const DbfFeatures&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::optional<int> label;
};

struct FeatureConfig {
  std::vector<int> bin_sizes{kDefaultBinSizes.begin(), kDefaultBinSizes.end()};
  double tau = 0.01;
  double lambda = 3.0;
  std::optional<double> sigma;  // nullopt = estimate per sample
  CurveletConfig curvelet;
  FilterConfig filter;
};

/// Zeroes every directional panel whose energy is below tau times the
/// largest panel energy on the same scale. Coarse and fine bands untouched.
CurveletCoeffs panel_energy_cut(const CurveletCoeffs& c, double tau);

CtfFeatures extract_ctf(const RadarMatrix& bandpass, const CurveletConfig& cfg = {}, double tau = 0.01,
                        Execution exec = Execution::Parallel);

DbfFeatures extract_dbf(const RadarMatrix& refined, const RadarMatrix& denoised,
                        std::span<const int> bin_sizes = kDefaultBinSizes, Execution exec = Execution::Parallel);

FeatureVector assemble_hybrid(const CtfFeatures& ctf, const DbfFeatures& dbf);

/// Inverse of assemble_hybrid for the given bin sizes and fast-time length.
std::pair<CtfFeatures, DbfFeatures> split_hybrid(const FeatureVector& v, std::span<const int> bin_sizes = kDefaultBinSizes,
                                                 std::size_t bins = 1280);

/// Column names in layout order (ctf_coarse_mean, ..., dbf_s32_ak_00, ...).
std::vector<std::string> feature_names(std::span<const int> bin_sizes = kDefaultBinSizes, std::size_t bins = 1280);

/// Intermediate matrices of the preprocessing chain for one raw sample.
struct SampleStages {
  RadarMatrix bandpass;
  RadarMatrix refined;
  RadarMatrix denoised;
};

SampleStages preprocess_sample(const RadarMatrix& raw, const FeatureConfig& cfg, Execution exec = Execution::Parallel);

/// Raw sample to hybrid vector: DC removal, bandpass, CTF on bandpass data;
/// clutter removal and curvelet denoising feed the DBF half.
FeatureVector extract_features(const RadarMatrix& raw, const FeatureConfig& cfg, Execution exec = Execution::Parallel);

/// Sample-parallel batch extraction; output order follows input order.
std::vector<FeatureVector> extract_batch(std::span<const RadarMatrix> raws, const FeatureConfig& cfg,
                                         Execution exec = Execution::Parallel);

}  // namespace uwbcount
