#include "uwbcount/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace uwbcount {

std::size_t DbfFeatures::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.ak.size() + b.ek.size() + b.ad.size() + b.ed.size();
  return n;
}

CurveletCoeffs panel_energy_cut(const CurveletCoeffs& c, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw DomainError("tau must be in [0,1)");
  CurveletCoeffs out = c;
  for (int scale = 1; scale <= c.config.n_scales - 2; ++scale) {
    std::vector<double> energy;
    for (int p = 1; p <= c.config.n_angles_detail; ++p) energy.push_back(c.bands[c.band_index(scale, p)].energy());
    const double cut = tau * *std::max_element(energy.begin(), energy.end());
    for (int p = 1; p <= c.config.n_angles_detail; ++p) {
      if (energy[static_cast<std::size_t>(p - 1)] < cut) {
        auto& band = out.bands[c.band_index(scale, p)];
        std::fill(band.coeffs.begin(), band.coeffs.end(), std::complex<double>{});
      }
    }
  }
  return out;
}

CtfFeatures extract_ctf(const RadarMatrix& bandpass, const CurveletConfig& cfg, double tau, Execution exec) {
  if (bandpass.stage != Stage::Bandpass) throw DomainError("CTF features require bandpass-stage input");
  const CurveletCoeffs c = panel_energy_cut(forward(bandpass.data, cfg, exec), tau);
  CtfFeatures f;

  const auto& coarse = c.coarse().coeffs;
  for (const auto& v : coarse) f.coarse_mean += std::abs(v);
  f.coarse_mean /= static_cast<double>(coarse.size());
  f.coarse_energy = c.coarse().energy();

  const auto& fine = c.fine().coeffs;
  std::vector<std::size_t> order(fine.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min<std::size_t>(5, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ma = std::abs(fine[a]), mb = std::abs(fine[b]);
                      return ma != mb ? ma > mb : a < b;
                    });
  for (std::size_t i = 0; i < top; ++i) f.fine_top5[i] = std::abs(fine[order[i]]);
  f.fine_energy = c.fine().energy();

  const int scale = detail_scale(cfg);
  for (std::size_t g = 0; g < 3; ++g) {
    const PanelGroup group = panel_group(kPanelGroups[g], cfg);
    for (int p : group.panel_indices) f.detail_energy_curvelet[g] += c.bands[c.band_index(scale, p)].energy();
    f.detail_energy_recon[g] = sum_squares(reconstruct_group(c, group, exec).data);
  }
  return f;
}

namespace {

void dbf_bin(const Matrix& m, std::size_t first, int width, double& max_out, double& energy_out) {
  double max_acc = 0.0, energy_acc = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double mx = 0.0, e = 0.0;
    for (std::size_t k = first; k < first + static_cast<std::size_t>(width); ++k) {
      mx = std::max(mx, std::abs(row[k]));
      e += row[k] * row[k];
    }
    max_acc += mx;
    energy_acc += e;
  }
  const double frames = static_cast<double>(m.rows());
  max_out = max_acc / frames;
  energy_out = energy_acc / frames;
}

}  // namespace

DbfFeatures extract_dbf(const RadarMatrix& refined, const RadarMatrix& denoised, std::span<const int> bin_sizes,
                        Execution exec) {
  if (refined.stage != Stage::Refined || denoised.stage != Stage::Denoised)
    throw DomainError("DBF features require refined and denoised inputs");
  if (refined.frames() != denoised.frames() || refined.bins() != denoised.bins())
    throw DomainError("refined and denoised matrices differ in shape");
  if (refined.frames() == 0) throw DomainError("DBF input has no frames");
  const std::size_t bins = refined.bins();

  DbfFeatures out;
  struct Task {
    std::size_t block, bin;
  };
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < bin_sizes.size(); ++b) {
    const int s = bin_sizes[b];
    if (s <= 0 || bins % static_cast<std::size_t>(s) != 0)
      throw DomainError("bin size " + std::to_string(s) + " does not divide " + std::to_string(bins));
    const std::size_t n = bins / static_cast<std::size_t>(s);
    DbfBlock block;
    block.bin_size = s;
    block.ak.assign(n, 0.0);
    block.ek.assign(n, 0.0);
    block.ad.assign(n, 0.0);
    block.ed.assign(n, 0.0);
    out.blocks.push_back(std::move(block));
    for (std::size_t k = 0; k < n; ++k) tasks.push_back({b, k});
  }
  auto run = [&](const Task& t) {
    auto& block = out.blocks[t.block];
    const std::size_t first = t.bin * static_cast<std::size_t>(block.bin_size);
    dbf_bin(refined.data, first, block.bin_size, block.ak[t.bin], block.ek[t.bin]);
    dbf_bin(denoised.data, first, block.bin_size, block.ad[t.bin], block.ed[t.bin]);
  };
  for_each_index(tasks.size(), exec, [&](std::size_t i) { run(tasks[i]); });
  return out;
}

FeatureVector assemble_hybrid(const CtfFeatures& ctf, const DbfFeatures& dbf) {
  FeatureVector v;
  v.values.reserve(kCtfFeatureCount + dbf.size());
  v.values.push_back(ctf.coarse_mean);
  v.values.push_back(ctf.coarse_energy);
  v.values.insert(v.values.end(), ctf.fine_top5.begin(), ctf.fine_top5.end());
  v.values.push_back(ctf.fine_energy);
  v.values.insert(v.values.end(), ctf.detail_energy_curvelet.begin(), ctf.detail_energy_curvelet.end());
  v.values.insert(v.values.end(), ctf.detail_energy_recon.begin(), ctf.detail_energy_recon.end());
  for (const auto& b : dbf.blocks)
    for (const auto* part : {&b.ak, &b.ek, &b.ad, &b.ed}) v.values.insert(v.values.end(), part->begin(), part->end());
  return v;
}

std::pair<CtfFeatures, DbfFeatures> split_hybrid(const FeatureVector& v, std::span<const int> bin_sizes,
                                                 std::size_t bins) {
  std::size_t expected = kCtfFeatureCount;
  for (int s : bin_sizes) {
    if (s <= 0 || bins % static_cast<std::size_t>(s) != 0) throw DomainError("bin size does not divide bins");
    expected += 4 * (bins / static_cast<std::size_t>(s));
  }
  if (v.values.size() != expected) throw FormatError("feature vector length does not match layout");
  auto it = v.values.begin();
  CtfFeatures ctf;
  ctf.coarse_mean = *it++;
  ctf.coarse_energy = *it++;
  for (double& x : ctf.fine_top5) x = *it++;
  ctf.fine_energy = *it++;
  for (double& x : ctf.detail_energy_curvelet) x = *it++;
  for (double& x : ctf.detail_energy_recon) x = *it++;
  DbfFeatures dbf;
  for (int s : bin_sizes) {
    const auto n = static_cast<std::ptrdiff_t>(bins / static_cast<std::size_t>(s));
    DbfBlock b;
    b.bin_size = s;
    for (auto* part : {&b.ak, &b.ek, &b.ad, &b.ed}) {
      part->assign(it, it + n);
      it += n;
    }
    dbf.blocks.push_back(std::move(b));
  }
  return {ctf, dbf};
}

std::vector<std::string> feature_names(std::span<const int> bin_sizes, std::size_t bins) {
  std::vector<std::string> names{"ctf_coarse_mean", "ctf_coarse_energy"};
  for (int i = 1; i <= 5; ++i) names.push_back("ctf_fine_top" + std::to_string(i));
  names.push_back("ctf_fine_energy");
  for (const char* kind : {"curvelet", "recon"})
    for (const char* dir : {"deg90", "deg45", "deg135"}) names.push_back(std::string("ctf_") + kind + "_" + dir);
  char buf[64];
  for (int s : bin_sizes) {
    const std::size_t n = bins / static_cast<std::size_t>(s);
    for (const char* part : {"ak", "ek", "ad", "ed"})
      for (std::size_t k = 0; k < n; ++k) {
        std::snprintf(buf, sizeof buf, "dbf_s%d_%s_%02zu", s, part, k);
        names.emplace_back(buf);
      }
  }
  return names;
}

SampleStages preprocess_sample(const RadarMatrix& raw, const FeatureConfig& cfg, Execution exec) {
  SampleStages s;
  s.bandpass = bandpass_filter(remove_dc(raw), cfg.filter, exec);
  s.refined = remove_clutter(s.bandpass, cfg.filter.alpha);
  s.denoised = hard_threshold_denoise(s.refined, cfg.lambda, cfg.sigma, cfg.curvelet, exec);
  return s;
}

FeatureVector extract_features(const RadarMatrix& raw, const FeatureConfig& cfg, Execution exec) {
  const SampleStages s = preprocess_sample(raw, cfg, exec);
  FeatureVector v = assemble_hybrid(extract_ctf(s.bandpass, cfg.curvelet, cfg.tau, exec),
                                    extract_dbf(s.refined, s.denoised, cfg.bin_sizes, exec));
  if (!all_finite(v.values)) throw NumericError("non-finite feature value");
  v.label = raw.label;
  return v;
}

std::vector<FeatureVector> extract_batch(std::span<const RadarMatrix> raws, const FeatureConfig& cfg, Execution exec) {
  std::vector<FeatureVector> out(raws.size());
  // Inner kernels run serially inside each sample task.
  for_each_index(raws.size(), exec, [&](std::size_t i) { out[i] = extract_features(raws[i], cfg, Execution::Serial); });
  return out;
}

}  // namespace uwbcount
