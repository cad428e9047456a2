#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "uwbcount/curvelet.hpp"
#include "uwbcount/features.hpp"
#include "uwbcount/preprocess.hpp"
#include "uwbcount/radar_sim.hpp"

using namespace uwbcount;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return std::sqrt(num / sum_squares(b));
}

Matrix sum3(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i] + c.values()[i];
  return out;
}

RadarMatrix refined_sample(const SceneTrajectory& scene, const RadarConfig& rc, std::uint64_t seed) {
  const auto rec = synthesize_record(scene, rc, ClutterProfile{}, seed);
  FilterConfig fc;
  const auto first = slice_samples(rec).front();
  return remove_clutter(bandpass_filter(remove_dc(first), fc), fc.alpha);
}

}  // namespace

TEST_CASE("isometry, round trip and adjoint on random matrices") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix m = oracle::random_matrix(50, 1280, 100 + s);
    const auto c = forward(m);
    CHECK(std::fabs(c.energy() - sum_squares(m)) / sum_squares(m) <= 1e-6);
    CHECK(rel_diff(inverse(c).data, m) <= 1e-6);
  }
  // <forward(f), g> == <f, adjoint(g)> for a random coefficient set g.
  const Matrix f = oracle::random_matrix(50, 1280, 7);
  auto g = forward(oracle::random_matrix(50, 1280, 8));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (auto& band : g.bands)
    for (auto& v : band.coeffs) v = {n01(rng), n01(rng)};
  const auto cf = forward(f);
  std::complex<double> lhs{}, rhs{};
  double scale = 0.0;
  for (std::size_t b = 0; b < cf.bands.size(); ++b)
    for (std::size_t k = 0; k < cf.bands[b].coeffs.size(); ++k) {
      lhs += cf.bands[b].coeffs[k] * std::conj(g.bands[b].coeffs[k]);
      scale += std::abs(cf.bands[b].coeffs[k] * g.bands[b].coeffs[k]);
    }
  const auto ag = adjoint(g);
  for (std::size_t i = 0; i < f.size(); ++i) rhs += f.values()[i] * std::conj(ag[i]);
  CHECK(std::abs(lhs - rhs) / scale <= 1e-10);
}

TEST_CASE("band structure") {
  const CurveletConfig cfg;
  const auto c = forward(oracle::random_matrix(50, 1280, 1), cfg);
  CHECK(c.bands.size() == 1 + 16 + 1);
  CHECK(c.coarse().scale == 0);
  CHECK(c.fine().scale == 2);
  for (int p = 1; p <= 16; ++p) CHECK(c.bands[c.band_index(1, p)].angle == p);
  CHECK_THROWS_AS(c.band_index(1, 17), DomainError);
  CHECK(detail_scale(cfg) == 1);
}

TEST_CASE("trivial inputs") {
  SUBCASE("zero matrix gives zero bands") {
    const auto c = forward(Matrix(50, 1280));
    CHECK(c.energy() == 0.0);
    CHECK(sum_squares(inverse(c).data) == 0.0);
  }
  SUBCASE("impulse excites coarse and fine bands") {
    Matrix m(50, 1280);
    m(25, 640) = 1.0;
    const auto c = forward(m);
    CHECK(c.coarse().energy() > 0.0);
    CHECK(c.fine().energy() > 0.0);
  }
  SUBCASE("too small inputs") {
    CHECK_THROWS_AS(forward(Matrix(16, 1280)), DomainError);
    CHECK_THROWS_AS(forward(Matrix(50, 20)), DomainError);
  }
  SUBCASE("config validation") {
    CurveletConfig bad;
    bad.n_angles_detail = 10;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = {};
    bad.n_scales = 1;
    CHECK_THROWS_AS(bad.validate(), DomainError);
  }
}

TEST_CASE("linearity per band") {
  const Matrix x = oracle::random_matrix(50, 1280, 31), y = oracle::random_matrix(50, 1280, 32);
  const double a = 2.5, b = -1.25;
  Matrix mix(50, 1280);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * x.values()[i] + b * y.values()[i];
  const auto cx = forward(x), cy = forward(y), cm = forward(mix);
  double err = 0.0, norm = 0.0;
  for (std::size_t band = 0; band < cm.bands.size(); ++band)
    for (std::size_t k = 0; k < cm.bands[band].coeffs.size(); ++k) {
      err = std::max(err, std::abs(cm.bands[band].coeffs[k] - (a * cx.bands[band].coeffs[k] + b * cy.bands[band].coeffs[k])));
      norm = std::max(norm, std::abs(cm.bands[band].coeffs[k]));
    }
  CHECK(err <= 1e-12 * norm);
}

TEST_CASE("decomposition completeness") {
  const Matrix m = oracle::random_matrix(50, 1280, 41);
  const auto c = forward(m);
  std::vector<int> all(16);
  for (int p = 1; p <= 16; ++p) all[static_cast<std::size_t>(p - 1)] = p;
  const auto detail = reconstruct_group(c, PanelGroup{PanelGroupKind::Deg90, all});
  const auto total = sum3(reconstruct_scale(c, 0).data, detail.data, reconstruct_scale(c, 2).data);
  CHECK(rel_diff(total, m) <= 1e-6);
  CHECK_THROWS_AS(reconstruct_group(c, PanelGroup{PanelGroupKind::Deg90, {0}}), DomainError);
  CHECK_THROWS_AS(reconstruct_group(c, PanelGroup{PanelGroupKind::Deg90, {17}}), DomainError);
}

TEST_CASE("panel groups") {
  std::set<int> seen;
  for (PanelGroupKind k : kPanelGroups) {
    const auto g = panel_group(k);
    CHECK(g.panel_indices.size() == 4);
    for (int p : g.panel_indices) CHECK(seen.insert(p).second);
  }
  const auto rest = ungrouped_panels();
  CHECK(rest.size() == 4);
  for (int p : rest) CHECK(seen.insert(p).second);
  CHECK(seen.size() == 16);

  const auto layout = band_layout(50, 1280, CurveletConfig{});
  for (PanelGroupKind k : kPanelGroups) {
    const double nominal = k == PanelGroupKind::Deg45 ? 45.0 : k == PanelGroupKind::Deg90 ? 90.0 : 135.0;
    for (int p : panel_group(k).panel_indices) {
      const double o = layout[static_cast<std::size_t>(p)].orientation_deg;
      double d = std::fabs(o - nominal);
      d = std::min(d, 180.0 - d);
      CHECK(d <= 22.5 + 1e-9);
    }
  }
}

TEST_CASE("noise gains agree with a Monte Carlo estimate") {
  const CurveletConfig cfg;
  const auto layout = band_layout(50, 1280, cfg);
  const auto mc = oracle::monte_carlo_noise_gain(50, 1280, cfg, 40, 500);
  REQUIRE(mc.size() == layout.size());
  for (std::size_t b = 0; b < layout.size(); ++b) CHECK(layout[b].noise_gain == doctest::Approx(mc[b]).epsilon(0.05));
}

TEST_CASE("auto sigma recovers the input noise level") {
  for (double sigma : {0.1, 1.0, 7.0}) {
    const auto c = forward(oracle::random_matrix(50, 1280, 71, sigma));
    CHECK(estimate_noise_sigma(c) == doctest::Approx(sigma).epsilon(0.05));
  }
}

TEST_CASE("directional groups on simulated scenes") {
  RadarConfig rc;
  rc.noise_sigma = 0.0;
  rc.breathing_amp_min = rc.breathing_amp_max = 0.0;
  SUBCASE("walking away favors 45 over 135 degrees") {
    const auto m = refined_sample(make_radial_walk(1.2, 0.3, 5, rc), rc, 5);
    const auto c = forward(m.data);
    const double e45 = sum_squares(reconstruct_group(c, panel_group(PanelGroupKind::Deg45)).data);
    const double e135 = sum_squares(reconstruct_group(c, panel_group(PanelGroupKind::Deg135)).data);
    CHECK(e45 > e135);
  }
  SUBCASE("static scene concentrates on 90 degrees") {
    const auto rec = synthesize_record(generate_scene(Scenario::Queue, 5, 3, rc), rc, make_clutter(rc), 3);
    FilterConfig fc;
    const auto bp = bandpass_filter(remove_dc(slice_samples(rec).front()), fc);
    const auto f = extract_ctf(bp);
    CHECK(f.detail_energy_curvelet[0] > f.detail_energy_curvelet[1]);
    CHECK(f.detail_energy_curvelet[0] > f.detail_energy_curvelet[2]);
  }
}

TEST_CASE("hard threshold denoising") {
  SUBCASE("zero input") {
    const auto out = hard_threshold_denoise(RadarMatrix{Matrix(50, 1280), Stage::Refined, {}}, 3.0);
    CHECK(sum_squares(out.data) == 0.0);
    CHECK(out.stage == Stage::Denoised);
  }
  SUBCASE("lambda must be positive") {
    const RadarMatrix m{Matrix(50, 1280), Stage::Refined, {}};
    CHECK_THROWS_AS(hard_threshold_denoise(m, 0.0), DomainError);
    CHECK_THROWS_AS(hard_threshold_denoise(m, -1.0), DomainError);
  }
  RadarConfig rc;
  rc.noise_sigma = 0.0;
  const auto clean = refined_sample(generate_scene(Scenario::Walk3, 4, 12, rc), rc, 12);
  SUBCASE("noise-free input is barely distorted") {
    const auto out = hard_threshold_denoise(clean, 3.0);
    CHECK(rel_diff(out.data, clean.data) <= 0.1);
  }
  SUBCASE("denoising raises SNR at 0 dB input") {
    const double rms = std::sqrt(sum_squares(clean.data) / static_cast<double>(clean.data.size()));
    const Matrix n = oracle::random_matrix(50, 1280, 14, rms);
    Matrix noisy = clean.data;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy.values()[i] += n.values()[i];
    const auto out = hard_threshold_denoise(RadarMatrix{noisy, Stage::Refined, {}}, 3.0);
    const double snr_in = 10.0 * std::log10(sum_squares(clean.data) / sum_squares(n));
    const double snr_out = -20.0 * std::log10(rel_diff(out.data, clean.data));
    CHECK(snr_out - snr_in >= 5.0);
  }
}

namespace {

struct PassChanges {
  double second, third;
};

/// Relative output change of a second and third denoising pass at fixed sigma.
PassChanges repeated_pass_changes() {
  RadarConfig rc;
  rc.noise_sigma = 0.0;
  const auto clean = refined_sample(generate_scene(Scenario::Walk3, 4, 12, rc), rc, 12);
  Matrix noisy = clean.data;
  const Matrix n = oracle::random_matrix(50, 1280, 13, std::sqrt(sum_squares(clean.data) / static_cast<double>(clean.data.size())));
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy.values()[i] += n.values()[i];
  const double sigma = estimate_noise_sigma(forward(noisy));
  const auto once = hard_threshold_denoise(RadarMatrix{noisy, Stage::Refined, {}}, 3.0, sigma);
  const auto twice = hard_threshold_denoise(RadarMatrix{once.data, Stage::Refined, {}}, 3.0, sigma);
  const auto thrice = hard_threshold_denoise(RadarMatrix{twice.data, Stage::Refined, {}}, 3.0, sigma);
  return {rel_diff(twice.data, once.data), rel_diff(thrice.data, twice.data)};
}

}  // namespace

// The frame is redundant, so re-analysing a thresholded image spreads each
// kept atom into neighbours that fall under the threshold; a second pass is
// not an exact fixed point. Kept strict and marked as a known failure.
TEST_CASE("denoiser second pass with fixed sigma is a fixed point" * doctest::may_fail()) {
  CHECK(repeated_pass_changes().second <= 1e-6);
}

TEST_CASE("repeated denoising passes change the output less each time") {
  const auto c = repeated_pass_changes();
  CHECK(c.third < c.second);
}

TEST_CASE("serial and parallel transforms agree exactly") {
  const Matrix m = oracle::random_matrix(50, 1280, 77);
  const auto a = forward(m, {}, Execution::Serial), b = forward(m, {}, Execution::Parallel);
  for (std::size_t i = 0; i < a.bands.size(); ++i) CHECK(a.bands[i].coeffs == b.bands[i].coeffs);
  CHECK(inverse(a, Execution::Serial).data == inverse(a, Execution::Parallel).data);
}
