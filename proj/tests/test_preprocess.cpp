#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "uwbcount/preprocess.hpp"
#include "uwbcount/radar_sim.hpp"

using namespace uwbcount;

namespace {

RadarMatrix raw(Matrix m) { return RadarMatrix{std::move(m), Stage::Raw, std::nullopt}; }

Matrix tone(double freq_hz, double sample_rate, std::size_t frames = 2, std::size_t bins = 1280) {
  Matrix m(frames, bins);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t i = 0; i < bins; ++i)
      m(f, i) = std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sample_rate + 0.3 * f);
  return m;
}

/// RMS over the central bins, away from the reflection-padded edges.
double interior_rms(const Matrix& m, std::size_t margin = 200) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < m.rows(); ++f)
    for (std::size_t i = margin; i + margin < m.cols(); ++i) {
      acc += m(f, i) * m(f, i);
      ++n;
    }
  return std::sqrt(acc / static_cast<double>(n));
}

double frame_energy(const Matrix& m, std::size_t f) { return sum_squares(m.row(f)); }

}  // namespace

TEST_CASE("remove_dc") {
  SUBCASE("hand example") {
    Matrix m(1, 3);
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(0, 2) = 3;
    const auto out = remove_dc(raw(m));
    CHECK(out.data(0, 0) == doctest::Approx(-1.0));
    CHECK(out.data(0, 1) == doctest::Approx(0.0));
    CHECK(out.data(0, 2) == doctest::Approx(1.0));
  }
  SUBCASE("zero is a fixed point") { CHECK(sum_squares(remove_dc(raw(Matrix(50, 1280))).data) == 0.0); }
  SUBCASE("rows become zero-mean") {
    const auto out = remove_dc(raw(oracle::random_matrix(50, 1280, 3, 5.0)));
    for (std::size_t f = 0; f < 50; ++f) {
      double mean = 0.0;
      for (double v : out.data.row(f)) mean += v;
      CHECK(std::fabs(mean / 1280.0) < 1e-12);
    }
  }
}

TEST_CASE("bandpass kernel") {
  const FilterConfig cfg;
  const auto h = design_bandpass(cfg);
  CHECK(h.size() == 129);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == doctest::Approx(h[h.size() - 1 - i]).epsilon(1e-12));
  CHECK(kernel_response(h, 6.8e9, cfg.sample_rate) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("bandpass_filter frequency behavior") {
  const FilterConfig cfg;
  SUBCASE("constant frame is suppressed") {
    const auto out = bandpass_filter(raw(Matrix(3, 1280, 2.5)), cfg);
    for (double v : out.data.values()) CHECK(std::fabs(v) < 1e-3 * 2.5);
  }
  SUBCASE("6.8 GHz tone passes within 1 dB") {
    const Matrix in = tone(6.8e9, cfg.sample_rate);
    const auto out = bandpass_filter(raw(in), cfg);
    const double db = 20.0 * std::log10(interior_rms(out.data) / interior_rms(in));
    CHECK(std::fabs(db) <= 1.0);
  }
  SUBCASE("3 GHz tone is attenuated by at least 30 dB") {
    const Matrix in = tone(3.0e9, cfg.sample_rate);
    const auto out = bandpass_filter(raw(in), cfg);
    const double db = 20.0 * std::log10(interior_rms(out.data) / interior_rms(in));
    CHECK(db <= -30.0);
  }
  SUBCASE("output stage and shape") {
    const auto out = bandpass_filter(raw(Matrix(7, 300)), cfg);
    CHECK(out.stage == Stage::Bandpass);
    CHECK(out.frames() == 7);
    CHECK(out.bins() == 300);
  }
}

TEST_CASE("bandpass_filter matches a naive reflected convolution") {
  const FilterConfig cfg;
  const auto h = design_bandpass(cfg);
  const Matrix in = oracle::random_matrix(4, 1280, 11);
  for (Execution exec : {Execution::Serial, Execution::Parallel}) {
    const auto out = bandpass_filter(raw(in), cfg, exec);
    for (std::size_t f = 0; f < in.rows(); ++f) {
      const std::vector<double> row(in.row(f).begin(), in.row(f).end());
      const auto expected = oracle::reflect_convolve(row, h);
      for (std::size_t i = 0; i < row.size(); ++i) CHECK(out.data(f, i) == doctest::Approx(expected[i]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  cfg.passband_high = cfg.sample_rate;  // above Nyquist
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK_THROWS_AS(bandpass_filter(raw(Matrix(2, 1280)), cfg), DomainError);
  FilterConfig even;
  even.taps = 128;
  CHECK_THROWS_AS(even.validate(), DomainError);
}

TEST_CASE("linearity of remove_dc and bandpass_filter") {
  const FilterConfig cfg;
  const Matrix x = oracle::random_matrix(5, 1280, 21), y = oracle::random_matrix(5, 1280, 22);
  const double a = 1.7, b = -0.4;
  Matrix mix(5, 1280);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * x.values()[i] + b * y.values()[i];
  for (auto op : {+[](const RadarMatrix& m, const FilterConfig&) { return remove_dc(m); },
                  +[](const RadarMatrix& m, const FilterConfig& c) { return bandpass_filter(m, c); }}) {
    const auto fx = op(raw(x), cfg), fy = op(raw(y), cfg), fm = op(raw(mix), cfg);
    for (std::size_t i = 0; i < mix.size(); ++i)
      CHECK(fm.data.values()[i] == doctest::Approx(a * fx.data.values()[i] + b * fy.data.values()[i]).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("remove_clutter") {
  SUBCASE("identical frames cancel after the first") {
    Matrix m(50, 1280);
    const Matrix r = oracle::random_matrix(1, 1280, 5);
    for (std::size_t f = 0; f < 50; ++f) std::copy(r.row(0).begin(), r.row(0).end(), m.row(f).begin());
    const auto out = remove_clutter(RadarMatrix{m, Stage::Bandpass, {}}, 0.9);
    CHECK(out.stage == Stage::Refined);
    for (std::size_t f = 0; f < 50; ++f) CHECK(frame_energy(out.data, f) <= 1e-20);
  }
  SUBCASE("step change decays geometrically with ratio alpha squared") {
    // Background r0 for frame 0, then r1 constant: y_k = alpha^k (r1 - r0).
    const double alpha = 0.9;
    Matrix m(50, 1280);
    const Matrix r0 = oracle::random_matrix(1, 1280, 6), r1 = oracle::random_matrix(1, 1280, 7);
    for (std::size_t f = 0; f < 50; ++f) {
      const Matrix& src = f == 0 ? r0 : r1;
      std::copy(src.row(0).begin(), src.row(0).end(), m.row(f).begin());
    }
    const auto out = remove_clutter(RadarMatrix{m, Stage::Bandpass, {}}, alpha);
    double diff = 0.0;
    for (std::size_t i = 0; i < 1280; ++i) diff += (r1(0, i) - r0(0, i)) * (r1(0, i) - r0(0, i));
    for (std::size_t k = 1; k < 50; ++k) {
      const double expected = std::pow(alpha, 2.0 * static_cast<double>(k)) * diff;
      CHECK(frame_energy(out.data, k) == doctest::Approx(expected).epsilon(1e-9));
      if (k > 1) CHECK(frame_energy(out.data, k) / frame_energy(out.data, k - 1) == doctest::Approx(alpha * alpha).epsilon(1e-9));
    }
    CHECK(frame_energy(out.data, 49) < 0.01 * diff);
  }
  SUBCASE("zero input") { CHECK(sum_squares(remove_clutter(RadarMatrix{Matrix(50, 1280), Stage::Bandpass, {}}, 0.9).data) == 0.0); }
  SUBCASE("alpha outside (0,1)") {
    const RadarMatrix m{Matrix(2, 128), Stage::Bandpass, {}};
    CHECK_THROWS_AS(remove_clutter(m, 0.0), DomainError);
    CHECK_THROWS_AS(remove_clutter(m, 1.0), DomainError);
    CHECK_THROWS_AS(remove_clutter(m, -0.5), DomainError);
  }
}

TEST_CASE("clutter removal keeps a moving target and drops static clutter") {
  RadarConfig rc;
  rc.noise_sigma = 0.0;
  rc.clutter_jitter = 0.0;
  rc.breathing_amp_min = rc.breathing_amp_max = 0.0;
  auto scene = make_radial_walk(1.5, 0.3, 17, rc);
  scene.people[0].ghosts.clear();
  const auto rec = synthesize_record(scene, rc, make_clutter(rc), 3);
  FilterConfig fc;
  const auto refined = remove_clutter(bandpass_filter(remove_dc(raw(rec.data)), fc), fc.alpha);

  // The echo envelope spans several bins; count energy within three envelope
  // standard deviations of the true target range.
  const double sigma_bins = rc.pulse_sigma() * kSpeedOfLight / 2.0 / rc.bin_spacing;
  const double half = 3.0 * sigma_bins;
  double near = 0.0, total = 0.0;
  for (std::size_t f = 0; f < refined.frames(); ++f) {
    const double centre = slant_range(scene.positions[f][0]) / rc.bin_spacing;
    for (std::size_t i = 0; i < refined.bins(); ++i) {
      const double e = refined.data(f, i) * refined.data(f, i);
      total += e;
      if (std::fabs(static_cast<double>(i) - centre) <= half) near += e;
    }
  }
  REQUIRE(total > 0.0);
  CHECK(near / total >= 0.9);
}
