#include "uwbcount/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace uwbcount {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Walk3: return "walk3";
    case Scenario::Walk4: return "walk4";
    case Scenario::Queue: return "queue";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "walk3") return Scenario::Walk3;
  if (name == "walk4") return Scenario::Walk4;
  if (name == "queue") return Scenario::Queue;
  throw DomainError("unknown scenario '" + std::string(name) + "'");
}

int max_people(Scenario s) { return s == Scenario::Queue ? 15 : 20; }

namespace {

double walk_density(Scenario s) { return s == Scenario::Walk3 ? 3.0 : 4.0; }


double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

PersonTraits draw_traits(std::mt19937_64& rng, const RadarConfig& config) {
  PersonTraits t;
  // log-uniform RCS factor in [0.7, 1.3]
  t.rcs = std::exp(uniform(rng, std::log(0.7), std::log(1.3)));
  const int ghosts = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int g = 0; g < ghosts; ++g) t.ghosts.push_back({uniform(rng, 0.05, 0.3), uniform(rng, 0.15, 0.4)});
  if (config.breathing_amp_max > 0.0) {
    t.breathing_amp = uniform(rng, config.breathing_amp_min, config.breathing_amp_max);
    t.breathing_freq = uniform(rng, 0.2, 0.4);
    t.breathing_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  return t;
}

void add_echo(std::span<double> row, double distance, double amplitude, const RadarConfig& config) {
  if (amplitude == 0.0) return;
  const double center = distance / config.bin_spacing;
  const double sigma_bins = config.pulse_sigma() * config.sample_rate();
  const double half = std::ceil(6.0 * sigma_bins);
  const auto lo = static_cast<long>(std::max(0.0, std::floor(center - half)));
  const auto hi = static_cast<long>(std::min(static_cast<double>(row.size()) - 1.0, std::ceil(center + half)));
  const double to_seconds = 2.0 / kSpeedOfLight;
  for (long n = lo; n <= hi; ++n) {
    const double tau = (static_cast<double>(n) * config.bin_spacing - distance) * to_seconds;
    row[static_cast<std::size_t>(n)] += amplitude * pulse_value(tau, config);
  }
}

}  // namespace

double RadarConfig::sample_rate() const { return kSpeedOfLight / (2.0 * bin_spacing); }

double RadarConfig::pulse_sigma() const {
  const double sigma_f = bandwidth_10db / (2.0 * std::sqrt(std::log(10.0)));
  return 1.0 / (2.0 * std::numbers::pi * sigma_f);
}

void RadarConfig::validate() const {
  if (range_bins < 128) throw DomainError("range_bins must be >= 128");
  if (!(bin_spacing > 0.0)) throw DomainError("bin_spacing must be positive");
  if (frames_per_record < kFramesPerSample) throw DomainError("frames_per_record must be >= 50");
  if (!(frame_interval > 0.0)) throw DomainError("frame_interval must be positive");
  if (!(carrier_freq > 0.0) || !(bandwidth_10db > 0.0)) throw DomainError("carrier and bandwidth must be positive");
  if (carrier_freq >= sample_rate() / 2.0) throw DomainError("carrier above fast-time Nyquist");
  if (noise_sigma < 0.0 || clutter_jitter < 0.0) throw DomainError("noise levels must be non-negative");
  if (clutter_reflector_count < 0) throw DomainError("clutter_reflector_count must be >= 0");
  if (!(shadow_factor > 0.0 && shadow_factor <= 1.0)) throw DomainError("shadow_factor must be in (0,1]");
  if (breathing_amp_min < 0.0 || breathing_amp_max < breathing_amp_min)
    throw DomainError("breathing amplitude range invalid");
}

double slant_range(const Position& p) { return std::hypot(p.range, p.lateral); }

bool Rect::contains(const Position& p, double tol) const {
  return p.range >= range_min - tol && p.range <= range_max + tol && p.lateral >= lateral_min - tol &&
         p.lateral <= lateral_max + tol;
}

void compute_blockers(SceneTrajectory& scene) {
  scene.blockers.assign(scene.positions.size(), std::vector<int>(static_cast<std::size_t>(scene.n_people), 0));
  for (std::size_t f = 0; f < scene.positions.size(); ++f) {
    const auto& pos = scene.positions[f];
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const double di = slant_range(pos[i]);
      if (di <= 0.0) continue;
      const double ux = pos[i].range / di;
      const double uy = pos[i].lateral / di;
      int count = 0;
      for (std::size_t j = 0; j < pos.size(); ++j) {
        if (j == i) continue;
        const double along = pos[j].range * ux + pos[j].lateral * uy;
        if (along <= 0.0 || slant_range(pos[j]) >= di) continue;
        const double across = std::abs(pos[j].range * uy - pos[j].lateral * ux);
        if (across < kBodyHalfWidth) ++count;
      }
      scene.blockers[f][i] = count;
    }
  }
}

SceneTrajectory generate_scene(Scenario scenario, int n_people, std::uint64_t seed, const RadarConfig& config) {
  if (n_people < 0 || n_people > max_people(scenario))
    throw DomainError("n_people out of range for scenario " + std::string(to_string(scenario)));
  config.validate();

  SceneTrajectory scene;
  scene.scenario = scenario;
  scene.n_people = n_people;
  scene.frame_interval = config.frame_interval;
  const auto frames = static_cast<std::size_t>(config.frames_per_record);
  scene.positions.assign(frames, {});

  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(n_people)));
  for (int p = 0; p < n_people; ++p) scene.people.push_back(draw_traits(rng, config));

  if (scenario == Scenario::Queue) {
    std::vector<Position> line;
    double range = kQueueFront;
    for (int p = 0; p < n_people; ++p) {
      if (p > 0) range += kQueueSpacing + uniform(rng, -kQueueJitter, kQueueJitter);
      line.push_back({range, 0.0});
    }
    scene.area = {kQueueFront, line.empty() ? kQueueFront : line.back().range, 0.0, 0.0};
    std::fill(scene.positions.begin(), scene.positions.end(), line);
  } else if (n_people > 0) {
    const double area = n_people / walk_density(scenario);
    const double width = kWalkWidth;
    const double depth = area / width;
    scene.area = {kWalkNearEdge, kWalkNearEdge + depth, -width / 2.0, width / 2.0};

    struct Walker {
      Position at, goal;
      double speed;
    };
    const Rect& r = scene.area;
    auto draw_point = [&] { return Position{uniform(rng, r.range_min, r.range_max), uniform(rng, r.lateral_min, r.lateral_max)}; };
    std::vector<Walker> walkers;
    for (int p = 0; p < n_people; ++p) {
      Position start = draw_point();
      walkers.push_back({start, draw_point(), uniform(rng, kMinWalkSpeed, kMaxWalkSpeed)});
    }
    for (std::size_t f = 0; f < frames; ++f) {
      auto& frame = scene.positions[f];
      for (auto& w : walkers) {
        frame.push_back(w.at);
        double budget = w.speed * config.frame_interval;
        // Walk toward the goal; on arrival pick a new goal and keep moving.
        while (budget > 0.0) {
          const double dx = w.goal.range - w.at.range;
          const double dy = w.goal.lateral - w.at.lateral;
          const double dist = std::hypot(dx, dy);
          if (dist > budget) {
            w.at.range += dx / dist * budget;
            w.at.lateral += dy / dist * budget;
            budget = 0.0;
          } else {
            w.at = w.goal;
            budget -= dist;
            w.goal = draw_point();
            w.speed = uniform(rng, kMinWalkSpeed, kMaxWalkSpeed);
            budget = std::min(budget, w.speed * config.frame_interval);
          }
        }
        w.at.range = std::clamp(w.at.range, r.range_min, r.range_max);
        w.at.lateral = std::clamp(w.at.lateral, r.lateral_min, r.lateral_max);
      }
    }
  }
  compute_blockers(scene);
  return scene;
}

SceneTrajectory make_radial_walk(double start_range, double speed, std::uint64_t seed, const RadarConfig& config) {
  config.validate();
  SceneTrajectory scene;
  scene.scenario = Scenario::Walk3;
  scene.n_people = 1;
  scene.frame_interval = config.frame_interval;
  std::mt19937_64 rng(seed);
  scene.people.push_back(draw_traits(rng, config));
  const auto frames = static_cast<std::size_t>(config.frames_per_record);
  for (std::size_t f = 0; f < frames; ++f)
    scene.positions.push_back({{start_range + speed * config.frame_interval * static_cast<double>(f), 0.0}});
  const double end = scene.positions.back()[0].range;
  scene.area = {std::min(start_range, end), std::max(start_range, end), 0.0, 0.0};
  compute_blockers(scene);
  return scene;
}

double pulse_value(double tau, const RadarConfig& config) {
  const double s = config.pulse_sigma();
  return std::exp(-0.5 * tau * tau / (s * s)) * std::cos(2.0 * std::numbers::pi * config.carrier_freq * tau);
}

ClutterProfile make_clutter(const RadarConfig& config) {
  ClutterProfile clutter;
  clutter.static_template.assign(static_cast<std::size_t>(config.range_bins), 0.0);
  clutter.jitter_sigma = config.clutter_jitter;
  std::mt19937_64 rng(derive_seed(config.environment_seed, 0xC1u));
  // direct transmitter-to-receiver coupling
  add_echo(clutter.static_template, 0.05, 3.0, config);
  const double far = config.max_range();
  for (int k = 0; k < config.clutter_reflector_count; ++k) {
    const double d = uniform(rng, 0.5 * far, 0.98 * far);
    const double gain = uniform(rng, 2.0, 6.0);
    add_echo(clutter.static_template, d, gain / (d * d), config);
  }
  return clutter;
}

RadarRecord synthesize_record(const SceneTrajectory& scene, const RadarConfig& config, std::uint64_t seed) {
  return synthesize_record(scene, config, make_clutter(config), seed);
}

RadarRecord synthesize_record(const SceneTrajectory& scene, const RadarConfig& config, const ClutterProfile& clutter,
                              std::uint64_t seed) {
  config.validate();
  if (scene.frames() != config.frames_per_record)
    throw DomainError("scene frame count does not match frames_per_record");
  if (static_cast<int>(scene.people.size()) != scene.n_people) throw DomainError("scene traits missing");
  if (!clutter.static_template.empty() && clutter.static_template.size() != static_cast<std::size_t>(config.range_bins))
    throw DomainError("clutter template length mismatch");

  RadarRecord record;
  record.scene = scene;
  record.config = config;
  record.seed = seed;
  record.data = Matrix(static_cast<std::size_t>(config.frames_per_record), static_cast<std::size_t>(config.range_bins));

  std::mt19937_64 jitter_rng(derive_seed(seed, 1));
  std::mt19937_64 noise_rng(derive_seed(seed, 2));
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t f = 0; f < record.data.rows(); ++f) {
    auto row = record.data.row(f);
    const double t = static_cast<double>(f) * config.frame_interval;
    for (std::size_t i = 0; i < scene.people.size(); ++i) {
      const PersonTraits& person = scene.people[i];
      const double breathing =
          person.breathing_amp * std::sin(2.0 * std::numbers::pi * person.breathing_freq * t + person.breathing_phase);
      const double d = slant_range(scene.positions[f][i]) + breathing;
      if (d <= 0.0) continue;
      const double free = person.rcs / (d * d);
      add_echo(row, d, free * std::pow(config.shadow_factor, scene.blockers[f][i]), config);
      // Multipath arrives around the bodies in front, so ghosts are not shadowed.
      for (const Ghost& g : person.ghosts) {
        const double dg = d + g.excess_range;
        add_echo(row, dg, free * g.gain * (d * d) / (dg * dg), config);
      }
    }
    if (!clutter.static_template.empty()) {
      const double scale = 1.0 + clutter.jitter_sigma * gauss(jitter_rng);
      for (std::size_t n = 0; n < row.size(); ++n) row[n] += scale * clutter.static_template[n];
    }
    if (config.noise_sigma > 0.0)
      for (double& x : row) x += config.noise_sigma * gauss(noise_rng);
  }
  return record;
}

std::vector<RadarMatrix> slice_samples(const Matrix& record_data, int label) {
  if (record_data.rows() == 0 || record_data.rows() % kFramesPerSample != 0)
    throw DomainError("record frame count must be a positive multiple of 50");
  std::vector<RadarMatrix> out;
  const std::size_t n = record_data.rows() / kFramesPerSample;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    RadarMatrix m;
    m.data = Matrix(kFramesPerSample, record_data.cols());
    const auto first = record_data.values().begin() + static_cast<std::ptrdiff_t>(s * kFramesPerSample * record_data.cols());
    std::copy_n(first, m.data.size(), m.data.values().begin());
    m.stage = Stage::Raw;
    m.label = label;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<RadarMatrix> slice_samples(const RadarRecord& record) {
  return slice_samples(record.data, record.scene.n_people);
}

}  // namespace uwbcount
