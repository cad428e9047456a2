#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uwbcount/common.hpp"

namespace uwbcount {

enum class Scenario : std::uint8_t { Walk3 = 0, Walk4 = 1, Queue = 2 };

inline constexpr Scenario kAllScenarios[] = {Scenario::Walk3, Scenario::Walk4, Scenario::Queue};

const char* to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

/// Largest head count a scenario supports (20 walking, 15 queueing).
int max_people(Scenario s);

/// Frames per radar sample (1.25 s at 40 frames/s).
inline constexpr int kFramesPerSample = 50;

struct RadarConfig {
  int range_bins = 1280;
  double bin_spacing = 0.0039;  // meters per fast-time bin
  int frames_per_record = 200;
  double frame_interval = 0.025;  // seconds
  double carrier_freq = 6.8e9;
  double bandwidth_10db = 2.3e9;
  double noise_sigma = 0.003;
  int clutter_reflector_count = 8;
  double clutter_jitter = 0.01;
  /// Amplitude factor applied once per person standing between a target and
  /// the radar.
  double shadow_factor = 0.5;
  /// Peak radial chest displacement range, meters. Zero disables micro-motion.
  double breathing_amp_min = 0.004;
  double breathing_amp_max = 0.012;
  std::uint64_t environment_seed = 2020;

  /// Equivalent fast-time sampling rate, Hz (round-trip resolved).
  double sample_rate() const;
  /// Gaussian envelope standard deviation in seconds, chosen so the -10 dB
  /// power-spectrum width equals bandwidth_10db.
  double pulse_sigma() const;
  double max_range() const { return range_bins * bin_spacing; }

  /// Throws DomainError on inconsistent settings.
  void validate() const;
};

struct Position {
  double range = 0.0;  // along boresight, meters
  double lateral = 0.0;
};

/// Radial distance from the radar to a position.
double slant_range(const Position& p);

struct Ghost {
  double excess_range = 0.0;  // extra one-way path, meters
  double gain = 0.0;
};

/// Per-person attributes, fixed for one record.
struct PersonTraits {
  double rcs = 1.0;
  std::vector<Ghost> ghosts;
  double breathing_amp = 0.0;
  double breathing_freq = 0.0;
  double breathing_phase = 0.0;
};

struct Rect {
  double range_min = 0.0;
  double range_max = 0.0;
  double lateral_min = 0.0;
  double lateral_max = 0.0;

  double area() const { return (range_max - range_min) * (lateral_max - lateral_min); }
  bool contains(const Position& p, double tol = 1e-12) const;
};

struct SceneTrajectory {
  Scenario scenario = Scenario::Walk3;
  int n_people = 0;
  double frame_interval = 0.025;
  Rect area;
  std::vector<std::vector<Position>> positions;  // [frame][person]
  std::vector<std::vector<int>> blockers;        // [frame][person]
  std::vector<PersonTraits> people;

  int frames() const { return static_cast<int>(positions.size()); }
};

/// Static background: direct coupling plus fixed reflectors.
struct ClutterProfile {
  std::vector<double> static_template;
  double jitter_sigma = 0.0;
};

struct RadarRecord {
  Matrix data;  // frames_per_record x range_bins
  SceneTrajectory scene;
  RadarConfig config;
  std::uint64_t seed = 0;
};

/// Walkers move with a random-waypoint model at 0.2..1.4 m/s.
inline constexpr double kMinWalkSpeed = 0.2;
inline constexpr double kMaxWalkSpeed = 1.4;
inline constexpr double kQueueFront = 0.5;
inline constexpr double kQueueSpacing = 0.10;
inline constexpr double kQueueJitter = 0.02;
/// Walkers share a corridor of fixed lateral width starting kWalkNearEdge
/// from the radar; its depth is n_people / (density * width).
inline constexpr double kWalkNearEdge = 0.3;
inline constexpr double kWalkWidth = 1.5;
/// Half-width of the line-of-sight corridor a body obstructs, meters.
inline constexpr double kBodyHalfWidth = 0.2;

SceneTrajectory generate_scene(Scenario scenario, int n_people, std::uint64_t seed,
                               const RadarConfig& config = {});

/// A single person walking straight away from (speed > 0) or toward the radar.
SceneTrajectory make_radial_walk(double start_range, double speed, std::uint64_t seed,
                                 const RadarConfig& config = {});

/// Recounts obstructing people for every frame and person.
void compute_blockers(SceneTrajectory& scene);

ClutterProfile make_clutter(const RadarConfig& config);

/// Carrier-modulated Gaussian pulse evaluated at delay offset tau (seconds).
double pulse_value(double tau, const RadarConfig& config);

RadarRecord synthesize_record(const SceneTrajectory& scene, const RadarConfig& config,
                              std::uint64_t seed);

/// Variant with explicit clutter (possibly empty) for controlled experiments.
RadarRecord synthesize_record(const SceneTrajectory& scene, const RadarConfig& config,
                              const ClutterProfile& clutter, std::uint64_t seed);

/// Splits a record into non-overlapping 50-frame samples labeled with the head count.
std::vector<RadarMatrix> slice_samples(const RadarRecord& record);
std::vector<RadarMatrix> slice_samples(const Matrix& record_data, int label);

}  // namespace uwbcount
