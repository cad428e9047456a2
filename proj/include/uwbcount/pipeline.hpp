#pragma once

#include <array>
#include <cstdint>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uwbcount/curvelet.hpp"
#include "uwbcount/features.hpp"
#include "uwbcount/learn.hpp"
#include "uwbcount/preprocess.hpp"
#include "uwbcount/radar_sim.hpp"

namespace uwbcount {

/// Head counts min_people..max_people, each simulated for records_per_class records.
struct ScenarioPlan {
  Scenario scenario = Scenario::Walk3;
  int min_people = 0;
  int max_people = 20;
  int records_per_class = 40;

  int classes() const { return max_people - min_people + 1; }
  int records() const { return classes() * records_per_class; }
};

struct PipelineConfig {
  RadarConfig radar;
  FilterConfig filter;
  CurveletConfig curvelet;
  std::vector<int> bin_sizes{kDefaultBinSizes.begin(), kDefaultBinSizes.end()};
  double tau = 0.01;
  double lambda = 3.0;
  std::optional<double> sigma;
  int layout_version = kFeatureLayoutVersion;
  /// Classifiers evaluated, in report order.
  std::vector<ClassifierKind> classifiers{std::begin(kAllClassifiers), std::end(kAllClassifiers)};
  /// Settings per classifier kind, indexed by the enum value.
  std::array<ClassifierConfig, 4> learners;
  int repeats = 20;
  double split = 0.8;
  std::vector<ScenarioPlan> plan;
  std::uint64_t seed = 0;

  PipelineConfig();

  FeatureConfig feature_config() const;
  const ClassifierConfig& classifier(ClassifierKind kind) const;
  const ScenarioPlan& scenario_plan(Scenario s) const;
  /// Samples the plan yields for one scenario after slicing.
  long planned_samples(Scenario s) const;
  /// Throws ConfigError when any sub-config is invalid.
  void validate() const;
  /// Every effective setting as sorted key=value lines.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

/// Parses key=value lines ('#' comments, dotted keys) over the defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);

/// Smaller plan used for quick end-to-end runs: classes 0..10, 10 records each.
PipelineConfig desk_config();

/// Empty selection means all three scenarios.
std::vector<Scenario> resolve_scenarios(const std::vector<Scenario>& selected);

/// Seed for one record of the plan; independent of worker layout.
std::uint64_t record_seed(std::uint64_t master, Scenario s, int n_people, int record);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Simulates every planned record and writes a record container.
void cmd_simulate(const PipelineConfig& cfg, const std::string& out_path, const std::vector<Scenario>& scenarios = {},
                  Execution exec = Execution::Parallel);

/// Preprocesses and featurizes every sample; writes the feature container
/// and a CSV mirror (same stem, .csv).
void cmd_extract(const std::string& dataset_path, const PipelineConfig& cfg, const std::string& out_path,
                 const std::vector<Scenario>& scenarios = {}, Execution exec = Execution::Parallel);

/// Runs the repeated protocol per scenario and classifier plus the RF
/// feature ablation. Writes the JSON report, <stem>_tables.csv and
/// <stem>_ablation.csv, and returns the report.
nlohmann::json cmd_evaluate(const std::string& features_path, const PipelineConfig& cfg, const std::string& out_path,
                            const std::vector<Scenario>& scenarios = {}, Execution exec = Execution::Parallel);

/// Renders a report as aligned text tables.
std::string render_report(const nlohmann::json& report);
std::string cmd_report(const std::string& report_path);

/// Report without its timing section, for byte comparisons.
nlohmann::json strip_timings(nlohmann::json report);

std::string csv_path_for(const std::string& path);
std::string sibling_path(const std::string& path, const std::string& suffix);
std::string version_string();

}  // namespace uwbcount
