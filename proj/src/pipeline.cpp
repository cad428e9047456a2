#include "uwbcount/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uwbcount/io.hpp"

#ifndef UWBCOUNT_VERSION
#define UWBCOUNT_VERSION "0.0.0"
#endif

namespace uwbcount {

std::string version_string() { return std::string("uwbcount ") + UWBCOUNT_VERSION; }

// ---- config --------------------------------------------------------------

PipelineConfig::PipelineConfig() {
  for (ClassifierKind k : kAllClassifiers) learners[static_cast<std::size_t>(k)] = ClassifierConfig::defaults(k);
  for (Scenario s : kAllScenarios) plan.push_back({s, 0, max_people(s), 40});
}

FeatureConfig PipelineConfig::feature_config() const {
  FeatureConfig f;
  f.bin_sizes = bin_sizes;
  f.tau = tau;
  f.lambda = lambda;
  f.sigma = sigma;
  f.curvelet = curvelet;
  f.filter = filter;
  f.filter.sample_rate = radar.sample_rate();
  return f;
}

const ClassifierConfig& PipelineConfig::classifier(ClassifierKind kind) const {
  return learners[static_cast<std::size_t>(kind)];
}

const ScenarioPlan& PipelineConfig::scenario_plan(Scenario s) const {
  for (const auto& p : plan)
    if (p.scenario == s) return p;
  throw ConfigError(std::string("no plan for scenario ") + to_string(s));
}

long PipelineConfig::planned_samples(Scenario s) const {
  return static_cast<long>(scenario_plan(s).records()) * (radar.frames_per_record / kFramesPerSample);
}

void PipelineConfig::validate() const {
  try {
    radar.validate();
    FeatureConfig f = feature_config();
    f.filter.validate();
    curvelet.validate();
    for (const auto& l : learners) l.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (radar.frames_per_record % kFramesPerSample != 0)
    throw ConfigError("radar.frames_per_record must be a multiple of 50");
  if (bin_sizes.empty()) throw ConfigError("features.bin_sizes is empty");
  for (int s : bin_sizes)
    if (s <= 0 || radar.range_bins % s != 0) throw ConfigError("features.bin_sizes must divide radar.range_bins");
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("features.tau must be in [0,1)");
  if (!(lambda > 0.0)) throw ConfigError("features.lambda must be positive");
  if (sigma && !(*sigma > 0.0)) throw ConfigError("features.sigma must be positive");
  if (classifiers.empty()) throw ConfigError("learn.classifiers is empty");
  if (repeats < 1) throw ConfigError("learn.repeats must be positive");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("learn.split must be in (0,1)");
  for (const auto& p : plan) {
    if (p.min_people < 0 || p.min_people > p.max_people || p.max_people > max_people(p.scenario))
      throw ConfigError(std::string("plan.") + to_string(p.scenario) + " head-count range is invalid");
    if (p.records_per_class < 0) throw ConfigError("records_per_class must be non-negative");
    if (p.max_people > 255) throw ConfigError("labels must fit in one byte");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v, int line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("cannot parse number '" + v + "'", line);
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) throw ConfigError("value must be finite", line);
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& v, int line) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(parse_number<int>(s, line));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, ClassifierKind>)
      s += to_string(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

struct Key {
  std::function<void(PipelineConfig&, const std::string&, int)> set;
  std::function<std::string(const PipelineConfig&)> get;  // empty for shorthand keys
};

template <class T>
Key number_key(T PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& v, int line) { c.*field = parse_number<T>(v, line); },
          [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*field);
            else
              return std::to_string(c.*field);
          }};
}

template <class S, class T>
Key nested_key(S PipelineConfig::*section, T S::*field) {
  return {[=](PipelineConfig& c, const std::string& v, int line) { (c.*section).*field = parse_number<T>(v, line); },
          [=](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt((c.*section).*field);
            else
              return std::to_string((c.*section).*field);
          }};
}

template <class T>
Key learner_key(ClassifierKind kind, T ClassifierConfig::*field) {
  const auto i = static_cast<std::size_t>(kind);
  return {[=](PipelineConfig& c, const std::string& v, int line) { c.learners[i].*field = parse_number<T>(v, line); },
          [=](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.learners[i].*field);
            else
              return std::to_string(c.learners[i].*field);
          }};
}

Key plan_key(Scenario s, int ScenarioPlan::*field) {
  const auto i = static_cast<std::size_t>(s);
  return {[=](PipelineConfig& c, const std::string& v, int line) { c.plan[i].*field = parse_number<int>(v, line); },
          [=](const PipelineConfig& c) { return std::to_string(c.plan[i].*field); }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> k;
    k["seed"] = number_key(&PipelineConfig::seed);

    k["radar.range_bins"] = nested_key(&PipelineConfig::radar, &RadarConfig::range_bins);
    k["radar.bin_spacing"] = nested_key(&PipelineConfig::radar, &RadarConfig::bin_spacing);
    k["radar.frames_per_record"] = nested_key(&PipelineConfig::radar, &RadarConfig::frames_per_record);
    k["radar.frame_interval"] = nested_key(&PipelineConfig::radar, &RadarConfig::frame_interval);
    k["radar.carrier_freq"] = nested_key(&PipelineConfig::radar, &RadarConfig::carrier_freq);
    k["radar.bandwidth_10db"] = nested_key(&PipelineConfig::radar, &RadarConfig::bandwidth_10db);
    k["radar.noise_sigma"] = nested_key(&PipelineConfig::radar, &RadarConfig::noise_sigma);
    k["radar.clutter_reflectors"] = nested_key(&PipelineConfig::radar, &RadarConfig::clutter_reflector_count);
    k["radar.clutter_jitter"] = nested_key(&PipelineConfig::radar, &RadarConfig::clutter_jitter);
    k["radar.shadow_factor"] = nested_key(&PipelineConfig::radar, &RadarConfig::shadow_factor);
    k["radar.breathing_amp_min"] = nested_key(&PipelineConfig::radar, &RadarConfig::breathing_amp_min);
    k["radar.breathing_amp_max"] = nested_key(&PipelineConfig::radar, &RadarConfig::breathing_amp_max);
    k["radar.environment_seed"] = nested_key(&PipelineConfig::radar, &RadarConfig::environment_seed);

    k["filter.passband_low"] = nested_key(&PipelineConfig::filter, &FilterConfig::passband_low);
    k["filter.passband_high"] = nested_key(&PipelineConfig::filter, &FilterConfig::passband_high);
    k["filter.taps"] = nested_key(&PipelineConfig::filter, &FilterConfig::taps);
    k["filter.alpha"] = nested_key(&PipelineConfig::filter, &FilterConfig::alpha);

    k["curvelet.scales"] = nested_key(&PipelineConfig::curvelet, &CurveletConfig::n_scales);
    k["curvelet.angles"] = nested_key(&PipelineConfig::curvelet, &CurveletConfig::n_angles_detail);

    k["features.bin_sizes"] = {[](PipelineConfig& c, const std::string& v, int line) { c.bin_sizes = parse_int_list(v, line); },
                               [](const PipelineConfig& c) { return join(c.bin_sizes); }};
    k["features.tau"] = number_key(&PipelineConfig::tau);
    k["features.lambda"] = number_key(&PipelineConfig::lambda);
    k["features.sigma"] = {[](PipelineConfig& c, const std::string& v, int line) {
                             if (v == "auto")
                               c.sigma.reset();
                             else
                               c.sigma = parse_number<double>(v, line);
                           },
                           [](const PipelineConfig& c) { return c.sigma ? fmt(*c.sigma) : std::string("auto"); }};
    k["features.layout_version"] = number_key(&PipelineConfig::layout_version);

    k["learn.classifiers"] = {[](PipelineConfig& c, const std::string& v, int line) {
                                c.classifiers.clear();
                                for (const auto& name : split_list(v)) {
                                  try {
                                    c.classifiers.push_back(parse_classifier(name));
                                  } catch (const DomainError& e) {
                                    throw ConfigError(e.what(), line);
                                  }
                                }
                              },
                              [](const PipelineConfig& c) { return join(c.classifiers); }};
    k["learn.repeats"] = number_key(&PipelineConfig::repeats);
    k["learn.split"] = number_key(&PipelineConfig::split);

    const std::pair<const char*, ClassifierKind> kinds[] = {{"dt", ClassifierKind::DecisionTree},
                                                            {"rf", ClassifierKind::RandomForest},
                                                            {"ab", ClassifierKind::AdaBoost},
                                                            {"nn", ClassifierKind::NeuralNet}};
    for (const auto& [tag, kind] : kinds) {
      const std::string p = std::string("learn.") + tag + ".";
      k[p + "max_depth"] = learner_key(kind, &ClassifierConfig::max_depth);
      k[p + "min_leaf"] = learner_key(kind, &ClassifierConfig::min_leaf);
      k[p + "seed"] = learner_key(kind, &ClassifierConfig::seed);
    }
    k["learn.rf.trees"] = learner_key(ClassifierKind::RandomForest, &ClassifierConfig::trees);
    k["learn.rf.features_per_split"] = learner_key(ClassifierKind::RandomForest, &ClassifierConfig::feature_subset_size);
    k["learn.ab.estimators"] = learner_key(ClassifierKind::AdaBoost, &ClassifierConfig::estimators);
    k["learn.ab.learning_rate"] = learner_key(ClassifierKind::AdaBoost, &ClassifierConfig::learning_rate);
    k["learn.nn.learning_rate"] = learner_key(ClassifierKind::NeuralNet, &ClassifierConfig::learning_rate);
    k["learn.nn.epochs"] = learner_key(ClassifierKind::NeuralNet, &ClassifierConfig::epochs);
    k["learn.nn.batch_size"] = learner_key(ClassifierKind::NeuralNet, &ClassifierConfig::batch_size);
    k["learn.nn.l2"] = learner_key(ClassifierKind::NeuralNet, &ClassifierConfig::l2);
    k["learn.nn.hidden"] = {[](PipelineConfig& c, const std::string& v, int line) {
                              c.learners[static_cast<std::size_t>(ClassifierKind::NeuralNet)].hidden = parse_int_list(v, line);
                            },
                            [](const PipelineConfig& c) { return join(c.classifier(ClassifierKind::NeuralNet).hidden); }};

    for (Scenario s : kAllScenarios) {
      const std::string p = std::string("plan.") + to_string(s) + ".";
      k[p + "min_people"] = plan_key(s, &ScenarioPlan::min_people);
      k[p + "max_people"] = plan_key(s, &ScenarioPlan::max_people);
      k[p + "records_per_class"] = plan_key(s, &ScenarioPlan::records_per_class);
    }
    // Shorthands applying to every scenario.
    k["plan.records_per_class"] = {[](PipelineConfig& c, const std::string& v, int line) {
                                     for (auto& p : c.plan) p.records_per_class = parse_number<int>(v, line);
                                   },
                                   {}};
    k["plan.max_people"] = {[](PipelineConfig& c, const std::string& v, int line) {
                              const int n = parse_number<int>(v, line);
                              for (auto& p : c.plan) p.max_people = std::min(n, max_people(p.scenario));
                            },
                            {}};
    return k;
  }();
  return table;
}

}  // namespace

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& [name, key] : keys())
    if (key.get) out += name + "=" + key.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string body = trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("unknown key '" + key + "'", line);
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", line);
    it->second.set(cfg, value, line);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

PipelineConfig desk_config() {
  PipelineConfig cfg;
  for (auto& p : cfg.plan) {
    p.max_people = 10;
    p.records_per_class = 10;
  }
  return cfg;
}

std::vector<Scenario> resolve_scenarios(const std::vector<Scenario>& selected) {
  std::vector<Scenario> out;
  for (Scenario s : kAllScenarios)
    if (selected.empty() || std::find(selected.begin(), selected.end(), s) != selected.end()) out.push_back(s);
  return out;
}

std::uint64_t record_seed(std::uint64_t master, Scenario s, int n_people, int record) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(s)), static_cast<std::uint64_t>(n_people),
                     static_cast<std::uint64_t>(record));
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

std::string csv_path_for(const std::string& path) { return sibling_path(path, ".csv"); }

// ---- commands ------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string timing_path(const std::string& artifact) { return artifact + ".timing.json"; }

nlohmann::json read_timings(const std::string& artifact) {
  std::ifstream in(timing_path(artifact));
  if (!in) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return nlohmann::json::object();
  }
}

void write_timings(const std::string& artifact, const nlohmann::json& t) { write_text(timing_path(artifact), t.dump(2) + "\n"); }

std::size_t chunk_size(Execution exec) {
  return exec == Execution::Serial ? 1 : static_cast<std::size_t>(std::max(4, 4 * omp_get_max_threads()));
}

struct RecordJob {
  Scenario scenario;
  int n_people;
  int record;
};

std::size_t hybrid_length(const PipelineConfig& cfg) {
  std::size_t n = kCtfFeatureCount;
  for (int s : cfg.bin_sizes) n += 4 * static_cast<std::size_t>(cfg.radar.range_bins / s);
  return n;
}

}  // namespace

void cmd_simulate(const PipelineConfig& cfg, const std::string& out_path, const std::vector<Scenario>& scenarios,
                  Execution exec) {
  cfg.validate();
  const auto t0 = Clock::now();
  std::vector<RecordJob> jobs;
  for (Scenario s : resolve_scenarios(scenarios)) {
    const auto& p = cfg.scenario_plan(s);
    for (int n = p.min_people; n <= p.max_people; ++n)
      for (int r = 0; r < p.records_per_class; ++r) jobs.push_back({s, n, r});
  }
  const ClutterProfile clutter = make_clutter(cfg.radar);
  RecordWriter writer(out_path, static_cast<std::uint32_t>(jobs.size()),
                      static_cast<std::uint32_t>(cfg.radar.frames_per_record),
                      static_cast<std::uint32_t>(cfg.radar.range_bins));
  const std::size_t chunk = chunk_size(exec);
  std::vector<Matrix> batch;
  for (std::size_t start = 0; start < jobs.size(); start += chunk) {
    const std::size_t len = std::min(chunk, jobs.size() - start);
    batch.assign(len, Matrix());
    for_each_index(len, exec, [&](std::size_t i) {
      const RecordJob& j = jobs[start + i];
      const std::uint64_t seed = record_seed(cfg.seed, j.scenario, j.n_people, j.record);
      const SceneTrajectory scene = generate_scene(j.scenario, j.n_people, derive_seed(seed, 0), cfg.radar);
      batch[i] = synthesize_record(scene, cfg.radar, clutter, derive_seed(seed, 1)).data;
    });
    for (std::size_t i = 0; i < len; ++i) writer.write(batch[i], jobs[start + i].n_people, jobs[start + i].scenario);
  }
  writer.finish();
  write_timings(out_path, {{"simulate_s", seconds_since(t0)}, {"records", jobs.size()}});
}

void cmd_extract(const std::string& dataset_path, const PipelineConfig& cfg, const std::string& out_path,
                 const std::vector<Scenario>& scenarios, Execution exec) {
  cfg.validate();
  const auto t0 = Clock::now();
  RecordReader reader(dataset_path);
  if (reader.records() > 0 && (reader.frames() == 0 || reader.frames() % kFramesPerSample != 0))
    throw FormatError("record frame count is not a multiple of 50");
  if (reader.records() > 0 && static_cast<int>(reader.bins()) != cfg.radar.range_bins)
    throw FormatError("container bin count differs from radar.range_bins");
  const std::vector<Scenario> wanted = resolve_scenarios(scenarios);
  std::vector<std::size_t> records;
  for (std::size_t i = 0; i < reader.records(); ++i)
    if (std::find(wanted.begin(), wanted.end(), reader.scenario(i)) != wanted.end()) records.push_back(i);

  const FeatureConfig fcfg = cfg.feature_config();
  FeatureTable table;
  table.n_features = hybrid_length(cfg);
  const std::size_t chunk = chunk_size(exec);
  std::vector<RadarMatrix> samples;
  std::vector<Scenario> sample_scenarios;
  for (std::size_t start = 0; start < records.size(); start += chunk) {
    const std::size_t len = std::min(chunk, records.size() - start);
    samples.clear();
    sample_scenarios.clear();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t r = records[start + i];
      for (auto& m : slice_samples(reader.read(r), reader.label(r))) {
        samples.push_back(std::move(m));
        sample_scenarios.push_back(reader.scenario(r));
      }
    }
    const std::vector<FeatureVector> feats = extract_batch(samples, fcfg, exec);
    for (std::size_t i = 0; i < feats.size(); ++i) table.append(feats[i], sample_scenarios[i]);
  }
  write_feature_table(out_path, table);
  write_feature_csv(csv_path_for(out_path), table, cfg.bin_sizes, static_cast<std::size_t>(cfg.radar.range_bins));
  nlohmann::json t = read_timings(dataset_path);
  t["extract_s"] = seconds_since(t0);
  t["samples"] = table.rows();
  write_timings(out_path, t);
}

namespace {

LabeledDataset scenario_dataset(const FeatureTable& table, Scenario s) {
  LabeledDataset d;
  d.scenario = s;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows(); ++r)
    if (table.scenarios[r] == static_cast<std::uint8_t>(s)) rows.push_back(r);
  d.features = Matrix(rows.size(), table.n_features);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < table.n_features; ++c)
      d.features(i, c) = static_cast<double>(table.values[rows[i] * table.n_features + c]);
    d.labels.push_back(table.labels[rows[i]]);
  }
  return d;
}

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

constexpr const char* kMetricKeys[] = {"accuracy", "macro_precision", "macro_recall", "macro_f1"};
constexpr const char* kAblationKeys[] = {"hybrid", "ctf_only", "dbf_only"};

}  // namespace

nlohmann::json cmd_evaluate(const std::string& features_path, const PipelineConfig& cfg, const std::string& out_path,
                            const std::vector<Scenario>& scenarios, Execution exec) {
  cfg.validate();
  const auto t0 = Clock::now();
  const FeatureTable table = read_feature_table(features_path);
  if (table.layout_version != cfg.layout_version)
    throw FormatError("feature layout version " + std::to_string(table.layout_version) +
                      " does not match configured version " + std::to_string(cfg.layout_version));
  if (table.n_features != hybrid_length(cfg))
    throw FormatError("feature width " + std::to_string(table.n_features) + " does not match configured layout (" +
                      std::to_string(hybrid_length(cfg)) + ")");

  nlohmann::json timings = read_timings(features_path);
  nlohmann::json report;
  report["version"] = version_string();
  report["config_hash"] = cfg.hash();
  report["seed"] = cfg.seed;
  report["layout_version"] = cfg.layout_version;
  report["n_features"] = table.n_features;
  report["repeats"] = cfg.repeats;
  report["split"] = cfg.split;
  report["scenarios"] = nlohmann::json::array();
  report["classifiers"] = nlohmann::json::array();
  for (ClassifierKind k : cfg.classifiers) report["classifiers"].push_back(to_string(k));
  report["results"] = nlohmann::json::object();

  std::string tables = "scenario,classifier";
  for (const char* m : kMetricKeys) tables += std::string(",") + m + "_mean," + m + "_std";
  tables += "\n";
  std::string ablation = "scenario,features,accuracy_mean,accuracy_std\n";
  char buf[64];

  for (Scenario s : resolve_scenarios(scenarios)) {
    const char* sname = to_string(s);
    report["scenarios"].push_back(sname);
    const LabeledDataset data = scenario_dataset(table, s);
    if (data.size() == 0) continue;
    std::vector<int> classes = data.labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw DomainError(std::string("scenario ") + sname + " has fewer than two classes");

    nlohmann::json& res = report["results"][sname];
    res["samples"] = data.size();
    res["classes"] = classes;
    const std::uint64_t seed = derive_seed(cfg.seed, 0x6576616cULL, static_cast<std::uint64_t>(s));
    std::optional<ProtocolSummary> rf_hybrid;
    for (ClassifierKind k : cfg.classifiers) {
      const auto tc = Clock::now();
      const ProtocolSummary sum = run_protocol(data, cfg.classifier(k), cfg.split, cfg.repeats, seed, exec);
      timings["evaluate"][sname][to_string(k)] = seconds_since(tc);
      res["classifiers"][to_string(k)] = to_json(sum);
      tables += std::string(sname) + "," + to_string(k);
      for (const MeanStd* m : {&sum.accuracy, &sum.macro_precision, &sum.macro_recall, &sum.macro_f1}) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f", m->mean, m->std);
        tables += buf;
      }
      tables += "\n";
      if (k == ClassifierKind::RandomForest) rf_hybrid = sum;
    }

    const ClassifierConfig& rf = cfg.classifier(ClassifierKind::RandomForest);
    const auto ta = Clock::now();
    const ProtocolSummary hybrid = rf_hybrid ? *rf_hybrid : run_protocol(data, rf, cfg.split, cfg.repeats, seed, exec);
    const ProtocolSummary ctf =
        run_protocol(subset_columns(data, 0, kCtfFeatureCount), rf, cfg.split, cfg.repeats, seed, exec);
    const ProtocolSummary dbf = run_protocol(subset_columns(data, kCtfFeatureCount, data.n_features() - kCtfFeatureCount),
                                             rf, cfg.split, cfg.repeats, seed, exec);
    timings["evaluate"][sname]["ablation"] = seconds_since(ta);
    const ProtocolSummary* parts[] = {&hybrid, &ctf, &dbf};
    for (std::size_t i = 0; i < 3; ++i) {
      res["ablation"][kAblationKeys[i]] = mean_std_json(parts[i]->accuracy);
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f", parts[i]->accuracy.mean, parts[i]->accuracy.std);
      ablation += std::string(sname) + "," + kAblationKeys[i] + buf + "\n";
    }
  }
  timings["evaluate_s"] = seconds_since(t0);
  report["timings"] = timings;

  write_text(out_path, report.dump(2) + "\n");
  write_text(sibling_path(out_path, "_tables.csv"), tables);
  write_text(sibling_path(out_path, "_ablation.csv"), ablation);
  return report;
}

nlohmann::json strip_timings(nlohmann::json report) {
  if (report.is_object()) report.erase("timings");
  return report;
}

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], display_width(r[c]));
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - display_width(r[c]) + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

std::string cell(const nlohmann::json* v) {
  if (!v || !v->is_object() || !v->contains("mean") || !(*v)["mean"].is_number()) return "n/a";
  char buf[64];
  const double sd = v->contains("std") && (*v)["std"].is_number() ? (*v)["std"].get<double>() : 0.0;
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", (*v)["mean"].get<double>(), sd);
  return buf;
}

const nlohmann::json* find_path(const nlohmann::json& j, std::initializer_list<std::string> path) {
  const nlohmann::json* cur = &j;
  for (const auto& key : path) {
    if (!cur->is_object()) return nullptr;
    const auto it = cur->find(key);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

std::vector<std::string> string_list(const nlohmann::json& report, const char* key) {
  const auto it = report.find(key);
  if (it == report.end() || !it->is_array()) throw FormatError(std::string("report lacks a '") + key + "' list");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw FormatError(std::string("report '") + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::string render_report(const nlohmann::json& report) {
  if (!report.is_object()) throw FormatError("report must be a JSON object");
  const auto scenarios = string_list(report, "scenarios");
  const auto classifiers = string_list(report, "classifiers");
  const auto results = report.find("results");
  if (results != report.end() && !results->is_object()) throw FormatError("report 'results' must be an object");
  const nlohmann::json empty = nlohmann::json::object();
  const nlohmann::json& res = results != report.end() ? *results : empty;

  std::vector<std::vector<std::string>> rows{{"scenario", "classifier", "accuracy", "precision", "recall", "f1"}};
  for (const auto& s : scenarios)
    for (const auto& c : classifiers) {
      std::vector<std::string> row{s, c};
      for (const char* m : kMetricKeys) row.push_back(cell(find_path(res, {s, "classifiers", c, m})));
      rows.push_back(std::move(row));
    }
  std::string out = render_table(rows);

  std::vector<std::vector<std::string>> ab{{"scenario", "features", "accuracy"}};
  for (const auto& s : scenarios)
    for (const char* a : kAblationKeys) ab.push_back({s, a, cell(find_path(res, {s, "ablation", a}))});
  out += "\nfeature ablation (random_forest)\n" + render_table(ab);
  return out;
}

std::string cmd_report(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) throw std::runtime_error("cannot open " + report_path);
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return render_report(report);
}

}  // namespace uwbcount
