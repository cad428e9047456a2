#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uwbcount/common.hpp"
#include "uwbcount/radar_sim.hpp"

namespace uwbcount {

enum class ClassifierKind : std::uint8_t { DecisionTree = 0, RandomForest = 1, AdaBoost = 2, NeuralNet = 3 };

inline constexpr ClassifierKind kAllClassifiers[] = {ClassifierKind::DecisionTree, ClassifierKind::RandomForest,
                                                     ClassifierKind::AdaBoost, ClassifierKind::NeuralNet};

const char* to_string(ClassifierKind k);
ClassifierKind parse_classifier(std::string_view name);

enum class Activation { ReLU };
enum class Optimizer { Adam };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::RandomForest;
  int trees = 200;
  int estimators = 50;
  std::vector<int> hidden{100, 200, 100};
  Activation activation = Activation::ReLU;
  Optimizer optimizer = Optimizer::Adam;
  int max_depth = 0;            // 0: unlimited (trees), 3 for AdaBoost stages
  int min_leaf = 1;
  int feature_subset_size = 0;  // 0: all features, or floor(sqrt(d)) for forests
  double learning_rate = 0.0;   // 0: 1e-3 for NeuralNet, 1.0 for AdaBoost
  int epochs = 200;
  int batch_size = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  /// Paper-configured defaults for one classifier kind.
  static ClassifierConfig defaults(ClassifierKind kind);
  void validate() const;
};

struct LabeledDataset {
  Matrix features;  // samples x features
  std::vector<int> labels;
  Scenario scenario = Scenario::Walk3;

  std::size_t size() const { return labels.size(); }
  std::size_t n_features() const { return features.cols(); }
  void validate() const;
};

LabeledDataset subset_rows(const LabeledDataset& data, std::span<const std::size_t> rows);
LabeledDataset subset_columns(const LabeledDataset& data, std::size_t first, std::size_t count);

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;  // leaves only, over model class indices
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  const std::vector<double>& leaf_proba(std::span<const double> x) const;
  /// Class index with the largest leaf probability; ties go to the smaller index.
  int predict_index(std::span<const double> x) const;
};

/// Dense layer stored row-major as out x in.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

struct Mlp {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<DenseLayer> layers;
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::RandomForest;
  int layout_version = 0;
  std::size_t n_features = 0;
  std::vector<int> classes;  // sorted distinct training labels
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;  // 1 for DecisionTree, forest members, or boosting stages
  Mlp mlp;

  bool is_constant() const { return classes.size() == 1; }
};

struct TreeParams {
  int max_depth = 0;
  int min_leaf = 1;
  int feature_subset_size = 0;
  std::uint64_t seed = 0;
};

/// Weighted CART with Gini impurity. `class_index` holds indices into a
/// class table of size n_classes; rows with zero weight are ignored.
DecisionTree fit_tree(const Matrix& x, std::span<const int> class_index, std::span<const double> weights,
                      int n_classes, const TreeParams& params);

/// Bootstrap multiplicities: n draws with replacement from n rows.
std::vector<int> bootstrap_counts(std::size_t n, std::uint64_t seed);

TrainedModel train(const ClassifierConfig& cfg, const LabeledDataset& data, Execution exec = Execution::Parallel);

int predict(const TrainedModel& model, std::span<const double> x, int layout_version = 0);
std::vector<int> predict_all(const TrainedModel& model, const Matrix& x);

/// Sum over boosting stages of the symmetric log-probability vote.
std::vector<double> samme_r_scores(const TrainedModel& model, std::span<const double> x);

struct MlpGradient {
  double loss = 0.0;
  std::vector<std::vector<double>> weights;  // same layout as DenseLayer::weights
  std::vector<std::vector<double>> bias;
};

/// Mean cross-entropy of softmax outputs plus 0.5 * l2 * sum(W^2) / batch,
/// on already-standardized inputs, with analytic gradients.
MlpGradient mlp_loss_and_gradient(const Mlp& net, const Matrix& x_std, std::span<const int> class_index, double l2);

/// Freshly initialized network for the configured topology.
Mlp init_mlp(int n_inputs, std::span<const int> hidden, int n_outputs, std::uint64_t seed);

struct Metrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<long>> confusion;  // [truth][predicted]
};

/// Macro averages skip classes absent from both truth and predictions; a
/// class never predicted has precision 0.
Metrics compute_metrics(const std::vector<std::vector<long>>& confusion);
Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted);

Metrics evaluate(const TrainedModel& model, const LabeledDataset& test);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct ProtocolSummary {
  int repeats = 0;
  MeanStd accuracy, macro_precision, macro_recall, macro_f1;
  std::vector<Metrics> runs;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Stratified split; each class contributes round(fraction * count) rows to
/// training, at least one to each side when it has two or more rows.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                               double fraction, std::uint64_t seed);

ProtocolSummary run_protocol(const LabeledDataset& data, const ClassifierConfig& cfg, double split = 0.8,
                             int repeats = 20, std::uint64_t seed = 0, Execution exec = Execution::Parallel);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const ProtocolSummary& s);
std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);

/// Versioned binary model blob ("UWBM").
std::vector<std::uint8_t> serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::span<const std::uint8_t> blob);

}  // namespace uwbcount
