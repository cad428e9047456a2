#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "uwbcount/features.hpp"
#include "uwbcount/learn.hpp"

using namespace uwbcount;

namespace {

/// Gaussian blobs in d dimensions, centres 12 sigma apart along every axis.
LabeledDataset blobs(int classes, int per_class, std::size_t d, std::uint64_t seed, double gap = 12.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  LabeledDataset ds;
  ds.features = Matrix(static_cast<std::size_t>(classes * per_class), d);
  std::size_t r = 0;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i, ++r) {
      for (std::size_t j = 0; j < d; ++j) ds.features(r, j) = gap * c + g(rng);
      ds.labels.push_back(c);
    }
  return ds;
}

ClassifierConfig quick(ClassifierKind kind) {
  auto c = ClassifierConfig::defaults(kind);
  c.trees = 25;
  c.estimators = 10;
  c.epochs = 30;
  c.hidden = {16, 16};
  return c;
}

double accuracy_on(const TrainedModel& m, const LabeledDataset& d) { return evaluate(m, d).accuracy; }

TrainedModel leaf_model(ClassifierKind kind, std::vector<int> classes, const std::vector<std::vector<double>>& leaves) {
  TrainedModel m;
  m.kind = kind;
  m.layout_version = kFeatureLayoutVersion;
  m.n_features = 1;
  m.classes = std::move(classes);
  for (const auto& p : leaves) {
    DecisionTree t;
    TreeNode leaf;
    leaf.proba = p;
    t.nodes.push_back(leaf);
    m.trees.push_back(t);
  }
  return m;
}

}  // namespace

TEST_CASE("metrics hand example") {
  const auto m = compute_metrics(std::vector<std::vector<long>>{{2, 0}, {1, 1}});
  CHECK(m.accuracy == doctest::Approx(0.75));
  // Class 0: P = 2/3, R = 1; class 1: P = 1, R = 1/2.
  CHECK(m.macro_precision == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
  CHECK(m.macro_precision == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(m.macro_recall == doctest::Approx(0.75));
  // F1: 0.8 and 2/3, mean 0.7333, not the F1 of macro P and R (0.7895).
  CHECK(m.macro_f1 == doctest::Approx((0.8 + 2.0 / 3.0) / 2.0));
  CHECK(m.macro_f1 == doctest::Approx(0.7333).epsilon(1e-4));
  const double f1_of_means = 2 * m.macro_precision * m.macro_recall / (m.macro_precision + m.macro_recall);
  CHECK(std::fabs(m.macro_f1 - f1_of_means) > 0.05);
}

TEST_CASE("metrics conventions") {
  SUBCASE("perfect") {
    const std::vector<int> t{0, 1, 2, 2, 5};
    const auto m = compute_metrics(t, t);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_precision == 1.0);
    CHECK(m.macro_recall == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.confusion.size() == 6);
  }
  SUBCASE("never-predicted class counts precision 0") {
    const std::vector<int> truth{0, 1}, pred{0, 0};
    const auto m = compute_metrics(truth, pred);
    CHECK(m.macro_precision == doctest::Approx(0.25));
    CHECK(m.macro_recall == doctest::Approx(0.5));
  }
  SUBCASE("csv row") {
    CHECK(metrics_csv_header() == "accuracy,macro_precision,macro_recall,macro_f1");
    CHECK(metrics_csv_row(compute_metrics(std::vector<std::vector<long>>{{2, 0}, {1, 1}})) ==
          "0.750000,0.833333,0.750000,0.733333");
  }
}

TEST_CASE("tree finds the best Gini split") {
  // Independent scan of every (feature, midpoint) for the root split.
  const auto ds = blobs(3, 20, 4, 5, 1.5);
  std::vector<int> idx(ds.labels.begin(), ds.labels.end());
  std::vector<double> w(idx.size(), 1.0);
  const auto tree = fit_tree(ds.features, idx, w, 3, TreeParams{1, 1, 0, 0});
  REQUIRE(tree.nodes.size() == 3);
  double best = INFINITY;
  int best_f = -1;
  double best_t = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    std::vector<double> vals;
    for (std::size_t r = 0; r < ds.size(); ++r) vals.push_back(ds.features(r, f));
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      if (vals[i] == vals[i + 1]) continue;
      const double t = 0.5 * (vals[i] + vals[i + 1]);
      std::vector<double> l(3, 0.0), r(3, 0.0);
      for (std::size_t k = 0; k < ds.size(); ++k) (ds.features(k, f) <= t ? l : r)[static_cast<std::size_t>(ds.labels[k])] += 1;
      const double nl = l[0] + l[1] + l[2], nr = r[0] + r[1] + r[2];
      const double score = nl * oracle::gini(l) + nr * oracle::gini(r);
      if (score < best - 1e-12) {
        best = score;
        best_f = static_cast<int>(f);
        best_t = t;
      }
    }
  }
  CHECK(tree.nodes[0].feature == best_f);
  CHECK(tree.nodes[0].threshold == doctest::Approx(best_t));
}

TEST_CASE("zero-weight rows are ignored") {
  auto ds = blobs(2, 30, 3, 8);
  std::vector<int> idx(ds.labels.begin(), ds.labels.end());
  std::vector<double> w(idx.size(), 1.0);
  // Poison a row with the wrong label, then give it zero weight.
  idx[0] = 1;
  w[0] = 0.0;
  const auto tree = fit_tree(ds.features, idx, w, 2, TreeParams{});
  CHECK(tree.nodes.size() == 3);
}

TEST_CASE("bootstrap counts") {
  const std::size_t n = 2000;
  const auto c = bootstrap_counts(n, 42);
  CHECK(std::accumulate(c.begin(), c.end(), 0L) == static_cast<long>(n));
  const double out_of_bag = static_cast<double>(std::count(c.begin(), c.end(), 0)) / n;
  CHECK(out_of_bag == doctest::Approx(std::pow(1.0 - 1.0 / n, n)).epsilon(0.08));
  CHECK(bootstrap_counts(n, 42) == c);
}

TEST_CASE("every classifier separates well-separated blobs") {
  const auto ds = blobs(2, 100, 6, 1);
  for (ClassifierKind k : kAllClassifiers) {
    CAPTURE(to_string(k));
    const auto model = train(quick(k), ds);
    CHECK(accuracy_on(model, ds) == 1.0);
  }
  CHECK(accuracy_on(train(ClassifierConfig::defaults(ClassifierKind::RandomForest), ds), ds) == 1.0);
}

TEST_CASE("constant-label data gives a constant model") {
  auto ds = blobs(1, 20, 3, 2);
  for (int& l : ds.labels) l = 4;
  for (ClassifierKind k : kAllClassifiers) {
    const auto model = train(quick(k), ds);
    CHECK(model.is_constant());
    const std::vector<double> x{100.0, -3.0, 0.5};
    CHECK(predict(model, x) == 4);
  }
}

TEST_CASE("training errors") {
  auto ds = blobs(2, 10, 3, 3);
  ds.features(3, 1) = NAN;
  CHECK_THROWS_AS(train(quick(ClassifierKind::DecisionTree), ds), DomainError);
  auto cfg = quick(ClassifierKind::NeuralNet);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = quick(ClassifierKind::RandomForest);
  cfg.trees = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK(parse_classifier("rf") == ClassifierKind::RandomForest);
  CHECK(parse_classifier("neural_net") == ClassifierKind::NeuralNet);
  CHECK_THROWS(parse_classifier("svm"));
}

TEST_CASE("deterministic training") {
  const auto ds = blobs(4, 30, 5, 4, 2.0);
  for (ClassifierKind k : kAllClassifiers) {
    CAPTURE(to_string(k));
    const auto a = serialize_model(train(quick(k), ds, Execution::Parallel));
    const auto b = serialize_model(train(quick(k), ds, Execution::Parallel));
    const auto s = serialize_model(train(quick(k), ds, Execution::Serial));
    CHECK(a == b);
    CHECK(a == s);
  }
}

TEST_CASE("vote ties go to the smaller label") {
  std::vector<std::vector<double>> leaves;
  for (int i = 0; i < 200; ++i) leaves.push_back(i % 2 ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0});
  const auto forest = leaf_model(ClassifierKind::RandomForest, {3, 7}, leaves);
  const std::vector<double> x{0.0};
  CHECK(predict(forest, x) == 3);
  const auto swapped = leaf_model(ClassifierKind::RandomForest, {3, 7}, {{0.0, 1.0}, {1.0, 0.0}});
  CHECK(predict(swapped, x) == 3);
  const auto flat = leaf_model(ClassifierKind::DecisionTree, {2, 5}, {{0.5, 0.5}});
  CHECK(predict(flat, x) == 2);
}

TEST_CASE("single-tree forest predicts like the same decision tree") {
  const auto ds = blobs(3, 40, 4, 6, 1.0);
  auto cfg = quick(ClassifierKind::RandomForest);
  cfg.trees = 1;
  const auto forest = train(cfg, ds);
  TrainedModel tree = forest;
  tree.kind = ClassifierKind::DecisionTree;
  const Matrix probe = oracle::random_matrix(1000, 4, 9, 3.0);
  std::size_t same = 0;
  for (std::size_t r = 0; r < probe.rows(); ++r) same += predict(forest, probe.row(r)) == predict(tree, probe.row(r));
  CHECK(same == probe.rows());
}

TEST_CASE("SAMME.R with one perfect stage reproduces that stage") {
  const auto ds = blobs(3, 30, 2, 7);
  auto cfg = quick(ClassifierKind::AdaBoost);
  const auto model = train(cfg, ds);
  REQUIRE(model.trees.size() == 1);
  const Matrix probe = oracle::random_matrix(500, 2, 10, 15.0);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    const int stage = model.classes[static_cast<std::size_t>(model.trees[0].predict_index(probe.row(r)))];
    CHECK(predict(model, probe.row(r)) == stage);
    const auto s = samme_r_scores(model, probe.row(r));
    CHECK(std::distance(s.begin(), std::max_element(s.begin(), s.end())) == model.trees[0].predict_index(probe.row(r)));
  }
}

TEST_CASE("MLP analytic gradient matches central differences") {
  const int in = 6, out = 4;
  const std::vector<int> hidden{5, 7};
  Mlp net = init_mlp(in, hidden, out, 3);
  net.feature_mean.assign(in, 0.0);
  net.feature_scale.assign(in, 1.0);
  const Matrix x = oracle::random_matrix(10, in, 4);
  const std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3, 1, 2};
  const double l2 = 1e-3;
  const auto g = mlp_loss_and_gradient(net, x, y, l2);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t layer = 0; layer < net.layers.size(); ++layer) {
    auto probe = [&](std::vector<double>& param, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + h;
        const double up = mlp_loss_and_gradient(net, x, y, l2).loss;
        param[i] = saved - h;
        const double down = mlp_loss_and_gradient(net, x, y, l2).loss;
        param[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::fabs(numeric), std::fabs(grad[i]), 1e-6});
        worst = std::max(worst, std::fabs(numeric - grad[i]) / denom);
      }
    };
    probe(net.layers[layer].weights, g.weights[layer]);
    probe(net.layers[layer].bias, g.bias[layer]);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("shuffled labels give chance accuracy") {
  // 21 balanced classes of pure noise; average over 20 label shuffles.
  const int classes = 21, per = 40;
  LabeledDataset ds;
  ds.features = oracle::random_matrix(static_cast<std::size_t>(classes * per), 8, 11);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per; ++i) ds.labels.push_back(c);
  auto cfg = quick(ClassifierKind::RandomForest);
  double acc = 0.0;
  std::mt19937_64 rng(12);
  for (int s = 0; s < 20; ++s) {
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    const auto [tr, te] = stratified_split(ds.labels, 0.8, static_cast<std::uint64_t>(s));
    acc += accuracy_on(train(cfg, subset_rows(ds, tr)), subset_rows(ds, te));
  }
  CHECK(std::fabs(acc / 20.0 - 1.0 / 21.0) <= 0.03);
}

TEST_CASE("stratified split") {
  std::vector<int> labels;
  for (int c = 0; c <= 20; ++c)
    for (int i = 0; i < 160; ++i) labels.push_back(c);
  REQUIRE(labels.size() == 3360);
  const auto [train_rows, test_rows] = stratified_split(labels, 0.8, 1);
  CHECK(train_rows.size() == 2688);
  CHECK(test_rows.size() == 672);
  std::vector<std::size_t> all(train_rows);
  all.insert(all.end(), test_rows.begin(), test_rows.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(labels.size());
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);
  CHECK(stratified_split(labels, 0.8, 1).first == train_rows);

  const std::vector<int> pair{0, 0, 1, 1};
  const auto [a, b] = stratified_split(pair, 0.99, 3);
  CHECK(a.size() == 2);
  CHECK(b.size() == 2);
}

TEST_CASE("run_protocol") {
  const auto ds = blobs(3, 20, 4, 13);
  auto cfg = quick(ClassifierKind::DecisionTree);
  const auto one = run_protocol(ds, cfg, 0.8, 1, 5);
  CHECK(one.accuracy.mean == 1.0);
  CHECK(one.accuracy.std == 0.0);
  CHECK(one.train_size == 48);
  const auto noisy = blobs(3, 20, 4, 14, 1.0);
  const auto a = run_protocol(noisy, cfg, 0.8, 5, 6);
  const auto b = run_protocol(noisy, cfg, 0.8, 5, 6, Execution::Serial);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.runs.size() == 5);
  CHECK_THROWS_AS(run_protocol(noisy, cfg, 1.0, 5, 6), DomainError);
  CHECK_THROWS_AS(run_protocol(noisy, cfg, 0.8, 0, 6), DomainError);
}

TEST_CASE("model serialization") {
  const auto ds = blobs(3, 20, 5, 15, 2.0);
  for (ClassifierKind k : kAllClassifiers) {
    CAPTURE(to_string(k));
    const auto model = train(quick(k), ds);
    const auto blob = serialize_model(model);
    CHECK(std::string(blob.begin(), blob.begin() + 4) == "UWBM");
    const auto back = deserialize_model(blob);
    CHECK(serialize_model(back) == blob);
    CHECK(predict_all(back, ds.features) == predict_all(model, ds.features));

    auto bad = blob;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);
    auto truncated = blob;
    truncated.resize(blob.size() / 2);
    CHECK_THROWS_AS(deserialize_model(truncated), FormatError);
    auto extra = blob;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_model(extra), FormatError);
  }
}

TEST_CASE("layout mismatches are rejected") {
  const auto ds = blobs(2, 10, 3, 16);
  const auto model = train(quick(ClassifierKind::DecisionTree), ds);
  const std::vector<double> x{0.0, 0.0, 0.0};
  CHECK_NOTHROW(predict(model, x, kFeatureLayoutVersion));
  CHECK_THROWS_AS(predict(model, x, kFeatureLayoutVersion + 1), DomainError);
  const std::vector<double> wide{0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(predict(model, wide), DomainError);
}
