#include "uwbcount/learn.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "uwbcount/io.hpp"

namespace uwbcount {

const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::DecisionTree: return "decision_tree";
    case ClassifierKind::RandomForest: return "random_forest";
    case ClassifierKind::AdaBoost: return "adaboost";
    case ClassifierKind::NeuralNet: return "neural_net";
  }
  return "?";
}

ClassifierKind parse_classifier(std::string_view name) {
  for (ClassifierKind k : kAllClassifiers)
    if (name == to_string(k)) return k;
  if (name == "dt") return ClassifierKind::DecisionTree;
  if (name == "rf") return ClassifierKind::RandomForest;
  if (name == "ab") return ClassifierKind::AdaBoost;
  if (name == "nn") return ClassifierKind::NeuralNet;
  throw DomainError("unknown classifier: " + std::string(name));
}

ClassifierConfig ClassifierConfig::defaults(ClassifierKind kind) {
  ClassifierConfig c;
  c.kind = kind;
  return c;
}

void ClassifierConfig::validate() const {
  if (trees < 1) throw DomainError("trees must be positive");
  if (estimators < 1) throw DomainError("estimators must be positive");
  if (kind == ClassifierKind::NeuralNet && hidden.empty()) throw DomainError("network needs a hidden layer");
  for (int h : hidden)
    if (h < 1) throw DomainError("hidden layer widths must be positive");
  if (max_depth < 0) throw DomainError("max_depth must be non-negative");
  if (min_leaf < 1) throw DomainError("min_leaf must be at least 1");
  if (feature_subset_size < 0) throw DomainError("feature_subset_size must be non-negative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DomainError("learning_rate must be >= 0");
  if (epochs < 1 || batch_size < 1) throw DomainError("epochs and batch_size must be positive");
  if (!(l2 >= 0.0)) throw DomainError("l2 must be >= 0");
}

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) throw DomainError("feature rows and labels differ in count");
  if (labels.empty()) throw DomainError("empty dataset");
  for (int l : labels)
    if (l < 0) throw DomainError("labels must be non-negative");
  if (!all_finite(features.values())) throw DomainError("non-finite feature value");
}

LabeledDataset subset_rows(const LabeledDataset& data, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.scenario = data.scenario;
  out.features = Matrix(rows.size(), data.n_features());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = data.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(data.labels[rows[i]]);
  }
  return out;
}

LabeledDataset subset_columns(const LabeledDataset& data, std::size_t first, std::size_t count) {
  if (first + count > data.n_features()) throw DomainError("column range outside dataset");
  LabeledDataset out;
  out.scenario = data.scenario;
  out.labels = data.labels;
  out.features = Matrix(data.size(), count);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto src = data.features.row(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(first), src.begin() + static_cast<std::ptrdiff_t>(first + count),
              out.features.row(r).begin());
  }
  return out;
}

// ---- trees ---------------------------------------------------------------

const std::vector<double>& DecisionTree::leaf_proba(std::span<const double> x) const {
  if (nodes.empty()) throw DomainError("empty tree");
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].proba;
}

int DecisionTree::predict_index(std::span<const double> x) const {
  const auto& p = leaf_proba(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

/// Uniform integer in [0, n) from a 64-bit engine, independent of the
/// standard library's distribution implementation.
std::size_t draw_below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

double draw_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_below(rng, i)]);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::span<const double> w, int k, const TreeParams& p)
      : x_(x), y_(y), w_(w), k_(static_cast<std::size_t>(k)), p_(p), rng_(p.seed) {}

  DecisionTree run() {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < x_.rows(); ++i)
      if (w_[i] > 0.0) rows.push_back(i);
    if (rows.empty()) throw DomainError("tree has no weighted rows");
    features_.resize(x_.cols());
    std::iota(features_.begin(), features_.end(), 0);
    build(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> totals(k_, 0.0);
    for (std::size_t r : rows) totals[static_cast<std::size_t>(y_[r])] += w_[r];
    const double total = std::accumulate(totals.begin(), totals.end(), 0.0);
    const bool pure = std::count_if(totals.begin(), totals.end(), [](double t) { return t > 0.0; }) <= 1;
    const bool depth_cap = p_.max_depth > 0 && depth >= p_.max_depth;
    const bool too_small = rows.size() < 2 * static_cast<std::size_t>(p_.min_leaf);
    Split best;
    if (!pure && !depth_cap && !too_small) best = find_split(rows, totals);
    if (best.feature < 0) {
      for (double& t : totals) t /= total;
      tree_.nodes[static_cast<std::size_t>(id)].proba = std::move(totals);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = features_.size();
    const std::size_t k = p_.feature_subset_size;
    if (k == 0 || k >= d) return features_;
    std::vector<std::size_t> pool = features_;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + draw_below(rng_, d - i)]);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  Split find_split(const std::vector<std::size_t>& rows, const std::vector<double>& totals) {
    Split best;
    const std::size_t m = rows.size();
    const std::size_t min_leaf = static_cast<std::size_t>(p_.min_leaf);
    std::vector<std::pair<double, std::size_t>> vals(m);
    std::vector<double> left(k_);
    double total_sq = 0.0, total_w = 0.0;
    for (double t : totals) {
      total_sq += t * t;
      total_w += t;
    }
    for (std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < m; ++i) vals[i] = {x_(rows[i], f), rows[i]};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      double lsq = 0.0, rsq = total_sq, lw = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const std::size_t c = static_cast<std::size_t>(y_[vals[i].second]);
        const double w = w_[vals[i].second];
        const double lc = left[c], rc = totals[c] - lc;
        lsq += (lc + w) * (lc + w) - lc * lc;
        rsq += (rc - w) * (rc - w) - rc * rc;
        left[c] = lc + w;
        lw += w;
        if (vals[i].first == vals[i + 1].first) continue;
        if (i + 1 < min_leaf || m - i - 1 < min_leaf) continue;
        const double rw = total_w - lw;
        if (lw <= 0.0 || rw <= 0.0) continue;
        // Maximizing sum_k L_k^2/W_L + sum_k R_k^2/W_R minimizes weighted Gini.
        const double score = lsq / lw + rsq / rw;
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
          // Midpoint can round onto the upper value for adjacent doubles.
          if (best.threshold >= vals[i + 1].first) best.threshold = vals[i].first;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  TreeParams p_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> features_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree fit_tree(const Matrix& x, std::span<const int> class_index, std::span<const double> weights, int n_classes,
                      const TreeParams& params) {
  if (x.rows() != class_index.size() || x.rows() != weights.size()) throw DomainError("tree inputs differ in length");
  if (n_classes < 1) throw DomainError("n_classes must be positive");
  if (params.min_leaf < 1) throw DomainError("min_leaf must be at least 1");
  for (int c : class_index)
    if (c < 0 || c >= n_classes) throw DomainError("class index out of range");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and non-negative");
  return TreeBuilder(x, class_index, weights, n_classes, params).run();
}

std::vector<int> bootstrap_counts(std::size_t n, std::uint64_t seed) {
  std::vector<int> counts(n, 0);
  if (n == 0) return counts;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) ++counts[draw_below(rng, n)];
  return counts;
}

// ---- network -------------------------------------------------------------

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;

RowMat mlp_forward(const Mlp& net, const ConstMap& x, std::vector<RowMat>* pre) {
  RowMat a = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    ConstMap w(layer.weights.data(), layer.out, layer.in);
    VecMap b(layer.bias.data(), layer.out);
    RowMat z = a * w.transpose();
    z.rowwise() += b.transpose();
    if (pre) pre->push_back(z);
    a = l + 1 < net.layers.size() ? RowMat(z.cwiseMax(0.0)) : z;
  }
  return a;
}

/// Row-wise log-softmax.
RowMat log_softmax(const RowMat& z) {
  RowMat out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    out.row(r) = z.row(r).array() - lse;
  }
  return out;
}

}  // namespace

Mlp init_mlp(int n_inputs, std::span<const int> hidden, int n_outputs, std::uint64_t seed) {
  if (n_inputs < 1 || n_outputs < 1) throw DomainError("network dimensions must be positive");
  Mlp net;
  std::mt19937_64 rng(seed);
  int in = n_inputs;
  std::vector<int> widths(hidden.begin(), hidden.end());
  widths.push_back(n_outputs);
  for (int out : widths) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    // Glorot uniform.
    const double bound = std::sqrt(6.0 / (in + out));
    layer.weights.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    for (double& w : layer.weights) w = (2.0 * draw_unit(rng) - 1.0) * bound;
    layer.bias.resize(static_cast<std::size_t>(out));
    for (double& b : layer.bias) b = (2.0 * draw_unit(rng) - 1.0) * bound;
    net.layers.push_back(std::move(layer));
    in = out;
  }
  net.feature_mean.assign(static_cast<std::size_t>(n_inputs), 0.0);
  net.feature_scale.assign(static_cast<std::size_t>(n_inputs), 1.0);
  return net;
}

MlpGradient mlp_loss_and_gradient(const Mlp& net, const Matrix& x_std, std::span<const int> class_index, double l2) {
  if (net.layers.empty()) throw DomainError("network has no layers");
  const auto batch = static_cast<Eigen::Index>(x_std.rows());
  if (batch == 0 || x_std.rows() != class_index.size()) throw DomainError("batch and labels differ in length");
  if (static_cast<int>(x_std.cols()) != net.layers.front().in) throw DomainError("batch width does not match network");
  const int n_out = net.layers.back().out;
  ConstMap x(x_std.data(), batch, static_cast<Eigen::Index>(x_std.cols()));

  std::vector<RowMat> pre;
  const RowMat logits = mlp_forward(net, x, &pre);
  const RowMat logp = log_softmax(logits);

  MlpGradient g;
  const double inv_b = 1.0 / static_cast<double>(batch);
  double nll = 0.0, wsq = 0.0;
  RowMat delta = logp.array().exp();
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int c = class_index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= n_out) throw DomainError("class index out of range");
    nll -= logp(r, c);
    delta(r, c) -= 1.0;
  }
  delta *= inv_b;
  for (const auto& layer : net.layers) wsq += VecMap(layer.weights.data(), static_cast<Eigen::Index>(layer.weights.size())).squaredNorm();
  g.loss = nll * inv_b + 0.5 * l2 * wsq * inv_b;

  const std::size_t n_layers = net.layers.size();
  g.weights.resize(n_layers);
  g.bias.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = net.layers[l];
    ConstMap w(layer.weights.data(), layer.out, layer.in);
    RowMat a_prev = l == 0 ? RowMat(x) : RowMat(pre[l - 1].cwiseMax(0.0));
    RowMat gw = delta.transpose() * a_prev + (l2 * inv_b) * w;
    Eigen::VectorXd gb = delta.colwise().sum().transpose();
    g.weights[l].assign(gw.data(), gw.data() + gw.size());
    g.bias[l].assign(gb.data(), gb.data() + gb.size());
    if (l > 0) {
      RowMat back = delta * w;
      delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
    }
  }
  return g;
}

namespace {

void standardize_fit(Mlp& net, const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    net.feature_mean[j] = mean;
    net.feature_scale[j] = sd > 0.0 ? sd : 1.0;
  }
}

void standardize_row(const Mlp& net, std::span<const double> in, std::span<double> out) {
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - net.feature_mean[j]) / net.feature_scale[j];
}

Mlp train_mlp(const ClassifierConfig& cfg, const Matrix& x, std::span<const int> y, int n_classes) {
  Mlp net = init_mlp(static_cast<int>(x.cols()), cfg.hidden, n_classes, derive_seed(cfg.seed, 0));
  standardize_fit(net, x);
  Matrix xs(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) standardize_row(net, x.row(i), xs.row(i));

  const double lr = cfg.learning_rate > 0.0 ? cfg.learning_rate : 1e-3;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const std::size_t n_layers = net.layers.size();
  std::vector<std::vector<double>> mw(n_layers), vw(n_layers), mb(n_layers), vb(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    mw[l].assign(net.layers[l].weights.size(), 0.0);
    vw[l] = mw[l];
    mb[l].assign(net.layers[l].bias.size(), 0.0);
    vb[l] = mb[l];
  }
  auto adam = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
                  double step) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
    }
  };

  std::mt19937_64 rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  long t = 0;
  Matrix batch;
  std::vector<int> batch_y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      batch = Matrix(len, x.cols());
      batch_y.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        const auto src = xs.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
        batch_y[i] = y[order[start + i]];
      }
      const MlpGradient g = mlp_loss_and_gradient(net, batch, batch_y, cfg.l2);
      if (!std::isfinite(g.loss)) throw NumericError("network loss diverged");
      ++t;
      const double step = lr * std::sqrt(1.0 - std::pow(beta2, t)) / (1.0 - std::pow(beta1, t));
      for (std::size_t l = 0; l < n_layers; ++l) {
        adam(net.layers[l].weights, g.weights[l], mw[l], vw[l], step);
        adam(net.layers[l].bias, g.bias[l], mb[l], vb[l], step);
      }
    }
  }
  return net;
}

int mlp_predict_index(const Mlp& net, std::span<const double> x) {
  std::vector<double> xs(x.size());
  standardize_row(net, x, xs);
  ConstMap row(xs.data(), 1, static_cast<Eigen::Index>(xs.size()));
  const RowMat out = mlp_forward(net, row, nullptr);
  Eigen::Index best;
  out.row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

// ---- boosting ------------------------------------------------------------

/// Symmetric log-probability vote of one stage, added into `scores`.
void samme_r_add(const DecisionTree& tree, std::span<const double> x, std::vector<double>& scores) {
  const auto& p = tree.leaf_proba(x);
  const std::size_t k = p.size();
  std::vector<double> logp(k);
  double mean = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    logp[c] = std::log(std::max(p[c], DBL_EPSILON));
    mean += logp[c];
  }
  mean /= static_cast<double>(k);
  for (std::size_t c = 0; c < k; ++c) scores[c] += static_cast<double>(k - 1) * (logp[c] - mean);
}

std::vector<DecisionTree> train_samme_r(const ClassifierConfig& cfg, const Matrix& x, std::span<const int> y, int n_classes) {
  const std::size_t n = x.rows();
  const double k = n_classes;
  const double lr = cfg.learning_rate > 0.0 ? cfg.learning_rate : 1.0;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<DecisionTree> stages;
  TreeParams params;
  params.max_depth = cfg.max_depth > 0 ? cfg.max_depth : 3;
  params.min_leaf = cfg.min_leaf;
  for (int m = 0; m < cfg.estimators; ++m) {
    params.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(m));
    DecisionTree tree = fit_tree(x, y, w, n_classes, params);
    double error = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (tree.predict_index(x.row(i)) != y[i]) error += w[i];
    // Reweight: w_i *= exp(-lr (K-1)/K * y_i . log p_i) with y coded 1 / -1/(K-1).
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = tree.leaf_proba(x.row(i));
      double dot = 0.0;
      for (int c = 0; c < n_classes; ++c) {
        const double code = c == y[i] ? 1.0 : -1.0 / (k - 1.0);
        dot += code * std::log(std::max(p[static_cast<std::size_t>(c)], DBL_EPSILON));
      }
      w[i] *= std::exp(-lr * (k - 1.0) / k * dot);
      total += w[i];
    }
    stages.push_back(std::move(tree));
    if (error <= 0.0) break;
    if (!(total > 0.0) || !std::isfinite(total)) break;
    for (double& v : w) v /= total;
  }
  return stages;
}

}  // namespace

std::vector<double> samme_r_scores(const TrainedModel& model, std::span<const double> x) {
  if (model.kind != ClassifierKind::AdaBoost) throw DomainError("not a boosted model");
  std::vector<double> scores(model.classes.size(), 0.0);
  for (const auto& t : model.trees) samme_r_add(t, x, scores);
  return scores;
}

// ---- train / predict -----------------------------------------------------

TrainedModel train(const ClassifierConfig& cfg, const LabeledDataset& data, Execution exec) {
  cfg.validate();
  data.validate();
  TrainedModel model;
  model.kind = cfg.kind;
  model.n_features = data.n_features();
  model.seed = cfg.seed;
  model.layout_version = kFeatureLayoutVersion;
  model.classes = data.labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.is_constant()) return model;

  std::map<int, int> index;
  for (std::size_t i = 0; i < model.classes.size(); ++i) index[model.classes[i]] = static_cast<int>(i);
  std::vector<int> y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y[i] = index[data.labels[i]];
  const int k = static_cast<int>(model.classes.size());
  const Matrix& x = data.features;

  switch (cfg.kind) {
    case ClassifierKind::DecisionTree: {
      TreeParams p{cfg.max_depth, cfg.min_leaf, cfg.feature_subset_size, cfg.seed};
      std::vector<double> w(data.size(), 1.0);
      model.trees.push_back(fit_tree(x, y, w, k, p));
      break;
    }
    case ClassifierKind::RandomForest: {
      const int subset = cfg.feature_subset_size > 0
                             ? cfg.feature_subset_size
                             : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
      model.trees.resize(static_cast<std::size_t>(cfg.trees));
      for_each_index(model.trees.size(), exec, [&](std::size_t t) {
        const std::uint64_t tree_seed = derive_seed(cfg.seed, t);
        const std::vector<int> counts = bootstrap_counts(x.rows(), tree_seed);
        const std::vector<double> w(counts.begin(), counts.end());
        model.trees[t] = fit_tree(x, y, w, k, {cfg.max_depth, cfg.min_leaf, subset, derive_seed(tree_seed, 1)});
      });
      break;
    }
    case ClassifierKind::AdaBoost:
      model.trees = train_samme_r(cfg, x, y, k);
      break;
    case ClassifierKind::NeuralNet:
      model.mlp = train_mlp(cfg, x, y, k);
      break;
  }
  return model;
}

int predict(const TrainedModel& model, std::span<const double> x, int layout_version) {
  if (layout_version != 0 && layout_version != model.layout_version)
    throw DomainError("feature layout version " + std::to_string(layout_version) + " does not match model version " +
                      std::to_string(model.layout_version));
  if (x.size() != model.n_features)
    throw DomainError("expected " + std::to_string(model.n_features) + " features, got " + std::to_string(x.size()));
  if (model.classes.empty()) throw DomainError("model has no classes");
  if (model.is_constant()) return model.classes.front();
  switch (model.kind) {
    case ClassifierKind::DecisionTree:
      return model.classes[static_cast<std::size_t>(model.trees.at(0).predict_index(x))];
    case ClassifierKind::RandomForest: {
      std::vector<int> votes(model.classes.size(), 0);
      for (const auto& t : model.trees) ++votes[static_cast<std::size_t>(t.predict_index(x))];
      return model.classes[static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin())];
    }
    case ClassifierKind::AdaBoost: {
      const auto s = samme_r_scores(model, x);
      return model.classes[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())];
    }
    case ClassifierKind::NeuralNet:
      return model.classes[static_cast<std::size_t>(mlp_predict_index(model.mlp, x))];
  }
  throw DomainError("unknown classifier kind");
}

std::vector<int> predict_all(const TrainedModel& model, const Matrix& x) {
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(model, x.row(i));
  return out;
}

// ---- metrics -------------------------------------------------------------

Metrics compute_metrics(const std::vector<std::vector<long>>& confusion) {
  const std::size_t k = confusion.size();
  for (const auto& row : confusion)
    if (row.size() != k) throw DomainError("confusion matrix must be square");
  Metrics m;
  m.confusion = confusion;
  long total = 0, correct = 0;
  std::vector<long> row_sum(k, 0), col_sum(k, 0);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p) {
      const long v = confusion[t][p];
      if (v < 0) throw DomainError("negative confusion count");
      total += v;
      row_sum[t] += v;
      col_sum[p] += v;
      if (t == p) correct += v;
    }
  if (total == 0) throw DomainError("empty confusion matrix");
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  int present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (row_sum[c] == 0 && col_sum[c] == 0) continue;
    ++present;
    const double tp = static_cast<double>(confusion[c][c]);
    const double prec = col_sum[c] > 0 ? tp / static_cast<double>(col_sum[c]) : 0.0;
    const double rec = row_sum[c] > 0 ? tp / static_cast<double>(row_sum[c]) : 0.0;
    m.macro_precision += prec;
    m.macro_recall += rec;
    m.macro_f1 += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  m.macro_precision /= present;
  m.macro_recall /= present;
  m.macro_f1 /= present;
  return m;
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DomainError("truth and predictions differ in length");
  if (truth.empty()) throw DomainError("no predictions to score");
  int k = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0) throw DomainError("labels must be non-negative");
    k = std::max({k, truth[i] + 1, predicted[i] + 1});
  }
  std::vector<std::vector<long>> confusion(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  return compute_metrics(confusion);
}

Metrics evaluate(const TrainedModel& model, const LabeledDataset& test) {
  test.validate();
  const std::vector<int> pred = predict_all(model, test.features);
  return compute_metrics(test.labels, pred);
}

// ---- protocol ------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                               double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("split fraction must be in (0,1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> train_rows, test_rows;
  for (auto& [label, rows] : by_class) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    shuffle(rows, rng);
    std::size_t n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(rows.size())));
    if (rows.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {train_rows, test_rows};
}

namespace {

MeanStd mean_std(const std::vector<Metrics>& runs, double Metrics::*field) {
  MeanStd s;
  for (const auto& r : runs) s.mean += r.*field;
  s.mean /= static_cast<double>(runs.size());
  if (runs.size() > 1) {
    double var = 0.0;
    for (const auto& r : runs) var += (r.*field - s.mean) * (r.*field - s.mean);
    s.std = std::sqrt(var / static_cast<double>(runs.size() - 1));
  }
  return s;
}

}  // namespace

ProtocolSummary run_protocol(const LabeledDataset& data, const ClassifierConfig& cfg, double split, int repeats,
                             std::uint64_t seed, Execution exec) {
  if (repeats < 1) throw DomainError("repeats must be positive");
  data.validate();
  cfg.validate();
  ProtocolSummary s;
  s.repeats = repeats;
  s.runs.resize(static_cast<std::size_t>(repeats));
  std::vector<std::size_t> train_sizes(s.runs.size()), test_sizes(s.runs.size());
  for_each_index(s.runs.size(), exec, [&](std::size_t r) {
    const std::uint64_t run_seed = derive_seed(seed, r);
    auto [train_rows, test_rows] = stratified_split(data.labels, split, run_seed);
    if (test_rows.empty()) throw DomainError("split leaves no test rows");
    ClassifierConfig c = cfg;
    c.seed = derive_seed(run_seed, cfg.seed);
    const TrainedModel model = train(c, subset_rows(data, train_rows), Execution::Serial);
    s.runs[r] = evaluate(model, subset_rows(data, test_rows));
    train_sizes[r] = train_rows.size();
    test_sizes[r] = test_rows.size();
  });
  s.train_size = train_sizes.front();
  s.test_size = test_sizes.front();
  s.accuracy = mean_std(s.runs, &Metrics::accuracy);
  s.macro_precision = mean_std(s.runs, &Metrics::macro_precision);
  s.macro_recall = mean_std(s.runs, &Metrics::macro_recall);
  s.macro_f1 = mean_std(s.runs, &Metrics::macro_f1);
  return s;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"confusion", m.confusion}};
}

nlohmann::json to_json(const ProtocolSummary& s) {
  auto ms = [](const MeanStd& v) { return nlohmann::json{{"mean", v.mean}, {"std", v.std}}; };
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r));
  return {{"repeats", s.repeats},
          {"train_size", s.train_size},
          {"test_size", s.test_size},
          {"accuracy", ms(s.accuracy)},
          {"macro_precision", ms(s.macro_precision)},
          {"macro_recall", ms(s.macro_recall)},
          {"macro_f1", ms(s.macro_f1)},
          {"runs", runs}};
}

std::string metrics_csv_header() { return "accuracy,macro_precision,macro_recall,macro_f1"; }

std::string metrics_csv_row(const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f", m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1);
  return buf;
}

// ---- serialization -------------------------------------------------------

namespace {

constexpr std::uint16_t kModelBlobVersion = 1;

void put_doubles(ByteWriter& w, const std::vector<double>& v) {
  w.put(static_cast<std::uint32_t>(v.size()));
  for (double x : v) w.put(x);
}

std::vector<double> get_doubles(ByteReader& r) {
  const auto n = r.get<std::uint32_t>();
  std::vector<double> v;
  v.reserve(std::min<std::uint32_t>(n, 1u << 20));
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(r.get<double>());
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
  ByteWriter w;
  w.put_magic("UWBM");
  w.put(kModelBlobVersion);
  w.put(static_cast<std::uint8_t>(model.kind));
  w.put(static_cast<std::int32_t>(model.layout_version));
  w.put(static_cast<std::uint64_t>(model.n_features));
  w.put(model.seed);
  w.put(static_cast<std::uint32_t>(model.classes.size()));
  for (int c : model.classes) w.put(static_cast<std::int32_t>(c));
  w.put(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& t : model.trees) {
    w.put(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.put(static_cast<std::int32_t>(n.feature));
      w.put(n.threshold);
      w.put(static_cast<std::int32_t>(n.left));
      w.put(static_cast<std::int32_t>(n.right));
      put_doubles(w, n.proba);
    }
  }
  put_doubles(w, model.mlp.feature_mean);
  put_doubles(w, model.mlp.feature_scale);
  w.put(static_cast<std::uint32_t>(model.mlp.layers.size()));
  for (const auto& l : model.mlp.layers) {
    w.put(static_cast<std::int32_t>(l.in));
    w.put(static_cast<std::int32_t>(l.out));
    put_doubles(w, l.weights);
    put_doubles(w, l.bias);
  }
  return std::move(w.bytes());
}

TrainedModel deserialize_model(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  r.expect_magic("UWBM");
  if (const auto v = r.get<std::uint16_t>(); v != kModelBlobVersion)
    throw FormatError("unsupported model blob version " + std::to_string(v));
  TrainedModel m;
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(ClassifierKind::NeuralNet)) throw FormatError("unknown classifier kind in blob");
  m.kind = static_cast<ClassifierKind>(kind);
  m.layout_version = r.get<std::int32_t>();
  m.n_features = r.get<std::uint64_t>();
  m.seed = r.get<std::uint64_t>();
  const auto n_classes = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_classes; ++i) m.classes.push_back(r.get<std::int32_t>());
  const auto n_trees = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    DecisionTree tree;
    const auto n_nodes = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      TreeNode n;
      n.feature = r.get<std::int32_t>();
      n.threshold = r.get<double>();
      n.left = r.get<std::int32_t>();
      n.right = r.get<std::int32_t>();
      n.proba = get_doubles(r);
      const bool leaf = n.feature < 0;
      if (leaf ? n.proba.size() != n_classes
               : (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
                  n.left >= static_cast<int>(n_nodes) || n.right >= static_cast<int>(n_nodes) ||
                  static_cast<std::uint64_t>(n.feature) >= m.n_features))
        throw FormatError("corrupt tree node in blob");
      tree.nodes.push_back(std::move(n));
    }
    m.trees.push_back(std::move(tree));
  }
  m.mlp.feature_mean = get_doubles(r);
  m.mlp.feature_scale = get_doubles(r);
  const auto n_layers = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    DenseLayer l;
    l.in = r.get<std::int32_t>();
    l.out = r.get<std::int32_t>();
    l.weights = get_doubles(r);
    l.bias = get_doubles(r);
    if (l.in < 1 || l.out < 1 || l.weights.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
        l.bias.size() != static_cast<std::size_t>(l.out))
      throw FormatError("corrupt network layer in blob");
    m.mlp.layers.push_back(std::move(l));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after model blob");
  return m;
}

}  // namespace uwbcount
