#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "odflow/text.hpp"

namespace odflow {

enum class MaxFeatures { sqrt_rule, log2_rule };

inline const char* max_features_name(MaxFeatures m) {
  return m == MaxFeatures::sqrt_rule ? "sqrt" : "log2";
}

inline MaxFeatures parse_max_features(const std::string& s) {
  if (s == "sqrt") return MaxFeatures::sqrt_rule;
  if (s == "log2") return MaxFeatures::log2_rule;
  throw std::runtime_error("max_features must be 'sqrt' or 'log2', got '" + s + "'");
}

struct ForestConfig {
  int trees = 10;
  MaxFeatures max_features = MaxFeatures::log2_rule;
  std::uint64_t seed = 0;
  int min_samples_split = 2;
  // Grid values are enforced unless explicitly overridden.
  bool allow_nonstandard = false;
};

// Binary regression tree. Leaves hold the mean of the training targets that
// reached them; internal nodes route on feature <= threshold.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const Node& node = nodes[static_cast<std::size_t>(idx)];
      idx = (x(node.feature) <= node.threshold) ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(idx)].value;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestConfig config;
  int n_features = 0;
};

namespace forest_detail {

inline void validate_config(const ForestConfig& config) {
  if (config.trees < 1) throw std::runtime_error("forest needs at least one tree");
  if (config.min_samples_split < 2)
    throw std::runtime_error("min_samples_split must be >= 2");
  if (config.allow_nonstandard) return;
  static constexpr int kTreeGrid[] = {10, 50, 100, 500, 1000};
  bool ok = false;
  for (int d : kTreeGrid) ok = ok || (config.trees == d);
  if (!ok)
    throw std::runtime_error("trees=" + std::to_string(config.trees) +
                             " outside grid {10,50,100,500,1000}; set allow_nonstandard");
  if (config.seed > 4)
    throw std::runtime_error("forest seed outside grid {0..4}; set allow_nonstandard");
}

inline int candidate_count(MaxFeatures rule, int n_features) {
  double raw = rule == MaxFeatures::sqrt_rule
                   ? std::sqrt(static_cast<double>(n_features))
                   : std::log2(static_cast<double>(n_features));
  int m = static_cast<int>(std::ceil(raw));
  return std::clamp(m, 1, n_features);
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  int n_features;
  int m_candidates;
  int min_samples_split;
  std::mt19937_64& rng;
  DecisionTree tree;
  std::vector<int> feature_pool;

  TreeBuilder(const Eigen::MatrixXd& x_in, const Eigen::VectorXd& y_in, int m, int min_split,
              std::mt19937_64& rng_in)
      : x(x_in),
        y(y_in),
        n_features(static_cast<int>(x_in.cols())),
        m_candidates(m),
        min_samples_split(min_split),
        rng(rng_in) {
    feature_pool.resize(static_cast<std::size_t>(n_features));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
  }

  int build(std::vector<int>& samples) {
    const std::size_t n = samples.size();
    double sum = 0.0;
    for (int s : samples) sum += y(s);
    const double mean = sum / static_cast<double>(n);

    bool pure = true;
    for (int s : samples)
      if (y(s) != y(samples.front())) {
        pure = false;
        break;
      }
    if (pure || n < static_cast<std::size_t>(min_samples_split)) return make_leaf(mean);

    // Seeded candidate subset drawn per split (partial Fisher-Yates).
    for (int i = 0; i < m_candidates; ++i) {
      std::uniform_int_distribution<int> pick(i, n_features - 1);
      std::swap(feature_pool[static_cast<std::size_t>(i)],
                feature_pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> candidates(feature_pool.begin(), feature_pool.begin() + m_candidates);

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_sse = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(n);
    for (int feature : candidates) {
      pairs.clear();
      for (int s : samples) pairs.emplace_back(x(s, feature), y(s));
      std::sort(pairs.begin(), pairs.end());
      if (pairs.front().first == pairs.back().first) continue;  // constant within node
      // Prefix scan over sorted targets; thresholds are midpoints between
      // consecutive distinct feature values.
      double left_sum = 0.0, left_sq = 0.0;
      double total_sum = 0.0, total_sq = 0.0;
      for (const auto& [xv, yv] : pairs) {
        total_sum += yv;
        total_sq += yv * yv;
      }
      for (std::size_t k = 1; k < n; ++k) {
        left_sum += pairs[k - 1].second;
        left_sq += pairs[k - 1].second * pairs[k - 1].second;
        if (pairs[k - 1].first == pairs[k].first) continue;
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) +
                           (right_sq - right_sum * right_sum / nr);
        if (sse < best_sse) {
          best_sse = sse;
          best_feature = feature;
          best_threshold = 0.5 * (pairs[k - 1].first + pairs[k].first);
        }
      }
    }
    if (best_feature < 0) return make_leaf(mean);  // no candidate admits a split

    std::vector<int> left, right;
    for (int s : samples)
      (x(s, best_feature) <= best_threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    const int node_idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(DecisionTree::Node{best_feature, best_threshold, -1, -1, 0.0});
    const int left_idx = build(left);
    const int right_idx = build(right);
    tree.nodes[static_cast<std::size_t>(node_idx)].left = left_idx;
    tree.nodes[static_cast<std::size_t>(node_idx)].right = right_idx;
    return node_idx;
  }

  int make_leaf(double value) {
    tree.nodes.push_back(DecisionTree::Node{-1, 0.0, -1, -1, value});
    return static_cast<int>(tree.nodes.size() - 1);
  }
};

}  // namespace forest_detail

// Grows config.trees unpruned regression trees, each on a bootstrap resample
// of the rows, with a seeded random candidate-feature subset at every split.
// Bit-identical output for identical (x, y, config).
inline ForestModel fit_forest(const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const ForestConfig& config) {
  forest_detail::validate_config(config);
  const Eigen::Index n = x.rows();
  if (n != y.size()) throw std::runtime_error("fit_forest: row count mismatch");
  if (n < 2) throw std::runtime_error("fit_forest needs at least 2 rows");

  const Eigen::MatrixXd xm = x;
  const Eigen::VectorXd ym = y;
  const int m = forest_detail::candidate_count(config.max_features, static_cast<int>(x.cols()));

  ForestModel model;
  model.config = config;
  model.n_features = static_cast<int>(x.cols());
  model.trees.resize(static_cast<std::size_t>(config.trees));
  for (int t = 0; t < config.trees; ++t) {
    std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::vector<int> samples(static_cast<std::size_t>(n));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (auto& s : samples) s = static_cast<int>(pick(rng));
    forest_detail::TreeBuilder builder(xm, ym, m, config.min_samples_split, rng);
    builder.build(samples);
    model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
  }
  return model;
}

// Exact arithmetic mean of the tree outputs, summed in tree order.
inline double predict_forest(const ForestModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.n_features)
    throw std::runtime_error("predict_forest: feature width mismatch");
  double sum = 0.0;
  for (const DecisionTree& tree : model.trees) sum += tree.predict(x);
  return sum / static_cast<double>(model.trees.size());
}

inline Eigen::VectorXd predict_forest_batch(const ForestModel& model,
                                            const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_forest(model, x.row(i).transpose());
  return out;
}

}  // namespace odflow
