#include "hyspec/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"

namespace hyspec::clf {

void ForestConfig::validate() const {
  std::string problems;
  if (n_trees == 0) problems += " n_trees must be >= 1;";
  if (min_samples_split < 2) problems += " min_samples_split must be >= 2;";
  if (!problems.empty()) throw ConfigError("invalid forest config:" + problems);
}

int DecisionTree::predict(const double* row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].label;
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature >= 0) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

std::string ForestModel::fingerprint() const {
  Fnv1a h;
  for (const auto& tree : trees) {
    for (const auto& n : tree.nodes) {
      h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.feature)));
      h.add(std::bit_cast<std::uint64_t>(n.threshold));
      h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.left)));
      h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.right)));
      h.add(static_cast<std::uint64_t>(n.label));
      for (std::size_t c : n.histogram) h.add(static_cast<std::uint64_t>(c));
    }
  }
  return h.hex();
}

namespace {

int majority(const std::vector<std::size_t>& hist) {
  return static_cast<int>(std::max_element(hist.begin() + 1, hist.end()) - hist.begin());
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of sum(count^2) / n; larger is purer
};

class TreeBuilder {
 public:
  TreeBuilder(const LabeledSet& data, const ForestConfig& config, std::size_t classes, std::size_t subsample,
              std::uint64_t seed)
      : data_(data), config_(config), classes_(classes), subsample_(subsample), rng_(seed) {}

  DecisionTree build() {
    const std::size_t n = data_.size();
    std::vector<std::size_t> samples(n);
    if (config_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : samples) s = pick(rng_);
      std::sort(samples.begin(), samples.end());
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    DecisionTree tree;
    struct Pending {
      int node;
      std::size_t begin, end, depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, n, 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      std::vector<std::size_t> hist(classes_ + 1, 0);
      for (std::size_t i = p.begin; i < p.end; ++i) ++hist[label(samples[i])];
      {
        TreeNode& node = tree.nodes[static_cast<std::size_t>(p.node)];
        node.samples = p.end - p.begin;
        node.label = majority(hist);
        node.histogram = hist;
      }
      const std::size_t count = p.end - p.begin;
      const bool pure = hist[static_cast<std::size_t>(majority(hist))] == count;
      const bool too_deep = config_.max_depth > 0 && p.depth >= config_.max_depth;
      if (pure || count < config_.min_samples_split || too_deep) continue;
      const Split s = best_split(samples, p.begin, p.end, hist);
      if (s.feature < 0) continue;
      const auto mid = std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                             samples.begin() + static_cast<std::ptrdiff_t>(p.end),
                                             [&](std::size_t i) { return value(i, s.feature) <= s.threshold; });
      const std::size_t m = static_cast<std::size_t>(mid - samples.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(p.node)];
      node.feature = s.feature;
      node.threshold = s.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, m, p.end, p.depth + 1});
      stack.push_back({left, p.begin, m, p.depth + 1});
    }
    return tree;
  }

 private:
  std::size_t label(std::size_t i) const { return static_cast<std::size_t>(data_.labels[i]); }
  double value(std::size_t i, int f) const { return data_.features(static_cast<Eigen::Index>(i), f); }

  // Draws features without replacement until `subsample_` non-constant ones
  // have been scored or none remain.
  Split best_split(const std::vector<std::size_t>& samples, std::size_t begin, std::size_t end,
                   const std::vector<std::size_t>& parent) {
    const std::size_t d = static_cast<std::size_t>(data_.features.cols());
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    Split best;
    std::size_t scored = 0;
    std::vector<std::pair<double, std::size_t>> column(end - begin);
    std::vector<std::size_t> left(classes_ + 1);
    std::vector<std::size_t> right(classes_ + 1);
    for (std::size_t k = 0; k < d && scored < subsample_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, d - 1);
      std::swap(order[k], order[pick(rng_)]);
      const int f = order[k];
      for (std::size_t i = begin; i < end; ++i) column[i - begin] = {value(samples[i], f), label(samples[i])};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++scored;
      std::fill(left.begin(), left.end(), 0);
      right = parent;
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (std::size_t c = 1; c <= classes_; ++c) right_sq += static_cast<double>(parent[c] * parent[c]);
      const std::size_t n = column.size();
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t c = column[i].second;
        left_sq += static_cast<double>(2 * left[c] + 1);
        right_sq -= static_cast<double>(2 * right[c] - 1);
        ++left[c];
        --right[c];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double score = left_sq / nl + right_sq / nr;
        if (score > best.score) {
          best.score = score;
          best.feature = f;
          const double a = column[i].first;
          const double b = column[i + 1].first;
          const double midpoint = a + (b - a) / 2.0;
          best.threshold = midpoint < b ? midpoint : a;
        }
      }
    }
    return best;
  }

  const LabeledSet& data_;
  const ForestConfig& config_;
  std::size_t classes_;
  std::size_t subsample_;
  std::mt19937_64 rng_;
};

}  // namespace

ForestModel rf_fit(const LabeledSet& train, const ForestConfig& config) {
  config.validate();
  if (train.size() == 0) throw FitError("random forest needs a non-empty training set");
  train.validate();
  const std::size_t classes = static_cast<std::size_t>(train.max_label());
  std::vector<bool> present(classes + 1, false);
  for (int l : train.labels) present[static_cast<std::size_t>(l)] = true;
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw FitError("random forest needs at least two classes in the training set");
  }
  ForestModel model;
  model.config = config;
  model.features = static_cast<std::size_t>(train.features.cols());
  model.classes = classes;
  model.feature_subsample =
      config.max_features > 0
          ? std::min(config.max_features, model.features)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(model.features)))));
  model.trees.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    TreeBuilder builder(train, config, classes, model.feature_subsample, mix_seed(config.seed, t));
    model.trees.push_back(builder.build());
  }
  return model;
}

std::vector<int> rf_predict(const ForestModel& model, const RowMatrix& features) {
  if (static_cast<std::size_t>(features.cols()) != model.features) {
    throw SizeError("forest expects " + std::to_string(model.features) + " features, got " +
                    std::to_string(features.cols()));
  }
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  std::vector<std::size_t> votes(model.classes + 1);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    const double* row = features.row(r).data();
    for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree.predict(row))];
    out[static_cast<std::size_t>(r)] = majority(votes);
  }
  return out;
}

}  // namespace hyspec::clf
