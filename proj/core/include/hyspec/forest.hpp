#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyspec/knn.hpp"
#include "hyspec/matrix.hpp"

namespace hyspec::clf {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::uint64_t seed = 0;
  std::size_t max_features = 0;       // 0 -> floor(sqrt(D)), at least 1
  std::size_t min_samples_split = 2;  // nodes smaller than this become leaves
  std::size_t max_depth = 0;          // 0 -> unlimited
  bool bootstrap = true;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::vector<std::size_t> histogram;  // index 0 unused, counts include bootstrap repeats
  std::size_t samples = 0;
  int label = 0;  // majority, ties to the smallest class id
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0

  int predict(const double* row) const;
  std::size_t depth() const;
};

struct ForestModel {
  ForestConfig config;
  std::size_t features = 0;
  std::size_t feature_subsample = 0;
  std::size_t classes = 0;
  std::vector<DecisionTree> trees;

  // Hex digest of every node; equal digests mean identical forests.
  std::string fingerprint() const;
};

// Throws FitError when fewer than two classes are present.
ForestModel rf_fit(const LabeledSet& train, const ForestConfig& config);
// Majority over trees, ties to the smallest class id.
std::vector<int> rf_predict(const ForestModel& model, const RowMatrix& features);

}  // namespace hyspec::clf
