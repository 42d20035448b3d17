#pragma once

#include <cstddef>
#include <vector>

#include "hyspec/matrix.hpp"
#include "hyspec/split.hpp"

namespace hyspec::clf {

struct LabeledSet {
  RowMatrix features;       // N x D
  std::vector<int> labels;  // 1..c
  split::SetId tag = split::SetId::kTrain;

  std::size_t size() const noexcept { return labels.size(); }
  int max_label() const;
  // Throws SizeError on shape mismatch, DomainError on a non-finite feature
  // or a label below 1.
  void validate() const;
};

// Brute-force Euclidean neighbours; distance ties go to the lower training
// index, vote ties to the smallest class id. Throws FitError on an empty
// training set and SizeError when k is 0 or exceeds the training size.
std::vector<int> knn_fit_predict(const LabeledSet& train, const RowMatrix& query, std::size_t k = 5);

}  // namespace hyspec::clf
