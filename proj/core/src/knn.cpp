#include "hyspec/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hyspec/error.hpp"

namespace hyspec::clf {

int LabeledSet::max_label() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

void LabeledSet::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw SizeError("labeled set has " + std::to_string(features.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  if (!features.allFinite()) throw DomainError("labeled set contains non-finite features");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1) throw DomainError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i));
  }
}

std::vector<int> knn_fit_predict(const LabeledSet& train, const RowMatrix& query, std::size_t k) {
  if (train.size() == 0) throw FitError("KNN needs a non-empty training set");
  train.validate();
  if (k == 0 || k > train.size()) {
    throw SizeError("k=" + std::to_string(k) + " outside 1.." + std::to_string(train.size()));
  }
  if (query.cols() != train.features.cols()) {
    throw SizeError("query has " + std::to_string(query.cols()) + " features, training set " +
                    std::to_string(train.features.cols()));
  }
  const std::size_t n = train.size();
  const std::size_t classes = static_cast<std::size_t>(train.max_label());
  std::vector<int> out(static_cast<std::size_t>(query.rows()));
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<std::size_t> votes(classes + 1);
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    const Eigen::VectorXd d2 = (train.features.rowwise() - query.row(q)).rowwise().squaredNorm();
    for (std::size_t i = 0; i < n; ++i) dist[i] = {d2[static_cast<Eigen::Index>(i)], i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train.labels[dist[j].second])];
    // max_element returns the first maximum, i.e. the smallest class id
    out[static_cast<std::size_t>(q)] = static_cast<int>(std::max_element(votes.begin() + 1, votes.end()) - votes.begin());
  }
  return out;
}

}  // namespace hyspec::clf
