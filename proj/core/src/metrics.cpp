#include "hyspec/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"

namespace hyspec::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw SizeError("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_labels(std::span<const int> truth, std::span<const int> predicted,
                                             std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw SizeError("label vectors differ in length: " + std::to_string(truth.size()) + " vs " +
                    std::to_string(predicted.size()));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

std::size_t ConfusionMatrix::index(int truth, int predicted) const {
  const auto c = static_cast<int>(classes_);
  if (truth < 1 || truth > c || predicted < 1 || predicted > c) {
    throw SizeError("label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) + ") outside 1.." +
                    std::to_string(classes_));
  }
  return static_cast<std::size_t>(truth - 1) * classes_ + static_cast<std::size_t>(predicted - 1);
}

void ConfusionMatrix::add(int truth, int predicted, std::size_t count) {
  counts_[index(truth, predicted)] += count;
  total_ += count;
}

std::size_t ConfusionMatrix::at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }

std::size_t ConfusionMatrix::support(int label) const {
  std::size_t s = 0;
  for (std::size_t p = 1; p <= classes_; ++p) s += at(label, static_cast<int>(p));
  return s;
}

std::size_t ConfusionMatrix::predictions(int label) const {
  std::size_t s = 0;
  for (std::size_t t = 1; t <= classes_; ++t) s += at(static_cast<int>(t), label);
  return s;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t s = 0;
  for (std::size_t k = 1; k <= classes_; ++k) s += at(static_cast<int>(k), static_cast<int>(k));
  return s;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DomainError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.correct()) / static_cast<double>(cm.total());
}

F1Report f1_report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DomainError("F1 of an empty confusion matrix");
  F1Report r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 1; k <= cm.classes(); ++k) {
    const int label = static_cast<int>(k);
    ClassScore s;
    s.label = label;
    s.support = cm.support(label);
    const std::size_t tp = cm.at(label, label);
    const std::size_t pred = cm.predictions(label);
    s.precision = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
    s.recall = s.support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(s.support);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    if (s.support == 0) {
      ++r.excluded_classes;
    } else {
      sum += s.f1;
      ++used;
    }
    r.per_class.push_back(s);
  }
  r.macro_f1 = sum / static_cast<double>(used);
  return r;
}

double macro_f1(const ConfusionMatrix& cm) { return f1_report(cm).macro_f1; }

double imbalance_ratio(std::span<const std::size_t> counts) {
  if (counts.empty()) throw DomainError("imbalance ratio of an empty histogram");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) {
    throw DomainError("imbalance ratio undefined: class " + std::to_string(lo - counts.begin() + 1) +
                      " has no samples");
  }
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

LongTailReport long_tail_report(std::span<const std::size_t> counts) {
  if (counts.empty()) throw DomainError("long-tail report of an empty histogram");
  LongTailReport r;
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  double running = 0.0;
  for (std::size_t i : order) {
    r.sorted_counts.push_back(counts[i]);
    r.sorted_labels.push_back(static_cast<int>(i) + 1);
    running += static_cast<double>(counts[i]);
    r.cumulative_share.push_back(total > 0.0 ? running / total : 0.0);
  }
  r.top1_share = r.cumulative_share.front();
  return r;
}

std::string report_json(const ConfusionMatrix& cm) {
  const F1Report f1 = f1_report(cm);
  nlohmann::ordered_json doc;
  doc["oa"] = overall_accuracy(cm);
  doc["macro_f1"] = f1.macro_f1;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  std::vector<std::size_t> supported;
  std::vector<std::size_t> histogram;
  for (const auto& s : f1.per_class) {
    per[std::to_string(s.label)] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    histogram.push_back(s.support);
    if (s.support > 0) supported.push_back(s.support);
  }
  doc["per_class"] = std::move(per);
  doc["imbalance_ratio"] = imbalance_ratio(supported);
  doc["sorted_counts"] = long_tail_report(histogram).sorted_counts;
  doc["zero_support_excluded"] = f1.excluded_classes;
  return doc.dump(2) + "\n";
}

}  // namespace hyspec::metrics
