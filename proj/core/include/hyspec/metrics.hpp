#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hyspec::metrics {

// Rows are true classes, columns predicted classes; labels run 1..c.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  // Throws SizeError on length mismatch or a label outside 1..classes.
  static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> predicted,
                                     std::size_t classes);

  void add(int truth, int predicted, std::size_t count = 1);
  std::size_t at(int truth, int predicted) const;
  std::size_t classes() const noexcept { return classes_; }
  std::size_t total() const noexcept { return total_; }
  std::size_t support(int label) const;     // row sum
  std::size_t predictions(int label) const; // column sum
  std::size_t correct() const;              // trace

 private:
  std::size_t index(int truth, int predicted) const;
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

// trace / total. Throws DomainError on an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);

struct ClassScore {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Report {
  double macro_f1 = 0.0;
  std::vector<ClassScore> per_class;  // every class, including zero-support ones
  std::size_t excluded_classes = 0;   // zero support, left out of the mean
};

// Unmeaned F1 over classes with support; 0/0 precision or recall counts as 0.
// Throws DomainError on an empty matrix.
F1Report f1_report(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

// max / min. Throws DomainError on an empty histogram or a zero count.
double imbalance_ratio(std::span<const std::size_t> counts);

struct LongTailReport {
  std::vector<std::size_t> sorted_counts;  // descending
  std::vector<int> sorted_labels;          // 1-based, ties by label
  std::vector<double> cumulative_share;
  double top1_share = 0.0;
};

LongTailReport long_tail_report(std::span<const std::size_t> counts);

// {oa, macro_f1, per_class: {"<label>": {precision, recall, f1, support}},
//  imbalance_ratio, sorted_counts, zero_support_excluded}
std::string report_json(const ConfusionMatrix& cm);

}  // namespace hyspec::metrics
