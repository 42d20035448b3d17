#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hyspec/autoencoder.hpp"
#include "hyspec/knn.hpp"
#include "hyspec/mae.hpp"
#include "hyspec/matrix.hpp"

namespace hyspec::clf {

// Frozen map from spectra to features. transform never changes the weights.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual RowMatrix transform(const RowMatrix& x) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual std::string weights_checksum() const = 0;
  virtual std::string name() const = 0;
};

class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(std::size_t dim) : dim_(dim) {}
  RowMatrix transform(const RowMatrix& x) const override;
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return dim_; }
  std::string weights_checksum() const override;
  std::string name() const override { return "identity"; }

 private:
  std::size_t dim_;
};

enum class RandomKind { kDense, kConvolutional };

// Randomly initialized network, weights drawn once from U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)) and never updated. Dense: two ReLU layers of `width`.
// Convolutional: two ReLU 1-D convolutions (kernel 7, stride 2, `width`
// channels, no padding) and global average pooling.
class RandomExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kKernel = 7;
  static constexpr std::size_t kStride = 2;

  RandomExtractor(RandomKind kind, std::size_t input_dim, std::uint64_t seed, std::size_t width = 64);

  RowMatrix transform(const RowMatrix& x) const override;
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t output_dim() const override { return width_; }
  std::string weights_checksum() const override;
  std::string name() const override;
  RandomKind kind() const noexcept { return kind_; }

 private:
  RandomKind kind_;
  std::size_t input_dim_;
  std::size_t width_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

// [CLS] embedding of a trained MAE. Keeps a reference; the model must outlive it.
class MaeExtractor final : public FeatureExtractor {
 public:
  explicit MaeExtractor(const mae::MAEModel& model) : model_(model) {}
  RowMatrix transform(const RowMatrix& x) const override;
  std::size_t input_dim() const override { return model_.bands(); }
  std::size_t output_dim() const override { return model_.config().embed_dim; }
  std::string weights_checksum() const override;
  std::string name() const override { return "mae"; }

 private:
  const mae::MAEModel& model_;
};

class AeExtractor final : public FeatureExtractor {
 public:
  explicit AeExtractor(const mae::AEModel& model) : model_(model) {}
  RowMatrix transform(const RowMatrix& x) const override;
  std::size_t input_dim() const override { return model_.bands(); }
  std::size_t output_dim() const override { return model_.latent_dim(); }
  std::string weights_checksum() const override;
  std::string name() const override { return "ae"; }

 private:
  const mae::AEModel& model_;
};

struct ProbeConfig {
  std::size_t hidden = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<int> predictions;
  std::vector<double> train_loss;  // mean cross-entropy per epoch
  std::string checksum_before;
  std::string checksum_after;
};

// Trains a one-hidden-layer GELU classifier with softmax cross-entropy on
// standardized extractor outputs and scores it on `eval`. Throws
// DivergenceError on non-finite activations or loss.
ProbeResult mlp_probe(const LabeledSet& train, const LabeledSet& eval, const FeatureExtractor& extractor,
                      const ProbeConfig& config);

struct ChanceEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t trials = 0;
};

// Macro-F1 of a classifier predicting uniformly over 1..classes, by Monte
// Carlo over `trials` labelings of a test set with `histogram[k - 1]`
// samples of class k. Throws DomainError on an empty histogram.
ChanceEstimate chance_f1_oracle(std::span<const std::size_t> histogram, std::size_t classes, std::size_t trials,
                                std::uint64_t seed);

}  // namespace hyspec::clf
