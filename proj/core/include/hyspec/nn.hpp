#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hyspec/matrix.hpp"

// Minimal layers with hand-written backward passes. Parameters live in one
// flat array so optimizers, checkpoints and gradient checks see a single
// vector; gradients use the same layout in a separate buffer.
namespace hyspec::nn {

using Mat = RowMatrix;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

struct Param {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
};

enum class Init { kZero, kOne, kXavier, kNormal };

class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Param param;
    Init init;
  };

  Param add(std::string name, std::size_t rows, std::size_t cols, Init init);
  void initialize(std::uint64_t seed);

  std::size_t size() const noexcept { return values_.size(); }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  // Name of the tensor holding flat coordinate `index`.
  const std::string& name_of(std::size_t index) const;

  MatMap value(const Param& p) {
    return {values_.data() + p.offset, static_cast<Eigen::Index>(p.rows), static_cast<Eigen::Index>(p.cols)};
  }
  ConstMatMap value(const Param& p) const {
    return {values_.data() + p.offset, static_cast<Eigen::Index>(p.rows), static_cast<Eigen::Index>(p.cols)};
  }

 private:
  std::vector<double> values_;
  std::vector<Entry> entries_;
};

inline MatMap grad_of(std::span<double> grad, const Param& p) {
  return {grad.data() + p.offset, static_cast<Eigen::Index>(p.rows), static_cast<Eigen::Index>(p.cols)};
}

struct Linear {
  Param weight;  // in x out
  Param bias;    // 1 x out
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out);
  Mat forward(const ParameterStore& store, const Mat& x) const;
  // Accumulates parameter gradients into `grad`, returns dL/dx.
  Mat backward(const ParameterStore& store, const Mat& x, const Mat& dy, std::span<double> grad) const;
};

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

struct LayerNorm {
  static constexpr double kEps = 1e-5;
  Param gamma;
  Param beta;
  std::size_t dim = 0;

  static LayerNorm create(ParameterStore& store, const std::string& name, std::size_t dim);
  Mat forward(const ParameterStore& store, const Mat& x, LayerNormCache& cache) const;
  Mat backward(const ParameterStore& store, const LayerNormCache& cache, const Mat& dy,
               std::span<double> grad) const;
};

// tanh approximation
Mat gelu(const Mat& u);
Mat gelu_backward(const Mat& u, const Mat& dy);

struct AttentionCache {
  Mat x;
  Mat qkv;
  std::size_t seq_len = 0;
  Mat probs;  // (rows * seq_len) x heads
  Mat context;
};

struct Attention {
  Linear qkv;
  Linear out;
  std::size_t dim = 0;
  std::size_t heads = 1;

  static Attention create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads);
  // Rows of `x` are consecutive sequences of `seq_len` tokens (0: one
  // sequence); attention never crosses a sequence boundary.
  Mat forward(const ParameterStore& store, const Mat& x, AttentionCache& cache, std::size_t seq_len = 0) const;
  Mat backward(const ParameterStore& store, const AttentionCache& cache, const Mat& dy,
               std::span<double> grad) const;
};

struct BlockCache {
  LayerNormCache ln1;
  Mat h1;
  AttentionCache attn;
  Mat x1;
  LayerNormCache ln2;
  Mat h2;
  Mat u;
  Mat gu;
};

// Pre-norm transformer block: x + attn(ln1(x)), then + fc2(gelu(fc1(ln2(.)))).
struct Block {
  LayerNorm ln1;
  Attention attn;
  LayerNorm ln2;
  Linear fc1;
  Linear fc2;

  static Block create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads,
                      std::size_t hidden);
  Mat forward(const ParameterStore& store, const Mat& x, BlockCache& cache, std::size_t seq_len = 0) const;
  Mat backward(const ParameterStore& store, const BlockCache& cache, const Mat& dy, std::span<double> grad) const;
};

// Rows are positions, sin on even columns and cos on odd ones.
Mat sinusoidal_encoding(std::size_t positions, std::size_t dim);

struct SgdOptions {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

class Sgd {
 public:
  Sgd(std::size_t size, SgdOptions options);
  // Applies one update in place. `grad` is modified (decay, clipping).
  void step(std::vector<double>& values, std::vector<double>& grad);

 private:
  SgdOptions options_;
  std::vector<double> velocity_;
};

bool all_finite(std::span<const double> values);

// FNV-1a over the raw little-endian bytes of the values.
std::string checksum(std::span<const double> values);

}  // namespace hyspec::nn
