#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyspec/matrix.hpp"
#include "hyspec/nn.hpp"

namespace hyspec::mae {

struct MAEConfig {
  std::size_t token_len = 10;
  std::size_t embed_dim = 32;
  std::size_t n_heads = 32;
  std::size_t encoder_depth = 2;
  std::size_t decoder_depth = 1;
  std::size_t decoder_dim = 32;
  std::size_t decoder_heads = 4;
  std::size_t mlp_ratio = 2;
  double mask_ratio = 0.7;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double validation_fraction = 0.1;
  std::size_t eval_samples = 512;  // training spectra scored per epoch
  std::uint64_t seed = 0;

  std::size_t token_count(std::size_t bands) const;
  // Throws ConfigError naming every violated field.
  void validate(std::size_t bands) const;
};

struct TokenSequence {
  std::size_t bands = 0;
  std::size_t token_len = 0;
  RowMatrix tokens;                 // T x token_len, tail of the last row zero
  std::vector<std::size_t> masked;  // ascending
  std::vector<std::size_t> visible; // encoder order

  std::size_t token_count() const noexcept { return static_cast<std::size_t>(tokens.rows()); }
  // Real (non-padding) channels of token t.
  std::size_t valid_channels(std::size_t t) const;
  bool is_padding(std::size_t t, std::size_t channel) const { return channel >= valid_channels(t); }
};

// Unmasked: every token visible in position order.
TokenSequence tokenize(std::span<const double> spectrum, std::size_t token_len);
std::vector<double> detokenize(const TokenSequence& seq);

// round(rho * T) clamped to [1, T - 1].
std::size_t mask_count(std::size_t token_count, double rho);
TokenSequence random_mask(TokenSequence seq, double rho, std::uint64_t seed);

class MAEModel {
 public:
  MAEModel(const MAEConfig& config, std::size_t bands);

  const MAEConfig& config() const noexcept { return config_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t token_count() const noexcept { return tokens_; }
  std::size_t parameter_count() const noexcept { return store_.size(); }
  nn::ParameterStore& parameters() noexcept { return store_; }
  const nn::ParameterStore& parameters() const noexcept { return store_; }

  struct Layers {
    nn::Linear embed;
    nn::Param cls;
    std::vector<nn::Block> encoder;
    nn::LayerNorm encoder_norm;
    nn::Linear decoder_embed;
    nn::Param mask_token;
    std::vector<nn::Block> decoder;
    nn::LayerNorm decoder_norm;
    nn::Linear head;
  };
  const Layers& layers() const noexcept { return layers_; }
  const nn::Mat& encoder_positions() const noexcept { return pe_encoder_; }
  const nn::Mat& decoder_positions() const noexcept { return pe_decoder_; }

 private:
  MAEConfig config_;
  std::size_t bands_;
  std::size_t tokens_;
  nn::ParameterStore store_;
  Layers layers_;
  nn::Mat pe_encoder_;
  nn::Mat pe_decoder_;
};

struct EncoderOutput {
  Vector cls;
  RowMatrix tokens;                   // one row per visible token, in seq.visible order
  std::vector<std::size_t> positions; // copy of seq.visible
};

// Runs only [CLS] and the visible tokens through the encoder.
EncoderOutput encode(const MAEModel& model, const TokenSequence& seq);

struct Reconstruction {
  RowMatrix tokens;  // T x token_len
  double loss = 0.0;
};

Reconstruction decode_and_loss(const MAEModel& model, const TokenSequence& seq, const EncoderOutput& encoded);

// Mean squared error over masked, non-padding channels.
double masked_mse(const TokenSequence& target, const RowMatrix& prediction);

// Full forward and backward pass. Adds scale * dLoss/dtheta into `grad` and
// returns the unscaled loss.
double loss_and_gradient(const MAEModel& model, const TokenSequence& seq, std::span<double> grad,
                         double scale = 1.0);

// Same over several sequences; returns the sum of their losses. An empty
// `grad` skips the backward pass.
double batch_loss_and_gradient(const MAEModel& model, std::span<const TokenSequence> seqs, std::span<double> grad,
                               double scale = 1.0);

// [CLS] output with every token visible.
Vector cls_embedding(const MAEModel& model, std::span<const double> spectrum);
RowMatrix cls_embeddings(const MAEModel& model, const RowMatrix& spectra);

// Entry 0 is the untrained model, entry e the model after epoch e.
struct LossCurve {
  std::vector<double> train;
  std::vector<double> validation;
};

struct MAETrainResult {
  MAEModel model;
  LossCurve curve;
};

// Throws DivergenceError on a non-finite loss or parameter.
MAETrainResult train_mae(const RowMatrix& spectra, const MAEConfig& config);

// Mean masked loss with masks drawn deterministically from `seed`.
double evaluate_loss(const MAEModel& model, const RowMatrix& spectra, std::uint64_t seed);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_name;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences (step 1e-5) on `coordinates` random parameters; all of
// them when the model is smaller. Throws GradientCheckFailure above
// `tolerance`. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const MAEModel& model, const RowMatrix& batch, double tolerance,
                                   std::uint64_t seed, std::size_t coordinates = 200);

}  // namespace hyspec::mae
