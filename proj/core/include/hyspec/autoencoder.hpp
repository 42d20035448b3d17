#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyspec/mae.hpp"

namespace hyspec::mae {

struct AEConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden_dim = 64;  // 0: single linear layer each way
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  // Identity weights and zero biases; needs hidden_dim 0 and latent_dim == B.
  bool identity_init = false;

  void validate(std::size_t bands) const;
};

class AEModel {
 public:
  AEModel(const AEConfig& config, std::size_t bands);

  const AEConfig& config() const noexcept { return config_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t latent_dim() const noexcept { return config_.latent_dim; }
  std::size_t parameter_count() const noexcept { return store_.size(); }
  nn::ParameterStore& parameters() noexcept { return store_; }
  const nn::ParameterStore& parameters() const noexcept { return store_; }

  // Dense layers, GELU between consecutive ones inside each half.
  const std::vector<nn::Linear>& encoder() const noexcept { return encoder_; }
  const std::vector<nn::Linear>& decoder() const noexcept { return decoder_; }

 private:
  AEConfig config_;
  std::size_t bands_;
  nn::ParameterStore store_;
  std::vector<nn::Linear> encoder_;
  std::vector<nn::Linear> decoder_;
};

RowMatrix ae_encode(const AEModel& model, const RowMatrix& spectra);
RowMatrix ae_reconstruct(const AEModel& model, const RowMatrix& spectra);
Vector ae_embedding(const AEModel& model, std::span<const double> spectrum);

// Mean squared reconstruction error over all entries.
double ae_loss(const AEModel& model, const RowMatrix& spectra);
double ae_loss_and_gradient(const AEModel& model, const RowMatrix& spectra, std::span<double> grad,
                            double scale = 1.0);

struct AETrainResult {
  AEModel model;
  LossCurve curve;
};

// Same curve and divergence contract as train_mae.
AETrainResult train_autoencoder(const RowMatrix& spectra, const AEConfig& config);

}  // namespace hyspec::mae
