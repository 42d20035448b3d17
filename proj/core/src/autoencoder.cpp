#include "hyspec/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"

namespace hyspec::mae {

using nn::Mat;

void AEConfig::validate(std::size_t bands) const {
  std::vector<std::string> bad;
  if (bands == 0) bad.push_back("spectra must have at least one band");
  if (latent_dim == 0) bad.push_back("latent_dim must be positive");
  if (!(learning_rate >= 0.0)) bad.push_back("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad.push_back("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad.push_back("weight_decay must be non-negative");
  if (!(clip_norm >= 0.0)) bad.push_back("clip_norm must be non-negative");
  if (batch_size == 0) bad.push_back("batch_size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    bad.push_back("validation_fraction must lie in [0, 1)");
  }
  if (identity_init && (hidden_dim != 0 || latent_dim != bands)) {
    bad.push_back("identity_init needs hidden_dim 0 and latent_dim equal to the band count");
  }
  if (bad.empty()) return;
  std::string msg = "invalid autoencoder config:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ConfigError(msg);
}

AEModel::AEModel(const AEConfig& config, std::size_t bands) : config_(config), bands_(bands) {
  config_.validate(bands);
  if (config_.hidden_dim == 0) {
    encoder_.push_back(nn::Linear::create(store_, "encoder.0", bands, config_.latent_dim));
    decoder_.push_back(nn::Linear::create(store_, "decoder.0", config_.latent_dim, bands));
  } else {
    encoder_.push_back(nn::Linear::create(store_, "encoder.0", bands, config_.hidden_dim));
    encoder_.push_back(nn::Linear::create(store_, "encoder.1", config_.hidden_dim, config_.latent_dim));
    decoder_.push_back(nn::Linear::create(store_, "decoder.0", config_.latent_dim, config_.hidden_dim));
    decoder_.push_back(nn::Linear::create(store_, "decoder.1", config_.hidden_dim, bands));
  }
  store_.initialize(config_.seed);
  if (config_.identity_init) {
    for (const auto* half : {&encoder_, &decoder_}) {
      store_.value(half->front().weight).setIdentity();
      store_.value(half->front().bias).setZero();
    }
  }
}

namespace {

// Activations of one half; acts[0] is the input.
struct HalfTrace {
  std::vector<Mat> pre;
  std::vector<Mat> acts;
};

Mat run_half(const nn::ParameterStore& s, const std::vector<nn::Linear>& layers, const Mat& x, HalfTrace& tr) {
  tr.acts = {x};
  tr.pre.clear();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    tr.pre.push_back(layers[i].forward(s, tr.acts.back()));
    tr.acts.push_back(i + 1 < layers.size() ? nn::gelu(tr.pre.back()) : tr.pre.back());
  }
  return tr.acts.back();
}

Mat back_half(const nn::ParameterStore& s, const std::vector<nn::Linear>& layers, const HalfTrace& tr, Mat d,
              std::span<double> grad) {
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size()) d = nn::gelu_backward(tr.pre[i], d);
    d = layers[i].backward(s, tr.acts[i], d, grad);
  }
  return d;
}

void check_bands(const AEModel& model, const RowMatrix& spectra) {
  if (spectra.cols() != static_cast<Eigen::Index>(model.bands())) {
    throw SizeError("spectra have " + std::to_string(spectra.cols()) + " bands, autoencoder expects " +
                    std::to_string(model.bands()));
  }
}

RowMatrix gather_rows(const RowMatrix& m, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

RowMatrix ae_encode(const AEModel& model, const RowMatrix& spectra) {
  check_bands(model, spectra);
  HalfTrace tr;
  return run_half(model.parameters(), model.encoder(), spectra, tr);
}

RowMatrix ae_reconstruct(const AEModel& model, const RowMatrix& spectra) {
  HalfTrace tr;
  return run_half(model.parameters(), model.decoder(), ae_encode(model, spectra), tr);
}

Vector ae_embedding(const AEModel& model, std::span<const double> spectrum) {
  const RowMatrix x = Eigen::Map<const RowMatrix>(spectrum.data(), 1, static_cast<Eigen::Index>(spectrum.size()));
  return ae_encode(model, x).row(0).transpose();
}

double ae_loss(const AEModel& model, const RowMatrix& spectra) {
  if (spectra.size() == 0) return 0.0;
  return (ae_reconstruct(model, spectra) - spectra).squaredNorm() / static_cast<double>(spectra.size());
}

double ae_loss_and_gradient(const AEModel& model, const RowMatrix& spectra, std::span<double> grad, double scale) {
  check_bands(model, spectra);
  if (grad.size() != model.parameter_count()) throw SizeError("gradient buffer does not match the model");
  const auto& s = model.parameters();
  HalfTrace enc, dec;
  const Mat z = run_half(s, model.encoder(), spectra, enc);
  const Mat xhat = run_half(s, model.decoder(), z, dec);
  const Mat diff = xhat - spectra;
  const double n = static_cast<double>(spectra.size());
  const Mat dz = back_half(s, model.decoder(), dec, (2.0 * scale / n) * diff, grad);
  back_half(s, model.encoder(), enc, dz, grad);
  return diff.squaredNorm() / n;
}

AETrainResult train_autoencoder(const RowMatrix& spectra, const AEConfig& config) {
  if (spectra.rows() == 0) throw SizeError("autoencoder training needs at least one spectrum");
  if (!nn::all_finite({spectra.data(), static_cast<std::size_t>(spectra.size())})) {
    throw DomainError("training spectra contain non-finite values");
  }
  AEModel model(config, static_cast<std::size_t>(spectra.cols()));
  const auto n = static_cast<std::size_t>(spectra.rows());
  std::mt19937_64 rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = 0;
  const std::span<const std::size_t> all(order);
  const RowMatrix val = gather_rows(spectra, all.first(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const RowMatrix train = gather_rows(spectra, train_idx);

  LossCurve curve;
  auto record = [&](int epoch) {
    const double tl = ae_loss(model, train);
    const double vl = val.rows() > 0 ? ae_loss(model, val) : tl;
    if (!std::isfinite(tl) || !std::isfinite(vl)) {
      throw DivergenceError("autoencoder loss became non-finite in epoch " + std::to_string(epoch), epoch);
    }
    curve.train.push_back(tl);
    curve.validation.push_back(vl);
  };
  record(0);

  nn::Sgd opt(model.parameter_count(),
              {config.learning_rate, config.momentum, config.weight_decay, config.clip_norm});
  std::vector<double> grad(model.parameter_count());
  auto& values = model.parameters().values();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const int e = static_cast<int>(epoch);
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
      const RowMatrix batch = gather_rows(spectra, std::span<const std::size_t>(train_idx).subspan(start, end - start));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = ae_loss_and_gradient(model, batch, grad);
      if (!std::isfinite(loss) || !nn::all_finite(grad)) {
        throw DivergenceError("autoencoder loss became non-finite in epoch " + std::to_string(e), e);
      }
      opt.step(values, grad);
      if (!nn::all_finite(values)) {
        throw DivergenceError("autoencoder parameters became non-finite in epoch " + std::to_string(e), e);
      }
    }
    record(e);
  }
  return {std::move(model), std::move(curve)};
}

}  // namespace hyspec::mae
