#include "hyspec/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"

namespace hyspec::mae {

using nn::Mat;

std::size_t MAEConfig::token_count(std::size_t bands) const {
  return token_len == 0 ? 0 : (bands + token_len - 1) / token_len;
}

void MAEConfig::validate(std::size_t bands) const {
  std::vector<std::string> bad;
  if (token_len == 0) bad.push_back("token_len must be positive");
  if (token_count(bands) < 2) bad.push_back("token count ceil(B / token_len) must be at least 2");
  if (embed_dim == 0 || n_heads == 0 || embed_dim % n_heads != 0) bad.push_back("embed_dim must be divisible by n_heads");
  if (decoder_dim == 0 || decoder_heads == 0 || decoder_dim % decoder_heads != 0) {
    bad.push_back("decoder_dim must be divisible by decoder_heads");
  }
  if (encoder_depth == 0) bad.push_back("encoder_depth must be positive");
  if (decoder_depth == 0) bad.push_back("decoder_depth must be positive");
  if (mlp_ratio == 0) bad.push_back("mlp_ratio must be positive");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) bad.push_back("mask_ratio must lie in (0, 1)");
  if (!(learning_rate >= 0.0)) bad.push_back("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad.push_back("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad.push_back("weight_decay must be non-negative");
  if (!(clip_norm >= 0.0)) bad.push_back("clip_norm must be non-negative");
  if (batch_size == 0) bad.push_back("batch_size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    bad.push_back("validation_fraction must lie in [0, 1)");
  }
  if (bad.empty()) return;
  std::string msg = "invalid MAE config:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ConfigError(msg);
}

std::size_t TokenSequence::valid_channels(std::size_t t) const {
  const std::size_t start = t * token_len;
  return start >= bands ? 0 : std::min(token_len, bands - start);
}

TokenSequence tokenize(std::span<const double> spectrum, std::size_t token_len) {
  if (token_len == 0) throw ConfigError("token_len must be positive");
  if (spectrum.size() < token_len) {
    throw SizeError("spectrum of " + std::to_string(spectrum.size()) + " bands is shorter than one token (" +
                    std::to_string(token_len) + ")");
  }
  TokenSequence seq;
  seq.bands = spectrum.size();
  seq.token_len = token_len;
  const std::size_t t = (spectrum.size() + token_len - 1) / token_len;
  seq.tokens = RowMatrix::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(token_len));
  std::copy(spectrum.begin(), spectrum.end(), seq.tokens.data());
  seq.visible.resize(t);
  std::iota(seq.visible.begin(), seq.visible.end(), 0);
  return seq;
}

std::vector<double> detokenize(const TokenSequence& seq) {
  return {seq.tokens.data(), seq.tokens.data() + seq.bands};
}

std::size_t mask_count(std::size_t token_count, double rho) {
  if (token_count < 2) throw SizeError("masking needs at least two tokens");
  const auto m = static_cast<std::size_t>(std::max(0L, std::lround(rho * static_cast<double>(token_count))));
  return std::clamp<std::size_t>(m, 1, token_count - 1);
}

TokenSequence random_mask(TokenSequence seq, double rho, std::uint64_t seed) {
  const std::size_t t = seq.token_count();
  const std::size_t m = mask_count(t, rho);
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first m entries are a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, t - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  seq.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  seq.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
  std::sort(seq.masked.begin(), seq.masked.end());
  std::sort(seq.visible.begin(), seq.visible.end());
  return seq;
}

MAEModel::MAEModel(const MAEConfig& config, std::size_t bands)
    : config_(config), bands_(bands), tokens_(config.token_count(bands)) {
  config_.validate(bands);
  const std::size_t d = config_.embed_dim, dd = config_.decoder_dim;
  layers_.embed = nn::Linear::create(store_, "embed", config_.token_len, d);
  layers_.cls = store_.add("cls_token", 1, d, nn::Init::kNormal);
  for (std::size_t i = 0; i < config_.encoder_depth; ++i) {
    layers_.encoder.push_back(
        nn::Block::create(store_, "encoder." + std::to_string(i), d, config_.n_heads, config_.mlp_ratio * d));
  }
  layers_.encoder_norm = nn::LayerNorm::create(store_, "encoder_norm", d);
  layers_.decoder_embed = nn::Linear::create(store_, "decoder_embed", d, dd);
  layers_.mask_token = store_.add("mask_token", 1, dd, nn::Init::kNormal);
  for (std::size_t i = 0; i < config_.decoder_depth; ++i) {
    layers_.decoder.push_back(nn::Block::create(store_, "decoder." + std::to_string(i), dd, config_.decoder_heads,
                                                config_.mlp_ratio * dd));
  }
  layers_.decoder_norm = nn::LayerNorm::create(store_, "decoder_norm", dd);
  layers_.head = nn::Linear::create(store_, "head", dd, config_.token_len);
  store_.initialize(config_.seed);
  pe_encoder_ = nn::sinusoidal_encoding(tokens_, d);
  pe_decoder_ = nn::sinusoidal_encoding(tokens_, dd);
}

namespace {

// Forward state for a batch of sequences that share a token count and a
// visible count, stacked row-wise.
struct Trace {
  std::size_t batch = 0;
  std::size_t enc_len = 0;  // 1 + visible
  Mat embed_in;
  std::vector<nn::BlockCache> encoder;
  nn::LayerNormCache encoder_ln;
  Mat z;
  std::vector<nn::BlockCache> decoder;
  nn::LayerNormCache decoder_ln;
  Mat w;
  Mat pred;  // batch * (T + 1) rows; row 0 of each sequence is the [CLS] slot
};

void check_sequence(const MAEModel& model, const TokenSequence& seq) {
  if (seq.token_len != model.config().token_len || seq.token_count() != model.token_count() ||
      seq.bands != model.bands()) {
    throw ConfigError("token sequence (" + std::to_string(seq.token_count()) + " x " +
                      std::to_string(seq.token_len) + ") does not match the model (" +
                      std::to_string(model.token_count()) + " x " + std::to_string(model.config().token_len) + ")");
  }
  if (seq.visible.empty()) throw ConfigError("token sequence has no visible token");
  for (std::size_t p : seq.visible) {
    if (p >= seq.token_count()) throw ConfigError("visible token index out of range");
  }
}

using SeqRef = const TokenSequence*;

const Mat& run_encoder(const MAEModel& model, std::span<const SeqRef> seqs, Trace& tr) {
  const auto& s = model.parameters();
  const auto& l = model.layers();
  const std::size_t nv = seqs.front()->visible.size();
  const auto tl = static_cast<Eigen::Index>(model.config().token_len);
  tr.batch = seqs.size();
  tr.enc_len = nv + 1;
  tr.embed_in.resize(static_cast<Eigen::Index>(seqs.size() * nv), tl);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const TokenSequence& seq = *seqs[b];
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t p = seq.visible[j];
      const auto r = static_cast<Eigen::Index>(b * nv + j);
      tr.embed_in.row(r) = seq.tokens.row(static_cast<Eigen::Index>(p));
      for (std::size_t c = seq.valid_channels(p); c < seq.token_len; ++c) tr.embed_in(r, static_cast<Eigen::Index>(c)) = 0.0;
    }
  }
  const Mat e = l.embed.forward(s, tr.embed_in);
  Mat x(static_cast<Eigen::Index>(seqs.size() * tr.enc_len), e.cols());
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto base = static_cast<Eigen::Index>(b * tr.enc_len);
    x.row(base) = s.value(l.cls).row(0);
    for (std::size_t j = 0; j < nv; ++j) {
      x.row(base + 1 + static_cast<Eigen::Index>(j)) =
          e.row(static_cast<Eigen::Index>(b * nv + j)) +
          model.encoder_positions().row(static_cast<Eigen::Index>(seqs[b]->visible[j]));
    }
  }
  tr.encoder.resize(l.encoder.size());
  for (std::size_t i = 0; i < l.encoder.size(); ++i) x = l.encoder[i].forward(s, x, tr.encoder[i], tr.enc_len);
  tr.z = l.encoder_norm.forward(s, x, tr.encoder_ln);
  return tr.z;
}

// `z` stacks, per sequence, the [CLS] row and one row per visible token in
// `visible` order.
const Mat& run_decoder(const MAEModel& model, const Mat& z, std::span<const SeqRef> seqs, Trace& tr) {
  const auto& s = model.parameters();
  const auto& l = model.layers();
  const auto t = static_cast<Eigen::Index>(model.token_count());
  const auto el = static_cast<Eigen::Index>(tr.enc_len);
  const Mat d0 = l.decoder_embed.forward(s, z);
  Mat y(static_cast<Eigen::Index>(seqs.size()) * (t + 1), d0.cols());
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto base = static_cast<Eigen::Index>(b) * (t + 1);
    const auto zb = static_cast<Eigen::Index>(b) * el;
    y.row(base) = d0.row(zb);
    for (Eigen::Index p = 0; p < t; ++p) {
      y.row(base + 1 + p) = s.value(l.mask_token).row(0) + model.decoder_positions().row(p);
    }
    const auto& vis = seqs[b]->visible;
    for (std::size_t j = 0; j < vis.size(); ++j) {
      const auto p = static_cast<Eigen::Index>(vis[j]);
      y.row(base + 1 + p) = d0.row(zb + 1 + static_cast<Eigen::Index>(j)) + model.decoder_positions().row(p);
    }
  }
  tr.decoder.resize(l.decoder.size());
  for (std::size_t i = 0; i < l.decoder.size(); ++i) {
    y = l.decoder[i].forward(s, y, tr.decoder[i], static_cast<std::size_t>(t + 1));
  }
  tr.w = l.decoder_norm.forward(s, y, tr.decoder_ln);
  tr.pred = l.head.forward(s, tr.w);
  return tr.pred;
}

std::size_t masked_channel_count(const TokenSequence& seq) {
  std::size_t n = 0;
  for (std::size_t t : seq.masked) n += seq.valid_channels(t);
  return n;
}

RowMatrix gather_rows(const RowMatrix& m, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

// Prediction block of sequence b (T x token_len) inside the stacked output.
auto prediction_of(const Mat& pred, std::size_t b, Eigen::Index t) {
  return pred.middleRows(static_cast<Eigen::Index>(b) * (t + 1) + 1, t);
}

// Full pass over sequences with equal visible counts. Returns per-sequence losses.
std::vector<double> batch_pass(const MAEModel& model, std::span<const SeqRef> seqs, std::span<double> grad,
                               double scale) {
  const auto& s = model.parameters();
  const auto& l = model.layers();
  Trace tr;
  const Mat& z = run_encoder(model, seqs, tr);
  const Mat& pred = run_decoder(model, z, seqs, tr);
  const auto t = static_cast<Eigen::Index>(model.token_count());

  std::vector<double> losses(seqs.size());
  Mat dpred = Mat::Zero(pred.rows(), pred.cols());
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const TokenSequence& seq = *seqs[b];
    const auto base = static_cast<Eigen::Index>(b) * (t + 1) + 1;
    const std::size_t count = masked_channel_count(seq);
    double sum = 0.0;
    for (std::size_t m : seq.masked) {
      const auto r = static_cast<Eigen::Index>(m);
      for (std::size_t c = 0; c < seq.valid_channels(m); ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        const double diff = pred(base + r, cc) - seq.tokens(r, cc);
        sum += diff * diff;
        dpred(base + r, cc) = 2.0 * diff * scale / static_cast<double>(count);
      }
    }
    losses[b] = count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
  if (grad.empty()) return losses;

  // Decoder.
  const Mat dw = l.head.backward(s, tr.w, dpred, grad);
  Mat dy = l.decoder_norm.backward(s, tr.decoder_ln, dw, grad);
  for (std::size_t i = l.decoder.size(); i-- > 0;) dy = l.decoder[i].backward(s, tr.decoder[i], dy, grad);
  const auto el = static_cast<Eigen::Index>(tr.enc_len);
  Mat dd0(z.rows(), dy.cols());
  auto gmask = nn::grad_of(grad, l.mask_token);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto base = static_cast<Eigen::Index>(b) * (t + 1);
    const auto zb = static_cast<Eigen::Index>(b) * el;
    dd0.row(zb) = dy.row(base);
    const auto& vis = seqs[b]->visible;
    for (std::size_t j = 0; j < vis.size(); ++j) {
      dd0.row(zb + 1 + static_cast<Eigen::Index>(j)) = dy.row(base + 1 + static_cast<Eigen::Index>(vis[j]));
    }
    for (std::size_t m : seqs[b]->masked) gmask.row(0) += dy.row(base + 1 + static_cast<Eigen::Index>(m));
  }
  const Mat dz = l.decoder_embed.backward(s, z, dd0, grad);

  // Encoder.
  Mat dx = l.encoder_norm.backward(s, tr.encoder_ln, dz, grad);
  for (std::size_t i = l.encoder.size(); i-- > 0;) dx = l.encoder[i].backward(s, tr.encoder[i], dx, grad);
  const auto nv = el - 1;
  Mat de(static_cast<Eigen::Index>(seqs.size()) * nv, dx.cols());
  auto gcls = nn::grad_of(grad, l.cls);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto zb = static_cast<Eigen::Index>(b) * el;
    gcls.row(0) += dx.row(zb);
    de.middleRows(static_cast<Eigen::Index>(b) * nv, nv) = dx.middleRows(zb + 1, nv);
  }
  l.embed.backward(s, tr.embed_in, de, grad);
  return losses;
}

// Splits `seqs` into runs of equal visible count, preserving order within each.
template <typename F>
void for_each_group(std::span<const TokenSequence> seqs, F&& f) {
  std::vector<std::size_t> counts;
  for (const auto& q : seqs) counts.push_back(q.visible.size());
  std::vector<std::size_t> distinct = counts;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (std::size_t nv : distinct) {
    std::vector<SeqRef> refs;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (counts[i] == nv) {
        refs.push_back(&seqs[i]);
        idx.push_back(i);
      }
    }
    f(std::span<const SeqRef>(refs), idx);
  }
}

}  // namespace

EncoderOutput encode(const MAEModel& model, const TokenSequence& seq) {
  check_sequence(model, seq);
  Trace tr;
  const SeqRef ref = &seq;
  const Mat& z = run_encoder(model, {&ref, 1}, tr);
  EncoderOutput out;
  out.cls = z.row(0).transpose();
  out.tokens = z.bottomRows(z.rows() - 1);
  out.positions = seq.visible;
  return out;
}

double masked_mse(const TokenSequence& target, const RowMatrix& prediction) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t : target.masked) {
    for (std::size_t c = 0; c < target.valid_channels(t); ++c) {
      const double diff = prediction(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) -
                          target.tokens(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
      sum += diff * diff;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

Reconstruction decode_and_loss(const MAEModel& model, const TokenSequence& seq, const EncoderOutput& encoded) {
  check_sequence(model, seq);
  if (encoded.tokens.rows() != static_cast<Eigen::Index>(encoded.positions.size()) ||
      encoded.cls.size() != static_cast<Eigen::Index>(model.config().embed_dim)) {
    throw ConfigError("encoder output does not match the model");
  }
  Mat z(encoded.tokens.rows() + 1, encoded.cls.size());
  z.row(0) = encoded.cls.transpose();
  z.bottomRows(encoded.tokens.rows()) = encoded.tokens;
  TokenSequence layout = seq;
  layout.visible = encoded.positions;
  Trace tr;
  tr.batch = 1;
  tr.enc_len = encoded.positions.size() + 1;
  const SeqRef ref = &layout;
  Reconstruction out;
  out.tokens = prediction_of(run_decoder(model, z, {&ref, 1}, tr), 0, static_cast<Eigen::Index>(model.token_count()));
  out.loss = masked_mse(seq, out.tokens);
  return out;
}

double loss_and_gradient(const MAEModel& model, const TokenSequence& seq, std::span<double> grad, double scale) {
  return batch_loss_and_gradient(model, {&seq, 1}, grad, scale);
}

double batch_loss_and_gradient(const MAEModel& model, std::span<const TokenSequence> seqs, std::span<double> grad,
                               double scale) {
  if (!grad.empty() && grad.size() != model.parameter_count()) {
    throw SizeError("gradient buffer does not match the model");
  }
  for (const auto& q : seqs) check_sequence(model, q);
  std::vector<double> losses(seqs.size());
  for_each_group(seqs, [&](std::span<const SeqRef> refs, const std::vector<std::size_t>& idx) {
    const auto l = batch_pass(model, refs, grad, scale);
    for (std::size_t i = 0; i < idx.size(); ++i) losses[idx[i]] = l[i];
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum;
}

Vector cls_embedding(const MAEModel& model, std::span<const double> spectrum) {
  return encode(model, tokenize(spectrum, model.config().token_len)).cls;
}

RowMatrix cls_embeddings(const MAEModel& model, const RowMatrix& spectra) {
  if (spectra.cols() != static_cast<Eigen::Index>(model.bands())) {
    throw SizeError("spectra have " + std::to_string(spectra.cols()) + " bands, model expects " +
                    std::to_string(model.bands()));
  }
  constexpr Eigen::Index kChunk = 256;
  RowMatrix out(spectra.rows(), static_cast<Eigen::Index>(model.config().embed_dim));
  for (Eigen::Index start = 0; start < spectra.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, spectra.rows() - start);
    std::vector<TokenSequence> seqs;
    for (Eigen::Index i = 0; i < n; ++i) seqs.push_back(tokenize(row_span(spectra, start + i), model.config().token_len));
    std::vector<SeqRef> refs;
    for (const auto& q : seqs) refs.push_back(&q);
    Trace tr;
    const Mat& z = run_encoder(model, refs, tr);
    for (Eigen::Index i = 0; i < n; ++i) out.row(start + i) = z.row(i * static_cast<Eigen::Index>(tr.enc_len));
  }
  return out;
}

double evaluate_loss(const MAEModel& model, const RowMatrix& spectra, std::uint64_t seed) {
  if (spectra.rows() == 0) return 0.0;
  constexpr Eigen::Index kChunk = 256;
  double sum = 0.0;
  for (Eigen::Index start = 0; start < spectra.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, spectra.rows() - start);
    std::vector<TokenSequence> seqs;
    for (Eigen::Index i = 0; i < n; ++i) {
      seqs.push_back(random_mask(tokenize(row_span(spectra, start + i), model.config().token_len),
                                 model.config().mask_ratio, mix_seed(seed, static_cast<std::uint64_t>(start + i))));
    }
    sum += batch_loss_and_gradient(model, seqs, {}, 1.0);
  }
  return sum / static_cast<double>(spectra.rows());
}

MAETrainResult train_mae(const RowMatrix& spectra, const MAEConfig& config) {
  if (spectra.rows() == 0) throw SizeError("MAE training needs at least one spectrum");
  if (!nn::all_finite({spectra.data(), static_cast<std::size_t>(spectra.size())})) {
    throw DomainError("training spectra contain non-finite values");
  }
  MAEModel model(config, static_cast<std::size_t>(spectra.cols()));
  const auto n = static_cast<std::size_t>(spectra.rows());

  std::mt19937_64 rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = 0;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> eval_idx(
      train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(std::min(config.eval_samples, train_idx.size())));
  const RowMatrix train_eval = gather_rows(spectra, eval_idx);
  const RowMatrix val = gather_rows(spectra, val_idx);
  const std::uint64_t eval_seed = mix_seed(config.seed, 2);

  LossCurve curve;
  auto record = [&](int epoch) {
    const double tl = evaluate_loss(model, train_eval, eval_seed);
    const double vl = val.rows() > 0 ? evaluate_loss(model, val, eval_seed + 1) : tl;
    if (!std::isfinite(tl) || !std::isfinite(vl)) {
      throw DivergenceError("MAE loss became non-finite in epoch " + std::to_string(epoch), epoch);
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
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      std::vector<TokenSequence> seqs;
      for (std::size_t i = start; i < end; ++i) {
        const auto row = static_cast<Eigen::Index>(train_idx[i]);
        seqs.push_back(random_mask(tokenize(row_span(spectra, row), config.token_len), config.mask_ratio, rng()));
      }
      const double batch_loss = batch_loss_and_gradient(model, seqs, grad, scale);
      if (!std::isfinite(batch_loss) || !nn::all_finite(grad)) {
        throw DivergenceError("MAE loss became non-finite in epoch " + std::to_string(e), e);
      }
      opt.step(values, grad);
      if (!nn::all_finite(values)) {
        throw DivergenceError("MAE parameters became non-finite in epoch " + std::to_string(e), e);
      }
    }
    record(e);
  }
  return {std::move(model), std::move(curve)};
}

GradientCheckResult gradient_check(const MAEModel& model, const RowMatrix& batch, double tolerance,
                                   std::uint64_t seed, std::size_t coordinates) {
  if (batch.rows() == 0) throw SizeError("gradient check needs a nonempty batch");
  MAEModel probe = model;
  std::vector<TokenSequence> seqs;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    seqs.push_back(random_mask(tokenize(row_span(batch, i), model.config().token_len), model.config().mask_ratio,
                               mix_seed(seed, static_cast<std::uint64_t>(i))));
  }
  const double scale = 1.0 / static_cast<double>(seqs.size());
  std::vector<double> grad(probe.parameter_count(), 0.0);
  for (const auto& s : seqs) loss_and_gradient(probe, s, grad, scale);
  auto loss = [&] {
    double sum = 0.0;
    for (const auto& s : seqs) sum += decode_and_loss(probe, s, encode(probe, s)).loss;
    return sum * scale;
  };

  std::vector<std::size_t> idx(probe.parameter_count());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > coordinates) {
    std::mt19937_64 rng(mix_seed(seed, 3));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(coordinates);
    std::sort(idx.begin(), idx.end());
  }

  constexpr double kStep = 1e-5;
  auto& values = probe.parameters().values();
  GradientCheckResult out;
  for (std::size_t i : idx) {
    const double saved = values[i];
    values[i] = saved + kStep;
    const double up = loss();
    values[i] = saved - kStep;
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    const double analytic = grad[i];
    const double err =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    if (err > out.max_relative_error || out.checked == 0) {
      out.max_relative_error = err;
      out.worst_index = i;
      out.analytic = analytic;
      out.numeric = numeric;
    }
    ++out.checked;
  }
  out.worst_name = probe.parameters().name_of(out.worst_index);
  if (out.max_relative_error > tolerance) {
    throw GradientCheckFailure("gradient check failed: relative error " + std::to_string(out.max_relative_error) +
                               " at coordinate " + std::to_string(out.worst_index) + " (" + out.worst_name +
                               "), analytic " + std::to_string(out.analytic) + ", numeric " +
                               std::to_string(out.numeric));
  }
  return out;
}

}  // namespace hyspec::mae
